#ifndef POOLBIAS_IO_HPP_
#define POOLBIAS_IO_HPP_

#include <string>
#include <vector>

#include "poolbias/core.hpp"

namespace poolbias::io {

// All files are UTF-8, one record per line, tab-separated fields. Floats are
// printed with 9 significant digits; re-serializing a parsed file reproduces
// it byte for byte.

/// "%.9g" formatting used by every on-disk float field.
std::string fmt_g9(double v);
/// "%.17g": lossless double round-trip, used by checkpoints.
std::string fmt_full(double v);

// corpus / queries: `id \t v1,v2,...,vF`
void write_corpus(const std::string& path, const std::vector<Document>& docs);
std::vector<Document> read_corpus(const std::string& path);
void write_queries(const std::string& path, const std::vector<Query>& queries);
std::vector<Query> read_queries(const std::string& path);

// qrels: `query_id \t 0 \t doc_id \t rel` with rel in {0,1}; absent pairs are 0.
void write_qrels(const std::string& path, const GroundTruth& truth);
void write_labels(const std::string& path, const LabeledDataset& dataset);
GroundTruth read_qrels(const std::string& path);
LabeledDataset read_labels(const std::string& path);

// run: `query_id \t Q0 \t doc_id \t rank \t score \t tag`
void write_run(const std::string& path, const Run& run, const std::string& tag);
Run read_run(const std::string& path);

// selection: `query_id \t doc_id \t s \t p_sel`
void write_selection(const std::string& path, const SelectionRecord& record);
SelectionRecord read_selection(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace poolbias::io

#endif  // POOLBIAS_IO_HPP_

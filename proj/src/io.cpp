#include "poolbias/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace poolbias::io {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& file, std::size_t line) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw SchemaError(file, line, "expected a number, got '" + s + "'");
  return v;
}

long parse_long(const std::string& s, const std::string& file, std::size_t line) {
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw SchemaError(file, line, "expected an integer, got '" + s + "'");
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

FeatureVector parse_features(const std::string& s, const std::string& file,
                             std::size_t line) {
  FeatureVector v;
  for (const auto& tok : split(s, ',')) v.push_back(parse_double(tok, file, line));
  return v;
}

std::string join_features(const FeatureVector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += fmt_g9(v[i]);
  }
  return out;
}

void require_fields(const std::vector<std::string>& fields, std::size_t n,
                    const std::string& file, std::size_t line) {
  if (fields.size() != n)
    throw SchemaError(file, line,
                      "expected " + std::to_string(n) + " tab-separated fields, got " +
                          std::to_string(fields.size()));
}

}  // namespace

std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

void write_corpus(const std::string& path, const std::vector<Document>& docs) {
  std::string buf;
  for (const auto& d : docs) buf += d.doc_id + "\t" + join_features(d.features) + "\n";
  write_file(path, buf);
}

std::vector<Document> read_corpus(const std::string& path) {
  std::vector<Document> docs;
  std::size_t expected_dim = 0;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    require_fields(fields, 2, path, lineno);
    Document d{fields[0], parse_features(fields[1], path, lineno)};
    if (expected_dim == 0)
      expected_dim = d.features.size();
    else if (d.features.size() != expected_dim)
      throw SchemaError(path, lineno, "feature dimension mismatch");
    docs.push_back(std::move(d));
  }
  return docs;
}

void write_queries(const std::string& path, const std::vector<Query>& queries) {
  std::string buf;
  for (const auto& q : queries) buf += q.query_id + "\t" + join_features(q.features) + "\n";
  write_file(path, buf);
}

std::vector<Query> read_queries(const std::string& path) {
  std::vector<Query> queries;
  std::size_t expected_dim = 0;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    require_fields(fields, 2, path, lineno);
    Query q{fields[0], parse_features(fields[1], path, lineno)};
    if (expected_dim == 0)
      expected_dim = q.features.size();
    else if (q.features.size() != expected_dim)
      throw SchemaError(path, lineno, "feature dimension mismatch");
    queries.push_back(std::move(q));
  }
  return queries;
}

void write_qrels(const std::string& path, const GroundTruth& truth) {
  std::string buf;
  for (const auto& [qid, docs] : truth.by_query())
    for (const auto& did : docs) buf += qid + "\t0\t" + did + "\t1\n";
  write_file(path, buf);
}

void write_labels(const std::string& path, const LabeledDataset& dataset) {
  std::string buf;
  for (const auto& [qid, docs] : dataset.by_query())
    for (const auto& did : docs) buf += qid + "\t0\t" + did + "\t1\n";
  write_file(path, buf);
}

namespace {
template <typename Add>
void read_qrels_lines(const std::string& path, Add&& add) {
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    require_fields(fields, 4, path, lineno);
    long rel = parse_long(fields[3], path, lineno);
    if (rel != 0 && rel != 1)
      throw SchemaError(path, lineno, "rel must be 0 or 1, got " + fields[3]);
    if (rel == 1) add(fields[0], fields[2]);
  }
}
}  // namespace

GroundTruth read_qrels(const std::string& path) {
  GroundTruth truth;
  read_qrels_lines(path, [&](const std::string& q, const std::string& d) { truth.add(q, d); });
  return truth;
}

LabeledDataset read_labels(const std::string& path) {
  LabeledDataset dataset;
  read_qrels_lines(path,
                   [&](const std::string& q, const std::string& d) { dataset.add_positive(q, d); });
  return dataset;
}

void write_run(const std::string& path, const Run& run, const std::string& tag) {
  std::string buf;
  for (const auto& list : run)
    for (const auto& e : list.entries)
      buf += list.query_id + "\tQ0\t" + e.doc_id + "\t" + std::to_string(e.rank) + "\t" +
             fmt_g9(e.score) + "\t" + tag + "\n";
  write_file(path, buf);
}

Run read_run(const std::string& path) {
  Run run;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    require_fields(fields, 6, path, lineno);
    if (fields[1] != "Q0") throw SchemaError(path, lineno, "second field must be Q0");
    RankedEntry entry{fields[2], parse_double(fields[4], path, lineno),
                      static_cast<int>(parse_long(fields[3], path, lineno))};
    if (run.empty() || run.back().query_id != fields[0]) {
      if (find_list(run, fields[0]) != nullptr)
        throw SchemaError(path, lineno, "query " + fields[0] + " appears in two blocks");
      run.push_back(RankedList{fields[0], {}});
    }
    run.back().entries.push_back(std::move(entry));
  }
  for (const auto& list : run) {
    try {
      list.check_invariants();
    } catch (const std::invalid_argument& e) {
      throw SchemaError(path, 0, e.what());
    }
  }
  return run;
}

void write_selection(const std::string& path, const SelectionRecord& record) {
  std::string buf;
  for (const auto& [qid, docs] : record.by_query())
    for (const auto& [did, e] : docs)
      buf += qid + "\t" + did + "\t" + (e.selected ? "1" : "0") + "\t" + fmt_g9(e.p_sel) + "\n";
  write_file(path, buf);
}

SelectionRecord read_selection(const std::string& path) {
  SelectionRecord record;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    require_fields(fields, 4, path, lineno);
    long s = parse_long(fields[2], path, lineno);
    if (s != 0 && s != 1) throw SchemaError(path, lineno, "s must be 0 or 1");
    record.set(fields[0], fields[1], s == 1, parse_double(fields[3], path, lineno));
  }
  return record;
}

}  // namespace poolbias::io

#ifndef POOLBIAS_CORE_HPP_
#define POOLBIAS_CORE_HPP_

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace poolbias {

// ---------------------------------------------------------------------------
// Error types. The CLI maps these onto its documented exit codes.
// ---------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed record in an input file; carries the 1-based line number.
struct SchemaError : std::runtime_error {
  SchemaError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        file(file),
        line(line) {}
  std::string file;
  std::size_t line;
};

struct ReferentialError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  TrainingError(int step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step(step) {}
  int step;
};

struct IncompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

using FeatureVector = std::vector<double>;

struct Document {
  std::string doc_id;
  FeatureVector features;
};

struct Query {
  std::string query_id;
  FeatureVector features;
};

/// Binary relevance r per (query, document); stored as per-query sets of
/// relevant doc ids. Absent pairs are irrelevant.
class GroundTruth {
 public:
  void add(const std::string& query_id, const std::string& doc_id) {
    relevant_[query_id].insert(doc_id);
  }

  bool is_relevant(const std::string& query_id, const std::string& doc_id) const {
    auto it = relevant_.find(query_id);
    return it != relevant_.end() && it->second.count(doc_id) > 0;
  }

  const std::set<std::string>& relevant(const std::string& query_id) const {
    static const std::set<std::string> kEmpty;
    auto it = relevant_.find(query_id);
    return it == relevant_.end() ? kEmpty : it->second;
  }

  bool has_query(const std::string& query_id) const {
    auto it = relevant_.find(query_id);
    return it != relevant_.end() && !it->second.empty();
  }

  const std::map<std::string, std::set<std::string>>& by_query() const { return relevant_; }

  std::size_t total_pairs() const {
    std::size_t n = 0;
    for (const auto& [q, docs] : relevant_) n += docs.size();
    return n;
  }

 private:
  std::map<std::string, std::set<std::string>> relevant_;
};

/// Pool membership s per (query, document), plus the selection probability
/// p_sel when pooling was stochastic. Diagnostic/oracle data only; trainers
/// never see it.
class SelectionRecord {
 public:
  struct Entry {
    bool selected = false;
    double p_sel = 0.0;
  };

  void set(const std::string& query_id, const std::string& doc_id, bool selected,
           double p_sel) {
    entries_[query_id][doc_id] = Entry{selected, p_sel};
  }

  bool selected(const std::string& query_id, const std::string& doc_id) const {
    const Entry* e = find(query_id, doc_id);
    return e != nullptr && e->selected;
  }

  const Entry* find(const std::string& query_id, const std::string& doc_id) const {
    auto qit = entries_.find(query_id);
    if (qit == entries_.end()) return nullptr;
    auto dit = qit->second.find(doc_id);
    return dit == qit->second.end() ? nullptr : &dit->second;
  }

  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

  const std::map<std::string, std::map<std::string, Entry>>& by_query() const {
    return entries_;
  }

 private:
  std::map<std::string, std::map<std::string, Entry>> entries_;
};

/// The observed, biased view of a world: per-query labeled positives.
/// Explicit negatives are structurally absent (D- is always empty); every
/// non-positive document is implicitly unlabeled.
class LabeledDataset {
 public:
  void add_positive(const std::string& query_id, const std::string& doc_id) {
    auto& v = positives_[query_id];
    auto it = std::lower_bound(v.begin(), v.end(), doc_id);
    if (it == v.end() || *it != doc_id) v.insert(it, doc_id);
  }

  bool is_positive(const std::string& query_id, const std::string& doc_id) const {
    auto it = positives_.find(query_id);
    if (it == positives_.end()) return false;
    return std::binary_search(it->second.begin(), it->second.end(), doc_id);
  }

  const std::vector<std::string>& positives(const std::string& query_id) const {
    static const std::vector<std::string> kEmpty;
    auto it = positives_.find(query_id);
    return it == positives_.end() ? kEmpty : it->second;
  }

  bool has_query(const std::string& query_id) const { return positives_.count(query_id) > 0; }

  const std::map<std::string, std::vector<std::string>>& by_query() const { return positives_; }

  std::size_t num_queries() const { return positives_.size(); }

  std::size_t total_positives() const {
    std::size_t n = 0;
    for (const auto& [q, v] : positives_) n += v.size();
    return n;
  }

 private:
  std::map<std::string, std::vector<std::string>> positives_;
};

struct RankedEntry {
  std::string doc_id;
  double score = 0.0;
  int rank = 0;  // 1-based
};

/// One retriever's scored candidate list for a single query. Ranks are
/// contiguous from 1, scores non-increasing, ties broken by ascending doc id.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  /// Builds a valid list from arbitrary (doc_id, score) pairs, keeping the
  /// top k (all when k == 0).
  static RankedList from_scores(const std::string& query_id,
                                std::vector<std::pair<std::string, double>> scored,
                                std::size_t k = 0);

  /// Throws SchemaError-free std::invalid_argument on ordering violations;
  /// io::read_run wraps this with file/line context.
  void check_invariants() const;

  bool contains(const std::string& doc_id) const {
    for (const auto& e : entries)
      if (e.doc_id == doc_id) return true;
    return false;
  }
};

/// A multi-query run, kept sorted by query id for deterministic output.
using Run = std::vector<RankedList>;

const RankedList* find_list(const Run& run, const std::string& query_id);

struct TrainingTriple {
  std::string query_id;
  std::string pos_doc_id;
  std::string neg_doc_id;
};

// ---------------------------------------------------------------------------
// Dataset validation
// ---------------------------------------------------------------------------

struct ValidationReport {
  struct Violation {
    std::string query_id;
    std::string doc_id;  // empty for query-level violations
    std::string what;
  };
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

}  // namespace poolbias

#endif  // POOLBIAS_CORE_HPP_

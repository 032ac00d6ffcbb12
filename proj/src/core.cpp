#include "poolbias/core.hpp"

#include <algorithm>
#include <cmath>

namespace poolbias {

RankedList RankedList::from_scores(const std::string& query_id,
                                   std::vector<std::pair<std::string, double>> scored,
                                   std::size_t k) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (k > 0 && scored.size() > k) scored.resize(k);
  RankedList list;
  list.query_id = query_id;
  list.entries.reserve(scored.size());
  int rank = 1;
  for (auto& [id, score] : scored) {
    list.entries.push_back(RankedEntry{std::move(id), score, rank++});
  }
  return list;
}

void RankedList::check_invariants() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.rank != static_cast<int>(i) + 1)
      throw std::invalid_argument("rank not contiguous at position " + std::to_string(i + 1) +
                                  " for query " + query_id);
    if (!std::isfinite(e.score))
      throw std::invalid_argument("non-finite score for query " + query_id);
    if (i > 0) {
      const auto& prev = entries[i - 1];
      if (e.score > prev.score)
        throw std::invalid_argument("scores increase at rank " + std::to_string(e.rank) +
                                    " for query " + query_id);
      if (e.score == prev.score && e.doc_id < prev.doc_id)
        throw std::invalid_argument("tie order violates ascending doc_id at rank " +
                                    std::to_string(e.rank) + " for query " + query_id);
    }
  }
}

const RankedList* find_list(const Run& run, const std::string& query_id) {
  for (const auto& list : run)
    if (list.query_id == query_id) return &list;
  return nullptr;
}

}  // namespace poolbias

#ifndef POOLBIAS_RETRIEVER_HPP_
#define POOLBIAS_RETRIEVER_HPP_

#include <cstdint>
#include <optional>

#include "poolbias/core.hpp"
#include "poolbias/scorer.hpp"
#include "poolbias/world.hpp"

namespace poolbias {

enum class RetrieverKind { oracle_noisy, feature_subset, trained };

/// A fixed (if imperfect) ranking function. Noise is keyed per
/// (seed, query, doc), so a noisy retriever scores each pair the same way
/// every time it is asked. Immutable after construction.
class Retriever {
 public:
  /// True latent similarity plus N(0, sigma^2) keyed noise. Holds a pointer
  /// to the world for its hidden latents; the world must outlive it.
  static Retriever oracle_noisy(const World& world, double sigma, std::uint64_t seed);

  /// Inner product over the first `dims` observed feature dimensions; the
  /// partial view a lexical system would have.
  static Retriever feature_subset(int dims);

  static Retriever trained(DifferentiableScorer scorer);

  double score(const Query& q, const Document& d) const;

  RankedList retrieve(const Query& q, const std::vector<Document>& corpus,
                      std::size_t k) const;

  Run retrieve_all(const std::vector<Query>& queries, const std::vector<Document>& corpus,
                   std::size_t k) const;

  RetrieverKind kind() const { return kind_; }

 private:
  Retriever() = default;
  RetrieverKind kind_ = RetrieverKind::feature_subset;
  double sigma_ = 0.0;
  int subset_dims_ = 0;
  std::uint64_t seed_ = 0;
  const World* world_ = nullptr;
  std::optional<DifferentiableScorer> scorer_;
};

}  // namespace poolbias

#endif  // POOLBIAS_RETRIEVER_HPP_

#ifndef POOLBIAS_WORLD_HPP_
#define POOLBIAS_WORLD_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "poolbias/core.hpp"

namespace poolbias {

class Retriever;

enum class RelevanceRule { top_m, threshold };
enum class PoolingMode { deterministic, stochastic };

struct WorldConfig {
  int n_docs = 2000;
  int n_train_queries = 200;
  int n_dev_queries = 25;
  int n_test_queries = 50;
  int feature_dim = 16;   // F
  int latent_dim = 8;     // T
  RelevanceRule rule = RelevanceRule::top_m;
  int top_m = 20;
  double theta_rel = 6.0;   // similarity cutoff when rule == threshold
  int min_rel = 1;
  double noise_feat = 0.25;  // sigma of observation noise on latent dims
  std::uint64_t seed = 7;

  void validate() const;  // throws ConfigError
};

/// Full-information state: corpus, queries, true relevance, and the hidden
/// latent coordinates that define it. Immutable after generation except for
/// the selection record, which simulate_pooling fills in.
struct World {
  WorldConfig config;
  std::vector<Document> corpus;  // ascending doc_id
  std::vector<Query> train_queries;
  std::vector<Query> dev_queries;
  std::vector<Query> test_queries;
  GroundTruth truth;
  SelectionRecord selection;

  // hidden state (never serialized; regenerate_world reproduces it)
  std::vector<FeatureVector> doc_latents;  // parallel to corpus
  std::map<std::string, FeatureVector> query_latents;
  std::map<std::string, std::size_t> doc_index;

  const Document& doc(const std::string& doc_id) const;
  const Query* find_query(const std::string& query_id) const;
  double latent_similarity(const std::string& query_id, const std::string& doc_id) const;
};

World generate_world(const WorldConfig& config);

struct PoolingResult {
  LabeledDataset dataset;
  std::vector<std::string> dropped_queries;  // no relevant doc in the pool
  std::size_t total_labels = 0;
};

/// Runs the pooling/labeling process over the world's training queries and
/// fills world.selection. label_budget caps labels per query; pass
/// n_docs (or more) for exhaustive labeling.
PoolingResult simulate_pooling(World& world, const Retriever& pooler, int pool_depth,
                               long label_budget, PoolingMode mode, std::uint64_t seed);

/// Fraction of the top_n candidates, excluding the query's labeled
/// positives, that are truly relevant. Throws DimensionError when the
/// eligible slice is empty.
double false_negative_rate(const World& world, const LabeledDataset& dataset,
                           const RankedList& candidates, int top_n);

/// Mean of false_negative_rate over the dataset's queries present in `run`.
double mean_false_negative_rate(const World& world, const LabeledDataset& dataset,
                                const Run& run, int top_n);

/// Checks every labeled positive against the generating world: r=1, s=1,
/// and nonempty positives per query. Unknown ids throw ReferentialError.
ValidationReport validate_dataset(const World& world, const LabeledDataset& dataset);

}  // namespace poolbias

#endif  // POOLBIAS_WORLD_HPP_

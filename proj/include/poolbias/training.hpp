#ifndef POOLBIAS_TRAINING_HPP_
#define POOLBIAS_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "poolbias/core.hpp"
#include "poolbias/rng.hpp"
#include "poolbias/scorer.hpp"

namespace poolbias {

enum class Regime { naive, cet, denoise, mismatch };

std::string regime_name(Regime regime);
Regime parse_regime(const std::string& name);  // throws ConfigError

struct TrainConfig {
  Regime regime = Regime::naive;
  double tau = 1.0;       // bias weight temperature
  int steps = 600;        // optimizer steps (fixed budget)
  int batch_size = 32;
  int k_neg = 1;          // negatives per positive per epoch
  int top_n = 50;         // negative-sampling depth into the candidate run
  std::uint64_t seed = 1;
  ScorerArch arch = ScorerArch::linear;
  int hidden = 16;
  Optimizer::Kind optimizer = Optimizer::Kind::adam;
  double lr = 1e-2;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double clamp = 20.0;    // bound on the weight exponent
  double eta = 0.5;       // denoising threshold
  int eval_every = 0;     // dev evaluations every N steps; 0 = off
  int patience = 0;       // stop after N non-improving dev evals; 0 = off
  bool freeze_selection = false;  // diagnostic: keep S at its initial params

  void validate() const;  // throws ConfigError
};

// ---------------------------------------------------------------------------
// Losses and bias weights
// ---------------------------------------------------------------------------

double stable_sigmoid(double x);

/// -log(e^si / (e^si + e^sj)), computed as softplus(-(si - sj)). Finite for
/// margins up to +-1e3 and beyond.
double pairwise_ce_loss(double score_i, double score_j);

/// exp(clamp((sj - si) / tau, -c, +c)). The full-corpus softmax normalizer
/// cancels in the ratio and is never materialized.
double bias_weight(double score_i, double score_j, double tau, double clamp);

/// Eq-role wrappers: w_r from selection-model scores, w_s from
/// relevance-model scores. Same ratio form.
inline double bias_weight_wr(double s_i, double s_j, double tau, double clamp) {
  return bias_weight(s_i, s_j, tau, clamp);
}
inline double bias_weight_ws(double r_i, double r_j, double tau, double clamp) {
  return bias_weight(r_i, r_j, tau, clamp);
}

/// w * pairwise_ce_loss. The weight is a constant under differentiation: no
/// gradient flows into the model that produced it.
double weighted_pairwise_loss(double score_i, double score_j, double w);

// ---------------------------------------------------------------------------
// Triple sampling
// ---------------------------------------------------------------------------

/// Per-query eligible negative pools: the top_n candidates minus the query's
/// labeled positives, in candidate rank order.
std::map<std::string, std::vector<std::string>> build_eligible(
    const LabeledDataset& dataset,
    const std::map<std::string, std::vector<std::string>>& candidates, int top_n);

/// Endless epoch stream: each epoch shuffles the (query, positive) instances
/// and pairs each with k_neg negatives drawn uniformly without replacement
/// from the query's eligible pool. Queries with an empty pool are skipped
/// once and counted.
class TripleSampler {
 public:
  TripleSampler(const LabeledDataset& dataset,
                std::map<std::string, std::vector<std::string>> eligible, int k_neg,
                std::uint64_t seed);

  TrainingTriple next();

  std::size_t skipped_queries() const { return skipped_queries_; }
  std::size_t active_queries() const { return active_queries_; }
  bool empty() const { return instances_.empty(); }

 private:
  void refill();

  std::map<std::string, std::vector<std::string>> eligible_;
  std::vector<std::pair<std::string, std::string>> instances_;  // (query, positive)
  std::vector<TrainingTriple> buffer_;
  std::size_t buffer_pos_ = 0;
  int k_neg_;
  rng::Engine engine_;
  std::size_t skipped_queries_ = 0;
  std::size_t active_queries_ = 0;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Everything a training run reads: features, labels, and the raw top-n
/// candidate lists (labeled positives still in-list; exclusion happens in
/// build_eligible).
struct TrainData {
  std::map<std::string, const Document*> docs;
  std::map<std::string, const Query*> queries;
  const LabeledDataset* dataset = nullptr;
  std::map<std::string, std::vector<std::string>> candidates;

  static TrainData build(const std::vector<Document>& corpus,
                         const std::vector<Query>& queries, const LabeledDataset& dataset,
                         const Run& run, int top_n);

  const Document& doc(const std::string& id) const;
  const Query& query(const std::string& id) const;
  std::size_t pair_dim() const;
};

struct TrainLogRow {
  int step = 0;
  double loss_R = 0.0;
  std::optional<double> loss_S;
  std::optional<double> mean_w_r;
  std::optional<double> mean_w_s;
  std::optional<double> dev_mrr;
};

struct TrainResult {
  DifferentiableScorer relevance;
  std::optional<DifferentiableScorer> selection;
  std::vector<TrainLogRow> log;
  std::size_t skipped_queries = 0;   // no eligible negatives
  std::size_t fallback_queries = 0;  // denoising emptied the pool
  int steps_run = 0;
};

using DevEvalFn = std::function<double(const DifferentiableScorer&)>;

/// Seeded initial models; S gets an independent stream derived from the same
/// config seed.
DifferentiableScorer make_relevance_scorer(const TrainConfig& config, std::size_t input_dim);
DifferentiableScorer make_selection_scorer(const TrainConfig& config, std::size_t input_dim);

TrainResult naive_train(const TrainData& data, DifferentiableScorer relevance,
                        const TrainConfig& config, const DevEvalFn* dev_eval = nullptr);

TrainResult coupled_train(const TrainData& data, DifferentiableScorer relevance,
                          DifferentiableScorer selection, const TrainConfig& config,
                          const DevEvalFn* dev_eval = nullptr);

TrainResult denoise_train(const TrainData& data, const TrainConfig& config,
                          const DevEvalFn* dev_eval = nullptr);

/// Naive training over the weak retriever's candidates; the evaluation
/// harness pairs the result with the strong retriever's lists.
TrainResult mismatch_train(const TrainData& weak_data, DifferentiableScorer relevance,
                           const TrainConfig& config, const DevEvalFn* dev_eval = nullptr);

/// Training log serialization: CSV with columns
/// step,loss_R,loss_S,mean_w_r,mean_w_s,dev_mrr (blank where not applicable).
std::string log_to_csv(const std::vector<TrainLogRow>& log);

}  // namespace poolbias

#endif  // POOLBIAS_TRAINING_HPP_

#ifndef POOLBIAS_EVAL_HPP_
#define POOLBIAS_EVAL_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poolbias/core.hpp"
#include "poolbias/scorer.hpp"
#include "poolbias/world.hpp"

namespace poolbias {

struct EvalResult {
  std::string metric;
  int k = 0;
  std::vector<std::pair<std::string, double>> per_query;  // query order of the run
  double macro = 0.0;  // arithmetic mean of per_query values
  std::size_t skipped = 0;  // queries with no relevant docs in the truth
};

/// Reorders the top-k slice of a candidate list by the scorer; ties broken
/// by ascending doc id. Output is a permutation of the input slice.
RankedList rerank(const DifferentiableScorer& scorer, const Query& query,
                  const std::map<std::string, const Document*>& docs,
                  const RankedList& candidates, int k);

Run rerank_run(const DifferentiableScorer& scorer,
               const std::map<std::string, const Query*>& queries,
               const std::map<std::string, const Document*>& docs, const Run& candidates,
               int k);

EvalResult mrr_at_k(const Run& run, const GroundTruth& truth, int k);
EvalResult ndcg_at_k(const Run& run, const GroundTruth& truth, int k);
EvalResult recall_at_k(const Run& run, const GroundTruth& truth, int k);

/// `metric,k,query_id,value` rows plus a macro row per result.
std::string metrics_to_csv(const std::vector<EvalResult>& results);
/// Parses macro rows back out of a metrics CSV: (metric, k) -> macro value.
std::map<std::pair<std::string, int>, double> read_metric_macros(const std::string& path);

/// Spearman rank correlation with average ranks for ties; nullopt when either
/// side is constant.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Probing: ground truth vs estimated w_r (selection-model view of candidates)
// ---------------------------------------------------------------------------

struct ProbeRow {
  std::string doc_id;
  double w_r = 0.0;
  int r_truth = 0;
  int rank = 0;
};

struct ProbeResult {
  std::vector<ProbeRow> rows;
  std::optional<double> rho;  // nullopt when correlation is undefined
};

/// For each top_n candidate d_j (anchor excluded), w_r(q, anchor, d_j) from
/// the selection model paired with d_j's true relevance.
ProbeResult wr_relevance_probe(const DifferentiableScorer& selection, const World& world,
                               const RankedList& candidates,
                               const std::string& anchor_pos_doc, int top_n, double tau,
                               double clamp = 20.0);

std::string probe_to_csv(const ProbeResult& probe);

/// Mean of defined per-query probe correlations over the dataset's queries,
/// anchored at each query's first labeled positive.
std::optional<double> mean_probe_rho(const DifferentiableScorer& selection,
                                     const World& world, const LabeledDataset& dataset,
                                     const Run& candidates, int top_n, double tau,
                                     double clamp = 20.0);

// ---------------------------------------------------------------------------
// IPW unbiasedness diagnostic
// ---------------------------------------------------------------------------

struct IpwCheckResult {
  double full_risk = 0.0;      // exact, exhaustive over true (rel, irrel) pairs
  double ipw_risk = 0.0;       // Monte Carlo mean of the IPW estimator
  double ipw_gap = 0.0;        // |ipw_risk - full_risk|
  double mc_stderr = 0.0;      // std of per-draw IPW estimates / sqrt(n)
  double naive_risk = 0.0;     // Monte Carlo mean of the unweighted estimator
  double naive_gap = 0.0;
  std::size_t positivity_violations = 0;  // zero-propensity pairs excluded
  int n_resamples = 0;
};

/// Validates the IPW identity itself with oracle propensities, separate from
/// any learning. Requires world.selection filled by stochastic pooling (it
/// supplies p_sel for every pair). Each resample draws pool membership
/// independently from p_sel and labels every selected relevant document;
/// the IPW estimator weights each observed (labeled d_i, selected-unlabeled
/// d_j) pair by the inverse of its observation propensity p_i * p_j. Its
/// expectation equals the exhaustive full-information risk; the unweighted
/// estimator over (labeled, unlabeled) pairs does not.
IpwCheckResult ipw_unbiasedness_check(const World& world, const DifferentiableScorer& fixed,
                                      int n_resamples, std::uint64_t seed);

/// Two-sided sign test on paired differences; nullopt when every pair ties.
std::optional<double> sign_test_pvalue(std::span<const double> a, std::span<const double> b);

}  // namespace poolbias

#endif  // POOLBIAS_EVAL_HPP_

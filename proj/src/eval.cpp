#include "poolbias/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "poolbias/io.hpp"
#include "poolbias/rng.hpp"
#include "poolbias/training.hpp"

namespace poolbias {

RankedList rerank(const DifferentiableScorer& scorer, const Query& query,
                  const std::map<std::string, const Document*>& docs,
                  const RankedList& candidates, int k) {
  int depth = std::min<int>(k, static_cast<int>(candidates.entries.size()));
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(depth);
  for (int i = 0; i < depth; ++i) {
    const auto& did = candidates.entries[i].doc_id;
    auto it = docs.find(did);
    if (it == docs.end()) throw ReferentialError("unknown doc_id: " + did);
    FeatureVector x = pair_features(query, *it->second);
    scored.push_back({did, scorer.forward(x)});
  }
  return RankedList::from_scores(candidates.query_id, std::move(scored));
}

Run rerank_run(const DifferentiableScorer& scorer,
               const std::map<std::string, const Query*>& queries,
               const std::map<std::string, const Document*>& docs, const Run& candidates,
               int k) {
  Run out;
  out.reserve(candidates.size());
  for (const auto& list : candidates) {
    auto it = queries.find(list.query_id);
    if (it == queries.end()) throw ReferentialError("unknown query_id: " + list.query_id);
    out.push_back(rerank(scorer, *it->second, docs, list, k));
  }
  return out;
}

namespace {

template <typename PerQuery>
EvalResult run_metric(const std::string& name, const Run& run, const GroundTruth& truth,
                      int k, PerQuery&& per_query) {
  if (k < 1) throw ConfigError("metric cutoff must be >= 1");
  EvalResult result;
  result.metric = name;
  result.k = k;
  double sum = 0.0;
  for (const auto& list : run) {
    if (!truth.has_query(list.query_id)) {
      ++result.skipped;
      continue;
    }
    double v = per_query(list, truth.relevant(list.query_id));
    result.per_query.push_back({list.query_id, v});
    sum += v;
  }
  result.macro = result.per_query.empty()
                     ? 0.0
                     : sum / static_cast<double>(result.per_query.size());
  return result;
}

}  // namespace

EvalResult mrr_at_k(const Run& run, const GroundTruth& truth, int k) {
  return run_metric("mrr", run, truth, k,
                    [k](const RankedList& list, const std::set<std::string>& rel) {
                      int depth = std::min<int>(k, static_cast<int>(list.entries.size()));
                      for (int i = 0; i < depth; ++i)
                        if (rel.count(list.entries[i].doc_id) > 0)
                          return 1.0 / static_cast<double>(i + 1);
                      return 0.0;
                    });
}

EvalResult ndcg_at_k(const Run& run, const GroundTruth& truth, int k) {
  return run_metric("ndcg", run, truth, k,
                    [k](const RankedList& list, const std::set<std::string>& rel) {
                      int depth = std::min<int>(k, static_cast<int>(list.entries.size()));
                      double dcg = 0.0;
                      for (int i = 0; i < depth; ++i)
                        if (rel.count(list.entries[i].doc_id) > 0)
                          dcg += 1.0 / std::log2(static_cast<double>(i + 2));
                      int ideal = std::min<int>(k, static_cast<int>(rel.size()));
                      double idcg = 0.0;
                      for (int i = 0; i < ideal; ++i)
                        idcg += 1.0 / std::log2(static_cast<double>(i + 2));
                      return idcg > 0.0 ? dcg / idcg : 0.0;
                    });
}

EvalResult recall_at_k(const Run& run, const GroundTruth& truth, int k) {
  return run_metric("recall", run, truth, k,
                    [k](const RankedList& list, const std::set<std::string>& rel) {
                      int depth = std::min<int>(k, static_cast<int>(list.entries.size()));
                      std::size_t hits = 0;
                      for (int i = 0; i < depth; ++i)
                        if (rel.count(list.entries[i].doc_id) > 0) ++hits;
                      return static_cast<double>(hits) / static_cast<double>(rel.size());
                    });
}

std::string metrics_to_csv(const std::vector<EvalResult>& results) {
  std::string csv = "metric,k,query_id,value\n";
  for (const auto& r : results) {
    for (const auto& [qid, v] : r.per_query)
      csv += r.metric + "," + std::to_string(r.k) + "," + qid + "," + io::fmt_g9(v) + "\n";
    csv += r.metric + "," + std::to_string(r.k) + ",macro," + io::fmt_g9(r.macro) + "\n";
  }
  return csv;
}

std::map<std::pair<std::string, int>, double> read_metric_macros(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::map<std::pair<std::string, int>, double> macros;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header
    std::istringstream ls(line);
    std::string metric, k_str, qid, value;
    if (!std::getline(ls, metric, ',') || !std::getline(ls, k_str, ',') ||
        !std::getline(ls, qid, ',') || !std::getline(ls, value))
      throw SchemaError(path, lineno, "malformed metrics row");
    if (qid == "macro") macros[{metric, std::stoi(k_str)}] = std::stod(value);
  }
  return macros;
}

// ---------------------------------------------------------------------------
// Rank statistics
// ---------------------------------------------------------------------------

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("spearman inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = rx[i] - mx, dy = ry[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;  // constant side: undefined
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Probing
// ---------------------------------------------------------------------------

ProbeResult wr_relevance_probe(const DifferentiableScorer& selection, const World& world,
                               const RankedList& candidates,
                               const std::string& anchor_pos_doc, int top_n, double tau,
                               double clamp) {
  const Query* q = world.find_query(candidates.query_id);
  if (q == nullptr) throw ReferentialError("unknown query_id: " + candidates.query_id);
  FeatureVector x_anchor = pair_features(*q, world.doc(anchor_pos_doc));
  double s_anchor = selection.forward(x_anchor);

  ProbeResult probe;
  int depth = std::min<int>(top_n, static_cast<int>(candidates.entries.size()));
  std::vector<double> ws, rs;
  for (int i = 0; i < depth; ++i) {
    const auto& e = candidates.entries[i];
    if (e.doc_id == anchor_pos_doc) continue;
    double s_j = selection.forward(pair_features(*q, world.doc(e.doc_id)));
    double w = bias_weight_wr(s_anchor, s_j, tau, clamp);
    int r = world.truth.is_relevant(candidates.query_id, e.doc_id) ? 1 : 0;
    probe.rows.push_back({e.doc_id, w, r, e.rank});
    ws.push_back(w);
    rs.push_back(static_cast<double>(r));
  }
  probe.rho = spearman(ws, rs);
  return probe;
}

std::string probe_to_csv(const ProbeResult& probe) {
  std::string csv = "doc_id,w_r,r_truth,rank\n";
  for (const auto& row : probe.rows)
    csv += row.doc_id + "," + io::fmt_g9(row.w_r) + "," + std::to_string(row.r_truth) + "," +
           std::to_string(row.rank) + "\n";
  return csv;
}

std::optional<double> mean_probe_rho(const DifferentiableScorer& selection, const World& world,
                                     const LabeledDataset& dataset, const Run& candidates,
                                     int top_n, double tau, double clamp) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [qid, positives] : dataset.by_query()) {
    if (positives.empty()) continue;
    const RankedList* list = find_list(candidates, qid);
    if (list == nullptr) continue;
    ProbeResult probe =
        wr_relevance_probe(selection, world, *list, positives.front(), top_n, tau, clamp);
    if (probe.rho.has_value()) {
      sum += *probe.rho;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// IPW unbiasedness diagnostic
// ---------------------------------------------------------------------------

IpwCheckResult ipw_unbiasedness_check(const World& world, const DifferentiableScorer& fixed,
                                      int n_resamples, std::uint64_t seed) {
  if (n_resamples < 1) throw ConfigError("n_resamples must be >= 1");
  if (world.selection.empty())
    throw ConfigError("ipw check needs a selection record from stochastic pooling");

  struct QueryTable {
    std::vector<double> p;            // propensity per doc
    std::vector<char> rel;            // true relevance per doc
    std::vector<std::vector<double>> loss;  // loss[i][j] for relevant i, any j
    std::vector<std::size_t> rel_idx;
  };

  IpwCheckResult result;
  result.n_resamples = n_resamples;
  const std::size_t n_docs = world.corpus.size();
  std::vector<QueryTable> tables;
  tables.reserve(world.train_queries.size());

  for (const auto& q : world.train_queries) {
    QueryTable t;
    t.p.resize(n_docs);
    t.rel.resize(n_docs);
    std::vector<double> score(n_docs);
    for (std::size_t d = 0; d < n_docs; ++d) {
      const auto& did = world.corpus[d].doc_id;
      const auto* entry = world.selection.find(q.query_id, did);
      if (entry == nullptr)
        throw ConfigError("selection record has no p_sel for (" + q.query_id + ", " + did +
                          ")");
      t.p[d] = entry->p_sel;
      if (t.p[d] <= 0.0) ++result.positivity_violations;  // excluded from support below
      t.rel[d] = world.truth.is_relevant(q.query_id, did) ? 1 : 0;
      score[d] = fixed.forward(pair_features(q, world.corpus[d]));
      if (t.rel[d]) t.rel_idx.push_back(d);
    }
    t.loss.resize(n_docs);
    for (std::size_t i : t.rel_idx) {
      t.loss[i].resize(n_docs);
      for (std::size_t j = 0; j < n_docs; ++j)
        t.loss[i][j] = i == j ? 0.0 : pairwise_ce_loss(score[i], score[j]);
    }
    tables.push_back(std::move(t));
  }

  const double inv_q = 1.0 / static_cast<double>(tables.size());

  // exact full-information risk: every (relevant, irrelevant) pair
  for (const auto& t : tables) {
    double sum = 0.0;
    for (std::size_t i : t.rel_idx)
      for (std::size_t j = 0; j < n_docs; ++j)
        if (!t.rel[j]) sum += t.loss[i][j];
    result.full_risk += sum * inv_q;
  }

  // Monte Carlo over pooling draws. Labels follow the noise-free rule
  // l = r AND s. The IPW estimator sums over observed (labeled i,
  // selected-unlabeled j) pairs, each weighted by 1/(p_i * p_j), the inverse
  // of the probability that this pair is observed; the naive estimator sums
  // unweighted over (labeled i, unlabeled j) pairs, which is what biased
  // training actually minimizes.
  rng::Engine engine(rng::mix(seed, rng::hash_str("ipw-check")));
  std::vector<char> sel(n_docs);
  double sum_ipw = 0.0, sum_sq_ipw = 0.0, sum_naive = 0.0;
  for (int k = 0; k < n_resamples; ++k) {
    double draw_ipw = 0.0, draw_naive = 0.0;
    for (const auto& t : tables) {
      for (std::size_t d = 0; d < n_docs; ++d)
        sel[d] = t.p[d] > 0.0 && engine.uniform01() < t.p[d] ? 1 : 0;
      double q_ipw = 0.0, q_naive = 0.0;
      for (std::size_t i : t.rel_idx) {
        if (!sel[i]) continue;  // unlabeled positive: invisible to both
        for (std::size_t j = 0; j < n_docs; ++j) {
          if (j == i) continue;
          bool labeled_j = t.rel[j] && sel[j];
          if (!labeled_j) q_naive += t.loss[i][j];
          if (sel[j] && !t.rel[j]) q_ipw += t.loss[i][j] / (t.p[i] * t.p[j]);
        }
      }
      draw_ipw += q_ipw * inv_q;
      draw_naive += q_naive * inv_q;
    }
    sum_ipw += draw_ipw;
    sum_sq_ipw += draw_ipw * draw_ipw;
    sum_naive += draw_naive;
  }

  const double n = static_cast<double>(n_resamples);
  result.ipw_risk = sum_ipw / n;
  result.naive_risk = sum_naive / n;
  double var = std::max(0.0, sum_sq_ipw / n - result.ipw_risk * result.ipw_risk);
  result.mc_stderr = std::sqrt(var / n);
  result.ipw_gap = std::abs(result.ipw_risk - result.full_risk);
  result.naive_gap = std::abs(result.naive_risk - result.full_risk);
  return result;
}

std::optional<double> sign_test_pvalue(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("sign test inputs differ in length");
  int wins = 0, losses = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++wins;
    else if (a[i] < b[i]) ++losses;
  }
  int n = wins + losses;
  if (n == 0) return std::nullopt;  // every pair tied
  int k = std::max(wins, losses);
  // two-sided binomial tail at p = 1/2
  double tail = 0.0;
  for (int i = k; i <= n; ++i) {
    double logc = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
    tail += std::exp(logc - n * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

}  // namespace poolbias

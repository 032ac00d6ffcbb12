#include "poolbias/training.hpp"

#include <algorithm>
#include <cmath>

#include "poolbias/io.hpp"

namespace poolbias {

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::naive: return "naive";
    case Regime::cet: return "cet";
    case Regime::denoise: return "denoise";
    case Regime::mismatch: return "mismatch";
  }
  return "?";
}

Regime parse_regime(const std::string& name) {
  if (name == "naive") return Regime::naive;
  if (name == "cet") return Regime::cet;
  if (name == "denoise") return Regime::denoise;
  if (name == "mismatch") return Regime::mismatch;
  throw ConfigError("unknown regime '" + name + "'");
}

void TrainConfig::validate() const {
  if (tau <= 0.0) throw ConfigError("train.tau must be > 0");
  if (steps < 0) throw ConfigError("train.steps must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (k_neg < 1) throw ConfigError("train.k_neg must be >= 1");
  if (top_n < 1) throw ConfigError("train.top_n must be >= 1");
  if (lr <= 0.0) throw ConfigError("train.lr must be > 0");
  if (clamp <= 0.0) throw ConfigError("train.clamp must be > 0");
  if (regime == Regime::denoise && (eta <= 0.0 || eta >= 1.0 + 1e-12))
    throw ConfigError("train.eta must be in (0, 1]");
  if (arch == ScorerArch::mlp && hidden < 1) throw ConfigError("train.hidden must be >= 1");
}

// ---------------------------------------------------------------------------
// Losses and weights
// ---------------------------------------------------------------------------

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double pairwise_ce_loss(double score_i, double score_j) {
  double margin = score_i - score_j;
  // softplus(-margin) without overflow at large |margin|
  return std::max(-margin, 0.0) + std::log1p(std::exp(-std::abs(margin)));
}

double bias_weight(double score_i, double score_j, double tau, double clamp) {
  if (tau <= 0.0) throw ConfigError("tau must be > 0");
  double e = (score_j - score_i) / tau;
  return std::exp(std::clamp(e, -clamp, clamp));
}

double weighted_pairwise_loss(double score_i, double score_j, double w) {
  if (!(w > 0.0)) throw ConfigError("bias weight must be > 0");
  return w * pairwise_ce_loss(score_i, score_j);
}

// ---------------------------------------------------------------------------
// Triple sampling
// ---------------------------------------------------------------------------

std::map<std::string, std::vector<std::string>> build_eligible(
    const LabeledDataset& dataset,
    const std::map<std::string, std::vector<std::string>>& candidates, int top_n) {
  std::map<std::string, std::vector<std::string>> eligible;
  for (const auto& [qid, positives] : dataset.by_query()) {
    auto it = candidates.find(qid);
    if (it == candidates.end()) continue;
    std::vector<std::string> pool;
    int depth = std::min<int>(top_n, static_cast<int>(it->second.size()));
    for (int i = 0; i < depth; ++i) {
      const auto& did = it->second[i];
      if (!dataset.is_positive(qid, did)) pool.push_back(did);
    }
    eligible[qid] = std::move(pool);
  }
  return eligible;
}

TripleSampler::TripleSampler(const LabeledDataset& dataset,
                             std::map<std::string, std::vector<std::string>> eligible,
                             int k_neg, std::uint64_t seed)
    : eligible_(std::move(eligible)), k_neg_(k_neg), engine_(seed) {
  for (const auto& [qid, positives] : dataset.by_query()) {
    auto it = eligible_.find(qid);
    if (it == eligible_.end() || it->second.empty() || positives.empty()) {
      ++skipped_queries_;
      continue;
    }
    ++active_queries_;
    for (const auto& pos : positives) instances_.push_back({qid, pos});
  }
}

void TripleSampler::refill() {
  buffer_.clear();
  buffer_pos_ = 0;
  engine_.shuffle(instances_);
  for (const auto& [qid, pos] : instances_) {
    const auto& pool = eligible_.at(qid);
    const std::size_t n = pool.size();
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_neg_), n);
    if (k == 1) {
      buffer_.push_back({qid, pos, pool[engine_.bounded(n)]});
      continue;
    }
    // Floyd's sampling: k distinct indices from [0, n)
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
      std::size_t t = engine_.bounded(j + 1);
      if (std::find(picked.begin(), picked.end(), t) != picked.end())
        picked.push_back(j);
      else
        picked.push_back(t);
    }
    for (std::size_t idx : picked) buffer_.push_back({qid, pos, pool[idx]});
  }
}

TrainingTriple TripleSampler::next() {
  if (instances_.empty()) throw TrainingError(0, "no trainable queries (every pool empty)");
  if (buffer_pos_ >= buffer_.size()) refill();
  return buffer_[buffer_pos_++];
}

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

TrainData TrainData::build(const std::vector<Document>& corpus,
                           const std::vector<Query>& queries, const LabeledDataset& dataset,
                           const Run& run, int top_n) {
  TrainData data;
  for (const auto& d : corpus) data.docs[d.doc_id] = &d;
  for (const auto& q : queries) data.queries[q.query_id] = &q;
  data.dataset = &dataset;
  for (const auto& list : run) {
    std::vector<std::string> ids;
    int depth = std::min<int>(top_n, static_cast<int>(list.entries.size()));
    ids.reserve(depth);
    for (int i = 0; i < depth; ++i) ids.push_back(list.entries[i].doc_id);
    data.candidates[list.query_id] = std::move(ids);
  }
  return data;
}

const Document& TrainData::doc(const std::string& id) const {
  auto it = docs.find(id);
  if (it == docs.end()) throw ReferentialError("unknown doc_id: " + id);
  return *it->second;
}

const Query& TrainData::query(const std::string& id) const {
  auto it = queries.find(id);
  if (it == queries.end()) throw ReferentialError("unknown query_id: " + id);
  return *it->second;
}

std::size_t TrainData::pair_dim() const {
  if (docs.empty()) throw ReferentialError("empty corpus");
  return 3 * docs.begin()->second->features.size();
}

DifferentiableScorer make_relevance_scorer(const TrainConfig& config, std::size_t input_dim) {
  return DifferentiableScorer(config.arch, input_dim, config.hidden,
                              rng::mix(config.seed, rng::hash_str("relevance-init")));
}

DifferentiableScorer make_selection_scorer(const TrainConfig& config, std::size_t input_dim) {
  return DifferentiableScorer(config.arch, input_dim, config.hidden,
                              rng::mix(config.seed, rng::hash_str("selection-init")));
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

Optimizer make_optimizer(const TrainConfig& cfg) {
  if (cfg.optimizer == Optimizer::Kind::sgd) return Optimizer::sgd(cfg.lr);
  return Optimizer::adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
}

// Shared loop: naive when `selection` is absent, coupled otherwise. Weights
// are computed from the pre-update scores of both models and treated as
// constants; both models step simultaneously.
TrainResult run_loop(const TrainData& data, DifferentiableScorer relevance,
                     std::optional<DifferentiableScorer> selection, const TrainConfig& cfg,
                     std::map<std::string, std::vector<std::string>> eligible,
                     const DevEvalFn* dev_eval, std::size_t extra_fallbacks) {
  cfg.validate();
  TripleSampler sampler(*data.dataset, std::move(eligible), cfg.k_neg,
                        rng::mix(cfg.seed, rng::hash_str("triples")));

  Optimizer opt_r = make_optimizer(cfg);
  Optimizer opt_s = make_optimizer(cfg);
  std::vector<double> grad_r(relevance.param_count(), 0.0);
  std::vector<double> grad_s(selection ? selection->param_count() : 0, 0.0);

  TrainResult result{std::move(relevance), std::move(selection), {}, sampler.skipped_queries(),
                     extra_fallbacks, 0};
  if (cfg.steps > 0 && sampler.empty())
    throw TrainingError(0, "no trainable queries (every pool empty)");

  const bool coupled = result.selection.has_value();
  double best_dev = -1.0;
  int stale_evals = 0;
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);

  for (int step = 1; step <= cfg.steps; ++step) {
    std::fill(grad_r.begin(), grad_r.end(), 0.0);
    std::fill(grad_s.begin(), grad_s.end(), 0.0);
    double loss_r = 0.0, loss_s = 0.0, sum_wr = 0.0, sum_ws = 0.0;
    TrainingTriple last;

    for (int b = 0; b < cfg.batch_size; ++b) {
      last = sampler.next();
      const Query& q = data.query(last.query_id);
      FeatureVector x_pos = pair_features(q, data.doc(last.pos_doc_id));
      FeatureVector x_neg = pair_features(q, data.doc(last.neg_doc_id));
      double r_i = result.relevance.forward(x_pos);
      double r_j = result.relevance.forward(x_neg);

      double w_r = 1.0;
      if (coupled) {
        double s_i = result.selection->forward(x_pos);
        double s_j = result.selection->forward(x_neg);
        w_r = bias_weight_wr(s_i, s_j, cfg.tau, cfg.clamp);
        double w_s = bias_weight_ws(r_i, r_j, cfg.tau, cfg.clamp);
        loss_s += weighted_pairwise_loss(s_i, s_j, w_s);
        double sig_s = stable_sigmoid(s_j - s_i);
        result.selection->backward(x_pos, -w_s * sig_s * inv_batch, grad_s);
        result.selection->backward(x_neg, w_s * sig_s * inv_batch, grad_s);
        sum_wr += w_r;
        sum_ws += w_s;
      }

      loss_r += weighted_pairwise_loss(r_i, r_j, w_r);
      double sig_r = stable_sigmoid(r_j - r_i);
      result.relevance.backward(x_pos, -w_r * sig_r * inv_batch, grad_r);
      result.relevance.backward(x_neg, w_r * sig_r * inv_batch, grad_r);
    }

    loss_r *= inv_batch;
    loss_s *= inv_batch;
    if (!std::isfinite(loss_r) || (coupled && !std::isfinite(loss_s)))
      throw TrainingError(step, "non-finite loss on triple (" + last.query_id + ", " +
                                    last.pos_doc_id + ", " + last.neg_doc_id + ")");

    opt_r.step(result.relevance.params(), grad_r);
    if (coupled && !cfg.freeze_selection) opt_s.step(result.selection->params(), grad_s);

    TrainLogRow row;
    row.step = step;
    row.loss_R = loss_r;
    if (coupled) {
      row.loss_S = loss_s;
      row.mean_w_r = sum_wr * inv_batch;
      row.mean_w_s = sum_ws * inv_batch;
    }
    result.steps_run = step;

    if (dev_eval != nullptr && cfg.eval_every > 0 && step % cfg.eval_every == 0) {
      double mrr = (*dev_eval)(result.relevance);
      row.dev_mrr = mrr;
      if (mrr > best_dev) {
        best_dev = mrr;
        stale_evals = 0;
      } else if (cfg.patience > 0 && ++stale_evals >= cfg.patience) {
        result.log.push_back(row);
        break;
      }
    }
    result.log.push_back(row);
  }
  return result;
}

}  // namespace

TrainResult naive_train(const TrainData& data, DifferentiableScorer relevance,
                        const TrainConfig& config, const DevEvalFn* dev_eval) {
  return run_loop(data, std::move(relevance), std::nullopt, config,
                  build_eligible(*data.dataset, data.candidates, config.top_n), dev_eval, 0);
}

TrainResult coupled_train(const TrainData& data, DifferentiableScorer relevance,
                          DifferentiableScorer selection, const TrainConfig& config,
                          const DevEvalFn* dev_eval) {
  if (relevance.arch() != selection.arch() ||
      relevance.param_count() != selection.param_count())
    throw ConfigError("relevance and selection models must share one architecture");
  return run_loop(data, std::move(relevance), std::move(selection), config,
                  build_eligible(*data.dataset, data.candidates, config.top_n), dev_eval, 0);
}

TrainResult denoise_train(const TrainData& data, const TrainConfig& config,
                          const DevEvalFn* dev_eval) {
  // Phase 1: a naive model scores every candidate.
  TrainResult pilot = naive_train(data, make_relevance_scorer(config, data.pair_dim()), config);

  // Phase 2: per query, normalize the pilot's candidate scores into (0, 1]
  // and drop everything at or above eta. The lower end is kept strictly
  // positive (min maps to 1/(n+1), max to 1) so eta = 1 removes exactly the
  // per-query maximum and eta near 0 empties the pool; emptied pools fall
  // back to the single lowest-scored non-positive candidate.
  std::size_t fallbacks = 0;
  std::map<std::string, std::vector<std::string>> filtered;
  for (const auto& [qid, positives] : data.dataset->by_query()) {
    auto cit = data.candidates.find(qid);
    if (cit == data.candidates.end()) continue;
    const Query& q = data.query(qid);
    int depth = std::min<int>(config.top_n, static_cast<int>(cit->second.size()));
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(depth);
    double lo = 0.0, hi = 0.0;
    for (int i = 0; i < depth; ++i) {
      FeatureVector x = pair_features(q, data.doc(cit->second[i]));
      double s = pilot.relevance.forward(x);
      if (scored.empty() || s < lo) lo = s;
      if (scored.empty() || s > hi) hi = s;
      scored.push_back({cit->second[i], s});
    }
    const double range = hi - lo;
    const double pad = range / static_cast<double>(std::max<std::size_t>(scored.size(), 1));
    std::vector<std::string> pool;
    const std::string* lowest = nullptr;
    double lowest_score = 0.0;
    for (const auto& [did, s] : scored) {
      if (data.dataset->is_positive(qid, did)) continue;
      if (lowest == nullptr || s < lowest_score || (s == lowest_score && did < *lowest)) {
        lowest = &did;
        lowest_score = s;
      }
      double norm = range > 0.0 ? (s - lo + pad) / (range + pad) : 1.0;
      if (norm < config.eta) pool.push_back(did);
    }
    if (pool.empty() && lowest != nullptr) {
      pool.push_back(*lowest);
      ++fallbacks;
    }
    filtered[qid] = std::move(pool);
  }

  return run_loop(data, make_relevance_scorer(config, data.pair_dim()), std::nullopt, config,
                  std::move(filtered), dev_eval, fallbacks);
}

TrainResult mismatch_train(const TrainData& weak_data, DifferentiableScorer relevance,
                           const TrainConfig& config, const DevEvalFn* dev_eval) {
  return naive_train(weak_data, std::move(relevance), config, dev_eval);
}

std::string log_to_csv(const std::vector<TrainLogRow>& log) {
  std::string csv = "step,loss_R,loss_S,mean_w_r,mean_w_s,dev_mrr\n";
  auto cell = [](const std::optional<double>& v) {
    return v.has_value() ? io::fmt_g9(*v) : std::string();
  };
  for (const auto& row : log) {
    csv += std::to_string(row.step) + "," + io::fmt_g9(row.loss_R) + "," + cell(row.loss_S) +
           "," + cell(row.mean_w_r) + "," + cell(row.mean_w_s) + "," + cell(row.dev_mrr) + "\n";
  }
  return csv;
}

}  // namespace poolbias

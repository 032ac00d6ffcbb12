#include "poolbias/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "poolbias/retriever.hpp"
#include "poolbias/rng.hpp"

namespace poolbias {

namespace {

std::string doc_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "d%06d", i);
  return buf;
}

std::string query_name(const char* split, int i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "q%s%04d", split, i);
  return buf;
}

double dot(const FeatureVector& a, const FeatureVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// latent in R^T plus observed features: first T dims are the latent
// coordinates with observation noise, the rest pure noise.
void draw_entity(rng::Engine& engine, const WorldConfig& cfg, FeatureVector& latent,
                 FeatureVector& features) {
  latent.resize(cfg.latent_dim);
  for (auto& z : latent) z = engine.normal();
  features.resize(cfg.feature_dim);
  for (int i = 0; i < cfg.latent_dim; ++i)
    features[i] = latent[i] + cfg.noise_feat * engine.normal();
  for (int i = cfg.latent_dim; i < cfg.feature_dim; ++i) features[i] = engine.normal();
}

}  // namespace

void WorldConfig::validate() const {
  if (n_docs < 1) throw ConfigError("world.n_docs must be >= 1");
  if (n_train_queries < 1 || n_dev_queries < 1 || n_test_queries < 1)
    throw ConfigError("world query counts must be >= 1");
  if (feature_dim < 1) throw ConfigError("world.feature_dim must be >= 1");
  if (latent_dim < 1 || latent_dim > feature_dim)
    throw ConfigError("world.latent_dim must satisfy 1 <= T <= F");
  if (min_rel < 1) throw ConfigError("world.min_rel must be >= 1");
  if (min_rel > n_docs) throw ConfigError("infeasible config: min_rel > n_docs");
  if (rule == RelevanceRule::top_m) {
    if (top_m < 1 || top_m > n_docs) throw ConfigError("world.top_m must be in [1, n_docs]");
    if (min_rel > top_m) throw ConfigError("infeasible config: min_rel > top_m");
  }
  if (noise_feat < 0.0) throw ConfigError("world.noise_feat must be >= 0");
}

const Document& World::doc(const std::string& doc_id) const {
  auto it = doc_index.find(doc_id);
  if (it == doc_index.end()) throw ReferentialError("unknown doc_id: " + doc_id);
  return corpus[it->second];
}

const Query* World::find_query(const std::string& query_id) const {
  for (const auto* split : {&train_queries, &dev_queries, &test_queries})
    for (const auto& q : *split)
      if (q.query_id == query_id) return &q;
  return nullptr;
}

double World::latent_similarity(const std::string& query_id, const std::string& doc_id) const {
  auto qit = query_latents.find(query_id);
  if (qit == query_latents.end()) throw ReferentialError("unknown query_id: " + query_id);
  auto dit = doc_index.find(doc_id);
  if (dit == doc_index.end()) throw ReferentialError("unknown doc_id: " + doc_id);
  return dot(qit->second, doc_latents[dit->second]);
}

World generate_world(const WorldConfig& config) {
  config.validate();
  World world;
  world.config = config;
  rng::Engine engine(rng::mix(config.seed, rng::hash_str("world")));

  world.corpus.resize(config.n_docs);
  world.doc_latents.resize(config.n_docs);
  for (int i = 0; i < config.n_docs; ++i) {
    world.corpus[i].doc_id = doc_name(i + 1);
    draw_entity(engine, config, world.doc_latents[i], world.corpus[i].features);
    world.doc_index[world.corpus[i].doc_id] = i;
  }

  auto make_queries = [&](const char* split, int n, std::vector<Query>& out) {
    out.resize(n);
    for (int i = 0; i < n; ++i) {
      out[i].query_id = query_name(split, i + 1);
      FeatureVector latent;
      draw_entity(engine, config, latent, out[i].features);
      world.query_latents[out[i].query_id] = std::move(latent);
    }
  };
  make_queries("trn", config.n_train_queries, world.train_queries);
  make_queries("dev", config.n_dev_queries, world.dev_queries);
  make_queries("tst", config.n_test_queries, world.test_queries);

  // relevance from true latent similarity; ties by ascending doc_id
  auto assign_relevance = [&](const Query& q) {
    const FeatureVector& zq = world.query_latents.at(q.query_id);
    std::vector<std::pair<double, int>> sims(config.n_docs);
    for (int i = 0; i < config.n_docs; ++i) sims[i] = {dot(zq, world.doc_latents[i]), i};
    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    int n_rel = 0;
    if (config.rule == RelevanceRule::top_m) {
      n_rel = config.top_m;
    } else {
      while (n_rel < config.n_docs && sims[n_rel].first >= config.theta_rel) ++n_rel;
      n_rel = std::max(n_rel, config.min_rel);
    }
    for (int i = 0; i < n_rel; ++i)
      world.truth.add(q.query_id, world.corpus[sims[i].second].doc_id);
  };
  for (const auto* split : {&world.train_queries, &world.dev_queries, &world.test_queries})
    for (const auto& q : *split) assign_relevance(q);

  return world;
}

PoolingResult simulate_pooling(World& world, const Retriever& pooler, int pool_depth,
                               long label_budget, PoolingMode mode, std::uint64_t seed) {
  if (pool_depth < 1) throw ConfigError("pool_depth must be >= 1");
  if (label_budget < 1) throw ConfigError("label_budget must be >= 1");

  PoolingResult result;
  world.selection.clear();
  rng::Engine engine(rng::mix(seed, rng::hash_str("pooling")));

  for (const auto& q : world.train_queries) {
    // score the whole corpus once; both modes derive from these scores
    std::vector<std::pair<std::string, double>> scored(world.corpus.size());
    for (std::size_t i = 0; i < world.corpus.size(); ++i)
      scored[i] = {world.corpus[i].doc_id, pooler.score(q, world.corpus[i])};

    // pool membership, plus (doc, pooling score) for the label pass
    std::vector<std::pair<double, std::string>> pool;
    if (mode == PoolingMode::deterministic) {
      RankedList ranked = RankedList::from_scores(q.query_id, scored,
                                                  static_cast<std::size_t>(pool_depth));
      for (const auto& e : ranked.entries) {
        world.selection.set(q.query_id, e.doc_id, true, 1.0);
        pool.push_back({e.score, e.doc_id});
      }
    } else {
      // logistic map of the per-query standardized score; scale-free
      double mean = 0.0;
      for (const auto& [id, s] : scored) mean += s;
      mean /= static_cast<double>(scored.size());
      double var = 0.0;
      for (const auto& [id, s] : scored) var += (s - mean) * (s - mean);
      double stdev = std::sqrt(var / static_cast<double>(scored.size()));
      for (const auto& [id, s] : scored) {
        double z = stdev > 0.0 ? (s - mean) / stdev : 0.0;
        double p_sel = 1.0 / (1.0 + std::exp(-z));
        bool selected = engine.uniform01() < p_sel;
        world.selection.set(q.query_id, id, selected, p_sel);
        if (selected) pool.push_back({s, id});
      }
    }

    // label at most `label_budget` relevant pool members, best score first
    std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    long labeled = 0;
    for (const auto& [score, did] : pool) {
      if (labeled >= label_budget) break;
      if (world.truth.is_relevant(q.query_id, did)) {
        result.dataset.add_positive(q.query_id, did);
        ++labeled;
      }
    }
    if (labeled == 0)
      result.dropped_queries.push_back(q.query_id);
    else
      result.total_labels += static_cast<std::size_t>(labeled);
  }
  return result;
}

double false_negative_rate(const World& world, const LabeledDataset& dataset,
                           const RankedList& candidates, int top_n) {
  if (top_n > static_cast<int>(candidates.entries.size()))
    throw DimensionError("top_n exceeds candidate list length for query " +
                         candidates.query_id);
  std::size_t eligible = 0, unlabeled_positives = 0;
  for (int i = 0; i < top_n; ++i) {
    const auto& did = candidates.entries[i].doc_id;
    world.doc(did);  // referential check
    if (dataset.is_positive(candidates.query_id, did)) continue;
    ++eligible;
    if (world.truth.is_relevant(candidates.query_id, did)) ++unlabeled_positives;
  }
  if (eligible == 0)
    throw DimensionError("empty candidate slice for query " + candidates.query_id);
  return static_cast<double>(unlabeled_positives) / static_cast<double>(eligible);
}

double mean_false_negative_rate(const World& world, const LabeledDataset& dataset,
                                const Run& run, int top_n) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [qid, positives] : dataset.by_query()) {
    const RankedList* list = find_list(run, qid);
    if (list == nullptr) continue;
    sum += false_negative_rate(world, dataset, *list,
                               std::min<int>(top_n, static_cast<int>(list->entries.size())));
    ++n;
  }
  if (n == 0) throw DimensionError("no queries shared between dataset and run");
  return sum / static_cast<double>(n);
}

ValidationReport validate_dataset(const World& world, const LabeledDataset& dataset) {
  ValidationReport report;
  for (const auto& [qid, positives] : dataset.by_query()) {
    if (world.query_latents.find(qid) == world.query_latents.end())
      throw ReferentialError("unknown query_id: " + qid);
    if (positives.empty()) {
      report.violations.push_back({qid, "", "query has empty positive set"});
      continue;
    }
    for (const auto& did : positives) {
      world.doc(did);  // throws on unknown id
      if (!world.truth.is_relevant(qid, did))
        report.violations.push_back({qid, did, "labeled positive has r=0"});
      if (!world.selection.selected(qid, did))
        report.violations.push_back({qid, did, "labeled positive has s=0"});
    }
  }
  return report;
}

}  // namespace poolbias

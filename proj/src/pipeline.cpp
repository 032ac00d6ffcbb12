#include "poolbias/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "poolbias/io.hpp"

namespace poolbias::pipeline {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

namespace {

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw IoError("missing upstream artifact: " + path);
}

Retriever make_retriever(const std::string& kind, double sigma, int subset_dims,
                         std::uint64_t seed, const World& world) {
  if (kind == "oracle_noisy") return Retriever::oracle_noisy(world, sigma, seed);
  return Retriever::feature_subset(subset_dims);
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

Retriever make_pool_retriever(const ExperimentConfig& cfg, const World& world) {
  auto p = cfg.pool();
  return make_retriever(p.retriever, p.sigma, p.subset_dims, p.seed, world);
}

Retriever make_sampler_retriever(const ExperimentConfig& cfg, const World& world) {
  auto s = cfg.sampler();
  return make_retriever(s.kind, s.sigma, s.subset_dims, s.seed, world);
}

void run_gen_world(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  ensure_dir(out);
  World world = generate_world(cfg.world());
  io::write_corpus(artifact::corpus(out), world.corpus);
  io::write_queries(artifact::queries(out, "train"), world.train_queries);
  io::write_queries(artifact::queries(out, "dev"), world.dev_queries);
  io::write_queries(artifact::queries(out, "test"), world.test_queries);
  io::write_qrels(artifact::qrels_truth(out), world.truth);

  std::size_t n_queries = world.train_queries.size() + world.dev_queries.size() +
                          world.test_queries.size();
  double per_query = static_cast<double>(world.truth.total_pairs()) /
                     static_cast<double>(n_queries);
  log << "gen-world: docs=" << world.corpus.size() << " queries_train="
      << world.train_queries.size() << " queries_dev=" << world.dev_queries.size()
      << " queries_test=" << world.test_queries.size()
      << " relevant_pairs=" << world.truth.total_pairs()
      << " positives_per_query=" << io::fmt_g9(per_query) << "\n";
}

void run_pool(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  require_file(artifact::corpus(out));
  require_file(artifact::qrels_truth(out));
  World world = generate_world(cfg.world());
  Retriever pooler = make_pool_retriever(cfg, world);
  auto spec = cfg.pool();
  PoolingResult result =
      simulate_pooling(world, pooler, spec.depth, spec.budget, spec.mode, spec.seed);
  io::write_labels(artifact::labels(out), result.dataset);
  io::write_selection(artifact::selection(out), world.selection);
  log << "pool: labeled_queries=" << result.dataset.num_queries()
      << " labels=" << result.total_labels
      << " dropped_queries=" << result.dropped_queries.size() << "\n";
}

void run_retrieve(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  require_file(artifact::corpus(out));
  World world = generate_world(cfg.world());
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.retrieve_k()),
                                              world.corpus.size());

  Retriever sampler = make_sampler_retriever(cfg, world);
  io::write_run(artifact::run(out, "sampler", "train"),
                sampler.retrieve_all(world.train_queries, world.corpus, k), "sampler");
  io::write_run(artifact::run(out, "sampler", "dev"),
                sampler.retrieve_all(world.dev_queries, world.corpus, k), "sampler");
  io::write_run(artifact::run(out, "sampler", "test"),
                sampler.retrieve_all(world.test_queries, world.corpus, k), "sampler");

  Retriever pooler = make_pool_retriever(cfg, world);
  io::write_run(artifact::run(out, "pooler", "train"),
                pooler.retrieve_all(world.train_queries, world.corpus, k), "pooler");
  log << "retrieve: k=" << k << " runs=4\n";
}

void run_train(const ExperimentConfig& cfg, const std::string& world_dir,
               const std::string& out, std::ostream& log) {
  ensure_dir(out);
  TrainConfig train_cfg = cfg.train();
  const std::string neg_run_path =
      train_cfg.regime == Regime::mismatch ? artifact::run(world_dir, "pooler", "train")
                                           : artifact::run(world_dir, "sampler", "train");
  require_file(neg_run_path);

  std::vector<Document> corpus = io::read_corpus(artifact::corpus(world_dir));
  std::vector<Query> train_queries = io::read_queries(artifact::queries(world_dir, "train"));
  LabeledDataset dataset = io::read_labels(artifact::labels(world_dir));
  Run neg_run = io::read_run(neg_run_path);
  TrainData data = TrainData::build(corpus, train_queries, dataset, neg_run, train_cfg.top_n);

  // optional dev-set evaluation hook
  std::vector<Query> dev_queries;
  Run dev_run;
  GroundTruth truth;
  std::map<std::string, const Document*> doc_map;
  std::map<std::string, const Query*> dev_map;
  DevEvalFn dev_fn;
  const DevEvalFn* dev_ptr = nullptr;
  if (train_cfg.eval_every > 0) {
    dev_queries = io::read_queries(artifact::queries(world_dir, "dev"));
    dev_run = io::read_run(artifact::run(world_dir, "sampler", "dev"));
    truth = io::read_qrels(artifact::qrels_truth(world_dir));
    for (const auto& d : corpus) doc_map[d.doc_id] = &d;
    for (const auto& q : dev_queries) dev_map[q.query_id] = &q;
    int depth = cfg.rerank_depth();
    dev_fn = [&, depth](const DifferentiableScorer& model) {
      Run reranked = rerank_run(model, dev_map, doc_map, dev_run, depth);
      return mrr_at_k(reranked, truth, 10).macro;
    };
    dev_ptr = &dev_fn;
  }

  TrainResult result = [&] {
    switch (train_cfg.regime) {
      case Regime::naive:
        return naive_train(data, make_relevance_scorer(train_cfg, data.pair_dim()), train_cfg,
                           dev_ptr);
      case Regime::cet:
        return coupled_train(data, make_relevance_scorer(train_cfg, data.pair_dim()),
                             make_selection_scorer(train_cfg, data.pair_dim()), train_cfg,
                             dev_ptr);
      case Regime::denoise:
        return denoise_train(data, train_cfg, dev_ptr);
      case Regime::mismatch: {
        Run weak_run = io::read_run(artifact::run(world_dir, "pooler", "train"));
        TrainData weak =
            TrainData::build(corpus, train_queries, dataset, weak_run, train_cfg.top_n);
        return mismatch_train(weak, make_relevance_scorer(train_cfg, weak.pair_dim()),
                              train_cfg, dev_ptr);
      }
    }
    throw ConfigError("unreachable regime");
  }();

  save_checkpoint(artifact::checkpoint_r(out), result.relevance);
  if (result.selection.has_value())
    save_checkpoint(artifact::checkpoint_s(out), *result.selection);
  io::write_file(artifact::train_log(out), log_to_csv(result.log));
  log << "train: regime=" << regime_name(train_cfg.regime) << " steps=" << result.steps_run
      << " skipped_queries=" << result.skipped_queries
      << " fallback_queries=" << result.fallback_queries << "\n";
}

void run_eval(const ExperimentConfig& cfg, const std::string& world_dir,
              const std::string& out, std::ostream& log) {
  ensure_dir(out);
  require_file(artifact::run(world_dir, "sampler", "test"));
  Run test_run = io::read_run(artifact::run(world_dir, "sampler", "test"));
  GroundTruth truth = io::read_qrels(artifact::qrels_truth(world_dir));

  Run scored_run;
  if (cfg.rerank_enabled() && fs::exists(artifact::checkpoint_r(out))) {
    std::vector<Document> corpus = io::read_corpus(artifact::corpus(world_dir));
    std::vector<Query> test_queries = io::read_queries(artifact::queries(world_dir, "test"));
    DifferentiableScorer model = load_checkpoint(artifact::checkpoint_r(out));
    std::map<std::string, const Document*> doc_map;
    std::map<std::string, const Query*> query_map;
    for (const auto& d : corpus) doc_map[d.doc_id] = &d;
    for (const auto& q : test_queries) query_map[q.query_id] = &q;
    scored_run = rerank_run(model, query_map, doc_map, test_run, cfg.rerank_depth());
    io::write_run(artifact::reranked(out), scored_run, "reranked");
  } else {
    scored_run = test_run;  // evaluate the raw retriever run
  }

  std::vector<EvalResult> results;
  for (int k : cfg.eval_cutoffs()) {
    results.push_back(mrr_at_k(scored_run, truth, k));
    results.push_back(ndcg_at_k(scored_run, truth, k));
    results.push_back(recall_at_k(scored_run, truth, k));
  }
  io::write_file(artifact::metrics(out), metrics_to_csv(results));

  // selection-model probe, when a coupled checkpoint is present
  if (fs::exists(artifact::checkpoint_s(out))) {
    World world = generate_world(cfg.world());
    DifferentiableScorer selection = load_checkpoint(artifact::checkpoint_s(out));
    LabeledDataset dataset = io::read_labels(artifact::labels(world_dir));
    Run train_run = io::read_run(artifact::run(world_dir, "sampler", "train"));
    TrainConfig train_cfg = cfg.train();
    auto rho = mean_probe_rho(selection, world, dataset, train_run, train_cfg.top_n,
                              train_cfg.tau, train_cfg.clamp);
    if (!dataset.by_query().empty()) {
      const auto& [first_q, positives] = *dataset.by_query().begin();
      const RankedList* list = find_list(train_run, first_q);
      if (list != nullptr && !positives.empty()) {
        ProbeResult probe = wr_relevance_probe(selection, world, *list, positives.front(),
                                               train_cfg.top_n, train_cfg.tau,
                                               train_cfg.clamp);
        io::write_file(artifact::probe(out), probe_to_csv(probe));
      }
    }
    log << "eval: probe_mean_rho="
        << (rho.has_value() ? io::fmt_g9(*rho) : std::string("undefined")) << "\n";
  }

  std::string meta = "regime=" + cfg.get("train.regime") + "\nseed=" + cfg.get("train.seed") +
                     "\nworld=" + cfg.world_fingerprint() + "\n";
  io::write_file(artifact::meta(out), meta);
  for (const auto& r : results)
    if (r.metric == "mrr")
      log << "eval: mrr@" << r.k << "=" << io::fmt_g9(r.macro) << " (skipped=" << r.skipped
          << ")\n";
}

GridSpec parse_grid(const std::string& grid) {
  std::size_t eq = grid.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("malformed grid '" + grid + "': expected name=values");
  GridSpec spec;
  spec.param = grid.substr(0, eq);
  if (spec.param != "tau" && spec.param != "eta")
    throw ConfigError("grid parameter must be tau or eta, got '" + spec.param + "'");
  std::string values = grid.substr(eq + 1);
  std::size_t dots = values.find("..");
  if (dots != std::string::npos) {
    // lo..hi with step 0.1, or lo..hi:step
    double step = 0.1;
    std::string hi_part = values.substr(dots + 2);
    std::size_t colon = hi_part.find(':');
    if (colon != std::string::npos) {
      step = std::strtod(hi_part.substr(colon + 1).c_str(), nullptr);
      hi_part = hi_part.substr(0, colon);
    }
    double lo = std::strtod(values.substr(0, dots).c_str(), nullptr);
    double hi = std::strtod(hi_part.c_str(), nullptr);
    if (step <= 0.0 || hi < lo) throw ConfigError("malformed grid range '" + values + "'");
    for (double v = lo; v <= hi + 1e-9; v += step) spec.values.push_back(v);
  } else {
    std::size_t start = 0;
    while (start <= values.size()) {
      std::size_t pos = values.find(',', start);
      std::string tok = pos == std::string::npos ? values.substr(start)
                                                 : values.substr(start, pos - start);
      if (!tok.empty()) {
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
          throw ConfigError("malformed grid value '" + tok + "'");
        spec.values.push_back(v);
      }
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
  }
  if (spec.values.empty()) throw ConfigError("grid has no values");
  return spec;
}

void run_sweep(const ExperimentConfig& cfg, const std::string& out, const std::string& grid,
               std::ostream& log) {
  GridSpec spec = parse_grid(grid);
  ensure_dir(out);

  // shared world artifacts at the sweep root
  if (!fs::exists(artifact::corpus(out))) run_gen_world(cfg, out, log);
  if (!fs::exists(artifact::labels(out))) run_pool(cfg, out, log);
  if (!fs::exists(artifact::run(out, "sampler", "train"))) run_retrieve(cfg, out, log);

  std::vector<std::uint64_t> seeds = cfg.seeds();
  const int k_report = cfg.eval_cutoffs().front();
  std::string summary = "param,value,seed,mrr\n";
  std::vector<double> point_means;
  std::string points_csv;
  for (double value : spec.values) {
    double sum = 0.0;
    std::vector<double> per_seed;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig sub = cfg;
      sub.set("train." + spec.param, io::fmt_g9(value));
      sub.set("train.seed", std::to_string(seed));
      std::string run_dir =
          out + "/sweep_" + spec.param + "/" + io::fmt_g9(value) + "/s" + std::to_string(seed);
      ensure_dir(run_dir);
      run_train(sub, out, run_dir, log);
      run_eval(sub, out, run_dir, log);
      auto macros = read_metric_macros(artifact::metrics(run_dir));
      double mrr = macros.at({"mrr", k_report});
      per_seed.push_back(mrr);
      sum += mrr;
      summary += spec.param + "," + io::fmt_g9(value) + "," + std::to_string(seed) + "," +
                 io::fmt_g9(mrr) + "\n";
    }
    double mean = sum / static_cast<double>(per_seed.size());
    double var = 0.0;
    for (double v : per_seed) var += (v - mean) * (v - mean);
    double stdev = per_seed.size() > 1
                       ? std::sqrt(var / static_cast<double>(per_seed.size() - 1))
                       : 0.0;
    point_means.push_back(mean);
    points_csv += spec.param + "," + io::fmt_g9(value) + ",mean," + io::fmt_g9(mean) + "\n" +
                  spec.param + "," + io::fmt_g9(value) + ",std," + io::fmt_g9(stdev) + "\n";
  }

  double grand = 0.0;
  for (double m : point_means) grand += m;
  grand /= static_cast<double>(point_means.size());
  double cross_var = 0.0;
  for (double m : point_means) cross_var += (m - grand) * (m - grand);
  double cross_std = point_means.size() > 1
                         ? std::sqrt(cross_var / static_cast<double>(point_means.size() - 1))
                         : 0.0;
  summary += points_csv;
  summary += spec.param + ",all,cross_grid_std," + io::fmt_g9(cross_std) + "\n";
  io::write_file(out + "/sweep_" + spec.param + "/summary.csv", summary);
  log << "sweep: param=" << spec.param << " points=" << spec.values.size()
      << " seeds=" << seeds.size() << " cross_grid_std=" << io::fmt_g9(cross_std) << "\n";
}

void run_report(const std::string& runs_dir, std::ostream& out) {
  if (!fs::exists(runs_dir)) throw IoError("missing runs directory: " + runs_dir);
  struct RunInfo {
    std::string regime;
    long seed = 0;
    std::string world;
    std::map<std::pair<std::string, int>, double> macros;
  };
  std::vector<std::string> meta_paths;
  for (const auto& entry : fs::recursive_directory_iterator(runs_dir))
    if (entry.is_regular_file() && entry.path().filename() == "meta.txt")
      meta_paths.push_back(entry.path().string());
  std::sort(meta_paths.begin(), meta_paths.end());
  if (meta_paths.empty()) throw IoError("no completed runs under " + runs_dir);

  std::vector<RunInfo> runs;
  std::string world_seen;
  for (const auto& meta_path : meta_paths) {
    RunInfo info;
    std::istringstream meta(io::read_file(meta_path));
    std::string line;
    while (std::getline(meta, line)) {
      std::size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq), value = line.substr(eq + 1);
      if (key == "regime") info.regime = value;
      if (key == "seed") info.seed = std::strtol(value.c_str(), nullptr, 10);
      if (key == "world") info.world = value;
    }
    std::string dir = fs::path(meta_path).parent_path().string();
    if (!fs::exists(artifact::metrics(dir))) continue;
    info.macros = read_metric_macros(artifact::metrics(dir));
    if (world_seen.empty())
      world_seen = info.world;
    else if (info.world != world_seen)
      throw IncompatibilityError("runs mix incompatible worlds: " + world_seen + " vs " +
                                 info.world);
    runs.push_back(std::move(info));
  }

  // regime -> seed -> macros
  std::map<std::string, std::map<long, std::map<std::pair<std::string, int>, double>>> table;
  std::set<std::pair<std::string, int>> columns;
  for (const auto& r : runs) {
    table[r.regime][r.seed] = r.macros;
    for (const auto& [mk, v] : r.macros) columns.insert(mk);
  }

  out << "regime";
  for (const auto& [metric, k] : columns) out << "\t" << metric << "@" << k;
  out << "\tseeds\n";
  for (const auto& [regime, by_seed] : table) {
    out << regime;
    for (const auto& mk : columns) {
      double sum = 0.0, sum_sq = 0.0;
      std::size_t n = 0;
      for (const auto& [seed, macros] : by_seed) {
        auto it = macros.find(mk);
        if (it == macros.end()) continue;
        sum += it->second;
        sum_sq += it->second * it->second;
        ++n;
      }
      if (n == 0) {
        out << "\t-";
        continue;
      }
      double mean = sum / static_cast<double>(n);
      double var = n > 1 ? std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(n - 1))
                         : 0.0;
      out << "\t" << fmt2(mean) << "+-" << fmt2(std::sqrt(var));
    }
    out << "\t" << by_seed.size() << "\n";
  }

  // paired sign tests on the primary metric (smallest mrr cutoff present)
  const std::pair<std::string, int>* primary = nullptr;
  for (const auto& mk : columns)
    if (mk.first == "mrr" && (primary == nullptr || mk.second < primary->second))
      primary = &mk;
  if (primary != nullptr && table.size() > 1) {
    std::vector<std::string> regimes;
    for (const auto& [regime, by_seed] : table) regimes.push_back(regime);
    for (std::size_t a = 0; a < regimes.size(); ++a) {
      for (std::size_t b = a + 1; b < regimes.size(); ++b) {
        std::vector<double> va, vb;
        for (const auto& [seed, macros] : table[regimes[a]]) {
          auto other = table[regimes[b]].find(seed);
          if (other == table[regimes[b]].end()) continue;
          auto ia = macros.find(*primary);
          auto ib = other->second.find(*primary);
          if (ia == macros.end() || ib == other->second.end()) continue;
          va.push_back(ia->second);
          vb.push_back(ib->second);
        }
        if (va.empty()) continue;
        auto p = sign_test_pvalue(va, vb);
        out << "signtest\t" << regimes[a] << " vs " << regimes[b] << "\t" << primary->first
            << "@" << primary->second << "\t"
            << (p.has_value() ? io::fmt_g9(*p) : std::string("no difference")) << "\t(n="
            << va.size() << ")\n";
      }
    }
  }
}

// ---------------------------------------------------------------------------
// In-memory lab
// ---------------------------------------------------------------------------

Lab Lab::build(const ExperimentConfig& cfg) {
  Lab lab;
  lab.world = generate_world(cfg.world());
  Retriever pooler = make_pool_retriever(cfg, lab.world);
  auto pool_spec = cfg.pool();
  lab.pooling = simulate_pooling(lab.world, pooler, pool_spec.depth, pool_spec.budget,
                                 pool_spec.mode, pool_spec.seed);

  Retriever sampler = make_sampler_retriever(cfg, lab.world);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.retrieve_k()),
                                              lab.world.corpus.size());
  lab.sampler_train = sampler.retrieve_all(lab.world.train_queries, lab.world.corpus, k);
  lab.sampler_dev = sampler.retrieve_all(lab.world.dev_queries, lab.world.corpus, k);
  lab.sampler_test = sampler.retrieve_all(lab.world.test_queries, lab.world.corpus, k);
  lab.pooler_train = pooler.retrieve_all(lab.world.train_queries, lab.world.corpus, k);

  TrainConfig train_cfg = cfg.train();
  lab.strong_data = TrainData::build(lab.world.corpus, lab.world.train_queries,
                                     lab.pooling.dataset, lab.sampler_train, train_cfg.top_n);
  lab.weak_data = TrainData::build(lab.world.corpus, lab.world.train_queries,
                                   lab.pooling.dataset, lab.pooler_train, train_cfg.top_n);
  return lab;
}

TrainResult Lab::train(Regime regime, const TrainConfig& base) const {
  TrainConfig cfg = base;
  cfg.regime = regime;
  switch (regime) {
    case Regime::naive:
      return naive_train(strong_data, make_relevance_scorer(cfg, strong_data.pair_dim()), cfg);
    case Regime::cet:
      return coupled_train(strong_data, make_relevance_scorer(cfg, strong_data.pair_dim()),
                           make_selection_scorer(cfg, strong_data.pair_dim()), cfg);
    case Regime::denoise:
      return denoise_train(strong_data, cfg);
    case Regime::mismatch:
      return mismatch_train(weak_data, make_relevance_scorer(cfg, weak_data.pair_dim()), cfg);
  }
  throw ConfigError("unreachable regime");
}

double Lab::test_mrr(const DifferentiableScorer& model, int k) const {
  std::map<std::string, const Document*> doc_map;
  std::map<std::string, const Query*> query_map;
  for (const auto& d : world.corpus) doc_map[d.doc_id] = &d;
  for (const auto& q : world.test_queries) query_map[q.query_id] = &q;
  Run reranked = rerank_run(model, query_map, doc_map, sampler_test,
                            static_cast<int>(sampler_test.empty()
                                                 ? 0
                                                 : sampler_test.front().entries.size()));
  return mrr_at_k(reranked, world.truth, k).macro;
}

}  // namespace poolbias::pipeline

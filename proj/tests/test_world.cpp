#include <doctest.h>

#include <set>

#include "poolbias/io.hpp"
#include "poolbias/retriever.hpp"
#include "poolbias/rng.hpp"
#include "poolbias/world.hpp"
#include "test_util.hpp"

using namespace poolbias;

TEST_CASE("identical configs give bit-identical worlds") {
  testutil::TempDir tmp("world_det");
  for (int round = 0; round < 2; ++round) {
    World world = generate_world(testutil::tiny_world_config(21));
    io::write_corpus(tmp.path() + "/corpus_" + std::to_string(round) + ".tsv", world.corpus);
    io::write_qrels(tmp.path() + "/qrels_" + std::to_string(round) + ".tsv", world.truth);
  }
  CHECK(io::read_file(tmp.path() + "/corpus_0.tsv") ==
        io::read_file(tmp.path() + "/corpus_1.tsv"));
  CHECK(io::read_file(tmp.path() + "/qrels_0.tsv") ==
        io::read_file(tmp.path() + "/qrels_1.tsv"));
}

TEST_CASE("top_m rule gives exactly top_m relevant docs per query") {
  WorldConfig cfg = testutil::tiny_world_config(8);
  cfg.top_m = 5;
  World world = generate_world(cfg);
  for (const auto* split : {&world.train_queries, &world.dev_queries, &world.test_queries})
    for (const auto& q : *split) CHECK(world.truth.relevant(q.query_id).size() == 5);
}

TEST_CASE("min_rel is enforced under the threshold rule") {
  WorldConfig cfg = testutil::tiny_world_config(9);
  cfg.rule = RelevanceRule::threshold;
  cfg.theta_rel = 1e9;  // nothing passes; min_rel must pad
  cfg.min_rel = 3;
  World world = generate_world(cfg);
  for (const auto& q : world.train_queries)
    CHECK(world.truth.relevant(q.query_id).size() >= 3);
}

TEST_CASE("infeasible configs are rejected") {
  WorldConfig cfg = testutil::tiny_world_config();
  cfg.min_rel = cfg.n_docs + 1;
  CHECK_THROWS_AS(generate_world(cfg), ConfigError);

  WorldConfig cfg2 = testutil::tiny_world_config();
  cfg2.latent_dim = cfg2.feature_dim + 1;
  CHECK_THROWS_AS(cfg2.validate(), ConfigError);
}

TEST_CASE("exhaustive pooling labels every relevant doc") {
  World world = generate_world(testutil::tiny_world_config(31));
  Retriever pooler = Retriever::feature_subset(2);
  PoolingResult pooling = simulate_pooling(world, pooler, world.config.n_docs,
                                           world.config.n_docs, PoolingMode::deterministic, 1);
  CHECK(pooling.dropped_queries.empty());
  for (const auto& q : world.train_queries) {
    const auto& rel = world.truth.relevant(q.query_id);
    CHECK(pooling.dataset.positives(q.query_id).size() == rel.size());
  }
  // zero false negatives anywhere
  Retriever sampler = Retriever::oracle_noisy(world, 0.5, 3);
  Run run = sampler.retrieve_all(world.train_queries, world.corpus, 40);
  CHECK(mean_false_negative_rate(world, pooling.dataset, run, 40) == 0.0);
}

TEST_CASE("budget of one labels exactly one positive per retained query") {
  World world = generate_world(testutil::tiny_world_config(32));
  Retriever pooler = Retriever::feature_subset(2);
  PoolingResult pooling =
      simulate_pooling(world, pooler, 10, 1, PoolingMode::deterministic, 1);
  for (const auto& [qid, positives] : pooling.dataset.by_query())
    CHECK(positives.size() == 1);
  CHECK(pooling.dataset.num_queries() + pooling.dropped_queries.size() ==
        world.train_queries.size());
}

TEST_CASE("every labeled positive is relevant and selected across seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    WorldConfig cfg = testutil::tiny_world_config(seed);
    cfg.n_docs = 40;
    cfg.n_train_queries = 5;
    World world = generate_world(cfg);
    Retriever pooler = Retriever::feature_subset(2);
    PoolingMode mode = seed % 2 == 0 ? PoolingMode::deterministic : PoolingMode::stochastic;
    PoolingResult pooling = simulate_pooling(world, pooler, 8, 2, mode, seed * 13 + 1);
    ValidationReport report = validate_dataset(world, pooling.dataset);
    CHECK_MESSAGE(report.ok(), "seed ", seed, " produced ", report.violations.size(),
                  " violations");
  }
}

TEST_CASE("stochastic selection frequency matches recorded p_sel") {
  WorldConfig cfg = testutil::tiny_world_config(77);
  cfg.n_docs = 50;
  cfg.n_train_queries = 1;
  cfg.n_dev_queries = 1;
  cfg.n_test_queries = 1;
  World world = generate_world(cfg);
  Retriever pooler = Retriever::feature_subset(2);

  const int resamples = 10000;
  std::map<std::string, int> counts;
  SelectionRecord reference;
  for (int i = 0; i < resamples; ++i) {
    World w = world;  // fresh selection record each resample
    simulate_pooling(w, pooler, 1, 1, PoolingMode::stochastic,
                     static_cast<std::uint64_t>(i));
    if (i == 0) reference = w.selection;
    const auto& q = w.train_queries[0];
    for (const auto& d : w.corpus)
      if (w.selection.selected(q.query_id, d.doc_id)) counts[d.doc_id]++;
  }
  const auto& qid = world.train_queries[0].query_id;
  for (const auto& d : world.corpus) {
    double freq = counts[d.doc_id] / static_cast<double>(resamples);
    double p = reference.find(qid, d.doc_id)->p_sel;
    CHECK_MESSAGE(std::abs(freq - p) <= 0.02, d.doc_id, ": freq ", freq, " vs p_sel ", p);
  }
}

TEST_CASE("false negative rate on a hand-counted toy world") {
  WorldConfig cfg = testutil::tiny_world_config(55);
  cfg.n_docs = 20;
  cfg.n_train_queries = 1;
  cfg.n_dev_queries = 1;
  cfg.n_test_queries = 1;
  cfg.top_m = 6;
  World world = generate_world(cfg);
  Retriever pooler = Retriever::feature_subset(1);
  PoolingResult pooling =
      simulate_pooling(world, pooler, 5, 1, PoolingMode::deterministic, 2);
  REQUIRE(pooling.dataset.num_queries() == 1);
  const std::string qid = pooling.dataset.by_query().begin()->first;

  Retriever sampler = Retriever::oracle_noisy(world, 0.3, 9);
  const Query* q = world.find_query(qid);
  RankedList candidates = sampler.retrieve(*q, world.corpus, 10);

  // exhaustive hand count
  std::size_t eligible = 0, fn = 0;
  for (const auto& e : candidates.entries) {
    if (pooling.dataset.is_positive(qid, e.doc_id)) continue;
    ++eligible;
    if (world.truth.is_relevant(qid, e.doc_id)) ++fn;
  }
  REQUIRE(eligible > 0);
  CHECK(false_negative_rate(world, pooling.dataset, candidates, 10) ==
        doctest::Approx(static_cast<double>(fn) / eligible));
}

TEST_CASE("false negative rate edge cases") {
  WorldConfig cfg = testutil::tiny_world_config(56);
  cfg.n_docs = 20;
  cfg.top_m = 2;
  World world = generate_world(cfg);
  const auto& qid = world.train_queries[0].query_id;
  LabeledDataset dataset;

  // a slice with no relevant docs scores 0.0
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& d : world.corpus)
    if (!world.truth.is_relevant(qid, d.doc_id))
      scored.push_back({d.doc_id, static_cast<double>(scored.size())});
  RankedList irrelevant_only = RankedList::from_scores(qid, scored, 10);
  CHECK(false_negative_rate(world, dataset, irrelevant_only, 10) == 0.0);

  // top_n beyond list length
  CHECK_THROWS_AS(false_negative_rate(world, dataset, irrelevant_only, 11), DimensionError);

  // empty eligible slice: every candidate is a labeled positive
  const auto& rel = world.truth.relevant(qid);
  std::vector<std::pair<std::string, double>> rel_scored;
  for (const auto& did : rel) {
    dataset.add_positive(qid, did);
    rel_scored.push_back({did, 1.0});
  }
  RankedList all_positive = RankedList::from_scores(qid, rel_scored);
  CHECK_THROWS_AS(
      false_negative_rate(world, dataset, all_positive,
                          static_cast<int>(all_positive.entries.size())),
      DimensionError);
}

TEST_CASE("weak pooling retrievers leave more unlabeled positives") {
  WorldConfig cfg = testutil::tiny_world_config(300);
  cfg.n_docs = 300;
  cfg.n_train_queries = 25;
  cfg.top_m = 8;
  World world_a = generate_world(cfg);
  World world_b = world_a;

  auto count_unlabeled_positives = [&](World& world, double pooler_sigma) {
    Retriever pooler = Retriever::oracle_noisy(world, pooler_sigma, 5);
    PoolingResult pooling =
        simulate_pooling(world, pooler, 12, 8, PoolingMode::deterministic, 5);
    std::size_t count = 0;  // exhaustive r=1 && l=0 count
    for (const auto& q : world.train_queries)
      for (const auto& did : world.truth.relevant(q.query_id))
        if (!pooling.dataset.is_positive(q.query_id, did)) ++count;
    return count;
  };
  std::size_t weak = count_unlabeled_positives(world_a, 4.0);
  std::size_t strong = count_unlabeled_positives(world_b, 0.2);
  CHECK(weak > strong);
}

TEST_CASE("stronger samplers surface more unlabeled positives") {
  // weak pooler fixes the labels; sampler strength varies
  double weak_total = 0.0, strong_total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    WorldConfig cfg = testutil::tiny_world_config(seed + 200);
    cfg.n_docs = 300;
    cfg.n_train_queries = 20;
    cfg.top_m = 12;
    World world = generate_world(cfg);
    Retriever pooler = Retriever::feature_subset(2);
    PoolingResult pooling =
        simulate_pooling(world, pooler, 10, 1, PoolingMode::deterministic, seed);
    if (pooling.dataset.num_queries() == 0) continue;

    Retriever weak = Retriever::oracle_noisy(world, 2.0, seed + 1);
    Retriever strong = Retriever::oracle_noisy(world, 0.3, seed + 1);
    Run weak_run = weak.retrieve_all(world.train_queries, world.corpus, 50);
    Run strong_run = strong.retrieve_all(world.train_queries, world.corpus, 50);
    weak_total += mean_false_negative_rate(world, pooling.dataset, weak_run, 50);
    strong_total += mean_false_negative_rate(world, pooling.dataset, strong_run, 50);
  }
  CHECK(strong_total > weak_total);
}

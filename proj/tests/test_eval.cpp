#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "poolbias/config.hpp"
#include "poolbias/eval.hpp"
#include "poolbias/io.hpp"
#include "poolbias/pipeline.hpp"
#include "poolbias/rng.hpp"
#include "test_util.hpp"

using namespace poolbias;

namespace {

RankedList list_of(const std::string& qid, const std::vector<std::string>& ids) {
  RankedList list;
  list.query_id = qid;
  int rank = 1;
  for (const auto& id : ids)
    list.entries.push_back({id, static_cast<double>(100 - rank), rank}), ++rank;
  return list;
}

// brute-force reference metrics over one ranking
double oracle_mrr(const std::vector<int>& rel_by_pos, int k) {
  for (int i = 0; i < std::min<int>(k, rel_by_pos.size()); ++i)
    if (rel_by_pos[i]) return 1.0 / (i + 1);
  return 0.0;
}

double oracle_recall(const std::vector<int>& rel_by_pos, int k, int total_rel) {
  int hits = 0;
  for (int i = 0; i < std::min<int>(k, rel_by_pos.size()); ++i) hits += rel_by_pos[i];
  return static_cast<double>(hits) / total_rel;
}

double dcg(const std::vector<int>& rel_by_pos, int k) {
  double out = 0.0;
  for (int i = 0; i < std::min<int>(k, rel_by_pos.size()); ++i)
    out += rel_by_pos[i] ? 1.0 / std::log2(i + 2.0) : 0.0;
  return out;
}

// ideal DCG by exhaustive max over all permutations (n <= 6)
double oracle_idcg(std::vector<int> rel, int k) {
  std::sort(rel.begin(), rel.end());
  double best = 0.0;
  do {
    best = std::max(best, dcg(rel, k));
  } while (std::next_permutation(rel.begin(), rel.end()));
  return best;
}

}  // namespace

TEST_CASE("mrr hand values") {
  GroundTruth truth;
  truth.add("q1", "r");
  truth.add("q2", "r");
  Run run = {list_of("q1", {"r", "x", "y"}), list_of("q2", {"a", "b", "c", "r"})};
  EvalResult mrr = mrr_at_k(run, truth, 10);
  CHECK(mrr.per_query[0].second == 1.0);
  CHECK(mrr.per_query[1].second == doctest::Approx(0.25));
  CHECK(mrr.macro == doctest::Approx(0.625));

  // first relevant at rank 3
  Run run3 = {list_of("q1", {"x", "y", "r"})};
  CHECK(mrr_at_k(run3, truth, 10).macro == doctest::Approx(1.0 / 3.0));

  // nothing relevant within cutoff
  CHECK(mrr_at_k(run3, truth, 2).macro == 0.0);
}

TEST_CASE("queries absent from the truth are excluded and counted") {
  GroundTruth truth;
  truth.add("q1", "r");
  Run run = {list_of("q1", {"r"}), list_of("ghost", {"a", "b"})};
  EvalResult mrr = mrr_at_k(run, truth, 5);
  CHECK(mrr.per_query.size() == 1);
  CHECK(mrr.skipped == 1);
  CHECK(mrr.macro == 1.0);
}

TEST_CASE("ndcg hand values") {
  GroundTruth truth;
  truth.add("q", "r");
  Run run = {list_of("q", {"x", "r"})};
  CHECK(ndcg_at_k(run, truth, 2).macro == doctest::Approx(1.0 / std::log2(3.0)));

  GroundTruth truth2;
  truth2.add("q", "a");
  truth2.add("q", "b");
  Run ideal = {list_of("q", {"a", "b", "x", "y"})};
  CHECK(ndcg_at_k(ideal, truth2, 4).macro == doctest::Approx(1.0));
}

TEST_CASE("recall hand values") {
  GroundTruth truth;
  for (const char* d : {"r1", "r2", "r3", "r4", "r5"}) truth.add("q", d);
  Run run = {list_of("q", {"r1", "x", "r2", "y"})};
  CHECK(recall_at_k(run, truth, 4).macro == doctest::Approx(0.4));
  Run everything = {list_of("q", {"r1", "r2", "r3", "r4", "r5", "x"})};
  CHECK(recall_at_k(everything, truth, 6).macro == doctest::Approx(1.0));
}

TEST_CASE("metrics agree with brute force on all rankings of up to 5 docs") {
  // the full <=6 sweep runs in the acceptance suite; this is the fast version
  std::vector<std::string> ids = {"a", "b", "c", "d", "e"};
  for (int n = 1; n <= 5; ++n) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int mask = 1; mask < (1 << n); ++mask) {
      GroundTruth truth;
      for (int i = 0; i < n; ++i)
        if (mask & (1 << i)) truth.add("q", ids[i]);
      std::sort(perm.begin(), perm.end());
      do {
        std::vector<std::string> order;
        std::vector<int> rel_by_pos;
        for (int p : perm) {
          order.push_back(ids[p]);
          rel_by_pos.push_back((mask & (1 << p)) ? 1 : 0);
        }
        Run run = {list_of("q", order)};
        int total_rel = __builtin_popcount(static_cast<unsigned>(mask));
        for (int k = 1; k <= n; ++k) {
          CHECK(mrr_at_k(run, truth, k).macro == doctest::Approx(oracle_mrr(rel_by_pos, k)));
          CHECK(recall_at_k(run, truth, k).macro ==
                doctest::Approx(oracle_recall(rel_by_pos, k, total_rel)));
          double idcg = oracle_idcg(rel_by_pos, k);
          double expect = idcg > 0.0 ? dcg(rel_by_pos, k) / idcg : 0.0;
          CHECK(ndcg_at_k(run, truth, k).macro == doctest::Approx(expect));
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
}

TEST_CASE("mrr and recall are non-decreasing in k") {
  World world = generate_world(testutil::tiny_world_config(61));
  Retriever noisy = Retriever::oracle_noisy(world, 1.0, 3);
  Run run = noisy.retrieve_all(world.test_queries, world.corpus, 40);
  double prev_mrr = 0.0, prev_recall = 0.0;
  for (int k = 1; k <= 40; k += 3) {
    double m = mrr_at_k(run, world.truth, k).macro;
    double r = recall_at_k(run, world.truth, k).macro;
    CHECK(m >= prev_mrr);
    CHECK(r >= prev_recall);
    CHECK(m <= 1.0);
    CHECK(r <= 1.0);
    CHECK(ndcg_at_k(run, world.truth, k).macro <= 1.0);
    prev_mrr = m;
    prev_recall = r;
  }
}

TEST_CASE("rerank is a permutation of the input slice and respects ties") {
  World world = generate_world(testutil::tiny_world_config(62));
  std::map<std::string, const Document*> docs;
  for (const auto& d : world.corpus) docs[d.doc_id] = &d;
  Retriever noisy = Retriever::oracle_noisy(world, 1.0, 5);
  const Query& q = world.test_queries[1];
  RankedList candidates = noisy.retrieve(q, world.corpus, 25);

  DifferentiableScorer model(ScorerArch::linear, 3 * world.config.feature_dim, 0, 9);
  RankedList reranked = rerank(model, q, docs, candidates, 10);
  REQUIRE(reranked.entries.size() == 10);
  std::set<std::string> in, out;
  for (int i = 0; i < 10; ++i) in.insert(candidates.entries[i].doc_id);
  for (const auto& e : reranked.entries) out.insert(e.doc_id);
  CHECK(in == out);
  CHECK_NOTHROW(reranked.check_invariants());

  // constant scorer: pure tie-break by ascending doc id
  auto flat = DifferentiableScorer::from_params(
      ScorerArch::linear, 3 * world.config.feature_dim, 0,
      std::vector<double>(3 * world.config.feature_dim + 1, 0.0));
  RankedList tied = rerank(flat, q, docs, candidates, 10);
  for (std::size_t i = 1; i < tied.entries.size(); ++i)
    CHECK(tied.entries[i - 1].doc_id < tied.entries[i].doc_id);
}

TEST_CASE("reranking with the retriever's own scorer is a fixed point") {
  World world = generate_world(testutil::tiny_world_config(63));
  std::map<std::string, const Document*> docs;
  for (const auto& d : world.corpus) docs[d.doc_id] = &d;
  DifferentiableScorer model(ScorerArch::linear, 3 * world.config.feature_dim, 0, 31);
  Retriever self = Retriever::trained(model);
  const Query& q = world.test_queries[0];
  RankedList candidates = self.retrieve(q, world.corpus, 15);
  RankedList reranked = rerank(model, q, docs, candidates, 15);
  for (std::size_t i = 0; i < reranked.entries.size(); ++i)
    CHECK(reranked.entries[i].doc_id == candidates.entries[i].doc_id);
}

TEST_CASE("spearman handles ties and undefined cases") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> inc = {2.0, 4.0, 6.0, 8.0};
  std::vector<double> dec = {4.0, 3.0, 2.0, 1.0};
  CHECK(*spearman(x, inc) == doctest::Approx(1.0));
  CHECK(*spearman(x, dec) == doctest::Approx(-1.0));

  std::vector<double> constant = {5.0, 5.0, 5.0, 5.0};
  CHECK(!spearman(x, constant).has_value());
  CHECK(!spearman(constant, x).has_value());

  // binary side with ties: sign must match the obvious direction
  std::vector<double> w = {0.1, 0.2, 0.9, 0.8};
  std::vector<double> r = {0.0, 0.0, 1.0, 1.0};
  CHECK(*spearman(w, r) > 0.8);
}

TEST_CASE("probe: constant selection scores give undefined correlation") {
  World world = generate_world(testutil::tiny_world_config(64));
  auto flat = DifferentiableScorer::from_params(
      ScorerArch::linear, 3 * world.config.feature_dim, 0,
      std::vector<double>(3 * world.config.feature_dim + 1, 0.0));
  Retriever noisy = Retriever::oracle_noisy(world, 0.5, 2);
  const Query& q = world.train_queries[0];
  RankedList candidates = noisy.retrieve(q, world.corpus, 20);
  const std::string anchor = *world.truth.relevant(q.query_id).begin();
  ProbeResult probe = wr_relevance_probe(flat, world, candidates, anchor, 20, 1.0);
  for (const auto& row : probe.rows) CHECK(row.w_r == 1.0);
  CHECK(!probe.rho.has_value());
}

TEST_CASE("probe sign is fixed by construction of the selection model") {
  // w_r = exp((S_j - S_i)/tau): a selection model that scores relevant
  // candidates low produces low w_r on them, hence rho < 0; flipping the
  // model flips the sign.
  World world = generate_world(testutil::tiny_world_config(65));
  const Query& q = world.train_queries[0];
  Retriever oracle = Retriever::oracle_noisy(world, 0.0, 1);
  RankedList candidates = oracle.retrieve(q, world.corpus, 30);
  const std::string anchor = *world.truth.relevant(q.query_id).begin();

  // linear weights on the product block track latent similarity
  std::vector<double> params(3 * world.config.feature_dim + 1, 0.0);
  for (int i = 0; i < world.config.latent_dim; ++i)
    params[2 * world.config.feature_dim + i] = -1.0;
  auto anti = DifferentiableScorer::from_params(ScorerArch::linear,
                                                3 * world.config.feature_dim, 0, params);
  ProbeResult probe = wr_relevance_probe(anti, world, candidates, anchor, 30, 1.0);
  REQUIRE(probe.rho.has_value());
  CHECK(*probe.rho < 0.0);

  for (auto& p : params) p = -p;
  auto pro = DifferentiableScorer::from_params(ScorerArch::linear,
                                               3 * world.config.feature_dim, 0, params);
  ProbeResult flipped = wr_relevance_probe(pro, world, candidates, anchor, 30, 1.0);
  REQUIRE(flipped.rho.has_value());
  CHECK(*flipped.rho > 0.0);
}

TEST_CASE("ipw estimator is unbiased; the naive estimator is not") {
  WorldConfig wc;
  wc.n_docs = 50;
  wc.n_train_queries = 10;
  wc.n_dev_queries = 1;
  wc.n_test_queries = 1;
  wc.feature_dim = 6;
  wc.latent_dim = 3;
  wc.top_m = 8;
  wc.seed = 404;
  World world = generate_world(wc);
  Retriever pooler = Retriever::feature_subset(2);
  simulate_pooling(world, pooler, 5, 1, PoolingMode::stochastic, 11);

  DifferentiableScorer fixed(ScorerArch::linear, 3 * wc.feature_dim, 0, 5);
  IpwCheckResult check = ipw_unbiasedness_check(world, fixed, 10000, 77);
  CHECK(check.positivity_violations == 0);
  CHECK(check.full_risk > 0.0);
  CHECK_MESSAGE(check.ipw_gap <= 3.0 * check.mc_stderr, "gap ", check.ipw_gap, " stderr ",
                check.mc_stderr);
  CHECK(check.naive_gap > check.ipw_gap);
}

TEST_CASE("degenerate propensity of one makes every estimator exact") {
  WorldConfig wc = testutil::tiny_world_config(405);
  wc.n_docs = 30;
  wc.n_train_queries = 4;
  World world = generate_world(wc);
  // all p_sel = 1: fill the record by hand
  for (const auto& q : world.train_queries)
    for (const auto& d : world.corpus) world.selection.set(q.query_id, d.doc_id, true, 1.0);
  DifferentiableScorer fixed(ScorerArch::linear, 3 * wc.feature_dim, 0, 6);
  IpwCheckResult check = ipw_unbiasedness_check(world, fixed, 50, 3);
  CHECK(check.ipw_gap == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(check.naive_gap == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(check.mc_stderr == doctest::Approx(0.0));
}

TEST_CASE("zero propensity pairs are excluded and counted") {
  WorldConfig wc = testutil::tiny_world_config(406);
  wc.n_docs = 20;
  wc.n_train_queries = 2;
  World world = generate_world(wc);
  for (const auto& q : world.train_queries)
    for (const auto& d : world.corpus) world.selection.set(q.query_id, d.doc_id, true, 1.0);
  // break positivity for one irrelevant doc in one query
  const auto& qid = world.train_queries[0].query_id;
  std::string victim;
  for (const auto& d : world.corpus)
    if (!world.truth.is_relevant(qid, d.doc_id)) {
      victim = d.doc_id;
      break;
    }
  world.selection.set(qid, victim, false, 0.0);
  DifferentiableScorer fixed(ScorerArch::linear, 3 * wc.feature_dim, 0, 6);
  IpwCheckResult check = ipw_unbiasedness_check(world, fixed, 20, 3);
  CHECK(check.positivity_violations == 1);
  // the violating pair's mass is missing from the estimator
  CHECK(check.ipw_gap > 0.0);
}

TEST_CASE("ipw gap shrinks with more resamples") {
  WorldConfig wc;
  wc.n_docs = 40;
  wc.n_train_queries = 8;
  wc.n_dev_queries = 1;
  wc.n_test_queries = 1;
  wc.feature_dim = 6;
  wc.latent_dim = 3;
  wc.top_m = 6;
  wc.seed = 500;
  World world = generate_world(wc);
  Retriever pooler = Retriever::feature_subset(2);
  simulate_pooling(world, pooler, 5, 1, PoolingMode::stochastic, 21);
  DifferentiableScorer fixed(ScorerArch::linear, 3 * wc.feature_dim, 0, 5);

  std::vector<double> small_gaps, big_gaps;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    small_gaps.push_back(ipw_unbiasedness_check(world, fixed, 100, seed).ipw_gap);
    big_gaps.push_back(ipw_unbiasedness_check(world, fixed, 10000, seed).ipw_gap);
  }
  std::sort(small_gaps.begin(), small_gaps.end());
  std::sort(big_gaps.begin(), big_gaps.end());
  CHECK(big_gaps[5] < small_gaps[5]);  // 10-seed median comparison
}

TEST_CASE("sign test closed form") {
  std::vector<double> a = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<double> b = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto p = sign_test_pvalue(a, b);  // one side wins all ten
  REQUIRE(p.has_value());
  CHECK(*p == doctest::Approx(2.0 / 1024.0).epsilon(1e-9));

  auto tied = sign_test_pvalue(a, a);
  CHECK(!tied.has_value());

  std::vector<double> c = {1, 0, 1, 0};
  std::vector<double> d = {0, 1, 0, 1};
  CHECK(*sign_test_pvalue(c, d) == doctest::Approx(1.0));
}

TEST_CASE("metrics csv writes macro rows that read back") {
  testutil::TempDir tmp("eval_csv");
  GroundTruth truth;
  truth.add("q1", "r");
  Run run = {list_of("q1", {"r", "x"})};
  std::vector<EvalResult> results = {mrr_at_k(run, truth, 10), recall_at_k(run, truth, 10)};
  std::string path = tmp.path() + "/metrics.csv";
  io::write_file(path, metrics_to_csv(results));
  auto macros = read_metric_macros(path);
  CHECK(macros.at({"mrr", 10}) == 1.0);
  CHECK(macros.at({"recall", 10}) == 1.0);
}

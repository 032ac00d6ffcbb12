#include <doctest.h>

#include "poolbias/config.hpp"
#include "poolbias/pipeline.hpp"

using namespace poolbias;

TEST_CASE("defaults resolve and required keys are enforced") {
  auto cfg = ExperimentConfig::from_string("world.seed = 7\n");
  CHECK(cfg.get_int("world.n_docs") == 2000);
  CHECK(cfg.get_double("train.tau") == 1.0);
  CHECK(cfg.get("train.regime") == "naive");
  CHECK(cfg.seeds().size() == 10);

  auto empty = ExperimentConfig::from_string("");
  try {
    empty.world();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("world.seed") != std::string::npos);
  }
}

TEST_CASE("unknown and duplicate keys are rejected") {
  CHECK_THROWS_AS(ExperimentConfig::from_string("world.seed = 1\nworld.bogus = 2\n"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_string("world.seed = 1\nworld.seed = 2\n"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_string("world.seed\n"), ConfigError);
}

TEST_CASE("comments and blank lines are ignored") {
  auto cfg = ExperimentConfig::from_string(
      "# canonical world\nworld.seed = 3   # inline comment\n\n   \ntrain.tau = 2.5\n");
  CHECK(cfg.get_int("world.seed") == 3);
  CHECK(cfg.get_double("train.tau") == 2.5);
}

TEST_CASE("typed getters validate their values") {
  auto cfg = ExperimentConfig::from_string("world.seed = 1\ntrain.steps = many\n");
  CHECK_THROWS_AS(cfg.get_int("train.steps"), ConfigError);
  auto cfg2 = ExperimentConfig::from_string("world.seed = 1\ntrain.regime = cosmic\n");
  CHECK_THROWS_AS(cfg2.train(), ConfigError);
  auto cfg3 = ExperimentConfig::from_string("world.seed = 1\neval.rerank = maybe\n");
  CHECK_THROWS_AS(cfg3.get_bool("eval.rerank"), ConfigError);
}

TEST_CASE("pool spec resolves the auto subset width") {
  auto cfg = ExperimentConfig::from_string("world.seed = 1\nworld.latent_dim = 7\n");
  CHECK(cfg.pool().subset_dims == 4);  // ceil(7/2)
  auto cfg2 = ExperimentConfig::from_string(
      "world.seed = 1\npool.subset_dims = 3\npool.mode = stochastic\n");
  CHECK(cfg2.pool().subset_dims == 3);
  CHECK(cfg2.pool().mode == PoolingMode::stochastic);
}

TEST_CASE("world fingerprint tracks only world keys") {
  auto a = ExperimentConfig::from_string("world.seed = 1\ntrain.tau = 1\n");
  auto b = ExperimentConfig::from_string("world.seed = 1\ntrain.tau = 5\n");
  auto c = ExperimentConfig::from_string("world.seed = 2\n");
  CHECK(a.world_fingerprint() == b.world_fingerprint());
  CHECK(a.world_fingerprint() != c.world_fingerprint());
}

TEST_CASE("grid parsing") {
  auto grid = pipeline::parse_grid("tau=0.5,1,2,5");
  CHECK(grid.param == "tau");
  REQUIRE(grid.values.size() == 4);
  CHECK(grid.values[3] == 5.0);

  auto range = pipeline::parse_grid("eta=0.1..0.9");
  CHECK(range.param == "eta");
  REQUIRE(range.values.size() == 9);
  CHECK(range.values[0] == doctest::Approx(0.1));
  CHECK(range.values[8] == doctest::Approx(0.9));

  auto stepped = pipeline::parse_grid("eta=0.2..0.8:0.3");
  REQUIRE(stepped.values.size() == 3);

  CHECK_THROWS_AS(pipeline::parse_grid("tau"), ConfigError);
  CHECK_THROWS_AS(pipeline::parse_grid("lr=1,2"), ConfigError);
  CHECK_THROWS_AS(pipeline::parse_grid("tau=a,b"), ConfigError);
}

TEST_CASE("config dump echoes every key") {
  auto cfg = ExperimentConfig::from_string("world.seed = 9\n");
  std::string dump = cfg.dump();
  CHECK(dump.find("world.seed = 9") != std::string::npos);
  CHECK(dump.find("train.tau = 1.0") != std::string::npos);
  // dump parses back to an identical config
  auto again = ExperimentConfig::from_string(dump);
  CHECK(again.dump() == dump);
}

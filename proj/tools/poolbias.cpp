#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "poolbias/config.hpp"
#include "poolbias/pipeline.hpp"

namespace {

// exit codes: 0 ok, 2 config, 3 I/O, 4 schema, 5 incompatible worlds
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kIoError = 3;
constexpr int kSchemaError = 4;
constexpr int kIncompatible = 5;

struct Options {
  std::string config_path;
  std::string out_override;
  std::string seed_override;
  std::string seeds_override;
  bool quiet = false;
};

std::string resolve_out(const poolbias::ExperimentConfig& cfg, const Options& opt) {
  if (!opt.out_override.empty()) return opt.out_override;
  if (const char* env = std::getenv("POOLBIAS_OUT"); env != nullptr && env[0] != '\0')
    return env;
  return cfg.out_dir();
}

poolbias::ExperimentConfig load_config(const Options& opt) {
  if (opt.config_path.empty()) throw poolbias::ConfigError("missing --config");
  auto cfg = poolbias::ExperimentConfig::load(opt.config_path);
  if (!opt.seed_override.empty()) cfg.set("train.seed", opt.seed_override);
  if (!opt.seeds_override.empty()) cfg.set("seeds", opt.seeds_override);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"poolbias: a desk-scale lab for pooling-bias correction in ranker training"};
  app.require_subcommand(1);
  app.fallthrough(true);  // global flags may follow the subcommand

  Options opt;
  app.add_option("--config", opt.config_path, "experiment config file (key = value lines)");
  app.add_option("--out", opt.out_override, "output directory (overrides POOLBIAS_OUT and config)");
  app.add_option("--seed", opt.seed_override, "override train.seed");
  app.add_option("--seeds", opt.seeds_override, "override the seeds list (comma separated)");
  app.add_flag("--quiet", opt.quiet, "suppress progress output");

  auto* gen = app.add_subcommand("gen-world", "generate a synthetic world");
  auto* pool = app.add_subcommand("pool", "simulate pooling and labeling");
  auto* retrieve = app.add_subcommand("retrieve", "emit candidate run files");
  auto* train = app.add_subcommand("train", "train a ranker under the configured regime");
  auto* eval = app.add_subcommand("eval", "rerank the test run and report metrics");
  auto* sweep = app.add_subcommand("sweep", "grid over one hyperparameter");
  auto* report = app.add_subcommand("report", "aggregate completed runs");

  std::string grid;
  sweep->add_option("--grid", grid, "e.g. tau=0.5,1,2,5 or eta=0.1..0.9")->required();
  std::string runs_dir;
  report->add_option("--runs", runs_dir, "directory holding completed runs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n";
    return kConfigError;
  }

  std::ostringstream devnull;
  std::ostream& log = opt.quiet ? static_cast<std::ostream&>(devnull) : std::cout;

  try {
    if (report->parsed()) {
      poolbias::pipeline::run_report(runs_dir, std::cout);
      return kOk;
    }
    auto cfg = load_config(opt);
    std::string out = resolve_out(cfg, opt);
    if (gen->parsed()) {
      poolbias::pipeline::run_gen_world(cfg, out, log);
    } else if (pool->parsed()) {
      poolbias::pipeline::run_pool(cfg, out, log);
    } else if (retrieve->parsed()) {
      poolbias::pipeline::run_retrieve(cfg, out, log);
    } else if (train->parsed()) {
      poolbias::pipeline::run_train(cfg, out, out, log);
    } else if (eval->parsed()) {
      poolbias::pipeline::run_eval(cfg, out, out, log);
    } else if (sweep->parsed()) {
      poolbias::pipeline::run_sweep(cfg, out, grid, log);
    }
    return kOk;
  } catch (const poolbias::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kSchemaError;
  } catch (const poolbias::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const poolbias::IncompatibilityError& e) {
    std::cerr << "incompatible runs: " << e.what() << "\n";
    return kIncompatible;
  } catch (const poolbias::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

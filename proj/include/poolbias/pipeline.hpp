#ifndef POOLBIAS_PIPELINE_HPP_
#define POOLBIAS_PIPELINE_HPP_

#include <iosfwd>
#include <string>

#include "poolbias/config.hpp"
#include "poolbias/eval.hpp"
#include "poolbias/retriever.hpp"
#include "poolbias/training.hpp"
#include "poolbias/world.hpp"

namespace poolbias::pipeline {

// Canonical artifact names inside an output directory.
namespace artifact {
inline std::string corpus(const std::string& dir) { return dir + "/corpus.tsv"; }
inline std::string queries(const std::string& dir, const std::string& split) {
  return dir + "/queries_" + split + ".tsv";
}
inline std::string qrels_truth(const std::string& dir) { return dir + "/qrels_truth.tsv"; }
inline std::string labels(const std::string& dir) { return dir + "/labels.tsv"; }
inline std::string selection(const std::string& dir) { return dir + "/selection.tsv"; }
inline std::string run(const std::string& dir, const std::string& retriever,
                       const std::string& split) {
  return dir + "/run_" + retriever + "_" + split + ".tsv";
}
inline std::string checkpoint_r(const std::string& dir) {
  return dir + "/checkpoint_relevance.tsv";
}
inline std::string checkpoint_s(const std::string& dir) {
  return dir + "/checkpoint_selection.tsv";
}
inline std::string train_log(const std::string& dir) { return dir + "/train_log.csv"; }
inline std::string reranked(const std::string& dir) { return dir + "/reranked_test.tsv"; }
inline std::string metrics(const std::string& dir) { return dir + "/metrics.csv"; }
inline std::string probe(const std::string& dir) { return dir + "/probe.csv"; }
inline std::string meta(const std::string& dir) { return dir + "/meta.txt"; }
}  // namespace artifact

void ensure_dir(const std::string& dir);

/// Builds the retriever a config section describes, bound to `world` when it
/// needs the latent oracle.
Retriever make_pool_retriever(const ExperimentConfig& cfg, const World& world);
Retriever make_sampler_retriever(const ExperimentConfig& cfg, const World& world);

// File-based stages. gen-world/pool/retrieve regenerate the world from the
// config (generation is deterministic, and the latent oracle never touches
// disk); train/eval consume only the emitted files.
void run_gen_world(const ExperimentConfig& cfg, const std::string& out, std::ostream& log);
void run_pool(const ExperimentConfig& cfg, const std::string& out, std::ostream& log);
void run_retrieve(const ExperimentConfig& cfg, const std::string& out, std::ostream& log);
void run_train(const ExperimentConfig& cfg, const std::string& world_dir,
               const std::string& out, std::ostream& log);
void run_eval(const ExperimentConfig& cfg, const std::string& world_dir,
              const std::string& out, std::ostream& log);

struct GridSpec {
  std::string param;           // bare hyperparameter name, e.g. "tau"
  std::vector<double> values;
};
GridSpec parse_grid(const std::string& grid);  // "tau=0.5,1,2,5" or "eta=0.1..0.9"

void run_sweep(const ExperimentConfig& cfg, const std::string& out, const std::string& grid,
               std::ostream& log);
void run_report(const std::string& runs_dir, std::ostream& out);

/// In-memory pipeline for experiments and tests: world -> pooling ->
/// candidate runs -> train-ready data, all from one config.
struct Lab {
  World world;
  PoolingResult pooling;
  Run sampler_train, sampler_dev, sampler_test;
  Run pooler_train;
  TrainData strong_data;  // negatives from the sampler run
  TrainData weak_data;    // negatives from the pooling retriever's run

  static Lab build(const ExperimentConfig& cfg);

  TrainResult train(Regime regime, const TrainConfig& base) const;
  /// Reranks the test run with the model and returns macro MRR@k.
  double test_mrr(const DifferentiableScorer& model, int k) const;
};

}  // namespace poolbias::pipeline

#endif  // POOLBIAS_PIPELINE_HPP_

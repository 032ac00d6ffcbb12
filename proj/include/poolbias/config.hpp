#ifndef POOLBIAS_CONFIG_HPP_
#define POOLBIAS_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "poolbias/training.hpp"
#include "poolbias/world.hpp"

namespace poolbias {

/// Flat `key = value` experiment configuration. Unknown keys are rejected;
/// every key except the required ones has a documented default.
class ExperimentConfig {
 public:
  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);  // validates the key

  std::string get(const std::string& key) const;  // resolved value or default
  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  WorldConfig world() const;
  TrainConfig train() const;
  std::vector<std::uint64_t> seeds() const;
  std::vector<int> eval_cutoffs() const;
  std::string out_dir() const;  // config value only; CLI applies overrides

  /// Pooling stage parameters resolved from pool.* keys.
  struct PoolSpec {
    std::string retriever;  // feature_subset | oracle_noisy
    int subset_dims = 0;    // resolved (auto = ceil(T/2))
    double sigma = 0.0;
    int depth = 0;
    long budget = 0;
    PoolingMode mode = PoolingMode::deterministic;
    std::uint64_t seed = 0;
  };
  PoolSpec pool() const;

  struct SamplerSpec {
    std::string kind;  // oracle_noisy | feature_subset
    double sigma = 0.0;
    int subset_dims = 0;
    std::uint64_t seed = 0;
  };
  SamplerSpec sampler() const;

  int retrieve_k() const;
  int rerank_depth() const;
  bool rerank_enabled() const;

  /// Stable hex digest of the resolved world.* section; report uses it to
  /// refuse mixing runs from different worlds.
  std::string world_fingerprint() const;

  /// One line per known key: `key = resolved_value`.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace poolbias

#endif  // POOLBIAS_CONFIG_HPP_

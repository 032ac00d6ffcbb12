#ifndef POOLBIAS_SCORER_HPP_
#define POOLBIAS_SCORER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "poolbias/core.hpp"

namespace poolbias {

/// [q || d || q*d] (elementwise product block keeps a linear model able to
/// express similarity). Length 3F.
FeatureVector pair_features(const Query& q, const Document& d);

enum class ScorerArch { linear, mlp };

/// Tiny differentiable scoring model with exact analytic gradients.
///   linear: w.x + b                         params = [w, b]
///   mlp:    v.tanh(Wx + c) + b              params = [W row-major, c, v, b]
class DifferentiableScorer {
 public:
  DifferentiableScorer(ScorerArch arch, std::size_t input_dim, std::size_t hidden,
                       std::uint64_t seed);

  static DifferentiableScorer from_params(ScorerArch arch, std::size_t input_dim,
                                          std::size_t hidden, std::vector<double> params);

  double forward(std::span<const double> x) const;

  /// Accumulates d(upstream * forward(x))/dparam into grad.
  void backward(std::span<const double> x, double upstream, std::span<double> grad) const;

  ScorerArch arch() const { return arch_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  static std::size_t expected_param_count(ScorerArch arch, std::size_t input_dim,
                                          std::size_t hidden);

 private:
  DifferentiableScorer() = default;
  ScorerArch arch_ = ScorerArch::linear;
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> params_;
};

/// Checkpoint file: header `arch \t input_dim \t hidden`, then one parameter
/// per line in full decimal precision.
void save_checkpoint(const std::string& path, const DifferentiableScorer& scorer);
DifferentiableScorer load_checkpoint(const std::string& path);

class Optimizer {
 public:
  enum class Kind { sgd, adam };

  static Optimizer sgd(double lr);
  static Optimizer adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8);

  /// One update in place. Throws TrainingError (with the step index) on a
  /// non-finite gradient.
  void step(std::span<double> params, std::span<const double> grads);

  Kind kind() const { return kind_; }
  int steps_taken() const { return t_; }

 private:
  Kind kind_ = Kind::sgd;
  double lr_ = 0.0;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace poolbias

#endif  // POOLBIAS_SCORER_HPP_

#include "poolbias/scorer.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "poolbias/io.hpp"
#include "poolbias/rng.hpp"

namespace poolbias {

FeatureVector pair_features(const Query& q, const Document& d) {
  if (q.features.size() != d.features.size())
    throw DimensionError("feature dimension mismatch between query and document");
  const std::size_t f = q.features.size();
  FeatureVector x(3 * f);
  for (std::size_t i = 0; i < f; ++i) {
    x[i] = q.features[i];
    x[f + i] = d.features[i];
    x[2 * f + i] = q.features[i] * d.features[i];
  }
  return x;
}

std::size_t DifferentiableScorer::expected_param_count(ScorerArch arch, std::size_t input_dim,
                                                       std::size_t hidden) {
  if (arch == ScorerArch::linear) return input_dim + 1;
  return hidden * (input_dim + 1) + hidden + 1;
}

DifferentiableScorer::DifferentiableScorer(ScorerArch arch, std::size_t input_dim,
                                           std::size_t hidden, std::uint64_t seed)
    : arch_(arch), input_dim_(input_dim), hidden_(arch == ScorerArch::mlp ? hidden : 0) {
  if (input_dim == 0) throw ConfigError("scorer input_dim must be >= 1");
  if (arch == ScorerArch::mlp && hidden == 0) throw ConfigError("mlp hidden must be >= 1");
  params_.resize(expected_param_count(arch_, input_dim_, hidden_));

  rng::Engine engine(rng::mix(seed, rng::hash_str("scorer-init")));
  auto uniform_pm = [&](double bound) { return (2.0 * engine.uniform01() - 1.0) * bound; };
  if (arch_ == ScorerArch::linear) {
    double bound = 1.0 / std::sqrt(static_cast<double>(input_dim_));
    for (auto& p : params_) p = uniform_pm(bound);
  } else {
    // layout: [W (H x D, row-major), c (H), v (H), b]
    double bound_in = 1.0 / std::sqrt(static_cast<double>(input_dim_));
    double bound_hid = 1.0 / std::sqrt(static_cast<double>(hidden_));
    std::size_t i = 0;
    for (; i < hidden_ * input_dim_ + hidden_; ++i) params_[i] = uniform_pm(bound_in);
    for (; i < params_.size(); ++i) params_[i] = uniform_pm(bound_hid);
  }
}

DifferentiableScorer DifferentiableScorer::from_params(ScorerArch arch, std::size_t input_dim,
                                                       std::size_t hidden,
                                                       std::vector<double> params) {
  std::size_t h = arch == ScorerArch::mlp ? hidden : 0;
  if (params.size() != expected_param_count(arch, input_dim, h))
    throw DimensionError("parameter count does not match the architecture");
  DifferentiableScorer s;
  s.arch_ = arch;
  s.input_dim_ = input_dim;
  s.hidden_ = h;
  s.params_ = std::move(params);
  return s;
}

double DifferentiableScorer::forward(std::span<const double> x) const {
  if (x.size() != input_dim_) throw DimensionError("input dimension mismatch in forward");
  for (double v : x)
    if (!std::isfinite(v)) throw DimensionError("non-finite input to forward");
  if (arch_ == ScorerArch::linear) {
    double s = params_[input_dim_];  // bias
    for (std::size_t i = 0; i < input_dim_; ++i) s += params_[i] * x[i];
    return s;
  }
  const double* W = params_.data();
  const double* c = W + hidden_ * input_dim_;
  const double* v = c + hidden_;
  const double b = v[hidden_];
  double s = b;
  for (std::size_t h = 0; h < hidden_; ++h) {
    double pre = c[h];
    const double* row = W + h * input_dim_;
    for (std::size_t i = 0; i < input_dim_; ++i) pre += row[i] * x[i];
    s += v[h] * std::tanh(pre);
  }
  return s;
}

void DifferentiableScorer::backward(std::span<const double> x, double upstream,
                                    std::span<double> grad) const {
  if (x.size() != input_dim_) throw DimensionError("input dimension mismatch in backward");
  if (grad.size() != params_.size()) throw DimensionError("gradient buffer size mismatch");
  if (arch_ == ScorerArch::linear) {
    for (std::size_t i = 0; i < input_dim_; ++i) grad[i] += upstream * x[i];
    grad[input_dim_] += upstream;
    return;
  }
  const double* W = params_.data();
  const double* c = W + hidden_ * input_dim_;
  const double* v = c + hidden_;
  double* gW = grad.data();
  double* gc = gW + hidden_ * input_dim_;
  double* gv = gc + hidden_;
  double* gb = gv + hidden_;
  for (std::size_t h = 0; h < hidden_; ++h) {
    double pre = c[h];
    const double* row = W + h * input_dim_;
    for (std::size_t i = 0; i < input_dim_; ++i) pre += row[i] * x[i];
    double t = std::tanh(pre);
    gv[h] += upstream * t;
    double dpre = upstream * v[h] * (1.0 - t * t);
    gc[h] += dpre;
    double* grow = gW + h * input_dim_;
    for (std::size_t i = 0; i < input_dim_; ++i) grow[i] += dpre * x[i];
  }
  *gb += upstream;
}

void save_checkpoint(const std::string& path, const DifferentiableScorer& scorer) {
  std::string buf = (scorer.arch() == ScorerArch::linear ? std::string("linear")
                                                         : std::string("mlp"));
  buf += "\t" + std::to_string(scorer.input_dim()) + "\t" + std::to_string(scorer.hidden()) +
         "\n";
  for (double p : scorer.params()) buf += io::fmt_full(p) + "\n";
  io::write_file(path, buf);
}

DifferentiableScorer load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw SchemaError(path, 1, "missing checkpoint header");
  std::istringstream hs(header);
  std::string arch_name;
  std::size_t input_dim = 0, hidden = 0;
  if (!(hs >> arch_name >> input_dim >> hidden))
    throw SchemaError(path, 1, "malformed checkpoint header");
  ScorerArch arch;
  if (arch_name == "linear")
    arch = ScorerArch::linear;
  else if (arch_name == "mlp")
    arch = ScorerArch::mlp;
  else
    throw SchemaError(path, 1, "unknown architecture '" + arch_name + "'");
  std::vector<double> params;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    char* end = nullptr;
    double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str() || *end != '\0')
      throw SchemaError(path, lineno, "expected a parameter value");
    params.push_back(v);
  }
  try {
    return DifferentiableScorer::from_params(arch, input_dim, hidden, std::move(params));
  } catch (const DimensionError& e) {
    throw SchemaError(path, lineno, e.what());
  }
}

Optimizer Optimizer::sgd(double lr) {
  if (lr <= 0.0) throw ConfigError("learning rate must be > 0");
  Optimizer o;
  o.kind_ = Kind::sgd;
  o.lr_ = lr;
  return o;
}

Optimizer Optimizer::adam(double lr, double beta1, double beta2, double eps) {
  if (lr <= 0.0) throw ConfigError("learning rate must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("moment coefficients must be in [0, 1)");
  Optimizer o;
  o.kind_ = Kind::adam;
  o.lr_ = lr;
  o.beta1_ = beta1;
  o.beta2_ = beta2;
  o.eps_ = eps;
  return o;
}

void Optimizer::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size()) throw DimensionError("params/grads size mismatch");
  ++t_;
  for (double g : grads)
    if (!std::isfinite(g)) throw TrainingError(t_, "non-finite gradient");
  if (kind_ == Kind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grads[i];
    return;
  }
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  double bc1 = 1.0 - std::pow(beta1_, t_);
  double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    double mhat = m_[i] / bc1;
    double vhat = v_[i] / bc2;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace poolbias

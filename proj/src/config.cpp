#include "poolbias/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "poolbias/io.hpp"
#include "poolbias/rng.hpp"

namespace poolbias {

namespace {

struct KeySpec {
  const char* key;
  const char* def;  // nullptr = required
};

// The full key schema. Defaults encode the canonical desk-scale experiment.
constexpr KeySpec kSchema[] = {
    {"world.n_docs", "2000"},
    {"world.n_train_queries", "200"},
    {"world.n_dev_queries", "25"},
    {"world.n_test_queries", "50"},
    {"world.feature_dim", "16"},
    {"world.latent_dim", "8"},
    {"world.relevance_rule", "top_m"},
    {"world.top_m", "20"},
    {"world.theta_rel", "6.0"},
    {"world.min_rel", "1"},
    {"world.noise_feat", "0.25"},
    {"world.seed", nullptr},
    {"pool.retriever", "feature_subset"},
    {"pool.subset_dims", "0"},  // 0 = auto: ceil(latent_dim / 2)
    {"pool.sigma", "2.0"},
    {"pool.depth", "10"},
    {"pool.budget", "1"},
    {"pool.mode", "deterministic"},
    {"pool.seed", "101"},
    {"sampler.kind", "oracle_noisy"},
    {"sampler.sigma", "0.6"},
    {"sampler.subset_dims", "0"},
    {"sampler.seed", "11"},
    {"retrieve.k", "50"},
    {"train.regime", "naive"},
    {"train.tau", "1.0"},
    {"train.steps", "600"},
    {"train.batch_size", "32"},
    {"train.k_neg", "1"},
    {"train.top_n", "50"},
    {"train.seed", "1"},
    {"train.arch", "linear"},
    {"train.hidden", "16"},
    {"train.optimizer", "adam"},
    {"train.lr", "0.01"},
    {"train.beta1", "0.9"},
    {"train.beta2", "0.999"},
    {"train.eps", "1e-8"},
    {"train.clamp", "20"},
    {"train.eta", "0.5"},
    {"train.eval_every", "0"},
    {"train.patience", "0"},
    {"eval.cutoffs", "10"},
    {"eval.rerank_depth", "50"},
    {"eval.rerank", "true"},
    {"seeds", "1,2,3,4,5,6,7,8,9,10"},
    {"out", "runs"},
};

const KeySpec* find_spec(const std::string& key) {
  for (const auto& spec : kSchema)
    if (key == spec.key) return &spec;
  return nullptr;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t pos = s.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(s.substr(start)));
      break;
    }
    out.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_string(io::read_file(path));
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  ExperimentConfig cfg;
  std::size_t start = 0, lineno = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    std::string line =
        end == std::string::npos ? text.substr(start) : text.substr(start, end - start);
    ++lineno;
    start = end == std::string::npos ? text.size() + 1 : end + 1;

    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (cfg.values_.count(key) > 0)
      throw ConfigError("duplicate key '" + key + "' at line " + std::to_string(lineno));
    cfg.set(key, value);
  }
  return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (find_spec(key) == nullptr) throw ConfigError("unknown key '" + key + "'");
  values_[key] = value;
}

std::string ExperimentConfig::get(const std::string& key) const {
  const KeySpec* spec = find_spec(key);
  if (spec == nullptr) throw ConfigError("unknown key '" + key + "'");
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  if (spec->def == nullptr) throw ConfigError("missing required key: " + key);
  return spec->def;
}

long ExperimentConfig::get_int(const std::string& key) const {
  std::string v = get(key);
  char* end = nullptr;
  long out = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

double ExperimentConfig::get_double(const std::string& key) const {
  std::string v = get(key);
  char* end = nullptr;
  double out = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  std::string v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

WorldConfig ExperimentConfig::world() const {
  WorldConfig w;
  w.n_docs = static_cast<int>(get_int("world.n_docs"));
  w.n_train_queries = static_cast<int>(get_int("world.n_train_queries"));
  w.n_dev_queries = static_cast<int>(get_int("world.n_dev_queries"));
  w.n_test_queries = static_cast<int>(get_int("world.n_test_queries"));
  w.feature_dim = static_cast<int>(get_int("world.feature_dim"));
  w.latent_dim = static_cast<int>(get_int("world.latent_dim"));
  std::string rule = get("world.relevance_rule");
  if (rule == "top_m")
    w.rule = RelevanceRule::top_m;
  else if (rule == "threshold")
    w.rule = RelevanceRule::threshold;
  else
    throw ConfigError("world.relevance_rule must be top_m or threshold");
  w.top_m = static_cast<int>(get_int("world.top_m"));
  w.theta_rel = get_double("world.theta_rel");
  w.min_rel = static_cast<int>(get_int("world.min_rel"));
  w.noise_feat = get_double("world.noise_feat");
  w.seed = static_cast<std::uint64_t>(get_int("world.seed"));
  w.validate();
  return w;
}

TrainConfig ExperimentConfig::train() const {
  TrainConfig t;
  t.regime = parse_regime(get("train.regime"));
  t.tau = get_double("train.tau");
  t.steps = static_cast<int>(get_int("train.steps"));
  t.batch_size = static_cast<int>(get_int("train.batch_size"));
  t.k_neg = static_cast<int>(get_int("train.k_neg"));
  t.top_n = static_cast<int>(get_int("train.top_n"));
  t.seed = static_cast<std::uint64_t>(get_int("train.seed"));
  std::string arch = get("train.arch");
  if (arch == "linear")
    t.arch = ScorerArch::linear;
  else if (arch == "mlp")
    t.arch = ScorerArch::mlp;
  else
    throw ConfigError("train.arch must be linear or mlp");
  t.hidden = static_cast<int>(get_int("train.hidden"));
  std::string opt = get("train.optimizer");
  if (opt == "adam")
    t.optimizer = Optimizer::Kind::adam;
  else if (opt == "sgd")
    t.optimizer = Optimizer::Kind::sgd;
  else
    throw ConfigError("train.optimizer must be adam or sgd");
  t.lr = get_double("train.lr");
  t.beta1 = get_double("train.beta1");
  t.beta2 = get_double("train.beta2");
  t.eps = get_double("train.eps");
  t.clamp = get_double("train.clamp");
  t.eta = get_double("train.eta");
  t.eval_every = static_cast<int>(get_int("train.eval_every"));
  t.patience = static_cast<int>(get_int("train.patience"));
  t.validate();
  return t;
}

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
  std::vector<std::uint64_t> out;
  for (const auto& tok : split_list(get("seeds"))) {
    if (tok.empty()) continue;
    char* end = nullptr;
    long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0' || v < 0)
      throw ConfigError("seeds: expected a non-negative integer, got '" + tok + "'");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  if (out.empty()) throw ConfigError("seeds list is empty");
  return out;
}

std::vector<int> ExperimentConfig::eval_cutoffs() const {
  std::vector<int> out;
  for (const auto& tok : split_list(get("eval.cutoffs"))) {
    if (tok.empty()) continue;
    char* end = nullptr;
    long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0' || v < 1)
      throw ConfigError("eval.cutoffs: expected a positive integer, got '" + tok + "'");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw ConfigError("eval.cutoffs is empty");
  return out;
}

std::string ExperimentConfig::out_dir() const { return get("out"); }

ExperimentConfig::PoolSpec ExperimentConfig::pool() const {
  PoolSpec p;
  p.retriever = get("pool.retriever");
  if (p.retriever != "feature_subset" && p.retriever != "oracle_noisy")
    throw ConfigError("pool.retriever must be feature_subset or oracle_noisy");
  p.subset_dims = static_cast<int>(get_int("pool.subset_dims"));
  if (p.subset_dims == 0)
    p.subset_dims = (static_cast<int>(get_int("world.latent_dim")) + 1) / 2;
  p.sigma = get_double("pool.sigma");
  p.depth = static_cast<int>(get_int("pool.depth"));
  p.budget = get_int("pool.budget");
  std::string mode = get("pool.mode");
  if (mode == "deterministic")
    p.mode = PoolingMode::deterministic;
  else if (mode == "stochastic")
    p.mode = PoolingMode::stochastic;
  else
    throw ConfigError("pool.mode must be deterministic or stochastic");
  p.seed = static_cast<std::uint64_t>(get_int("pool.seed"));
  return p;
}

ExperimentConfig::SamplerSpec ExperimentConfig::sampler() const {
  SamplerSpec s;
  s.kind = get("sampler.kind");
  if (s.kind != "feature_subset" && s.kind != "oracle_noisy")
    throw ConfigError("sampler.kind must be feature_subset or oracle_noisy");
  s.sigma = get_double("sampler.sigma");
  s.subset_dims = static_cast<int>(get_int("sampler.subset_dims"));
  if (s.subset_dims == 0)
    s.subset_dims = (static_cast<int>(get_int("world.latent_dim")) + 1) / 2;
  s.seed = static_cast<std::uint64_t>(get_int("sampler.seed"));
  return s;
}

int ExperimentConfig::retrieve_k() const { return static_cast<int>(get_int("retrieve.k")); }
int ExperimentConfig::rerank_depth() const {
  return static_cast<int>(get_int("eval.rerank_depth"));
}
bool ExperimentConfig::rerank_enabled() const { return get_bool("eval.rerank"); }

std::string ExperimentConfig::world_fingerprint() const {
  std::string canon;
  for (const auto& spec : kSchema) {
    std::string key = spec.key;
    if (key.rfind("world.", 0) == 0) canon += key + "=" + get(key) + ";";
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(rng::hash_str(canon)));
  return buf;
}

std::string ExperimentConfig::dump() const {
  std::string out;
  for (const auto& spec : kSchema) out += std::string(spec.key) + " = " + get(spec.key) + "\n";
  return out;
}

}  // namespace poolbias

#include "mcd/config.hpp"

#include <fstream>

#include "mcd/targets.hpp"

namespace mcd {

namespace {

template <typename T>
T get_field(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

std::vector<double> get_scalar_or_array(const json& j, const std::string& key,
                                        const std::vector<double>& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  try {
    if (v.is_array()) return v.get<std::vector<double>>();
    return {v.get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

json scalar_or_array(const std::vector<double>& v) {
  if (v.size() == 1) return v[0];
  return v;
}

}  // namespace

Method method_from_string(const std::string& s) {
  if (s == "ula-ais") return Method::UlaAis;
  if (s == "ula-mcd") return Method::UlaMcd;
  if (s == "uha-ais") return Method::UhaAis;
  if (s == "uha-mcd") return Method::UhaMcd;
  if (s == "oracle") return Method::Oracle;
  throw ConfigError("method", "unknown method '" + s + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::UlaAis: return "ula-ais";
    case Method::UlaMcd: return "ula-mcd";
    case Method::UhaAis: return "uha-ais";
    case Method::UhaMcd: return "uha-mcd";
    case Method::Oracle: return "oracle";
  }
  throw ConfigError("method", "unknown method");
}

void RunConfig::validate() const {
  if (method == Method::Oracle) {
    try {
      oracle.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("oracle", e.what());
    }
    return;
  }
  try {
    target_name_from_string(target);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("target", e.what());
  }
  if (dim < 1) throw ConfigError("dim", "must be >= 1");
  if (!(pi0_var > 0.0)) throw ConfigError("pi0_var", "must be positive");
  if (steps < 1) throw ConfigError("steps", "must be >= 1");
  if (step_size.empty() ||
      (step_size.size() != 1 && step_size.size() != static_cast<std::size_t>(steps)))
    throw ConfigError("step_size", "need a scalar or one entry per step");
  for (double s : step_size)
    if (!(s > 0.0)) throw ConfigError("step_size", "entries must be positive");
  if (schedule != "linear") throw ConfigError("schedule", "only 'linear' is supported");
  if (particles < 1) throw ConfigError("particles", "must be >= 1");
  if (is_uha()) {
    if (!(damping > 0.0 && damping < 1.0)) throw ConfigError("damping", "must be in (0,1)");
    if (mass_diag.empty() ||
        (mass_diag.size() != 1 && mass_diag.size() != static_cast<std::size_t>(dim)))
      throw ConfigError("mass_diag", "need a scalar or one entry per dimension");
    for (double m : mass_diag)
      if (!(m > 0.0)) throw ConfigError("mass_diag", "entries must be positive");
  }
  if (is_mcd()) {
    if (train.iterations < 0) throw ConfigError("train.iterations", "must be >= 0");
    if (train.batch < 1) throw ConfigError("train.batch", "must be >= 1");
    if (!(train.lr > 0.0)) throw ConfigError("train.lr", "must be positive");
    if (train.loss != "backward-nll" && train.loss != "score-matching")
      throw ConfigError("train.loss", "must be 'backward-nll' or 'score-matching'");
    if (train.loss == "score-matching" && is_uha())
      throw ConfigError("train.loss", "score-matching applies to ULA only");
    if (train.hidden < 1 || train.time_dim < 1 || train.blocks < 0)
      throw ConfigError("train", "bad network sizes");
  }
  if (format != "json" && format != "csv") throw ConfigError("format", "json or csv");
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  cfg.method = method_from_string(get_field<std::string>(j, "method", "ula-ais"));
  cfg.target = get_field<std::string>(j, "target", cfg.target);
  cfg.dim = get_field<int>(j, "dim", cfg.dim);
  cfg.mixture_seed = get_field<std::uint64_t>(j, "mixture_seed", cfg.mixture_seed);
  cfg.pi0_mean = get_field<double>(j, "pi0_mean", cfg.pi0_mean);
  cfg.pi0_var = get_field<double>(j, "pi0_var", cfg.pi0_var);
  cfg.steps = get_field<int>(j, "steps", cfg.steps);
  cfg.step_size = get_scalar_or_array(j, "step_size", cfg.step_size);
  cfg.damping = get_field<double>(j, "damping", cfg.damping);
  cfg.mass_diag = get_scalar_or_array(j, "mass_diag", cfg.mass_diag);
  cfg.schedule = get_field<std::string>(j, "schedule", cfg.schedule);
  cfg.particles = get_field<long>(j, "particles", cfg.particles);
  if (j.contains("train")) {
    const json& t = j.at("train");
    cfg.train.iterations = get_field<int>(t, "iterations", cfg.train.iterations);
    cfg.train.batch = get_field<int>(t, "batch", cfg.train.batch);
    cfg.train.lr = get_field<double>(t, "lr", cfg.train.lr);
    cfg.train.loss = get_field<std::string>(t, "loss", cfg.train.loss);
    cfg.train.elbo_every = get_field<int>(t, "elbo_every", cfg.train.elbo_every);
    cfg.train.elbo_particles = get_field<int>(t, "elbo_particles", cfg.train.elbo_particles);
    cfg.train.hidden = get_field<int>(t, "hidden", cfg.train.hidden);
    cfg.train.time_dim = get_field<int>(t, "time_dim", cfg.train.time_dim);
    cfg.train.blocks = get_field<int>(t, "blocks", cfg.train.blocks);
  }
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    cfg.oracle.sigma0_sq = get_field<double>(o, "sigma0_sq", cfg.oracle.sigma0_sq);
    cfg.oracle.sigma_sq = get_field<double>(o, "sigma_sq", cfg.oracle.sigma_sq);
    cfg.oracle.steps = get_field<int>(o, "steps", cfg.oracle.steps);
    cfg.oracle.alpha = get_field<double>(o, "alpha", cfg.oracle.alpha);
    cfg.oracle_simulate = get_field<long>(o, "simulate", cfg.oracle_simulate);
  }
  cfg.seed = get_field<std::uint64_t>(j, "seed", cfg.seed);
  cfg.threads = get_field<unsigned>(j, "threads", cfg.threads);
  cfg.out = get_field<std::string>(j, "out", cfg.out);
  cfg.format = get_field<std::string>(j, "format", cfg.format);
  cfg.validate();
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["method"] = to_string(cfg.method);
  if (cfg.method == Method::Oracle) {
    j["oracle"] = json{{"sigma0_sq", cfg.oracle.sigma0_sq},
                       {"sigma_sq", cfg.oracle.sigma_sq},
                       {"steps", cfg.oracle.steps},
                       {"alpha", cfg.oracle.alpha},
                       {"simulate", cfg.oracle_simulate}};
  } else {
    j["target"] = cfg.target;
    j["dim"] = cfg.dim;
    if (cfg.target == "mixture") j["mixture_seed"] = cfg.mixture_seed;
    j["pi0_mean"] = cfg.pi0_mean;
    j["pi0_var"] = cfg.pi0_var;
    j["steps"] = cfg.steps;
    j["step_size"] = scalar_or_array(cfg.step_size);
    if (cfg.is_uha()) {
      j["damping"] = cfg.damping;
      j["mass_diag"] = scalar_or_array(cfg.mass_diag);
    }
    j["schedule"] = cfg.schedule;
    j["particles"] = cfg.particles;
    if (cfg.is_mcd()) {
      j["train"] = json{{"iterations", cfg.train.iterations},
                        {"batch", cfg.train.batch},
                        {"lr", cfg.train.lr},
                        {"loss", cfg.train.loss},
                        {"elbo_every", cfg.train.elbo_every},
                        {"elbo_particles", cfg.train.elbo_particles},
                        {"hidden", cfg.train.hidden},
                        {"time_dim", cfg.train.time_dim},
                        {"blocks", cfg.train.blocks}};
    }
  }
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["out"] = cfg.out;
  j["format"] = cfg.format;
  return j;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open file " + path);
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", std::string("parse error: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace mcd

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcd/oracle.hpp"

namespace mcd {

using json = nlohmann::ordered_json;

/// Configuration problem tied to a specific field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Method { UlaAis, UlaMcd, UhaAis, UhaMcd, Oracle };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

struct TrainSettings {
  int iterations = 2000;
  int batch = 128;
  double lr = 1e-3;
  std::string loss = "backward-nll";  // or "score-matching"
  int elbo_every = 0;
  int elbo_particles = 256;
  int hidden = 64;
  int time_dim = 16;
  int blocks = 2;
};

struct RunConfig {
  Method method = Method::UlaAis;
  std::string target = "gauss_shifted";
  int dim = 1;
  std::uint64_t mixture_seed = 1;
  double pi0_mean = 0.0;
  double pi0_var = 1.0;
  int steps = 64;
  std::vector<double> step_size{0.1};  // scalar broadcast or one per step
  double damping = 0.9;                // UHA only
  std::vector<double> mass_diag{1.0};  // scalar broadcast or one per dim
  std::string schedule = "linear";
  long particles = 2048;
  TrainSettings train;
  OracleSpec oracle;
  long oracle_simulate = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::string out;
  std::string format = "json";

  bool is_mcd() const { return method == Method::UlaMcd || method == Method::UhaMcd; }
  bool is_uha() const { return method == Method::UhaAis || method == Method::UhaMcd; }
  void validate() const;
};

RunConfig config_from_json(const json& j);
json config_to_json(const RunConfig& cfg);
RunConfig load_config_file(const std::string& path);

}  // namespace mcd

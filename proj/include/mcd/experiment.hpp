#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcd/config.hpp"
#include "mcd/trainer.hpp"

namespace mcd {

inline constexpr const char* kBuildStamp = "mcd 0.1.0";

struct RunResult {
  double log_z_estimate = 0.0;
  double elbo_mean = 0.0;
  double elbo_se = 0.0;
  long divergent = 0;
  long particles = 0;
  double wall_clock_s = 0.0;
  json config_echo;
  std::string build_stamp = kBuildStamp;
  std::optional<TrainReport> train_report;
  json extra;  // oracle statistics when method = oracle

  json to_json() const;
  std::string to_csv() const;
};

/// Execute one configuration end to end (optionally training first) and,
/// when config.out is set, write the result plus any training curve.
RunResult run_experiment(const RunConfig& config);

struct SuiteRow {
  json overrides;   // grid cell
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double log_z_estimate = 0.0;
  double elbo_mean = 0.0;
  long divergent = 0;
};

struct SuiteResult {
  std::vector<SuiteRow> rows;
  json summary;  // per-cell mean +- SE across seeds

  std::string to_csv() const;
};

/// Cross-product of the grid entries in suite_json["grid"] over the base
/// config, repeated per seed. Failures are recorded per cell and the suite
/// keeps going.
SuiteResult run_suite(const json& suite_json, const std::vector<std::uint64_t>& seeds,
                      unsigned suite_workers = 1);

std::string train_report_csv(const TrainReport& report);

}  // namespace mcd

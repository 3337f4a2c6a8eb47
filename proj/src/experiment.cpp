#include "mcd/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mcd/parallel.hpp"

namespace mcd {

namespace {

// Stream ids per purpose, so e.g. estimation noise is shared between ais and
// mcd methods under one seed while training consumes its own sub-streams.
constexpr std::uint64_t kStreamTrain = 1;
constexpr std::uint64_t kStreamNetInit = 2;
constexpr std::uint64_t kStreamEstimate = 3;
constexpr std::uint64_t kStreamOracle = 4;

std::vector<double> broadcast(const std::vector<double>& v, std::size_t n,
                              const char* field) {
  if (v.size() == n) return v;
  if (v.size() == 1) return std::vector<double>(n, v[0]);
  throw ConfigError(field, "expected a scalar or " + std::to_string(n) + " entries");
}

AnnealedPath build_path(const RunConfig& cfg) {
  RngStream target_rng(cfg.mixture_seed, 0);
  TargetDensity target = make_target(target_name_from_string(cfg.target), cfg.dim, target_rng);
  return AnnealedPath{DiagGaussian::isotropic(cfg.dim, cfg.pi0_mean, cfg.pi0_var),
                      std::move(target), linear_schedule(cfg.steps)};
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.iterations = cfg.train.iterations;
  tc.batch = cfg.train.batch;
  tc.adam.lr = cfg.train.lr;
  tc.loss = cfg.train.loss == "score-matching" ? LossKind::ScoreMatching : LossKind::BackwardNll;
  tc.elbo_every = cfg.train.elbo_every;
  tc.elbo_particles = cfg.train.elbo_particles;
  tc.workers = cfg.threads;
  return tc;
}

ScoreNetConfig net_config(const RunConfig& cfg, bool with_momentum) {
  ScoreNetConfig nc;
  nc.dim = cfg.dim;
  nc.with_momentum = with_momentum;
  nc.hidden = cfg.train.hidden;
  nc.time_dim = cfg.train.time_dim;
  nc.blocks = cfg.train.blocks;
  nc.max_step = cfg.steps;
  return nc;
}

struct EstimateOut {
  std::vector<double> log_w;
  long divergent = 0;
};

template <typename RunChain>
EstimateOut estimate_particles(long particles, std::uint64_t seed, unsigned workers,
                               RunChain&& run_chain) {
  EstimateOut out;
  out.log_w.resize(static_cast<std::size_t>(particles));
  std::vector<char> divergent(static_cast<std::size_t>(particles), 0);
  RngStream base(seed, kStreamEstimate);
  parallel_for(
      static_cast<std::size_t>(particles),
      [&](std::size_t i, unsigned) {
        RngStream rng = base.fork(i);
        divergent[i] = run_chain(rng, out.log_w[i]) ? 1 : 0;
      },
      workers);
  for (char d : divergent) out.divergent += d;
  return out;
}

void fill_estimate(RunResult& res, const EstimateOut& est) {
  res.particles = static_cast<long>(est.log_w.size());
  res.divergent = est.divergent;
  if (est.divergent == static_cast<long>(est.log_w.size()))
    throw std::runtime_error("run_experiment: every chain diverged");
  res.log_z_estimate = log_mean_exp(est.log_w);
  const auto [mean, se] = elbo_from_log_weights(est.log_w);
  res.elbo_mean = mean;
  res.elbo_se = se;
}

json oracle_result_json(const OracleResult& r) {
  return json{{"mean_ais", r.mean_ais},
              {"var_ais", r.var_ais},
              {"mean_mar", r.mean_mar},
              {"var_mar", r.var_mar}};
}

void run_oracle(const RunConfig& cfg, RunResult& res) {
  const OracleResult closed = oracle_closed_form(cfg.oracle);
  res.extra["closed_form"] = oracle_result_json(closed);
  res.extra["true_log_z"] = cfg.oracle.true_log_z();
  if (cfg.oracle_simulate > 0) {
    RngStream rng(cfg.seed, kStreamOracle);
    const OracleSimResult sim = oracle_simulate(cfg.oracle, cfg.oracle_simulate, rng);
    res.extra["simulated"] = json{{"n_chains", sim.n_chains},
                                  {"mean_ais", sim.mean_ais},
                                  {"se_mean_ais", sim.se_mean_ais},
                                  {"var_ais", sim.var_ais},
                                  {"se_var_ais", sim.se_var_ais},
                                  {"mean_mar", sim.mean_mar},
                                  {"se_mean_mar", sim.se_mean_mar},
                                  {"var_mar", sim.var_mar},
                                  {"se_var_mar", sim.se_var_mar}};
  }
  res.log_z_estimate = cfg.oracle.true_log_z();
  res.elbo_mean = closed.mean_ais;
  res.elbo_se = 0.0;
  res.particles = cfg.oracle_simulate;
}

void write_outputs(const RunResult& res, const RunConfig& cfg) {
  if (cfg.out.empty()) return;
  std::ofstream out(cfg.out);
  if (!out) throw std::runtime_error("cannot open output file " + cfg.out);
  if (cfg.format == "csv") {
    out << res.to_csv();
  } else {
    out << res.to_json().dump(2) << "\n";
  }
  if (res.train_report) {
    std::ofstream tout(cfg.out + ".train.csv");
    if (!tout) throw std::runtime_error("cannot open output file " + cfg.out + ".train.csv");
    tout << train_report_csv(*res.train_report);
  }
}

}  // namespace

json RunResult::to_json() const {
  json j;
  j["log_z_estimate"] = log_z_estimate;
  j["elbo_mean"] = elbo_mean;
  j["elbo_se"] = elbo_se;
  j["divergent"] = divergent;
  j["particles"] = particles;
  if (!extra.is_null()) j["oracle"] = extra;
  if (train_report) {
    j["train"] = json{{"iterations", train_report->losses.size()},
                      {"final_loss",
                       train_report->losses.empty() ? 0.0 : train_report->losses.back()},
                      {"final_log_z", train_report->final_log_z},
                      {"final_log_z_se", train_report->final_log_z_se},
                      {"wall_clock_s", train_report->wall_clock_s}};
  }
  j["config"] = config_echo;
  j["build_stamp"] = build_stamp;
  j["wall_clock_s"] = wall_clock_s;
  return j;
}

std::string RunResult::to_csv() const {
  char buf[256];
  std::string out = "log_z_estimate,elbo_mean,elbo_se,divergent,particles,wall_clock_s\n";
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%ld,%ld,%.6f\n", log_z_estimate,
                elbo_mean, elbo_se, divergent, particles, wall_clock_s);
  out += buf;
  return out;
}

std::string train_report_csv(const TrainReport& report) {
  std::string out = "iteration,loss,elbo\n";
  char buf[128];
  std::size_t ei = 0;
  for (std::size_t i = 0; i < report.losses.size(); ++i) {
    std::string elbo;
    if (ei < report.elbo_checkpoints.size() &&
        report.elbo_checkpoints[ei].first == static_cast<int>(i + 1)) {
      std::snprintf(buf, sizeof(buf), "%.17g", report.elbo_checkpoints[ei].second);
      elbo = buf;
      ++ei;
    }
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,", i + 1, report.losses[i]);
    out += buf;
    out += elbo;
    out += "\n";
  }
  return out;
}

RunResult run_experiment(const RunConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.config_echo = config_to_json(config);

  if (config.method == Method::Oracle) {
    run_oracle(config, res);
  } else if (!config.is_uha()) {
    AnnealedPath path = build_path(config);
    UlaConfig scfg;
    scfg.path = std::move(path);
    scfg.deltas = broadcast(config.step_size, static_cast<std::size_t>(config.steps), "step_size");
    scfg.validate();

    std::optional<ScoreNet> net;
    UlaScore score;
    if (config.method == Method::UlaMcd) {
      net.emplace(net_config(config, false), RngStream(config.seed, kStreamNetInit));
      if (config.train.iterations > 0)
        res.train_report = train(*net, scfg, train_config(config), RngStream(config.seed, kStreamTrain));
      score = warm_start_ula(&*net, &scfg.path);
    }
    const Variant variant = config.method == Method::UlaMcd ? Variant::Mcd : Variant::Ais;
    const EstimateOut est = estimate_particles(
        config.particles, config.seed, config.threads, [&](RngStream& rng, double& lw) {
          const Trajectory traj = run_ula(scfg, variant, rng, score);
          lw = traj.log_w;
          return traj.divergent;
        });
    fill_estimate(res, est);
  } else {
    AnnealedPath path = build_path(config);
    UhaConfig scfg;
    scfg.path = std::move(path);
    scfg.eps = broadcast(config.step_size, static_cast<std::size_t>(config.steps), "step_size");
    scfg.zeta_delta = -std::log(config.damping);
    scfg.mass_diag = broadcast(config.mass_diag, static_cast<std::size_t>(config.dim), "mass_diag");
    scfg.validate();

    std::optional<ScoreNet> net;
    MomentumScore score;
    if (config.method == Method::UhaMcd) {
      net.emplace(net_config(config, true), RngStream(config.seed, kStreamNetInit));
      if (config.train.iterations > 0)
        res.train_report = train(*net, scfg, train_config(config), RngStream(config.seed, kStreamTrain));
      score = warm_start_uha(&*net, scfg.mass_diag);
    }
    const Variant variant = config.method == Method::UhaMcd ? Variant::Mcd : Variant::Ais;
    const EstimateOut est = estimate_particles(
        config.particles, config.seed, config.threads, [&](RngStream& rng, double& lw) {
          const PhaseTrajectory traj = run_uha(scfg, variant, rng, score);
          lw = traj.log_w;
          return traj.divergent;
        });
    fill_estimate(res, est);
  }

  if (res.train_report) {
    res.train_report->final_log_z = res.log_z_estimate;
    res.train_report->final_log_z_se = res.elbo_se;
  }
  res.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_outputs(res, config);
  return res;
}

namespace {

std::vector<json> grid_cells(const json& grid) {
  std::vector<json> cells{json::object()};
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    if (!it.value().is_array())
      throw ConfigError("grid." + it.key(), "grid entries must be arrays");
    std::vector<json> next;
    next.reserve(cells.size() * it.value().size());
    for (const json& cell : cells) {
      for (const json& v : it.value()) {
        json c = cell;
        c[it.key()] = v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

}  // namespace

SuiteResult run_suite(const json& suite_json, const std::vector<std::uint64_t>& seeds,
                      unsigned suite_workers) {
  if (seeds.empty()) throw ConfigError("seeds", "need at least one seed");
  const json base = suite_json.contains("base") ? suite_json.at("base") : json::object();
  const std::vector<json> cells =
      grid_cells(suite_json.contains("grid") ? suite_json.at("grid") : json::object());

  SuiteResult result;
  result.rows.resize(cells.size() * seeds.size());
  parallel_for(
      result.rows.size(),
      [&](std::size_t idx, unsigned) {
        const std::size_t ci = idx / seeds.size();
        const std::uint64_t seed = seeds[idx % seeds.size()];
        SuiteRow& row = result.rows[idx];
        row.overrides = cells[ci];
        row.seed = seed;
        try {
          json cfg_json = base;
          for (auto it = cells[ci].begin(); it != cells[ci].end(); ++it)
            cfg_json[it.key()] = it.value();
          cfg_json["seed"] = seed;
          cfg_json["out"] = "";
          const RunConfig cfg = config_from_json(cfg_json);
          const RunResult rr = run_experiment(cfg);
          row.log_z_estimate = rr.log_z_estimate;
          row.elbo_mean = rr.elbo_mean;
          row.divergent = rr.divergent;
        } catch (const std::exception& e) {
          row.failed = true;
          row.error = e.what();
        }
      },
      suite_workers);

  json summary = json::array();
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    std::vector<double> estimates;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const SuiteRow& row = result.rows[ci * seeds.size() + si];
      if (!row.failed) estimates.push_back(row.log_z_estimate);
    }
    json cell_summary;
    cell_summary["cell"] = cells[ci];
    cell_summary["n_ok"] = estimates.size();
    cell_summary["n_failed"] = seeds.size() - estimates.size();
    if (!estimates.empty()) {
      const auto [mean, se] = mean_and_se(estimates);
      cell_summary["log_z_mean"] = mean;
      cell_summary["log_z_se"] = se;
    }
    summary.push_back(std::move(cell_summary));
  }
  result.summary = std::move(summary);
  return result;
}

namespace {

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

}  // namespace

std::string SuiteResult::to_csv() const {
  std::string out = "cell,seed,log_z_estimate,elbo_mean,divergent,failed,error\n";
  char buf[128];
  for (const SuiteRow& row : rows) {
    out += csv_quote(row.overrides.dump()) + ",";
    std::snprintf(buf, sizeof(buf), "%llu,", static_cast<unsigned long long>(row.seed));
    out += buf;
    if (row.failed) {
      out += ",,0,1," + csv_quote(row.error) + "\n";
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%ld,0,\n", row.log_z_estimate,
                    row.elbo_mean, row.divergent);
      out += buf;
    }
  }
  return out;
}

}  // namespace mcd

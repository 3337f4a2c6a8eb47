#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcd/experiment.hpp"

namespace {

using mcd::json;

// Flags mirror config keys one to one; a flag that was passed overrides the
// file value.
struct RunFlags {
  std::string config_path;
  std::string method, target, schedule, loss, out, format;
  int dim = 0, steps = 0, train_iters = -1, batch = 0;
  double step_size = 0.0, damping = 0.0, pi0_mean = 0.0, pi0_var = 0.0, lr = 0.0, mass = 0.0;
  long particles = 0;
  std::uint64_t seed = 0, mixture_seed = 0;
  unsigned threads = 0;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--method", f.method, "ula-ais | ula-mcd | uha-ais | uha-mcd | oracle");
  cmd->add_option("--target", f.target, "target density name");
  cmd->add_option("--dim", f.dim, "target dimension");
  cmd->add_option("--steps", f.steps, "annealing steps K");
  cmd->add_option("--step-size", f.step_size, "sampler step size");
  cmd->add_option("--damping", f.damping, "UHA momentum damping h");
  cmd->add_option("--mass", f.mass, "UHA mass diagonal value");
  cmd->add_option("--pi0-mean", f.pi0_mean, "initial distribution mean");
  cmd->add_option("--pi0-var", f.pi0_var, "initial distribution variance");
  cmd->add_option("--particles", f.particles, "importance samples for the estimate");
  cmd->add_option("--train-iters", f.train_iters, "training iterations (mcd methods)");
  cmd->add_option("--batch", f.batch, "training batch size");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--loss", f.loss, "backward-nll | score-matching");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--mixture-seed", f.mixture_seed, "seed for mixture component means");
  cmd->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out", f.out, "output file path");
  cmd->add_option("--format", f.format, "json | csv");
}

json merge_flags(const CLI::App* cmd, const RunFlags& f) {
  json j = json::object();
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw mcd::ConfigError("config", "cannot open file " + f.config_path);
    in >> j;
  }
  auto passed = [cmd](const std::string& name) { return cmd->count(name) > 0; };
  if (passed("--method")) j["method"] = f.method;
  if (passed("--target")) j["target"] = f.target;
  if (passed("--dim")) j["dim"] = f.dim;
  if (passed("--steps")) j["steps"] = f.steps;
  if (passed("--step-size")) j["step_size"] = f.step_size;
  if (passed("--damping")) j["damping"] = f.damping;
  if (passed("--mass")) j["mass_diag"] = f.mass;
  if (passed("--pi0-mean")) j["pi0_mean"] = f.pi0_mean;
  if (passed("--pi0-var")) j["pi0_var"] = f.pi0_var;
  if (passed("--particles")) j["particles"] = f.particles;
  if (passed("--train-iters")) j["train"]["iterations"] = f.train_iters;
  if (passed("--batch")) j["train"]["batch"] = f.batch;
  if (passed("--lr")) j["train"]["lr"] = f.lr;
  if (passed("--loss")) j["train"]["loss"] = f.loss;
  if (passed("--seed")) j["seed"] = f.seed;
  if (passed("--mixture-seed")) j["mixture_seed"] = f.mixture_seed;
  if (passed("--threads")) j["threads"] = f.threads;
  if (passed("--out")) j["out"] = f.out;
  if (passed("--format")) j["format"] = f.format;
  return j;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    seeds.push_back(std::stoull(csv.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return seeds;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    out.push_back(std::stod(csv.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

int cmd_run(const CLI::App* cmd, const RunFlags& flags) {
  const mcd::RunConfig cfg = mcd::config_from_json(merge_flags(cmd, flags));
  const mcd::RunResult res = mcd::run_experiment(cfg);
  std::cout << res.to_json().dump(2) << "\n";
  return 0;
}

int cmd_suite(const CLI::App* cmd, const RunFlags& flags, const std::string& seeds_csv,
              unsigned suite_workers) {
  (void)cmd;
  if (flags.config_path.empty()) throw mcd::ConfigError("config", "suite needs --config");
  std::ifstream in(flags.config_path);
  if (!in) throw mcd::ConfigError("config", "cannot open file " + flags.config_path);
  json suite_json;
  in >> suite_json;
  const auto seeds = parse_seeds(seeds_csv);
  const mcd::SuiteResult result = mcd::run_suite(suite_json, seeds, suite_workers);
  std::cout << result.summary.dump(2) << "\n";
  if (!flags.out.empty()) {
    std::ofstream csv(flags.out);
    if (!csv) throw std::runtime_error("cannot open output file " + flags.out);
    csv << result.to_csv();
    std::ofstream js(flags.out + ".summary.json");
    js << result.summary.dump(2) << "\n";
  }
  return 0;
}

int cmd_oracle(double sigma0_sq, double sigma_sq, int steps, double alpha, long simulate,
               std::uint64_t seed, const std::string& steps_grid, const std::string& alpha_grid,
               const std::string& out) {
  json cfg{{"method", "oracle"},
           {"oracle",
            {{"sigma0_sq", sigma0_sq},
             {"sigma_sq", sigma_sq},
             {"steps", steps},
             {"alpha", alpha},
             {"simulate", simulate}}},
           {"seed", seed}};
  const mcd::RunResult res = mcd::run_experiment(mcd::config_from_json(cfg));
  std::cout << res.to_json().dump(2) << "\n";
  if (!steps_grid.empty() && !alpha_grid.empty()) {
    std::vector<int> ks;
    for (double v : parse_double_list(steps_grid)) ks.push_back(static_cast<int>(v));
    const auto rows = mcd::oracle_figure_data(ks, parse_double_list(alpha_grid), sigma0_sq, sigma_sq);
    const std::string csv = mcd::oracle_figure_csv(rows);
    if (out.empty()) {
      std::cout << csv;
    } else {
      std::ofstream f(out);
      if (!f) throw std::runtime_error("cannot open output file " + out);
      f << csv;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"annealed importance sampling with learned backward kernels"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "execute one experiment configuration");
  add_run_flags(run, run_flags);

  RunFlags suite_flags;
  std::string seeds_csv = "0";
  unsigned suite_workers = 1;
  CLI::App* suite = app.add_subcommand("suite", "cross-product sweep over a config grid");
  suite->add_option("--config", suite_flags.config_path, "suite JSON (base + grid)")->required();
  suite->add_option("--seeds", seeds_csv, "comma-separated seeds");
  suite->add_option("--workers", suite_workers, "concurrent suite cells");
  suite->add_option("--out", suite_flags.out, "CSV output path");

  double o_s0 = 4.0, o_s = 1.0, o_alpha = 0.0;
  int o_steps = 8;
  long o_sim = 0;
  std::uint64_t o_seed = 0;
  std::string o_steps_grid, o_alpha_grid, o_out;
  CLI::App* oracle = app.add_subcommand("oracle", "closed-form Gaussian-chain statistics");
  oracle->add_option("--sigma0-sq", o_s0, "initial variance");
  oracle->add_option("--sigma-sq", o_s, "final variance");
  oracle->add_option("--steps", o_steps, "annealing steps K");
  oracle->add_option("--alpha", o_alpha, "mixing parameter in [0,1)");
  oracle->add_option("--simulate", o_sim, "Monte Carlo chains to cross-check");
  oracle->add_option("--seed", o_seed, "simulation seed");
  oracle->add_option("--steps-grid", o_steps_grid, "comma-separated K grid for figure CSV");
  oracle->add_option("--alpha-grid", o_alpha_grid, "comma-separated alpha grid for figure CSV");
  oracle->add_option("--out", o_out, "figure CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run, run_flags);
    if (suite->parsed()) return cmd_suite(suite, suite_flags, seeds_csv, suite_workers);
    if (oracle->parsed())
      return cmd_oracle(o_s0, o_s, o_steps, o_alpha, o_sim, o_seed, o_steps_grid, o_alpha_grid,
                        o_out);
  } catch (const mcd::ConfigError& e) {
    std::cerr << "{\"error\": \"config\", \"field\": \"" << e.field() << "\", \"message\": "
              << mcd::json(e.what()).dump() << "}\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\": \"runtime\", \"message\": " << mcd::json(e.what()).dump() << "}\n";
    return 1;
  }
  return 0;
}

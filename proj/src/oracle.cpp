#include "mcd/oracle.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mcd {

namespace {

std::vector<double> xi_schedule(const OracleSpec& spec, const std::vector<double>& sig_sq) {
  std::vector<double> xi(sig_sq.size());
  xi[0] = spec.sigma0_sq;
  const double a2 = spec.alpha * spec.alpha;
  for (std::size_t k = 1; k < xi.size(); ++k)
    xi[k] = a2 * xi[k - 1] + (1.0 - a2) * sig_sq[k];
  return xi;
}

struct Moments {
  double mean = 0.0, var = 0.0, se_mean = 0.0, se_var = 0.0;
};

Moments sample_moments(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - m.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m.var = m2 / (n - 1.0);
  m4 /= n;
  m.se_mean = std::sqrt(m.var / n);
  // Asymptotic standard error of the sample variance.
  const double var_of_var = (m4 - m.var * m.var * (n - 3.0) / (n - 1.0)) / n;
  m.se_var = std::sqrt(std::max(var_of_var, 0.0));
  return m;
}

}  // namespace

void OracleSpec::validate() const {
  if (!(sigma0_sq > 0.0)) throw std::invalid_argument("oracle: sigma0_sq must be positive");
  if (!(sigma_sq > 0.0 && sigma_sq < sigma0_sq))
    throw std::invalid_argument("oracle: need 0 < sigma_sq < sigma0_sq");
  if (steps < 1) throw std::invalid_argument("oracle: steps must be >= 1");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("oracle: alpha must be in [0,1)");
}

std::vector<double> OracleSpec::sigma_sq_schedule() const {
  std::vector<double> sig(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    sig[static_cast<std::size_t>(k)] = std::pow(sigma0_sq, 1.0 - t) * std::pow(sigma_sq, t);
  }
  return sig;
}

double OracleSpec::beta_k() const { return std::pow(sigma_sq / sigma0_sq, 1.0 / steps); }

double OracleSpec::true_log_z() const { return 0.5 * (kLog2Pi + std::log(sigma_sq)); }

OracleResult oracle_closed_form(const OracleSpec& spec) {
  spec.validate();
  const auto sig = spec.sigma_sq_schedule();
  const auto xi = xi_schedule(spec, sig);
  const int K = spec.steps;
  const double betaK = spec.beta_k();

  OracleResult out;
  out.xi_sq = xi;
  const double xiK = xi[static_cast<std::size_t>(K)];
  const double sigK = sig[static_cast<std::size_t>(K)];
  out.mean_mar = 0.5 * (kLog2Pi + std::log(xiK)) + 0.5 * (1.0 / xiK - 1.0 / sigK) * xiK;
  out.var_mar = 0.5 * (1.0 / xiK - 1.0 / sigK) * (1.0 / xiK - 1.0 / sigK) * xiK * xiK;

  double s1 = 0.0;
  for (int k = 1; k <= K; ++k)
    s1 += xi[static_cast<std::size_t>(k - 1)] / sig[static_cast<std::size_t>(k)];
  out.mean_ais = 0.5 * (kLog2Pi + std::log(spec.sigma0_sq)) + 0.5 * (betaK - 1.0) * s1;

  double v1 = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double x = xi[static_cast<std::size_t>(k - 1)];
    const double s = sig[static_cast<std::size_t>(k)];
    v1 += x * x / (2.0 * s * s);
  }
  double v2 = 0.0;
  const double a2 = spec.alpha * spec.alpha;
  for (int k = 1; k <= K; ++k) {
    const double xk = xi[static_cast<std::size_t>(k - 1)];
    double apow = 1.0;
    for (int l = k + 1; l <= K; ++l) {
      apow *= a2;
      v2 += apow * xk * xk /
            (sig[static_cast<std::size_t>(k)] * sig[static_cast<std::size_t>(l)]);
    }
  }
  out.var_ais = (betaK - 1.0) * (betaK - 1.0) * (v1 + v2);
  return out;
}

OracleSimResult oracle_simulate(const OracleSpec& spec, long n_chains, RngStream& rng) {
  spec.validate();
  if (n_chains < 2) throw std::invalid_argument("oracle_simulate: need at least 2 chains");
  const auto sig = spec.sigma_sq_schedule();
  const auto xi = xi_schedule(spec, sig);
  const int K = spec.steps;
  const double betaK = spec.beta_k();
  const double xiK = xi[static_cast<std::size_t>(K)];
  const double sigK = sig[static_cast<std::size_t>(K)];

  std::vector<double> ais(static_cast<std::size_t>(n_chains));
  std::vector<double> mar(static_cast<std::size_t>(n_chains));
  for (long c = 0; c < n_chains; ++c) {
    double x = std::sqrt(spec.sigma0_sq) * rng.next_normal();
    double quad = 0.0;
    for (int k = 1; k <= K; ++k) {
      quad += x * x / sig[static_cast<std::size_t>(k)];
      x = spec.alpha * x + std::sqrt((1.0 - spec.alpha * spec.alpha) *
                                     sig[static_cast<std::size_t>(k)]) *
                               rng.next_normal();
    }
    ais[static_cast<std::size_t>(c)] =
        0.5 * (kLog2Pi + std::log(spec.sigma0_sq)) + 0.5 * (betaK - 1.0) * quad;
    mar[static_cast<std::size_t>(c)] =
        0.5 * (kLog2Pi + std::log(xiK)) + 0.5 * (1.0 / xiK - 1.0 / sigK) * x * x;
  }

  const Moments ma = sample_moments(ais);
  const Moments mm = sample_moments(mar);
  OracleSimResult out;
  out.n_chains = n_chains;
  out.mean_ais = ma.mean;
  out.se_mean_ais = ma.se_mean;
  out.var_ais = ma.var;
  out.se_var_ais = ma.se_var;
  out.mean_mar = mm.mean;
  out.se_mean_mar = mm.se_mean;
  out.var_mar = mm.var;
  out.se_var_mar = mm.se_var;
  return out;
}

std::vector<Vec> oracle_sample_chain(const OracleSpec& spec, RngStream& rng) {
  spec.validate();
  const auto sig = spec.sigma_sq_schedule();
  std::vector<Vec> states;
  states.reserve(static_cast<std::size_t>(spec.steps) + 1);
  double x = std::sqrt(spec.sigma0_sq) * rng.next_normal();
  states.push_back(Vec{x});
  for (int k = 1; k <= spec.steps; ++k) {
    x = spec.alpha * x + std::sqrt((1.0 - spec.alpha * spec.alpha) *
                                   sig[static_cast<std::size_t>(k)]) *
                             rng.next_normal();
    states.push_back(Vec{x});
  }
  return states;
}

std::vector<OracleFigureRow> oracle_figure_data(const std::vector<int>& step_grid,
                                                const std::vector<double>& alpha_grid,
                                                double sigma0_sq, double sigma_sq) {
  std::vector<OracleFigureRow> rows;
  for (int K : step_grid) {
    for (double a : alpha_grid) {
      OracleSpec spec{sigma0_sq, sigma_sq, K, a};
      const OracleResult r = oracle_closed_form(spec);
      const double log_z = spec.true_log_z();
      const auto rmse = [log_z](double mean, double var) {
        return std::sqrt((mean - log_z) * (mean - log_z) + var);
      };
      rows.push_back({K, a, "ais", r.mean_ais, rmse(r.mean_ais, r.var_ais)});
      rows.push_back({K, a, "mar", r.mean_mar, rmse(r.mean_mar, r.var_mar)});
    }
  }
  return rows;
}

std::string oracle_figure_csv(const std::vector<OracleFigureRow>& rows) {
  std::string out = "steps,alpha,estimator,mean,rmse\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%s,%.17g,%.17g\n", r.steps, r.alpha,
                  r.estimator.c_str(), r.mean, r.rmse);
    out += buf;
  }
  return out;
}

}  // namespace mcd

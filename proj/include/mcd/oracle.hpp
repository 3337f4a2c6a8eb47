#pragma once

#include <string>
#include <vector>

#include "mcd/rng.hpp"
#include "mcd/vec.hpp"

namespace mcd {

/// One-dimensional Gaussian annealing chain with exactly invariant AR(1)
/// kernels: pi_k = N(0, sigma_k^2), sigma_k^2 geometric between sigma0_sq and
/// sigma_sq, transitions x' ~ N(alpha x, (1-alpha^2) sigma_k^2).
struct OracleSpec {
  double sigma0_sq = 4.0;
  double sigma_sq = 1.0;
  int steps = 8;
  double alpha = 0.0;

  void validate() const;
  std::vector<double> sigma_sq_schedule() const;  // sigma_0^2 .. sigma_K^2
  double beta_k() const;                          // (sigma^2/sigma0^2)^{1/K}
  /// gamma_K(x) = exp(-x^2 / (2 sigma^2)) is unnormalized here.
  double true_log_z() const;
};

struct OracleResult {
  std::vector<double> xi_sq;  // marginal variances under Q, xi_0^2 .. xi_K^2
  double mean_ais = 0.0;
  double var_ais = 0.0;
  double mean_mar = 0.0;
  double var_mar = 0.0;
};

/// Closed-form mean/variance of log w_ais and log w_mar; the double sum in
/// var_ais is evaluated directly in O(K^2).
OracleResult oracle_closed_form(const OracleSpec& spec);

struct OracleSimResult {
  long n_chains = 0;
  double mean_ais = 0.0, se_mean_ais = 0.0;
  double var_ais = 0.0, se_var_ais = 0.0;
  double mean_mar = 0.0, se_mean_mar = 0.0;
  double var_mar = 0.0, se_var_mar = 0.0;
};

OracleSimResult oracle_simulate(const OracleSpec& spec, long n_chains, RngStream& rng);

/// States x_0..x_K of one chain under the AR(1) proposal.
std::vector<Vec> oracle_sample_chain(const OracleSpec& spec, RngStream& rng);

struct OracleFigureRow {
  int steps = 0;
  double alpha = 0.0;
  std::string estimator;  // "ais" or "mar"
  double mean = 0.0;
  double rmse = 0.0;  // sqrt((mean - log Z)^2 + var)
};

std::vector<OracleFigureRow> oracle_figure_data(const std::vector<int>& step_grid,
                                                const std::vector<double>& alpha_grid,
                                                double sigma0_sq, double sigma_sq);

std::string oracle_figure_csv(const std::vector<OracleFigureRow>& rows);

}  // namespace mcd

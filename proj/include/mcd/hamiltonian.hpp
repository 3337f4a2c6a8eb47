#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mcd/langevin.hpp"
#include "mcd/rng.hpp"
#include "mcd/targets.hpp"
#include "mcd/vec.hpp"

namespace mcd {

/// Momentum score s(k, x, p) for the Hamiltonian reversal. drift_term must
/// equal M * s(k, x, p) + p; a warm-started model supplies it in a form free
/// of the M^{-1} round trip so the fresh-model reversal collapses onto the
/// Ais mean exactly in floating point.
struct MomentumScore {
  std::function<Vec(int, const Vec&, const Vec&)> score;
  std::function<Vec(int, const Vec&, const Vec&)> drift_term;

  explicit operator bool() const { return static_cast<bool>(drift_term); }
};

/// Wrap a plain closure; drift_term computed literally as M * s + p.
MomentumScore generic_momentum_score(std::function<Vec(int, const Vec&, const Vec&)> s,
                                     Vec mass_diag);

struct UhaConfig {
  AnnealedPath path;
  std::vector<double> eps;  // leapfrog step sizes, length K
  double zeta_delta = 0.0;  // damping h = exp(-zeta_delta); 2*zeta*delta exact
  Vec mass_diag;
  int leapfrog_substeps = 1;

  int steps() const { return path.steps(); }
  double damping() const { return std::exp(-zeta_delta); }

  static UhaConfig uniform(AnnealedPath path, double eps, double damping, double mass = 1.0);
  void validate() const;
};

struct PhaseTrajectory {
  std::vector<Vec> x;        // x_0 .. x_K
  std::vector<Vec> p;        // p_0 .. p_K
  std::vector<Vec> p_tilde;  // refreshed momenta, p_tilde[k-1] holds ptilde_k
  double log_w = 0.0;
  std::vector<double> per_step_log_ratio;       // refresh-kernel log ratios
  std::vector<double> leapfrog_energy_deltas;   // H_k(x_k,p_k) - H_k(x_{k-1},ptilde_k)
  bool divergent = false;
};

/// One velocity-Verlet step on the potential -log gamma_k.
std::pair<Vec, Vec> leapfrog(const AnnealedPath& path, int k, const Vec& x, const Vec& p,
                             double eps, const Vec& mass_diag);

/// Partial refreshment p ~ N(h p_prev, (1-h^2) M).
Vec momentum_refresh(const Vec& p_prev, double h, const Vec& mass_diag, RngStream& rng);

/// Reverse refreshment mean f = p_tilde + 2 zeta delta (M s + p_tilde).
Vec reversal_mean_f(const MomentumScore& score, int k, const Vec& x, const Vec& p_tilde,
                    double zeta_delta);

PhaseTrajectory run_uha(const UhaConfig& cfg, Variant variant, RngStream& rng,
                        const MomentumScore& score = {});

/// Reweight stored phase states under the Mcd reversal for the given score.
double uha_mcd_log_weight(const UhaConfig& cfg, const MomentumScore& score,
                          const PhaseTrajectory& traj);

}  // namespace mcd

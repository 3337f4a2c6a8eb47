#pragma once

#include <functional>
#include <vector>

#include "mcd/rng.hpp"
#include "mcd/targets.hpp"
#include "mcd/vec.hpp"

namespace mcd {

/// Which backward kernels weight the forward chain: the annealed-target
/// reversal (Ais) or a score-model reversal (Mcd).
enum class Variant { Ais, Mcd };

/// Score function s(k, x) used by the Mcd backward kernels.
using UlaScore = std::function<Vec(int, const Vec&)>;

struct UlaConfig {
  AnnealedPath path;
  std::vector<double> deltas;  // per-step step sizes, length K

  int steps() const { return path.steps(); }

  static UlaConfig uniform(AnnealedPath path, double delta);
  void validate() const;
};

struct Trajectory {
  std::vector<Vec> states;                // x_0 .. x_K
  double log_w = 0.0;
  std::vector<double> per_step_log_ratio;  // log B_{k-1} - log F_k, length K
  bool divergent = false;
};

/// Drift-only forward map x + delta_k * grad log gamma_k(x) (the zero-noise
/// probe used by tests).
Vec ula_drift(const UlaConfig& cfg, int k, const Vec& x_prev);

/// One forward transition x_k ~ N(drift, 2 delta_k I).
Vec ula_forward_step(const UlaConfig& cfg, int k, const Vec& x_prev, RngStream& rng);

/// Forward chain plus running log importance weight. Both variants consume
/// identical rng draws; only the backward log-density differs. A nonfinite
/// state marks the trajectory divergent with log_w = -inf.
Trajectory run_ula(const UlaConfig& cfg, Variant variant, RngStream& rng,
                   const UlaScore& score = {});

/// Recompute the log weight of stored states under the Mcd backward kernels
/// for the given score. Matches run_ula(..., Mcd, ...) on the same states.
double mcd_log_weight(const UlaConfig& cfg, const UlaScore& score, const Trajectory& traj);

/// Telescoping weight sum_k log(gamma_k(x_{k-1}) / gamma_{k-1}(x_{k-1})).
/// A valid evidence estimator only when the forward kernels leave each
/// gamma_k exactly invariant.
double ais_telescoping_log_weight(const AnnealedPath& path, const std::vector<Vec>& states);

}  // namespace mcd

#include "mcd/langevin.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mcd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// N(y; mean, 2 delta I) in log space.
double transition_logpdf(const Vec& y, const Vec& mean, double delta) {
  const double v = 2.0 * delta;
  const double log_norm = -0.5 * (kLog2Pi + std::log(v));
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - mean[i];
    acc += log_norm - r * r / (2.0 * v);
  }
  return acc;
}

// log B_{k-1}(x_{k-1} | x_k) - log F_k(x_k | x_{k-1}) where drift_prev is the
// forward mean x_{k-1} + delta_k grad log gamma_k(x_{k-1}). The Mcd backward
// mean is written as x_k + delta (2 s - g) so that s = g reproduces the Ais
// mean x_k + delta g exactly in floating point.
double step_log_ratio(const UlaConfig& cfg, int k, const Vec& x_prev, const Vec& drift_prev,
                      const Vec& x_k, Variant variant, const UlaScore& score) {
  const double delta = cfg.deltas[static_cast<std::size_t>(k - 1)];
  const double log_f = transition_logpdf(x_k, drift_prev, delta);

  const Vec g = annealed_grad(cfg.path, k, x_k);
  Vec mean_b(x_k.size());
  if (variant == Variant::Ais) {
    for (std::size_t i = 0; i < x_k.size(); ++i) mean_b[i] = x_k[i] + delta * g[i];
  } else {
    const Vec s = score(k, x_k);
    for (std::size_t i = 0; i < x_k.size(); ++i)
      mean_b[i] = x_k[i] + delta * (2.0 * s[i] - g[i]);
  }
  const double log_b = transition_logpdf(x_prev, mean_b, delta);
  return log_b - log_f;
}

}  // namespace

UlaConfig UlaConfig::uniform(AnnealedPath path, double delta) {
  UlaConfig cfg;
  cfg.deltas.assign(static_cast<std::size_t>(path.steps()), delta);
  cfg.path = std::move(path);
  cfg.validate();
  return cfg;
}

void UlaConfig::validate() const {
  if (path.steps() < 1) throw std::invalid_argument("UlaConfig: K must be >= 1");
  if (deltas.size() != static_cast<std::size_t>(path.steps()))
    throw std::invalid_argument("UlaConfig: need one step size per transition");
  for (double d : deltas)
    if (!(d > 0.0)) throw std::invalid_argument("UlaConfig: step sizes must be positive");
}

Vec ula_drift(const UlaConfig& cfg, int k, const Vec& x_prev) {
  if (k < 1 || k > cfg.steps()) throw std::invalid_argument("ula step index out of range");
  const double delta = cfg.deltas[static_cast<std::size_t>(k - 1)];
  const Vec g = annealed_grad(cfg.path, k, x_prev);
  Vec out(x_prev.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x_prev[i] + delta * g[i];
  return out;
}

Vec ula_forward_step(const UlaConfig& cfg, int k, const Vec& x_prev, RngStream& rng) {
  const double delta = cfg.deltas[static_cast<std::size_t>(k - 1)];
  Vec x = ula_drift(cfg, k, x_prev);
  const double sd = std::sqrt(2.0 * delta);
  for (double& xi : x) xi += sd * rng.next_normal();
  return x;
}

Trajectory run_ula(const UlaConfig& cfg, Variant variant, RngStream& rng,
                   const UlaScore& score) {
  if (variant == Variant::Mcd && !score)
    throw std::invalid_argument("run_ula: Mcd variant needs a score function");
  const int K = cfg.steps();

  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(K) + 1);
  traj.per_step_log_ratio.reserve(static_cast<std::size_t>(K));

  Vec x = sample_gaussian(rng, cfg.path.pi0);
  traj.log_w = -gaussian_logpdf(x, cfg.path.pi0);
  traj.states.push_back(x);

  for (int k = 1; k <= K; ++k) {
    const double delta = cfg.deltas[static_cast<std::size_t>(k - 1)];
    const Vec drift = ula_drift(cfg, k, x);
    Vec x_next = drift;
    const double sd = std::sqrt(2.0 * delta);
    for (double& xi : x_next) xi += sd * rng.next_normal();
    if (!all_finite(x_next)) {
      traj.divergent = true;
      traj.log_w = kNegInf;
      return traj;
    }
    const double ratio = step_log_ratio(cfg, k, x, drift, x_next, variant, score);
    traj.per_step_log_ratio.push_back(ratio);
    traj.log_w += ratio;
    traj.states.push_back(x_next);
    x = std::move(x_next);
  }

  traj.log_w += cfg.path.target.log_gamma(x);
  if (!std::isfinite(traj.log_w)) {
    traj.divergent = true;
    traj.log_w = kNegInf;
  }
  return traj;
}

double mcd_log_weight(const UlaConfig& cfg, const UlaScore& score, const Trajectory& traj) {
  if (traj.divergent) return kNegInf;
  if (traj.states.size() != static_cast<std::size_t>(cfg.steps()) + 1)
    throw std::invalid_argument("mcd_log_weight: trajectory/config step mismatch");
  double log_w = -gaussian_logpdf(traj.states[0], cfg.path.pi0);
  for (int k = 1; k <= cfg.steps(); ++k) {
    const Vec& x_prev = traj.states[static_cast<std::size_t>(k - 1)];
    const Vec drift = ula_drift(cfg, k, x_prev);
    log_w += step_log_ratio(cfg, k, x_prev, drift, traj.states[static_cast<std::size_t>(k)],
                            Variant::Mcd, score);
  }
  log_w += cfg.path.target.log_gamma(traj.states.back());
  return log_w;
}

double ais_telescoping_log_weight(const AnnealedPath& path, const std::vector<Vec>& states) {
  if (states.size() != static_cast<std::size_t>(path.steps()) + 1)
    throw std::invalid_argument("ais_telescoping_log_weight: need K+1 states");
  double acc = 0.0;
  for (int k = 1; k <= path.steps(); ++k) {
    const Vec& x = states[static_cast<std::size_t>(k - 1)];
    acc += annealed_logpdf(path, k, x) - annealed_logpdf(path, k - 1, x);
  }
  return acc;
}

}  // namespace mcd

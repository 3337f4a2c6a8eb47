#include "mcd/hamiltonian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mcd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log N(y; h * mean, (1-h^2) M)
double refresh_logpdf(const Vec& y, const Vec& mean, double h, const Vec& mass_diag) {
  const double shrink = 1.0 - h * h;
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = shrink * mass_diag[i];
    const double r = y[i] - h * mean[i];
    acc += -0.5 * (kLog2Pi + std::log(v)) - r * r / (2.0 * v);
  }
  return acc;
}

double momentum_logpdf(const Vec& p, const Vec& mass_diag) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += -0.5 * (kLog2Pi + std::log(mass_diag[i])) - p[i] * p[i] / (2.0 * mass_diag[i]);
  }
  return acc;
}

std::pair<Vec, Vec> integrate(const UhaConfig& cfg, int k, Vec x, Vec p, double eps) {
  for (int s = 0; s < cfg.leapfrog_substeps; ++s) {
    auto [x2, p2] = leapfrog(cfg.path, k, x, p, eps, cfg.mass_diag);
    x = std::move(x2);
    p = std::move(p2);
  }
  return {std::move(x), std::move(p)};
}

}  // namespace

MomentumScore generic_momentum_score(std::function<Vec(int, const Vec&, const Vec&)> s,
                                     Vec mass_diag) {
  MomentumScore out;
  out.score = s;
  out.drift_term = [s, mass_diag](int k, const Vec& x, const Vec& p) {
    Vec t = s(k, x, p);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = mass_diag[i] * t[i] + p[i];
    return t;
  };
  return out;
}

UhaConfig UhaConfig::uniform(AnnealedPath path, double eps, double damping, double mass) {
  if (!(damping > 0.0 && damping < 1.0))
    throw std::invalid_argument("UhaConfig: damping must be in (0,1)");
  UhaConfig cfg;
  cfg.eps.assign(static_cast<std::size_t>(path.steps()), eps);
  cfg.zeta_delta = -std::log(damping);
  cfg.mass_diag.assign(static_cast<std::size_t>(path.dim()), mass);
  cfg.path = std::move(path);
  cfg.validate();
  return cfg;
}

void UhaConfig::validate() const {
  if (path.steps() < 1) throw std::invalid_argument("UhaConfig: K must be >= 1");
  if (eps.size() != static_cast<std::size_t>(path.steps()))
    throw std::invalid_argument("UhaConfig: need one leapfrog step size per transition");
  for (double e : eps)
    if (!(e > 0.0)) throw std::invalid_argument("UhaConfig: step sizes must be positive");
  if (!(zeta_delta > 0.0)) throw std::invalid_argument("UhaConfig: damping must be in (0,1)");
  if (mass_diag.size() != static_cast<std::size_t>(path.dim()))
    throw std::invalid_argument("UhaConfig: mass diagonal dimension mismatch");
  for (double m : mass_diag)
    if (!(m > 0.0)) throw std::invalid_argument("UhaConfig: mass entries must be positive");
  if (leapfrog_substeps < 1)
    throw std::invalid_argument("UhaConfig: leapfrog_substeps must be >= 1");
}

std::pair<Vec, Vec> leapfrog(const AnnealedPath& path, int k, const Vec& x, const Vec& p,
                             double eps, const Vec& mass_diag) {
  const std::size_t d = x.size();
  Vec g = annealed_grad(path, k, x);
  Vec p_half(d), x_new(d);
  for (std::size_t i = 0; i < d; ++i) {
    p_half[i] = p[i] + 0.5 * eps * g[i];
    x_new[i] = x[i] + eps * p_half[i] / mass_diag[i];
  }
  Vec g2 = annealed_grad(path, k, x_new);
  Vec p_new(d);
  for (std::size_t i = 0; i < d; ++i) p_new[i] = p_half[i] + 0.5 * eps * g2[i];
  return {std::move(x_new), std::move(p_new)};
}

Vec momentum_refresh(const Vec& p_prev, double h, const Vec& mass_diag, RngStream& rng) {
  if (!(h >= 0.0 && h < 1.0))
    throw std::invalid_argument("momentum_refresh: damping must be in [0,1)");
  const double shrink = std::sqrt(1.0 - h * h);
  Vec out(p_prev.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = h * p_prev[i] + shrink * std::sqrt(mass_diag[i]) * rng.next_normal();
  return out;
}

Vec reversal_mean_f(const MomentumScore& score, int k, const Vec& x, const Vec& p_tilde,
                    double zeta_delta) {
  Vec t = score.drift_term(k, x, p_tilde);
  Vec f(p_tilde.size());
  const double c = 2.0 * zeta_delta;
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = p_tilde[i] + c * t[i];
  return f;
}

PhaseTrajectory run_uha(const UhaConfig& cfg, Variant variant, RngStream& rng,
                        const MomentumScore& score) {
  if (variant == Variant::Mcd && !score)
    throw std::invalid_argument("run_uha: Mcd variant needs a momentum score");
  const int K = cfg.steps();
  const double h = cfg.damping();
  const DiagGaussian p_marginal{Vec(cfg.mass_diag.size(), 0.0), cfg.mass_diag};

  PhaseTrajectory traj;
  traj.x.reserve(static_cast<std::size_t>(K) + 1);
  traj.p.reserve(static_cast<std::size_t>(K) + 1);
  traj.p_tilde.reserve(static_cast<std::size_t>(K));

  Vec x = sample_gaussian(rng, cfg.path.pi0);
  Vec p = sample_gaussian(rng, p_marginal);
  traj.log_w = -gaussian_logpdf(x, cfg.path.pi0) - momentum_logpdf(p, cfg.mass_diag);
  traj.x.push_back(x);
  traj.p.push_back(p);

  for (int k = 1; k <= K; ++k) {
    const Vec p_tilde = momentum_refresh(p, h, cfg.mass_diag, rng);

    double ratio;
    if (variant == Variant::Ais) {
      ratio = refresh_logpdf(p, p_tilde, h, cfg.mass_diag) -
              refresh_logpdf(p_tilde, p, h, cfg.mass_diag);
    } else {
      const Vec f = reversal_mean_f(score, k, x, p_tilde, cfg.zeta_delta);
      ratio = refresh_logpdf(p, f, h, cfg.mass_diag) -
              refresh_logpdf(p_tilde, p, h, cfg.mass_diag);
    }
    traj.per_step_log_ratio.push_back(ratio);
    traj.log_w += ratio;

    const double energy_before =
        -annealed_logpdf(cfg.path, k, x) - momentum_logpdf(p_tilde, cfg.mass_diag);
    auto [x_new, p_new] =
        integrate(cfg, k, x, p_tilde, cfg.eps[static_cast<std::size_t>(k - 1)]);
    if (!all_finite(x_new) || !all_finite(p_new)) {
      traj.divergent = true;
      traj.log_w = kNegInf;
      traj.p_tilde.push_back(p_tilde);
      return traj;
    }
    traj.leapfrog_energy_deltas.push_back(
        (-annealed_logpdf(cfg.path, k, x_new) - momentum_logpdf(p_new, cfg.mass_diag)) -
        energy_before);

    x = std::move(x_new);
    p = std::move(p_new);
    traj.p_tilde.push_back(p_tilde);
    traj.x.push_back(x);
    traj.p.push_back(p);
  }

  traj.log_w += cfg.path.target.log_gamma(x) + momentum_logpdf(p, cfg.mass_diag);
  if (!std::isfinite(traj.log_w)) {
    traj.divergent = true;
    traj.log_w = kNegInf;
  }
  return traj;
}

double uha_mcd_log_weight(const UhaConfig& cfg, const MomentumScore& score,
                          const PhaseTrajectory& traj) {
  if (traj.divergent) return kNegInf;
  const int K = cfg.steps();
  if (traj.x.size() != static_cast<std::size_t>(K) + 1 ||
      traj.p_tilde.size() != static_cast<std::size_t>(K))
    throw std::invalid_argument("uha_mcd_log_weight: trajectory/config step mismatch");
  const double h = cfg.damping();

  double log_w =
      -gaussian_logpdf(traj.x[0], cfg.path.pi0) - momentum_logpdf(traj.p[0], cfg.mass_diag);
  for (int k = 1; k <= K; ++k) {
    const Vec& x_prev = traj.x[static_cast<std::size_t>(k - 1)];
    const Vec& p_prev = traj.p[static_cast<std::size_t>(k - 1)];
    const Vec& p_tilde = traj.p_tilde[static_cast<std::size_t>(k - 1)];
    const Vec f = reversal_mean_f(score, k, x_prev, p_tilde, cfg.zeta_delta);
    log_w += refresh_logpdf(p_prev, f, h, cfg.mass_diag) -
             refresh_logpdf(p_tilde, p_prev, h, cfg.mass_diag);
  }
  log_w += cfg.path.target.log_gamma(traj.x.back()) +
           momentum_logpdf(traj.p.back(), cfg.mass_diag);
  return log_w;
}

}  // namespace mcd

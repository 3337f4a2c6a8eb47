#include "mcd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mcd/parallel.hpp"

namespace mcd {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_doubles(std::uint64_t h, std::span<const double> v) {
  return fnv1a(h, v.data(), v.size() * sizeof(double));
}

struct GradAccumulator {
  std::vector<std::vector<double>> per_worker;
  std::vector<double> loss_per_worker;

  GradAccumulator(unsigned workers, std::size_t n_params)
      : per_worker(workers, std::vector<double>(n_params, 0.0)),
        loss_per_worker(workers, 0.0) {}

  LossValue reduce(std::size_t n_params) {
    LossValue out;
    out.grad.assign(n_params, 0.0);
    for (std::size_t w = 0; w < per_worker.size(); ++w) {
      out.loss += loss_per_worker[w];
      for (std::size_t i = 0; i < n_params; ++i) out.grad[i] += per_worker[w][i];
    }
    return out;
  }
};

unsigned resolve_workers(unsigned workers) {
  return workers == 0 ? default_workers() : workers;
}

}  // namespace

std::size_t TrajectoryBuffer::divergent_count() const {
  std::size_t n = 0;
  if (is_uha()) {
    for (const auto& t : uha) n += t.divergent ? 1 : 0;
  } else {
    for (const auto& t : ula) n += t.divergent ? 1 : 0;
  }
  return n;
}

std::uint64_t sampler_config_hash(const UlaConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  h = hash_doubles(h, cfg.deltas);
  h = hash_doubles(h, cfg.path.betas);
  h = hash_doubles(h, cfg.path.pi0.mean);
  h = hash_doubles(h, cfg.path.pi0.var);
  const int dim = cfg.path.dim();
  h = fnv1a(h, &dim, sizeof(dim));
  return h;
}

std::uint64_t sampler_config_hash(const UhaConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  h = hash_doubles(h, cfg.eps);
  h = hash_doubles(h, cfg.path.betas);
  h = hash_doubles(h, cfg.path.pi0.mean);
  h = hash_doubles(h, cfg.path.pi0.var);
  h = hash_doubles(h, cfg.mass_diag);
  h = fnv1a(h, &cfg.zeta_delta, sizeof(double));
  h = fnv1a(h, &cfg.leapfrog_substeps, sizeof(int));
  return h;
}

TrajectoryBuffer sample_buffer(const UlaConfig& cfg, std::size_t n, RngStream base,
                               unsigned workers) {
  TrajectoryBuffer buf;
  buf.seed = base.seed();
  buf.config_hash = sampler_config_hash(cfg);
  buf.ula.resize(n);
  parallel_for(
      n,
      [&](std::size_t i, unsigned) {
        RngStream rng = base.fork(i);
        buf.ula[i] = run_ula(cfg, Variant::Ais, rng);
      },
      workers);
  return buf;
}

TrajectoryBuffer sample_buffer(const UhaConfig& cfg, std::size_t n, RngStream base,
                               unsigned workers) {
  TrajectoryBuffer buf;
  buf.seed = base.seed();
  buf.config_hash = sampler_config_hash(cfg);
  buf.uha.resize(n);
  parallel_for(
      n,
      [&](std::size_t i, unsigned) {
        RngStream rng = base.fork(i);
        buf.uha[i] = run_uha(cfg, Variant::Ais, rng);
      },
      workers);
  return buf;
}

std::pair<double, double> elbo_from_log_weights(std::span<const double> log_w) {
  std::vector<double> finite;
  finite.reserve(log_w.size());
  for (double v : log_w)
    if (std::isfinite(v)) finite.push_back(v);
  if (finite.empty()) throw std::runtime_error("elbo: every chain diverged");
  return mean_and_se(finite);
}

std::pair<double, double> elbo_estimate(const TrajectoryBuffer& buffer) {
  std::vector<double> lw;
  lw.reserve(buffer.size());
  if (buffer.is_uha()) {
    for (const auto& t : buffer.uha) lw.push_back(t.log_w);
  } else {
    for (const auto& t : buffer.ula) lw.push_back(t.log_w);
  }
  return elbo_from_log_weights(lw);
}

LossValue negative_backward_loglik_loss(const ScoreNet& net, const TrajectoryBuffer& buffer,
                                        const UlaConfig& cfg, unsigned workers) {
  if (buffer.is_uha())
    throw std::invalid_argument("negative_backward_loglik_loss: buffer/config mismatch");
  const std::size_t n_alive = buffer.size() - buffer.divergent_count();
  if (n_alive == 0) throw std::runtime_error("loss: every chain diverged");
  const double inv_n = 1.0 / static_cast<double>(n_alive);
  const unsigned w = resolve_workers(workers);
  GradAccumulator acc(w, net.param_count());
  const int K = cfg.steps();
  const int dim = cfg.path.dim();

  parallel_for(
      buffer.ula.size(),
      [&](std::size_t ti, unsigned wid) {
        const Trajectory& traj = buffer.ula[ti];
        if (traj.divergent) return;
        double local = 0.0;
        Vec cot(static_cast<std::size_t>(dim));
        for (int k = 1; k <= K; ++k) {
          const double delta = cfg.deltas[static_cast<std::size_t>(k - 1)];
          const Vec& x_prev = traj.states[static_cast<std::size_t>(k - 1)];
          const Vec& x_k = traj.states[static_cast<std::size_t>(k)];
          const Vec g = annealed_grad(cfg.path, k, x_k);
          const Vec s_tilde = net.forward(k, x_k);
          // backward mean mu = x_k + delta (2 s - g) with s = s_tilde + g
          for (int i = 0; i < dim; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            const double s = s_tilde[ii] + g[ii];
            const double mu = x_k[ii] + delta * (2.0 * s - g[ii]);
            const double r = x_prev[ii] - mu;
            local += 0.5 * (kLog2Pi + std::log(2.0 * delta)) + r * r / (4.0 * delta);
            cot[ii] = (mu - x_prev[ii]) * inv_n;
          }
          net.backward(k, x_k, nullptr, cot, acc.per_worker[wid]);
        }
        acc.loss_per_worker[wid] += local * inv_n;
      },
      w);
  return acc.reduce(net.param_count());
}

LossValue negative_backward_loglik_loss(const ScoreNet& net, const TrajectoryBuffer& buffer,
                                        const UhaConfig& cfg, unsigned workers) {
  if (!buffer.is_uha())
    throw std::invalid_argument("negative_backward_loglik_loss: buffer/config mismatch");
  const std::size_t n_alive = buffer.size() - buffer.divergent_count();
  if (n_alive == 0) throw std::runtime_error("loss: every chain diverged");
  const double inv_n = 1.0 / static_cast<double>(n_alive);
  const unsigned w = resolve_workers(workers);
  GradAccumulator acc(w, net.param_count());
  const int K = cfg.steps();
  const int dim = cfg.path.dim();
  const double h = cfg.damping();
  const double shrink = 1.0 - h * h;
  const double two_zd = 2.0 * cfg.zeta_delta;

  parallel_for(
      buffer.uha.size(),
      [&](std::size_t ti, unsigned wid) {
        const PhaseTrajectory& traj = buffer.uha[ti];
        if (traj.divergent) return;
        double local = 0.0;
        Vec cot(static_cast<std::size_t>(dim));
        for (int k = 1; k <= K; ++k) {
          const Vec& x_prev = traj.x[static_cast<std::size_t>(k - 1)];
          const Vec& p_prev = traj.p[static_cast<std::size_t>(k - 1)];
          const Vec& p_tilde = traj.p_tilde[static_cast<std::size_t>(k - 1)];
          const Vec s_tilde = net.forward(k, x_prev, p_tilde);
          for (int i = 0; i < dim; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            const double mass = cfg.mass_diag[ii];
            // f = p_tilde + 2 zeta delta * (M s + p_tilde), with the warm
            // start reducing M s + p_tilde to M s_tilde.
            const double f = p_tilde[ii] + two_zd * (mass * s_tilde[ii]);
            const double v = shrink * mass;
            const double r = p_prev[ii] - h * f;
            local += 0.5 * (kLog2Pi + std::log(v)) + r * r / (2.0 * v);
            cot[ii] = -(two_zd * h / shrink) * r * inv_n;
          }
          net.backward(k, x_prev, &p_tilde, cot, acc.per_worker[wid]);
        }
        acc.loss_per_worker[wid] += local * inv_n;
      },
      w);
  return acc.reduce(net.param_count());
}

LossValue score_matching_loss(const ScoreNet& net, const TrajectoryBuffer& buffer,
                              const UlaConfig& cfg, unsigned workers) {
  if (buffer.is_uha()) throw std::invalid_argument("score_matching_loss: ULA buffers only");
  const std::size_t n_alive = buffer.size() - buffer.divergent_count();
  if (n_alive == 0) throw std::runtime_error("loss: every chain diverged");
  const double inv_n = 1.0 / static_cast<double>(n_alive);
  const unsigned w = resolve_workers(workers);
  GradAccumulator acc(w, net.param_count());
  const int K = cfg.steps();
  const int dim = cfg.path.dim();

  parallel_for(
      buffer.ula.size(),
      [&](std::size_t ti, unsigned wid) {
        const Trajectory& traj = buffer.ula[ti];
        if (traj.divergent) return;
        double local = 0.0;
        Vec cot(static_cast<std::size_t>(dim));
        for (int k = 1; k <= K; ++k) {
          const double delta = cfg.deltas[static_cast<std::size_t>(k - 1)];
          const Vec& x_prev = traj.states[static_cast<std::size_t>(k - 1)];
          const Vec& x_k = traj.states[static_cast<std::size_t>(k)];
          const Vec g_prev = annealed_grad(cfg.path, k, x_prev);
          const Vec g = annealed_grad(cfg.path, k, x_k);
          const Vec s_tilde = net.forward(k, x_k);
          for (int i = 0; i < dim; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            // target = grad_{x_k} log F_k(x_k | x_{k-1})
            const double target =
                -(x_k[ii] - x_prev[ii] - delta * g_prev[ii]) / (2.0 * delta);
            const double resid = (s_tilde[ii] + g[ii]) - target;
            local += delta * resid * resid;
            cot[ii] = 2.0 * delta * resid * inv_n;
          }
          net.backward(k, x_k, nullptr, cot, acc.per_worker[wid]);
        }
        acc.loss_per_worker[wid] += local * inv_n;
      },
      w);
  return acc.reduce(net.param_count());
}

double ula_backward_nll(const UlaScore& score, const TrajectoryBuffer& buffer,
                        const UlaConfig& cfg) {
  const std::size_t n_alive = buffer.size() - buffer.divergent_count();
  if (n_alive == 0) throw std::runtime_error("loss: every chain diverged");
  const int K = cfg.steps();
  double total = 0.0;
  for (const Trajectory& traj : buffer.ula) {
    if (traj.divergent) continue;
    for (int k = 1; k <= K; ++k) {
      const double delta = cfg.deltas[static_cast<std::size_t>(k - 1)];
      const Vec& x_prev = traj.states[static_cast<std::size_t>(k - 1)];
      const Vec& x_k = traj.states[static_cast<std::size_t>(k)];
      const Vec g = annealed_grad(cfg.path, k, x_k);
      const Vec s = score(k, x_k);
      for (std::size_t i = 0; i < x_k.size(); ++i) {
        const double mu = x_k[i] + delta * (2.0 * s[i] - g[i]);
        const double r = x_prev[i] - mu;
        total += 0.5 * (kLog2Pi + std::log(2.0 * delta)) + r * r / (4.0 * delta);
      }
    }
  }
  return total / static_cast<double>(n_alive);
}

double uha_backward_nll(const MomentumScore& score, const TrajectoryBuffer& buffer,
                        const UhaConfig& cfg) {
  const std::size_t n_alive = buffer.size() - buffer.divergent_count();
  if (n_alive == 0) throw std::runtime_error("loss: every chain diverged");
  const int K = cfg.steps();
  const double h = cfg.damping();
  const double shrink = 1.0 - h * h;
  double total = 0.0;
  for (const PhaseTrajectory& traj : buffer.uha) {
    if (traj.divergent) continue;
    for (int k = 1; k <= K; ++k) {
      const Vec& x_prev = traj.x[static_cast<std::size_t>(k - 1)];
      const Vec& p_prev = traj.p[static_cast<std::size_t>(k - 1)];
      const Vec& p_tilde = traj.p_tilde[static_cast<std::size_t>(k - 1)];
      const Vec f = reversal_mean_f(score, k, x_prev, p_tilde, cfg.zeta_delta);
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double v = shrink * cfg.mass_diag[i];
        const double r = p_prev[i] - h * f[i];
        total += 0.5 * (kLog2Pi + std::log(v)) + r * r / (2.0 * v);
      }
    }
  }
  return total / static_cast<double>(n_alive);
}

double ula_score_matching(const UlaScore& score, const TrajectoryBuffer& buffer,
                          const UlaConfig& cfg) {
  const std::size_t n_alive = buffer.size() - buffer.divergent_count();
  if (n_alive == 0) throw std::runtime_error("loss: every chain diverged");
  const int K = cfg.steps();
  double total = 0.0;
  for (const Trajectory& traj : buffer.ula) {
    if (traj.divergent) continue;
    for (int k = 1; k <= K; ++k) {
      const double delta = cfg.deltas[static_cast<std::size_t>(k - 1)];
      const Vec& x_prev = traj.states[static_cast<std::size_t>(k - 1)];
      const Vec& x_k = traj.states[static_cast<std::size_t>(k)];
      const Vec g_prev = annealed_grad(cfg.path, k, x_prev);
      const Vec s = score(k, x_k);
      for (std::size_t i = 0; i < x_k.size(); ++i) {
        const double target = -(x_k[i] - x_prev[i] - delta * g_prev[i]) / (2.0 * delta);
        const double resid = s[i] - target;
        total += delta * resid * resid;
      }
    }
  }
  return total / static_cast<double>(n_alive);
}

namespace {

template <typename Cfg>
LossValue eval_loss(const ScoreNet& net, const TrajectoryBuffer& buf, const Cfg& cfg,
                    LossKind kind, unsigned workers) {
  if constexpr (std::is_same_v<Cfg, UlaConfig>) {
    return kind == LossKind::BackwardNll
               ? negative_backward_loglik_loss(net, buf, cfg, workers)
               : score_matching_loss(net, buf, cfg, workers);
  } else {
    if (kind == LossKind::ScoreMatching)
      throw std::invalid_argument("score-matching loss is defined for ULA buffers only");
    return negative_backward_loglik_loss(net, buf, cfg, workers);
  }
}

std::vector<double> mcd_weights_for(const ScoreNet& net, const UlaConfig& cfg,
                                    const TrajectoryBuffer& buf, const AnnealedPath* path,
                                    unsigned workers) {
  std::vector<double> lw(buf.ula.size());
  const UlaScore score = warm_start_ula(&net, path);
  parallel_for(
      buf.ula.size(),
      [&](std::size_t i, unsigned) { lw[i] = mcd_log_weight(cfg, score, buf.ula[i]); },
      workers);
  return lw;
}

std::vector<double> mcd_weights_for(const ScoreNet& net, const UhaConfig& cfg,
                                    const TrajectoryBuffer& buf, const AnnealedPath*,
                                    unsigned workers) {
  std::vector<double> lw(buf.uha.size());
  const MomentumScore score = warm_start_uha(&net, cfg.mass_diag);
  parallel_for(
      buf.uha.size(),
      [&](std::size_t i, unsigned) { lw[i] = uha_mcd_log_weight(cfg, score, buf.uha[i]); },
      workers);
  return lw;
}

template <typename Cfg>
TrainReport train_impl(ScoreNet& net, const Cfg& cfg, const TrainConfig& tc, RngStream rng) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  AdamState opt(net.param_count(), tc.adam);
  RngStream batch_rng = rng.fork(1);
  RngStream elbo_rng = rng.fork(2);

  for (int it = 0; it < tc.iterations; ++it) {
    TrajectoryBuffer buf =
        sample_buffer(cfg, static_cast<std::size_t>(tc.batch), batch_rng.fork(it), tc.workers);
    const double div_frac =
        static_cast<double>(buf.divergent_count()) / static_cast<double>(buf.size());
    if (div_frac > tc.max_divergent_fraction)
      throw std::runtime_error("train: divergence rate " + std::to_string(div_frac) +
                               " exceeded limit at iteration " + std::to_string(it));
    LossValue lv = eval_loss(net, buf, cfg, tc.loss, tc.workers);
    adam_step(opt, net.params(), lv.grad);
    report.losses.push_back(lv.loss);

    if (tc.elbo_every > 0 && (it + 1) % tc.elbo_every == 0) {
      TrajectoryBuffer eval = sample_buffer(cfg, static_cast<std::size_t>(tc.elbo_particles),
                                            elbo_rng.fork(it), tc.workers);
      const auto lw = mcd_weights_for(net, cfg, eval, &cfg.path, tc.workers);
      report.elbo_checkpoints.emplace_back(it + 1, elbo_from_log_weights(lw).first);
    }
  }
  report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace

TrainReport train(ScoreNet& net, const UlaConfig& cfg, const TrainConfig& tc, RngStream rng) {
  return train_impl(net, cfg, tc, rng);
}

TrainReport train(ScoreNet& net, const UhaConfig& cfg, const TrainConfig& tc, RngStream rng) {
  return train_impl(net, cfg, tc, rng);
}

TrainReport train_on_buffer(ScoreNet& net, const UlaConfig& cfg, const TrajectoryBuffer& buffer,
                            int iterations, AdamConfig adam, LossKind loss, unsigned workers) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  AdamState opt(net.param_count(), adam);
  for (int it = 0; it < iterations; ++it) {
    LossValue lv = eval_loss(net, buffer, cfg, loss, workers);
    adam_step(opt, net.params(), lv.grad);
    report.losses.push_back(lv.loss);
  }
  report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace mcd

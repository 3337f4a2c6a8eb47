#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "mcd/adam.hpp"
#include "mcd/hamiltonian.hpp"
#include "mcd/langevin.hpp"
#include "mcd/score_net.hpp"

namespace mcd {

/// A batch of forward trajectories from one sampler configuration. Divergent
/// entries stay in the batch (flagged) but are excluded from loss averages.
struct TrajectoryBuffer {
  std::vector<Trajectory> ula;
  std::vector<PhaseTrajectory> uha;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  bool is_uha() const { return !uha.empty(); }
  std::size_t size() const { return is_uha() ? uha.size() : ula.size(); }
  std::size_t divergent_count() const;
};

std::uint64_t sampler_config_hash(const UlaConfig& cfg);
std::uint64_t sampler_config_hash(const UhaConfig& cfg);

/// Forward chains only; the states never depend on score parameters, so the
/// buffers are sampled with the Ais weight bookkeeping.
TrajectoryBuffer sample_buffer(const UlaConfig& cfg, std::size_t n, RngStream base,
                               unsigned workers = 0);
TrajectoryBuffer sample_buffer(const UhaConfig& cfg, std::size_t n, RngStream base,
                               unsigned workers = 0);

/// Mean and standard error of stored log weights over non-divergent chains.
std::pair<double, double> elbo_estimate(const TrajectoryBuffer& buffer);
std::pair<double, double> elbo_from_log_weights(std::span<const double> log_w);

struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;  // one entry per network parameter
};

/// -mean_traj sum_k log B_k under the score-model backward kernels, with the
/// exact parameter gradient. The score is the warm-start wrapped model.
LossValue negative_backward_loglik_loss(const ScoreNet& net, const TrajectoryBuffer& buffer,
                                        const UlaConfig& cfg, unsigned workers = 0);
LossValue negative_backward_loglik_loss(const ScoreNet& net, const TrajectoryBuffer& buffer,
                                        const UhaConfig& cfg, unsigned workers = 0);

/// delta-scaled regression of s(k, x_k) onto grad log F_k(x_k | x_{k-1}).
LossValue score_matching_loss(const ScoreNet& net, const TrajectoryBuffer& buffer,
                              const UlaConfig& cfg, unsigned workers = 0);

/// Loss-only evaluation at an arbitrary score (finite differences, oracles).
double ula_backward_nll(const UlaScore& score, const TrajectoryBuffer& buffer,
                        const UlaConfig& cfg);
double uha_backward_nll(const MomentumScore& score, const TrajectoryBuffer& buffer,
                        const UhaConfig& cfg);
double ula_score_matching(const UlaScore& score, const TrajectoryBuffer& buffer,
                          const UlaConfig& cfg);

enum class LossKind { BackwardNll, ScoreMatching };

struct TrainConfig {
  int iterations = 2000;
  int batch = 128;
  AdamConfig adam;
  LossKind loss = LossKind::BackwardNll;
  int elbo_every = 0;        // 0 disables checkpoints
  int elbo_particles = 256;
  unsigned workers = 0;
  double max_divergent_fraction = 0.5;
};

struct TrainReport {
  std::vector<double> losses;                      // one per iteration
  std::vector<std::pair<int, double>> elbo_checkpoints;
  // Filled by the experiment runner once the trained model has been used to
  // produce an evidence estimate.
  double final_log_z = std::numeric_limits<double>::quiet_NaN();
  double final_log_z_se = std::numeric_limits<double>::quiet_NaN();
  double wall_clock_s = 0.0;
};

/// Online training: a fresh trajectory batch per iteration, one Adam step
/// each. Aborts if more than max_divergent_fraction of a batch diverges.
TrainReport train(ScoreNet& net, const UlaConfig& cfg, const TrainConfig& tc, RngStream rng);
TrainReport train(ScoreNet& net, const UhaConfig& cfg, const TrainConfig& tc, RngStream rng);

/// Deterministic fixed-buffer variant used by optimization smoke tests.
TrainReport train_on_buffer(ScoreNet& net, const UlaConfig& cfg, const TrajectoryBuffer& buffer,
                            int iterations, AdamConfig adam, LossKind loss = LossKind::BackwardNll,
                            unsigned workers = 0);

}  // namespace mcd

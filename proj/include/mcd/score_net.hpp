#pragma once

#include <span>
#include <string>
#include <vector>

#include "mcd/hamiltonian.hpp"
#include "mcd/langevin.hpp"
#include "mcd/rng.hpp"
#include "mcd/targets.hpp"
#include "mcd/vec.hpp"

namespace mcd {

/// Normalize to mean 0 / variance 1 (biased variance, small epsilon inside
/// the square root). Returns the normalized vector and the scale sigma.
std::pair<Vec, double> layer_normalize(const Vec& h);

struct ScoreNetConfig {
  int dim = 0;                // position dimension (= output dimension)
  bool with_momentum = false; // input is concat(x, p) when set
  int hidden = 64;            // d_h
  int time_dim = 16;          // d_t
  int blocks = 2;
  int max_step = 64;          // embedding table holds max_step + 1 rows

  int input_dim() const { return with_momentum ? 2 * dim : dim; }
};

/// Residual MLP score model conditioned on the discrete step index through a
/// learned embedding table. The output head starts at exactly zero, so a
/// fresh model returns the zero vector for every input.
class ScoreNet {
 public:
  struct Group {
    std::string name;
    int rows = 0;
    int cols = 0;  // 1 for vectors
    std::size_t offset = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  };

  ScoreNet(ScoreNetConfig cfg, RngStream rng);

  const ScoreNetConfig& config() const { return cfg_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }
  const std::vector<Group>& groups() const { return groups_; }

  Vec forward(int k, const Vec& x) const;
  Vec forward(int k, const Vec& x, const Vec& p) const;

  /// Accumulate d<cotangent, forward(k, x[, p])>/d(params) into grad, which
  /// must have param_count() entries. Pass p = nullptr for position-only nets.
  void backward(int k, const Vec& x, const Vec* p, const Vec& cotangent,
                std::span<double> grad) const;

  /// Versioned binary checkpoint: header plus raw 64-bit parameters.
  /// Round-trips byte-identically.
  void save(const std::string& path) const;
  static ScoreNet load(const std::string& path);

 private:
  struct Workspace;
  Vec forward_impl(int k, const Vec& z, Workspace* ws) const;
  Vec assemble_input(const Vec& x, const Vec* p) const;
  std::span<const double> group_span(std::size_t idx) const;

  ScoreNetConfig cfg_;
  std::vector<Group> groups_;
  std::vector<double> params_;
};

/// s(k, x) = model(k, x) + grad log gamma_k(x): a fresh model reproduces the
/// Ais backward kernels exactly. The net and path must outlive the closure.
UlaScore warm_start_ula(const ScoreNet* net, const AnnealedPath* path);

/// s(k, x, p) = model(k, x, p) - M^{-1} p, exposed so that M s + p reduces to
/// M * model(k, x, p) with no M^{-1} round trip.
MomentumScore warm_start_uha(const ScoreNet* net, Vec mass_diag);

}  // namespace mcd

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mcd {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(std::size_t n, AdamConfig c = {}) : cfg(c), m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update in place.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad) {
  if (params.size() != state.m.size() || grad.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.cfg.beta1 * state.m[i] + (1.0 - state.cfg.beta1) * grad[i];
    state.v[i] = state.cfg.beta2 * state.v[i] + (1.0 - state.cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
  }
}

}  // namespace mcd

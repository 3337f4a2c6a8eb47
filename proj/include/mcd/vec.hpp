#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "mcd/rng.hpp"

namespace mcd {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Gaussian with diagonal covariance. Variance entries must be positive.
struct DiagGaussian {
  Vec mean;
  Vec var;

  int dim() const { return static_cast<int>(mean.size()); }

  static DiagGaussian isotropic(int d, double mean, double var) {
    return DiagGaussian{Vec(d, mean), Vec(d, var)};
  }
};

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline double gaussian_logpdf(const Vec& x, const DiagGaussian& g) {
  if (x.size() != g.mean.size() || x.size() != g.var.size())
    throw std::invalid_argument("gaussian_logpdf: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = g.var[i];
    if (!(v > 0.0)) throw std::invalid_argument("gaussian_logpdf: nonpositive variance");
    const double r = x[i] - g.mean[i];
    acc += -0.5 * (kLog2Pi + std::log(v)) - r * r / (2.0 * v);
  }
  return acc;
}

/// One draw per coordinate: mean + sqrt(var) * eps.
inline Vec sample_gaussian(RngStream& rng, const DiagGaussian& g) {
  Vec out(g.mean.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(g.var[i] > 0.0)) throw std::invalid_argument("sample_gaussian: nonpositive variance");
    out[i] = g.mean[i] + std::sqrt(g.var[i]) * rng.next_normal();
  }
  return out;
}

/// log((1/n) sum exp(v_i)), max-shifted. Exact for constant input.
inline double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_mean_exp: empty input");
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;  // all -inf, or a nan/inf dominates
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - mx);
  return mx + std::log(acc / static_cast<double>(values.size()));
}

inline std::pair<double, double> mean_and_se(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = values.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

}  // namespace mcd

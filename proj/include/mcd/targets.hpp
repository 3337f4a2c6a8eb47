#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mcd/rng.hpp"
#include "mcd/vec.hpp"

namespace mcd {

/// Unnormalized density gamma with pointwise log value and gradient.
/// Built-in targets are stored normalized (true_log_z = 0); an additive
/// offset shifts log Z away from 0 for unbiasedness checks.
struct TargetDensity {
  int dim = 0;
  std::function<double(const Vec&)> log_gamma;
  std::function<Vec(const Vec&)> grad_log_gamma;
  std::optional<double> true_log_z;
};

enum class TargetName { GaussShifted, GaussNarrow, Mixture, Laplace, StudentT };

TargetName target_name_from_string(const std::string& s);
std::string to_string(TargetName name);

/// The five benchmark densities, normalized so log Z = 0. The rng is
/// consumed only by the mixture (its 8 component means, drawn from N(3, I)).
TargetDensity make_target(TargetName name, int dim, RngStream& rng);
TargetDensity make_target(TargetName name, int dim, RngStream&& rng);

/// Same density scaled by exp(offset); true_log_z shifts accordingly.
TargetDensity with_log_offset(TargetDensity base, double offset);

/// Geometric bridge pi0^(1-beta_k) * gamma^(beta_k) in log space.
struct AnnealedPath {
  DiagGaussian pi0;
  TargetDensity target;
  std::vector<double> betas;  // beta_0 = 0, ..., beta_K = 1, nondecreasing

  int steps() const { return static_cast<int>(betas.size()) - 1; }
  int dim() const { return target.dim; }
};

double annealed_logpdf(const AnnealedPath& path, int k, const Vec& x);
Vec annealed_grad(const AnnealedPath& path, int k, const Vec& x);

/// beta_k = k / K.
std::vector<double> linear_schedule(int K);

}  // namespace mcd

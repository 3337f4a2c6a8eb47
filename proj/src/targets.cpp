#include "mcd/targets.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace mcd {

namespace {

constexpr double kLogPi = 1.1447298858494001741434273513531;

TargetDensity gaussian_target(int dim, double mean, double var) {
  auto g = std::make_shared<DiagGaussian>(DiagGaussian::isotropic(dim, mean, var));
  TargetDensity t;
  t.dim = dim;
  t.true_log_z = 0.0;
  t.log_gamma = [g](const Vec& x) { return gaussian_logpdf(x, *g); };
  t.grad_log_gamma = [g](const Vec& x) {
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -(x[i] - g->mean[i]) / g->var[i];
    return out;
  };
  return t;
}

TargetDensity mixture_target(int dim, RngStream& rng) {
  constexpr int kComponents = 8;
  auto means = std::make_shared<std::vector<Vec>>();
  for (int j = 0; j < kComponents; ++j) {
    Vec mu(dim);
    for (int i = 0; i < dim; ++i) mu[i] = 3.0 + rng.next_normal();
    means->push_back(std::move(mu));
  }
  const double log_weight = -std::log(static_cast<double>(kComponents));

  auto component_logs = [means, dim, log_weight](const Vec& x) {
    std::vector<double> lp(means->size());
    for (std::size_t j = 0; j < means->size(); ++j) {
      double q = 0.0;
      for (int i = 0; i < dim; ++i) {
        const double r = x[i] - (*means)[j][i];
        q += r * r;
      }
      lp[j] = log_weight - 0.5 * dim * kLog2Pi - 0.5 * q;
    }
    return lp;
  };

  TargetDensity t;
  t.dim = dim;
  t.true_log_z = 0.0;
  t.log_gamma = [component_logs, means](const Vec& x) {
    auto lp = component_logs(x);
    const double mx = *std::max_element(lp.begin(), lp.end());
    double acc = 0.0;
    for (double v : lp) acc += std::exp(v - mx);
    return mx + std::log(acc);
  };
  // Responsibility-weighted sum of component gradients, logsumexp-stabilized.
  t.grad_log_gamma = [component_logs, means, dim](const Vec& x) {
    auto lp = component_logs(x);
    const double mx = *std::max_element(lp.begin(), lp.end());
    double norm = 0.0;
    for (double v : lp) norm += std::exp(v - mx);
    Vec out(dim, 0.0);
    for (std::size_t j = 0; j < means->size(); ++j) {
      const double r = std::exp(lp[j] - mx) / norm;
      for (int i = 0; i < dim; ++i) out[i] += r * ((*means)[j][i] - x[i]);
    }
    return out;
  };
  return t;
}

TargetDensity laplace_target(int dim) {
  constexpr double kLog2 = 0.69314718055994530941723212145818;
  TargetDensity t;
  t.dim = dim;
  t.true_log_z = 0.0;
  t.log_gamma = [dim](const Vec& x) {
    double acc = -dim * kLog2;
    for (double xi : x) acc -= std::fabs(xi);
    return acc;
  };
  t.grad_log_gamma = [](const Vec& x) {
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = x[i] > 0.0 ? -1.0 : (x[i] < 0.0 ? 1.0 : 0.0);
    return out;
  };
  return t;
}

// Product of standard one-dimensional Student-T(nu = 3) marginals.
TargetDensity student_t_target(int dim) {
  const double log_norm = std::log(2.0) - kLogPi - 0.5 * std::log(3.0);
  TargetDensity t;
  t.dim = dim;
  t.true_log_z = 0.0;
  t.log_gamma = [dim, log_norm](const Vec& x) {
    double acc = dim * log_norm;
    for (double xi : x) acc -= 2.0 * std::log1p(xi * xi / 3.0);
    return acc;
  };
  t.grad_log_gamma = [](const Vec& x) {
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -4.0 * x[i] / (3.0 + x[i] * x[i]);
    return out;
  };
  return t;
}

}  // namespace

TargetName target_name_from_string(const std::string& s) {
  if (s == "gauss_shifted") return TargetName::GaussShifted;
  if (s == "gauss_narrow") return TargetName::GaussNarrow;
  if (s == "mixture") return TargetName::Mixture;
  if (s == "laplace") return TargetName::Laplace;
  if (s == "student_t") return TargetName::StudentT;
  throw std::invalid_argument("unknown target name: " + s);
}

std::string to_string(TargetName name) {
  switch (name) {
    case TargetName::GaussShifted: return "gauss_shifted";
    case TargetName::GaussNarrow: return "gauss_narrow";
    case TargetName::Mixture: return "mixture";
    case TargetName::Laplace: return "laplace";
    case TargetName::StudentT: return "student_t";
  }
  throw std::invalid_argument("unknown target name");
}

TargetDensity make_target(TargetName name, int dim, RngStream& rng) {
  if (dim < 1) throw std::invalid_argument("make_target: dim must be >= 1");
  switch (name) {
    case TargetName::GaussShifted: return gaussian_target(dim, 10.0, 1.0);
    case TargetName::GaussNarrow: return gaussian_target(dim, 0.0, 0.1);
    case TargetName::Mixture: return mixture_target(dim, rng);
    case TargetName::Laplace: return laplace_target(dim);
    case TargetName::StudentT: return student_t_target(dim);
  }
  throw std::invalid_argument("make_target: unknown target");
}

TargetDensity make_target(TargetName name, int dim, RngStream&& rng) {
  return make_target(name, dim, rng);
}

TargetDensity with_log_offset(TargetDensity base, double offset) {
  TargetDensity t = base;
  auto lg = base.log_gamma;
  t.log_gamma = [lg, offset](const Vec& x) { return lg(x) + offset; };
  if (base.true_log_z) t.true_log_z = *base.true_log_z + offset;
  return t;
}

double annealed_logpdf(const AnnealedPath& path, int k, const Vec& x) {
  if (k < 0 || k > path.steps())
    throw std::invalid_argument("annealed_logpdf: step index out of range");
  const double beta = path.betas[static_cast<std::size_t>(k)];
  return (1.0 - beta) * gaussian_logpdf(x, path.pi0) + beta * path.target.log_gamma(x);
}

Vec annealed_grad(const AnnealedPath& path, int k, const Vec& x) {
  if (k < 0 || k > path.steps())
    throw std::invalid_argument("annealed_grad: step index out of range");
  const double beta = path.betas[static_cast<std::size_t>(k)];
  Vec out(x.size());
  if (beta < 1.0) {
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = (1.0 - beta) * (-(x[i] - path.pi0.mean[i]) / path.pi0.var[i]);
  }
  if (beta > 0.0) {
    const Vec g = path.target.grad_log_gamma(x);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += beta * g[i];
  }
  return out;
}

std::vector<double> linear_schedule(int K) {
  if (K < 1) throw std::invalid_argument("linear_schedule: K must be >= 1");
  std::vector<double> betas(static_cast<std::size_t>(K) + 1);
  for (int k = 0; k <= K; ++k) betas[static_cast<std::size_t>(k)] = static_cast<double>(k) / K;
  return betas;
}

}  // namespace mcd

// Acceptance suite: every criterion below runs at its stated tolerance and
// prints one PASS/FAIL line. The process exits nonzero if any criterion
// fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "mcd/experiment.hpp"
#include "mcd/oracle.hpp"
#include "mcd/parallel.hpp"

using namespace mcd;

namespace {

int g_failures = 0;

class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)), ok_(true) {
    start_ = std::chrono::steady_clock::now();
  }

  void expect(bool cond, const std::string& detail) {
    if (!cond) {
      ok_ = false;
      notes_ += (notes_.empty() ? "" : "; ") + detail;
    }
  }

  void note(const std::string& text) {
    notes_ += (notes_.empty() ? "" : "; ") + text;
  }

  ~Criterion() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::printf("[%s] %s (%.1fs)%s%s\n", ok_ ? "PASS" : "FAIL", name_.c_str(), secs,
                notes_.empty() ? "" : " -- ", notes_.c_str());
    std::fflush(stdout);
    if (!ok_) ++g_failures;
  }

 private:
  std::string name_;
  bool ok_;
  std::string notes_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

AnnealedPath unit_gaussian_path(int d, int K, double mean) {
  DiagGaussian tg = DiagGaussian::isotropic(d, mean, 1.0);
  TargetDensity t;
  t.dim = d;
  t.true_log_z = 0.0;
  t.log_gamma = [tg](const Vec& x) { return gaussian_logpdf(x, tg); };
  t.grad_log_gamma = [tg](const Vec& x) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = -(x[i] - tg.mean[i]);
    return g;
  };
  return AnnealedPath{DiagGaussian::isotropic(d, 0.0, 1.0), t, linear_schedule(K)};
}

// ---------------------------------------------------------------------------
// 1. Analytic-oracle agreement: closed forms vs 1e5-chain simulation.
void criterion_oracle_agreement() {
  Criterion c("1 analytic-oracle agreement (mean/var of both estimators, 3 SE)");
  RngStream rng(20240101);
  for (int K : {8, 64}) {
    for (double alpha : {0.0, 0.5, 0.9}) {
      const OracleSpec spec{4.0, 1.0, K, alpha};
      const OracleResult cf = oracle_closed_form(spec);
      const OracleSimResult sim = oracle_simulate(spec, 100000, rng);
      const std::string cell = "K=" + std::to_string(K) + ",a=" + fmt(alpha);
      c.expect(std::fabs(sim.mean_ais - cf.mean_ais) <= 3.0 * sim.se_mean_ais + 1e-10,
               cell + " mean_ais " + fmt(sim.mean_ais) + " vs " + fmt(cf.mean_ais));
      c.expect(std::fabs(sim.var_ais - cf.var_ais) <= 3.0 * sim.se_var_ais + 1e-10,
               cell + " var_ais " + fmt(sim.var_ais) + " vs " + fmt(cf.var_ais));
      c.expect(std::fabs(sim.mean_mar - cf.mean_mar) <= 3.0 * sim.se_mean_mar + 1e-10,
               cell + " mean_mar " + fmt(sim.mean_mar) + " vs " + fmt(cf.mean_mar));
      c.expect(std::fabs(sim.var_mar - cf.var_mar) <= 3.0 * sim.se_var_mar + 1e-10,
               cell + " var_mar " + fmt(sim.var_mar) + " vs " + fmt(cf.var_mar));
    }
  }
}

// ---------------------------------------------------------------------------
// 2. Unbiasedness E[w] = Z with 1e6 particles, including wrong-score MCD.
template <typename RunFn>
std::pair<double, double> mean_weight(long n, RunFn&& run_chain) {
  std::vector<double> w(static_cast<std::size_t>(n));
  RngStream base(555);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i, unsigned) {
    RngStream rng = base.fork(i);
    w[i] = std::exp(run_chain(rng));
  });
  double sum = 0.0, sumsq = 0.0;
  for (double v : w) {
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / static_cast<double>(n);
  const double se = std::sqrt((sumsq / static_cast<double>(n) - mean * mean) / static_cast<double>(n));
  return {mean, se};
}

void criterion_unbiasedness() {
  Criterion c("2 unbiasedness E[w]=Z, d=1, K=32, 1e6 particles (3 SE)");
  const long n = 1000000;
  const AnnealedPath path = unit_gaussian_path(1, 32, 1.0);

  // Step sizes keep var[log w] small so the sample mean of w has 3-SE
  // coverage at this particle count even under the wrong backward score.
  const UlaConfig ula = UlaConfig::uniform(path, 0.01);
  {
    const auto [m, se] = mean_weight(n, [&](RngStream& rng) {
      return run_ula(ula, Variant::Ais, rng).log_w;
    });
    c.expect(std::fabs(m - 1.0) <= 3.0 * se, "ula-ais E[w]=" + fmt(m) + " se=" + fmt(se));
  }
  {
    const UlaScore wrong = [](int, const Vec& x) { return Vec(x.size(), 0.7); };
    const auto [m, se] = mean_weight(n, [&](RngStream& rng) {
      return run_ula(ula, Variant::Mcd, rng, wrong).log_w;
    });
    c.expect(std::fabs(m - 1.0) <= 3.0 * se, "ula-mcd(wrong) E[w]=" + fmt(m) + " se=" + fmt(se));
  }

  const UhaConfig uha = UhaConfig::uniform(path, 0.25, 0.98, 1.0);
  {
    const auto [m, se] = mean_weight(n, [&](RngStream& rng) {
      return run_uha(uha, Variant::Ais, rng).log_w;
    });
    c.expect(std::fabs(m - 1.0) <= 3.0 * se, "uha-ais E[w]=" + fmt(m) + " se=" + fmt(se));
  }
  {
    const MomentumScore wrong = generic_momentum_score(
        [](int, const Vec&, const Vec& p) { return Vec(p.size(), 0.3); }, uha.mass_diag);
    const auto [m, se] = mean_weight(n, [&](RngStream& rng) {
      return run_uha(uha, Variant::Mcd, rng, wrong).log_w;
    });
    c.expect(std::fabs(m - 1.0) <= 3.0 * se, "uha-mcd(wrong) E[w]=" + fmt(m) + " se=" + fmt(se));
  }
}

// ---------------------------------------------------------------------------
// 3. Warm-start degeneracy: fresh-model MCD equals AIS bit for bit.
void criterion_warm_start() {
  Criterion c("3 warm-start degeneracy (exact float equality on shared streams)");
  const AnnealedPath path = unit_gaussian_path(3, 16, 2.0);

  const UlaConfig ula = UlaConfig::uniform(path, 0.15);
  ScoreNetConfig nc;
  nc.dim = 3;
  nc.hidden = 16;
  nc.time_dim = 8;
  nc.blocks = 2;
  nc.max_step = 16;
  const ScoreNet unet(nc, RngStream(11));
  const UlaScore uscore = warm_start_ula(&unet, &ula.path);
  for (std::uint64_t s = 0; s < 64; ++s) {
    RngStream r1(808, s), r2(808, s);
    const Trajectory a = run_ula(ula, Variant::Ais, r1);
    const Trajectory b = run_ula(ula, Variant::Mcd, r2, uscore);
    if (a.divergent || b.divergent) continue;
    c.expect(a.log_w == b.log_w, "ula stream " + std::to_string(s));
  }

  UhaConfig uha = UhaConfig::uniform(path, 0.25, 0.85, 1.0);
  uha.mass_diag = {1.7, 0.6, 2.3};  // non-unit mass must stay exact
  nc.with_momentum = true;
  const ScoreNet pnet(nc, RngStream(12));
  const MomentumScore pscore = warm_start_uha(&pnet, uha.mass_diag);
  for (std::uint64_t s = 0; s < 64; ++s) {
    RngStream r1(909, s), r2(909, s);
    const PhaseTrajectory a = run_uha(uha, Variant::Ais, r1);
    const PhaseTrajectory b = run_uha(uha, Variant::Mcd, r2, pscore);
    if (a.divergent || b.divergent) continue;
    c.expect(a.log_w == b.log_w, "uha stream " + std::to_string(s));
  }
}

// ---------------------------------------------------------------------------
// 4. Integrator properties.
void criterion_integrator() {
  Criterion c("4 integrator: reversibility 1e-9, |det J - 1| < 1e-6, balance 1e-12, energy 1e-10");
  RngStream rng(4242);
  const AnnealedPath path = unit_gaussian_path(2, 8, 4.0);
  const Vec mass{1.3, 0.8};

  double worst_rev = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int k = 1 + static_cast<int>(rng.next_u64() % 8);
    Vec x(2), p(2);
    for (double& v : x) v = 2.0 * rng.next_normal();
    for (double& v : p) v = 1.5 * rng.next_normal();
    auto [x1, p1] = leapfrog(path, k, x, p, 0.2, mass);
    auto [x2, p2] = leapfrog(path, k, x1, Vec{-p1[0], -p1[1]}, 0.2, mass);
    worst_rev = std::max(worst_rev, std::fabs(x2[0] - x[0]));
    worst_rev = std::max(worst_rev, std::fabs(x2[1] - x[1]));
    worst_rev = std::max(worst_rev, std::fabs(-p2[0] - p[0]));
    worst_rev = std::max(worst_rev, std::fabs(-p2[1] - p[1]));
  }
  c.expect(worst_rev < 1e-9, "reversibility residual " + fmt(worst_rev));

  double worst_det = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int k = 1 + static_cast<int>(rng.next_u64() % 8);
    Vec z(4);
    for (double& v : z) v = 2.0 * rng.next_normal();
    auto apply = [&](const Vec& in) {
      const auto [x2, p2] = leapfrog(path, k, {in[0], in[1]}, {in[2], in[3]}, 0.25, mass);
      return Vec{x2[0], x2[1], p2[0], p2[1]};
    };
    double jac[4][4];
    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
      Vec zp = z, zm = z;
      zp[static_cast<std::size_t>(j)] += h;
      zm[static_cast<std::size_t>(j)] -= h;
      const Vec fp = apply(zp), fm = apply(zm);
      for (int i = 0; i < 4; ++i)
        jac[i][j] =
            (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) / (2.0 * h);
    }
    double det = 1.0;
    for (int col = 0; col < 4; ++col) {
      int piv = col;
      for (int r = col + 1; r < 4; ++r)
        if (std::fabs(jac[r][col]) > std::fabs(jac[piv][col])) piv = r;
      if (piv != col) {
        for (int j = 0; j < 4; ++j) std::swap(jac[piv][j], jac[col][j]);
        det = -det;
      }
      det *= jac[col][col];
      for (int r = col + 1; r < 4; ++r) {
        const double f = jac[r][col] / jac[col][col];
        for (int j = col; j < 4; ++j) jac[r][j] -= f * jac[col][j];
      }
    }
    worst_det = std::max(worst_det, std::fabs(det - 1.0));
  }
  c.expect(worst_det < 1e-6, "|det J - 1| " + fmt(worst_det));

  double worst_bal = 0.0;
  const double hdamp = 0.85;
  Vec var(2);
  for (int i = 0; i < 2; ++i) var[static_cast<std::size_t>(i)] = (1.0 - hdamp * hdamp) * mass[static_cast<std::size_t>(i)];
  for (int rep = 0; rep < 200; ++rep) {
    Vec a(2), b(2);
    for (double& v : a) v = 2.0 * rng.next_normal();
    for (double& v : b) v = 2.0 * rng.next_normal();
    Vec ha(2), hb(2);
    for (int i = 0; i < 2; ++i) {
      ha[static_cast<std::size_t>(i)] = hdamp * a[static_cast<std::size_t>(i)];
      hb[static_cast<std::size_t>(i)] = hdamp * b[static_cast<std::size_t>(i)];
    }
    const double lhs = gaussian_logpdf(a, {hb, var}) - gaussian_logpdf(b, {ha, var});
    const double rhs = gaussian_logpdf(a, {{0.0, 0.0}, mass}) - gaussian_logpdf(b, {{0.0, 0.0}, mass});
    worst_bal = std::max(worst_bal, std::fabs(lhs - rhs));
  }
  c.expect(worst_bal < 1e-12, "detailed-balance residual " + fmt(worst_bal));

  // constant target: log w = -sum of leapfrog energy deltas
  DiagGaussian pi0 = DiagGaussian::isotropic(2, 0.0, 1.0);
  TargetDensity same;
  same.dim = 2;
  same.true_log_z = 0.0;
  same.log_gamma = [pi0](const Vec& x) { return gaussian_logpdf(x, pi0); };
  same.grad_log_gamma = [](const Vec& x) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = -x[i];
    return g;
  };
  UhaConfig cc = UhaConfig::uniform(AnnealedPath{pi0, same, linear_schedule(12)}, 0.3, 0.8, 1.4);
  double worst_energy = 0.0;
  RngStream base(4343);
  for (int rep = 0; rep < 100; ++rep) {
    RngStream r = base.fork(static_cast<std::uint64_t>(rep));
    const PhaseTrajectory traj = run_uha(cc, Variant::Ais, r);
    if (traj.divergent) continue;
    double sum = 0.0;
    for (double d : traj.leapfrog_energy_deltas) sum += d;
    worst_energy = std::max(worst_energy, std::fabs(traj.log_w + sum));
  }
  c.expect(worst_energy < 1e-10, "energy identity residual " + fmt(worst_energy));
}

// ---------------------------------------------------------------------------
// 5. Gradient correctness against central finite differences.
void criterion_gradients() {
  Criterion c("5 gradients vs central finite differences (rel err < 1e-5)");
  const AnnealedPath path = unit_gaussian_path(2, 4, 1.5);

  ScoreNetConfig nc;
  nc.dim = 2;
  nc.hidden = 8;
  nc.time_dim = 4;
  nc.blocks = 1;
  nc.max_step = 4;

  auto fd_against = [&](const std::vector<double>& analytic, ScoreNet& net,
                        const std::function<double()>& loss, const std::string& tag,
                        double h = 1e-6) {
    std::vector<double> fd(net.param_count());
    for (std::size_t i = 0; i < net.param_count(); ++i) {
      const double keep = net.params()[i];
      net.params()[i] = keep + h;
      const double up = loss();
      net.params()[i] = keep - h;
      const double dn = loss();
      net.params()[i] = keep;
      fd[i] = (up - dn) / (2.0 * h);
    }
    for (const auto& g : net.groups()) {
      double num = 0.0, den = 0.0;
      for (std::size_t i = g.offset; i < g.offset + g.size(); ++i) {
        num += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
        den += fd[i] * fd[i];
      }
      if (den < 1e-16) {
        c.expect(num < 1e-16, tag + " group " + g.name + " should be zero");
      } else {
        c.expect(std::sqrt(num / den) < 1e-5,
                 tag + " group " + g.name + " rel err " + fmt(std::sqrt(num / den)));
      }
    }
  };

  auto randomize_head = [](ScoreNet& net, std::uint64_t seed) {
    RngStream r(seed);
    for (const auto& g : net.groups())
      if (g.name == "w_out" || g.name == "b_out")
        for (std::size_t i = 0; i < g.size(); ++i)
          net.params()[g.offset + i] = 0.3 * r.next_normal();
  };

  {
    // raw network backward
    ScoreNet net(nc, RngStream(3));
    randomize_head(net, 5);
    RngStream r(6);
    Vec x{r.next_normal(), r.next_normal()};
    Vec cot{r.next_normal(), r.next_normal()};
    std::vector<double> grad(net.param_count(), 0.0);
    net.backward(2, x, nullptr, cot, grad);
    fd_against(grad, net, [&]() {
      const Vec out = net.forward(2, x);
      return cot[0] * out[0] + cot[1] * out[1];
    }, "net");
  }
  {
    const UlaConfig cfg = UlaConfig::uniform(path, 0.2);
    const TrajectoryBuffer buf = sample_buffer(cfg, 8, RngStream(21));
    ScoreNet net(nc, RngStream(3));
    randomize_head(net, 7);
    const LossValue nll = negative_backward_loglik_loss(net, buf, cfg, 1);
    const UlaScore score = warm_start_ula(&net, &cfg.path);
    fd_against(nll.grad, net, [&]() { return ula_backward_nll(score, buf, cfg); }, "ula-nll", 1e-5);

    const LossValue sm = score_matching_loss(net, buf, cfg, 1);
    fd_against(sm.grad, net, [&]() { return ula_score_matching(score, buf, cfg); }, "ula-sm", 1e-5);
  }
  {
    UhaConfig cfg = UhaConfig::uniform(path, 0.25, 0.8, 1.0);
    cfg.mass_diag = {1.3, 0.7};
    const TrajectoryBuffer buf = sample_buffer(cfg, 8, RngStream(22));
    ScoreNetConfig pc = nc;
    pc.with_momentum = true;
    ScoreNet net(pc, RngStream(3));
    randomize_head(net, 9);
    const LossValue nll = negative_backward_loglik_loss(net, buf, cfg, 1);
    const MomentumScore score = warm_start_uha(&net, cfg.mass_diag);
    fd_against(nll.grad, net, [&]() { return uha_backward_nll(score, buf, cfg); }, "uha-nll", 1e-5);
  }
}

// ---------------------------------------------------------------------------
// 6. Loss gradient equivalence at small step size.
void criterion_loss_equivalence() {
  Criterion c("6 loss-gradient cosine similarity > 0.99 at delta = 1e-3");
  const UlaConfig cfg = UlaConfig::uniform(unit_gaussian_path(2, 16, 1.0), 1e-3);
  const TrajectoryBuffer buf = sample_buffer(cfg, 128, RngStream(23));
  ScoreNetConfig nc;
  nc.dim = 2;
  nc.hidden = 8;
  nc.time_dim = 4;
  nc.blocks = 1;
  nc.max_step = 16;
  ScoreNet net(nc, RngStream(3));
  RngStream r(31);
  for (const auto& g : net.groups())
    if (g.name == "w_out" || g.name == "b_out")
      for (std::size_t i = 0; i < g.size(); ++i) net.params()[g.offset + i] = 0.3 * r.next_normal();

  const LossValue nll = negative_backward_loglik_loss(net, buf, cfg, 0);
  const LossValue sm = score_matching_loss(net, buf, cfg, 0);
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < nll.grad.size(); ++i) {
    num += nll.grad[i] * sm.grad[i];
    na += nll.grad[i] * nll.grad[i];
    nb += sm.grad[i] * sm.grad[i];
  }
  const double cosine = num / std::sqrt(na * nb);
  c.expect(cosine > 0.99, "cosine " + fmt(cosine));
  c.note("cosine " + fmt(cosine));
}

// ---------------------------------------------------------------------------
// 7. Headline effect: N(10, I) in d = 20, K = 64.
void criterion_headline(int train_iters) {
  Criterion c("7 dim-20 N(10,I): untrained ula <= -20, trained ula-mcd >= -1");
  json base{{"target", "gauss_shifted"}, {"dim", 20},       {"steps", 64},
            {"step_size", 0.3},          {"particles", 2048}, {"seed", 101}};

  json ais = base;
  ais["method"] = "ula-ais";
  const RunResult untrained = run_experiment(config_from_json(ais));
  c.expect(untrained.log_z_estimate <= -20.0,
           "untrained estimate " + fmt(untrained.log_z_estimate));
  c.note("untrained " + fmt(untrained.log_z_estimate));

  json mcd = base;
  mcd["method"] = "ula-mcd";
  mcd["train"] = json{{"iterations", train_iters}, {"batch", 128}, {"lr", 1e-3},
                      {"hidden", 32},              {"time_dim", 16}, {"blocks", 2}};
  const RunResult trained = run_experiment(config_from_json(mcd));
  c.expect(trained.log_z_estimate >= -1.0, "trained estimate " + fmt(trained.log_z_estimate));
  c.note("trained " + fmt(trained.log_z_estimate) + " after " + std::to_string(train_iters) +
         " iterations");
}

// ---------------------------------------------------------------------------
// 8. Gaussian-mixture sanity: trained uha-mcd within +-0.5 of 0 over 3 seeds.
void criterion_mixture(int train_iters) {
  Criterion c("8 dim-20 mixture: trained uha-mcd within +-0.5 of 0, 3 seeds");
  for (std::uint64_t seed : {201ULL, 202ULL, 203ULL}) {
    json j{{"method", "uha-mcd"}, {"target", "mixture"},  {"dim", 20},
           {"mixture_seed", 7},   {"pi0_var", 9.0},       {"steps", 64},
           {"step_size", 0.35},   {"damping", 0.9},       {"particles", 4096},
           {"seed", seed},
           {"train", json{{"iterations", train_iters}, {"batch", 128}, {"lr", 1e-3},
                          {"hidden", 32}, {"time_dim", 16}, {"blocks", 2}}}};
    const RunResult res = run_experiment(config_from_json(j));
    c.expect(std::fabs(res.log_z_estimate) <= 0.5,
             "seed " + std::to_string(seed) + " estimate " + fmt(res.log_z_estimate));
    c.note("seed " + std::to_string(seed) + ": " + fmt(res.log_z_estimate));
  }
}

}  // namespace

int main(int argc, char** argv) {
  // Optional override of the training budget (smoke runs vs the full gate).
  int headline_iters = 1000;
  int mixture_iters = 600;
  if (argc > 1) headline_iters = std::atoi(argv[1]);
  if (argc > 2) mixture_iters = std::atoi(argv[2]);

  criterion_oracle_agreement();
  criterion_unbiasedness();
  criterion_warm_start();
  criterion_integrator();
  criterion_gradients();
  criterion_loss_equivalence();
  criterion_headline(headline_iters);
  criterion_mixture(mixture_iters);

  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
  } else {
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}

#include "mcd/score_net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mcd {

namespace {

constexpr double kLnEps = 1e-12;
constexpr char kMagic[] = "MCDNET 1";

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double swish(double x) { return x * sigmoid(x); }
double swish_deriv(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

// out = W z (+ b), W row-major (rows x cols)
void matvec(std::span<const double> w, int rows, int cols, std::span<const double> z,
            std::span<const double> bias, std::span<double> out) {
  for (int r = 0; r < rows; ++r) {
    double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(r)];
    const double* row = w.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += row[c] * z[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = acc;
  }
}

// out += W^T d  (d has rows entries, out has cols entries)
void matvec_t_add(std::span<const double> w, int rows, int cols, std::span<const double> d,
                  std::span<double> out) {
  for (int r = 0; r < rows; ++r) {
    const double dr = d[static_cast<std::size_t>(r)];
    const double* row = w.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(c)] += row[c] * dr;
  }
}

// grad_w += d (outer) z
void outer_add(std::span<double> grad_w, int rows, int cols, std::span<const double> d,
               std::span<const double> z) {
  for (int r = 0; r < rows; ++r) {
    const double dr = d[static_cast<std::size_t>(r)];
    double* row = grad_w.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) row[c] += dr * z[static_cast<std::size_t>(c)];
  }
}

void add_to(std::span<double> acc, std::span<const double> d) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d[i];
}

}  // namespace

std::pair<Vec, double> layer_normalize(const Vec& h) {
  const std::size_t n = h.size();
  double mu = 0.0;
  for (double v : h) mu += v;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double v : h) var += (v - mu) * (v - mu);
  var /= static_cast<double>(n);
  const double sigma = std::sqrt(var + kLnEps);
  Vec xhat(n);
  for (std::size_t i = 0; i < n; ++i) xhat[i] = (h[i] - mu) / sigma;
  return {std::move(xhat), sigma};
}

struct ScoreNet::Workspace {
  Vec z;       // network input
  Vec e;       // time embedding row
  Vec h_first; // after input projection
  struct Block {
    Vec h_in;
    Vec xhat;
    double sigma = 0.0;
    Vec u;
    Vec a;
    Vec c;
    Vec s;
  };
  std::vector<Block> blocks;
  Vec h_final;
};

ScoreNet::ScoreNet(ScoreNetConfig cfg, RngStream rng) : cfg_(cfg) {
  if (cfg.dim < 1 || cfg.hidden < 1 || cfg.time_dim < 1 || cfg.blocks < 0 || cfg.max_step < 1)
    throw std::invalid_argument("ScoreNet: bad configuration");
  const int dh = cfg.hidden, dt = cfg.time_dim, nin = cfg.input_dim(), nout = cfg.dim;

  auto push = [this](const std::string& name, int rows, int cols) {
    Group g{name, rows, cols, params_.size()};
    params_.resize(params_.size() + g.size());
    groups_.push_back(std::move(g));
  };
  push("w_in", dh, nin);
  push("b_in", dh, 1);
  push("embed", cfg.max_step + 1, dt);
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string tag = "block" + std::to_string(b) + ".";
    push(tag + "ln_scale", dh, 1);
    push(tag + "ln_shift", dh, 1);
    push(tag + "w1", 2 * dh, dh);
    push(tag + "b1", 2 * dh, 1);
    push(tag + "wt", 2 * dh, dt);
    push(tag + "bt", 2 * dh, 1);
    push(tag + "w2", dh, 2 * dh);
    push(tag + "b2", dh, 1);
  }
  push("w_out", nout, dh);
  push("b_out", nout, 1);

  // Weight matrices: N(0, 1/fan_in); embeddings N(0,1); layer-norm scale 1;
  // biases and the whole output head zero.
  for (const Group& g : groups_) {
    double* dst = params_.data() + g.offset;
    if (g.name == "w_out" || g.name == "b_out") continue;
    if (g.name.ends_with("ln_scale")) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] = 1.0;
    } else if (g.name == "embed") {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] = rng.next_normal();
    } else if (g.cols > 1) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(g.cols));
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] = scale * rng.next_normal();
    }
  }
}

std::span<const double> ScoreNet::group_span(std::size_t idx) const {
  const Group& g = groups_[idx];
  return {params_.data() + g.offset, g.size()};
}

Vec ScoreNet::assemble_input(const Vec& x, const Vec* p) const {
  if (static_cast<int>(x.size()) != cfg_.dim)
    throw std::invalid_argument("ScoreNet: position dimension mismatch");
  if (cfg_.with_momentum) {
    if (p == nullptr || static_cast<int>(p->size()) != cfg_.dim)
      throw std::invalid_argument("ScoreNet: momentum input missing or mismatched");
    Vec z(x);
    z.insert(z.end(), p->begin(), p->end());
    return z;
  }
  if (p != nullptr) throw std::invalid_argument("ScoreNet: unexpected momentum input");
  return x;
}

Vec ScoreNet::forward_impl(int k, const Vec& z, Workspace* ws) const {
  if (k < 0 || k > cfg_.max_step)
    throw std::invalid_argument("ScoreNet: step index out of range");
  const int dh = cfg_.hidden, dt = cfg_.time_dim, nin = cfg_.input_dim(), nout = cfg_.dim;

  std::size_t gi = 0;
  auto next = [&]() { return group_span(gi++); };
  const auto w_in = next(), b_in = next(), embed = next();

  Vec e(embed.begin() + static_cast<std::size_t>(k) * dt,
        embed.begin() + static_cast<std::size_t>(k + 1) * dt);
  Vec h(dh);
  matvec(w_in, dh, nin, z, b_in, h);
  if (ws) {
    ws->z = z;
    ws->e = e;
    ws->h_first = h;
    ws->blocks.resize(static_cast<std::size_t>(cfg_.blocks));
  }

  for (int b = 0; b < cfg_.blocks; ++b) {
    const auto ln_scale = next(), ln_shift = next();
    const auto w1 = next(), b1 = next(), wt = next(), bt = next(), w2 = next(), b2 = next();

    auto [xhat, sigma] = layer_normalize(h);
    Vec u(dh), a(dh);
    for (int i = 0; i < dh; ++i) {
      u[static_cast<std::size_t>(i)] =
          ln_scale[static_cast<std::size_t>(i)] * xhat[static_cast<std::size_t>(i)] +
          ln_shift[static_cast<std::size_t>(i)];
      a[static_cast<std::size_t>(i)] = swish(u[static_cast<std::size_t>(i)]);
    }

    Vec c(2 * dh);
    matvec(w1, 2 * dh, dh, a, b1, c);
    Vec ct(2 * dh);
    matvec(wt, 2 * dh, dt, e, bt, ct);
    for (int i = 0; i < 2 * dh; ++i) c[static_cast<std::size_t>(i)] += ct[static_cast<std::size_t>(i)];

    Vec s(2 * dh);
    for (int i = 0; i < 2 * dh; ++i) s[static_cast<std::size_t>(i)] = swish(c[static_cast<std::size_t>(i)]);

    Vec r(dh);
    matvec(w2, dh, 2 * dh, s, b2, r);

    if (ws) {
      auto& wb = ws->blocks[static_cast<std::size_t>(b)];
      wb.h_in = h;
      wb.xhat = xhat;
      wb.sigma = sigma;
      wb.u = u;
      wb.a = a;
      wb.c = c;
      wb.s = s;
    }
    for (int i = 0; i < dh; ++i) h[static_cast<std::size_t>(i)] += r[static_cast<std::size_t>(i)];
  }

  const auto w_out = next(), b_out = next();
  Vec out(nout);
  matvec(w_out, nout, dh, h, b_out, out);
  if (ws) ws->h_final = h;
  return out;
}

Vec ScoreNet::forward(int k, const Vec& x) const {
  return forward_impl(k, assemble_input(x, nullptr), nullptr);
}

Vec ScoreNet::forward(int k, const Vec& x, const Vec& p) const {
  return forward_impl(k, assemble_input(x, &p), nullptr);
}

void ScoreNet::backward(int k, const Vec& x, const Vec* p, const Vec& cotangent,
                        std::span<double> grad) const {
  if (grad.size() != params_.size())
    throw std::invalid_argument("ScoreNet::backward: gradient buffer size mismatch");
  if (static_cast<int>(cotangent.size()) != cfg_.dim)
    throw std::invalid_argument("ScoreNet::backward: cotangent dimension mismatch");

  Workspace ws;
  const Vec z = assemble_input(x, p);
  forward_impl(k, z, &ws);

  const int dh = cfg_.hidden, dt = cfg_.time_dim, nin = cfg_.input_dim(), nout = cfg_.dim;
  // Group indices mirror construction order.
  std::size_t gi = 0;
  const std::size_t gi_win = gi++, gi_bin = gi++, gi_embed = gi++;
  struct BlockIdx {
    std::size_t ln_scale, ln_shift, w1, b1, wt, bt, w2, b2;
  };
  std::vector<BlockIdx> bidx(static_cast<std::size_t>(cfg_.blocks));
  for (int b = 0; b < cfg_.blocks; ++b) {
    bidx[static_cast<std::size_t>(b)] = {gi, gi + 1, gi + 2, gi + 3, gi + 4, gi + 5, gi + 6, gi + 7};
    gi += 8;
  }
  const std::size_t gi_wout = gi++, gi_bout = gi++;

  auto gspan = [&](std::size_t idx) {
    const Group& g = groups_[idx];
    return std::span<double>(grad.data() + g.offset, g.size());
  };

  // Output head.
  outer_add(gspan(gi_wout), nout, dh, cotangent, ws.h_final);
  add_to(gspan(gi_bout), cotangent);
  Vec d_h(static_cast<std::size_t>(dh), 0.0);
  matvec_t_add(group_span(gi_wout), nout, dh, cotangent, d_h);

  Vec d_e(static_cast<std::size_t>(dt), 0.0);
  for (int b = cfg_.blocks - 1; b >= 0; --b) {
    const auto& wb = ws.blocks[static_cast<std::size_t>(b)];
    const auto& ix = bidx[static_cast<std::size_t>(b)];

    // h_out = h_in + r, so d_r = d_h and d_h_in accumulates below.
    const Vec& d_r = d_h;
    outer_add(gspan(ix.w2), dh, 2 * dh, d_r, wb.s);
    add_to(gspan(ix.b2), d_r);
    Vec d_s(static_cast<std::size_t>(2 * dh), 0.0);
    matvec_t_add(group_span(ix.w2), dh, 2 * dh, d_r, d_s);

    Vec d_c(static_cast<std::size_t>(2 * dh));
    for (int i = 0; i < 2 * dh; ++i)
      d_c[static_cast<std::size_t>(i)] =
          d_s[static_cast<std::size_t>(i)] * swish_deriv(wb.c[static_cast<std::size_t>(i)]);

    outer_add(gspan(ix.w1), 2 * dh, dh, d_c, wb.a);
    add_to(gspan(ix.b1), d_c);
    outer_add(gspan(ix.wt), 2 * dh, dt, d_c, ws.e);
    add_to(gspan(ix.bt), d_c);

    Vec d_a(static_cast<std::size_t>(dh), 0.0);
    matvec_t_add(group_span(ix.w1), 2 * dh, dh, d_c, d_a);
    matvec_t_add(group_span(ix.wt), 2 * dh, dt, d_c, d_e);

    Vec d_u(static_cast<std::size_t>(dh));
    for (int i = 0; i < dh; ++i)
      d_u[static_cast<std::size_t>(i)] =
          d_a[static_cast<std::size_t>(i)] * swish_deriv(wb.u[static_cast<std::size_t>(i)]);

    auto d_lnscale = gspan(ix.ln_scale);
    auto d_lnshift = gspan(ix.ln_shift);
    const auto ln_scale = group_span(ix.ln_scale);
    Vec d_xhat(static_cast<std::size_t>(dh));
    for (int i = 0; i < dh; ++i) {
      d_lnscale[static_cast<std::size_t>(i)] +=
          d_u[static_cast<std::size_t>(i)] * wb.xhat[static_cast<std::size_t>(i)];
      d_lnshift[static_cast<std::size_t>(i)] += d_u[static_cast<std::size_t>(i)];
      d_xhat[static_cast<std::size_t>(i)] =
          d_u[static_cast<std::size_t>(i)] * ln_scale[static_cast<std::size_t>(i)];
    }

    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < dh; ++i) {
      m1 += d_xhat[static_cast<std::size_t>(i)];
      m2 += d_xhat[static_cast<std::size_t>(i)] * wb.xhat[static_cast<std::size_t>(i)];
    }
    m1 /= dh;
    m2 /= dh;
    Vec d_h_in(static_cast<std::size_t>(dh));
    for (int i = 0; i < dh; ++i)
      d_h_in[static_cast<std::size_t>(i)] =
          (d_xhat[static_cast<std::size_t>(i)] - m1 -
           wb.xhat[static_cast<std::size_t>(i)] * m2) /
          wb.sigma;

    for (int i = 0; i < dh; ++i)
      d_h[static_cast<std::size_t>(i)] += d_h_in[static_cast<std::size_t>(i)];
  }

  // Embedding row k and input projection.
  {
    auto d_embed = gspan(gi_embed);
    for (int t = 0; t < dt; ++t)
      d_embed[static_cast<std::size_t>(k) * dt + static_cast<std::size_t>(t)] +=
          d_e[static_cast<std::size_t>(t)];
  }
  outer_add(gspan(gi_win), dh, nin, d_h, ws.z);
  add_to(gspan(gi_bin), d_h);
}

void ScoreNet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ScoreNet::save: cannot open " + path);
  nlohmann::ordered_json header{{"dim", cfg_.dim},
                                {"with_momentum", cfg_.with_momentum},
                                {"hidden", cfg_.hidden},
                                {"time_dim", cfg_.time_dim},
                                {"blocks", cfg_.blocks},
                                {"max_step", cfg_.max_step},
                                {"params", params_.size()}};
  out << kMagic << "\n" << header.dump() << "\n";
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(params_.size() * sizeof(double)));
  if (!out) throw std::runtime_error("ScoreNet::save: write failed");
}

ScoreNet ScoreNet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ScoreNet::load: cannot open " + path);
  std::string magic, header_line;
  std::getline(in, magic);
  if (magic != kMagic) throw std::runtime_error("ScoreNet::load: bad magic/version");
  std::getline(in, header_line);
  const auto header = nlohmann::json::parse(header_line);
  ScoreNetConfig cfg;
  cfg.dim = header.at("dim").get<int>();
  cfg.with_momentum = header.at("with_momentum").get<bool>();
  cfg.hidden = header.at("hidden").get<int>();
  cfg.time_dim = header.at("time_dim").get<int>();
  cfg.blocks = header.at("blocks").get<int>();
  cfg.max_step = header.at("max_step").get<int>();

  ScoreNet net(cfg, RngStream(0));
  const auto n = header.at("params").get<std::size_t>();
  if (n != net.params_.size()) throw std::runtime_error("ScoreNet::load: parameter count mismatch");
  in.read(reinterpret_cast<char*>(net.params_.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("ScoreNet::load: truncated parameter block");
  return net;
}

UlaScore warm_start_ula(const ScoreNet* net, const AnnealedPath* path) {
  return [net, path](int k, const Vec& x) {
    Vec s = net->forward(k, x);
    const Vec g = annealed_grad(*path, k, x);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i];
    return s;
  };
}

MomentumScore warm_start_uha(const ScoreNet* net, Vec mass_diag) {
  MomentumScore out;
  out.score = [net, mass_diag](int k, const Vec& x, const Vec& p) {
    Vec s = net->forward(k, x, p);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] -= p[i] / mass_diag[i];
    return s;
  };
  // M s + p with the -M^{-1} p term cancelled algebraically.
  out.drift_term = [net, mass_diag](int k, const Vec& x, const Vec& p) {
    Vec t = net->forward(k, x, p);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= mass_diag[i];
    return t;
  };
  return out;
}

}  // namespace mcd

#include "decembed/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace decembed {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                                std::to_string(got));
}

}  // namespace

MlpParams MlpParams::zeros(std::size_t in, std::size_t hidden, std::size_t out) {
  return {Tensor(hidden, in), Tensor(hidden, 1), Tensor(out, hidden), Tensor(out, 1)};
}

MlpParams MlpParams::init(std::size_t in, std::size_t hidden, std::size_t out, CounterRng& rng) {
  MlpParams p = zeros(in, hidden, out);
  init_uniform_fan_in(p.W1, in, rng);
  init_uniform_fan_in(p.b1, in, rng);
  init_uniform_fan_in(p.W2, hidden, rng);
  init_uniform_fan_in(p.b2, hidden, rng);
  return p;
}

void MlpParams::zero() {
  for (Tensor* t : tensors()) t->zero();
}

void mlp_output(const MlpParams& p, std::span<const double> x, std::vector<double>& hidden, std::vector<double>& out) {
  require_size(x.size(), p.input_size(), "mlp_forward");
  hidden.resize(p.hidden_size());
  out.resize(p.output_size());
  affine(p.W1, p.b1, x.data(), hidden.data());
  for (double& h : hidden) h = h > 0.0 ? h : 0.0;
  affine(p.W2, p.b2, hidden.data(), out.data());
}

MlpCache mlp_forward(const MlpParams& p, std::span<const double> x) {
  require_size(x.size(), p.input_size(), "mlp_forward");
  MlpCache c;
  c.x.assign(x.begin(), x.end());
  c.pre.resize(p.hidden_size());
  affine(p.W1, p.b1, x.data(), c.pre.data());
  c.hidden.resize(c.pre.size());
  for (std::size_t k = 0; k < c.pre.size(); ++k) c.hidden[k] = c.pre[k] > 0.0 ? c.pre[k] : 0.0;
  c.out.resize(p.output_size());
  affine(p.W2, p.b2, c.hidden.data(), c.out.data());
  return c;
}

std::vector<double> mlp_backward(const MlpParams& p, const MlpCache& cache, std::span<const double> d_out,
                                 MlpParams& grads) {
  require_size(d_out.size(), p.output_size(), "mlp_backward");
  if (!grads.W1.same_shape(p.W1) || !grads.W2.same_shape(p.W2)) throw std::invalid_argument("mlp_backward: gradient shape mismatch");
  const std::size_t H = p.hidden_size(), O = p.output_size(), I = p.input_size();

  std::vector<double> d_pre(H, 0.0);
  for (std::size_t o = 0; o < O; ++o) {
    const double g = d_out[o];
    if (g == 0.0) continue;
    grads.b2.data[o] += g;
    double* gw = &grads.W2.data[o * H];
    const double* w = &p.W2.data[o * H];
    for (std::size_t h = 0; h < H; ++h) {
      gw[h] += g * cache.hidden[h];
      d_pre[h] += g * w[h];
    }
  }
  std::vector<double> d_x(I, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    if (cache.pre[h] <= 0.0) continue;
    const double g = d_pre[h];
    if (g == 0.0) continue;
    grads.b1.data[h] += g;
    double* gw = &grads.W1.data[h * I];
    const double* w = &p.W1.data[h * I];
    for (std::size_t i = 0; i < I; ++i) {
      gw[i] += g * cache.x[i];
      d_x[i] += g * w[i];
    }
  }
  return d_x;
}

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden) {
  LstmParams p;
  p.input_size = input_size;
  p.hidden = hidden;
  p.W = Tensor(4 * hidden, input_size + hidden);
  p.b = Tensor(4 * hidden, 1);
  return p;
}

LstmParams LstmParams::init(std::size_t input_size, std::size_t hidden, CounterRng& rng) {
  LstmParams p = zeros(input_size, hidden);
  init_uniform_fan_in(p.W, input_size + hidden, rng);
  for (std::size_t k = 0; k < hidden; ++k) p.b.data[hidden + k] = 1.0;
  return p;
}

void LstmParams::zero() {
  W.zero();
  b.zero();
}

LstmStep lstm_step(const LstmParams& p, std::span<const double> x, std::span<const double> h_prev,
                   std::span<const double> c_prev) {
  require_size(x.size(), p.input_size, "lstm_step input");
  require_size(h_prev.size(), p.hidden, "lstm_step h_prev");
  require_size(c_prev.size(), p.hidden, "lstm_step c_prev");
  const std::size_t H = p.hidden;
  LstmStep out;
  LstmCache& k = out.cache;
  k.xh.assign(x.begin(), x.end());
  k.xh.insert(k.xh.end(), h_prev.begin(), h_prev.end());
  std::vector<double> z(4 * H);
  affine(p.W, p.b, k.xh.data(), z.data());
  k.i.resize(H);
  k.f.resize(H);
  k.o.resize(H);
  k.g.resize(H);
  k.c_prev.assign(c_prev.begin(), c_prev.end());
  k.c.resize(H);
  k.tanh_c.resize(H);
  out.h.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    k.i[j] = sigmoid(z[j]);
    k.f[j] = sigmoid(z[H + j]);
    k.o[j] = sigmoid(z[2 * H + j]);
    k.g[j] = std::tanh(z[3 * H + j]);
    k.c[j] = k.f[j] * c_prev[j] + k.i[j] * k.g[j];
    k.tanh_c[j] = std::tanh(k.c[j]);
    out.h[j] = k.o[j] * k.tanh_c[j];
  }
  out.c = k.c;
  return out;
}

LstmGradients lstm_backward_through_time(const LstmParams& p, std::span<const LstmCache> caches,
                                         std::span<const std::vector<double>> d_h) {
  if (caches.empty()) throw std::invalid_argument("lstm_backward_through_time: empty sequence");
  require_size(d_h.size(), caches.size(), "lstm_backward_through_time");
  const std::size_t H = p.hidden, I = p.input_size, C = I + H;
  LstmGradients g;
  g.params = LstmParams::zeros(I, H);
  g.d_x.assign(caches.size(), std::vector<double>(I, 0.0));

  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H), dxh(C);
  for (std::size_t t = caches.size(); t-- > 0;) {
    const LstmCache& k = caches[t];
    require_size(d_h[t].size(), H, "lstm_backward_through_time d_h");
    for (std::size_t j = 0; j < H; ++j) {
      const double dh = d_h[t][j] + dh_next[j];
      const double d_o = dh * k.tanh_c[j];
      const double dc = dc_next[j] + dh * k.o[j] * (1.0 - k.tanh_c[j] * k.tanh_c[j]);
      const double d_i = dc * k.g[j];
      const double d_f = dc * k.c_prev[j];
      const double d_g = dc * k.i[j];
      dc_next[j] = dc * k.f[j];
      dz[j] = d_i * k.i[j] * (1.0 - k.i[j]);
      dz[H + j] = d_f * k.f[j] * (1.0 - k.f[j]);
      dz[2 * H + j] = d_o * k.o[j] * (1.0 - k.o[j]);
      dz[3 * H + j] = d_g * (1.0 - k.g[j] * k.g[j]);
    }
    std::fill(dxh.begin(), dxh.end(), 0.0);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      const double d = dz[r];
      if (d == 0.0) continue;
      g.params.b.data[r] += d;
      double* gw = &g.params.W.data[r * C];
      const double* w = &p.W.data[r * C];
      for (std::size_t c = 0; c < C; ++c) {
        gw[c] += d * k.xh[c];
        dxh[c] += d * w[c];
      }
    }
    for (std::size_t c = 0; c < I; ++c) g.d_x[t][c] = dxh[c];
    for (std::size_t j = 0; j < H; ++j) dh_next[j] = dxh[I + j];
  }
  g.d_h0 = dh_next;
  g.d_c0 = dc_next;
  return g;
}

AdamState adam_init(const std::vector<const Tensor*>& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const Tensor* t : params) {
    s.m.emplace_back(t->rows, t->cols);
    s.v.emplace_back(t->rows, t->cols);
  }
  return s;
}

void adam_update(AdamState& s, const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size() || params.size() != s.m.size())
    throw std::invalid_argument("adam_update: parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same_shape(*params[k], *grads[k], "adam_update");
    require_same_shape(*params[k], s.m[k], "adam_update state");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* w = params[k]->data.data();
    const double* g = grads[k]->data.data();
    double* m = s.m[k].data.data();
    double* v = s.v[k].data.data();
    for (std::size_t n = 0; n < params[k]->size(); ++n) {
      m[n] = s.beta1 * m[n] + (1.0 - s.beta1) * g[n];
      v[n] = s.beta2 * v[n] + (1.0 - s.beta2) * g[n] * g[n];
      const double mh = m[n] / c1, vh = v[n] / c2;
      w[n] -= s.lr * mh / (std::sqrt(vh) + s.eps);
    }
  }
}

MseResult mse_loss(std::span<const double> pred, std::span<const double> target) {
  require_size(target.size(), pred.size(), "mse_loss");
  if (pred.empty()) throw std::invalid_argument("mse_loss: empty input");
  const double n = static_cast<double>(pred.size());
  MseResult r{0.0, std::vector<double>(pred.size())};
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = pred[k] - target[k];
    r.loss += d * d;
    r.d_pred[k] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

std::vector<Tensor> numeric_gradient(const std::function<double()>& loss, const std::vector<Tensor*>& params,
                                     double step) {
  std::vector<Tensor> out;
  for (Tensor* t : params) {
    Tensor g(t->rows, t->cols);
    for (std::size_t n = 0; n < t->size(); ++n) {
      const double saved = t->data[n];
      t->data[n] = saved + step;
      const double up = loss();
      t->data[n] = saved - step;
      const double down = loss();
      t->data[n] = saved;
      g.data[n] = (up - down) / (2.0 * step);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double max_relative_error(const std::vector<const Tensor*>& analytic, const std::vector<Tensor>& numeric,
                          double floor) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("max_relative_error: tensor count mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    require_same_shape(*analytic[k], numeric[k], "max_relative_error");
    for (std::size_t n = 0; n < numeric[k].size(); ++n) {
      const double a = analytic[k]->data[n], b = numeric[k].data[n];
      worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a) + std::abs(b), floor));
    }
  }
  return worst;
}

}  // namespace decembed

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "decembed/tensor.hpp"

namespace decembed {

/// Two fully connected layers with ReLU on the hidden layer:
/// out = W2 relu(W1 x + b1) + b2.
struct MlpParams {
  Tensor W1, b1, W2, b2;

  static MlpParams zeros(std::size_t in, std::size_t hidden, std::size_t out);
  static MlpParams init(std::size_t in, std::size_t hidden, std::size_t out, CounterRng& rng);
  std::size_t input_size() const { return W1.cols; }
  std::size_t hidden_size() const { return W1.rows; }
  std::size_t output_size() const { return W2.rows; }
  std::vector<Tensor*> tensors() { return {&W1, &b1, &W2, &b2}; }
  std::vector<const Tensor*> tensors() const { return {&W1, &b1, &W2, &b2}; }
  void zero();
  bool operator==(const MlpParams&) const = default;
};

struct MlpCache {
  std::vector<double> x;
  std::vector<double> pre;     ///< W1 x + b1
  std::vector<double> hidden;  ///< relu(pre)
  std::vector<double> out;
};

MlpCache mlp_forward(const MlpParams& p, std::span<const double> x);
/// Output only, without keeping a cache.
void mlp_output(const MlpParams& p, std::span<const double> x, std::vector<double>& hidden, std::vector<double>& out);

/// Adds the parameter gradients to `grads` and returns d(loss)/dx.
std::vector<double> mlp_backward(const MlpParams& p, const MlpCache& cache, std::span<const double> d_out,
                                 MlpParams& grads);

/// Standard LSTM cell without peepholes. Gate rows are stacked as
/// input, forget, output, candidate; W acts on [x, h_prev].
struct LstmParams {
  Tensor W, b;
  std::size_t input_size = 0;
  std::size_t hidden = 0;

  static LstmParams zeros(std::size_t input_size, std::size_t hidden);
  /// Weights uniform in +-1/sqrt(input_size + hidden), forget-gate bias 1.
  static LstmParams init(std::size_t input_size, std::size_t hidden, CounterRng& rng);
  std::vector<Tensor*> tensors() { return {&W, &b}; }
  std::vector<const Tensor*> tensors() const { return {&W, &b}; }
  void zero();
  bool operator==(const LstmParams&) const = default;
};

struct LstmCache {
  std::vector<double> xh;  ///< [x, h_prev]
  std::vector<double> i, f, o, g;
  std::vector<double> c_prev, c, tanh_c;
};

struct LstmStep {
  std::vector<double> h, c;
  LstmCache cache;
};

LstmStep lstm_step(const LstmParams& p, std::span<const double> x, std::span<const double> h_prev,
                   std::span<const double> c_prev);

struct LstmGradients {
  LstmParams params;
  std::vector<std::vector<double>> d_x;  ///< per step
  std::vector<double> d_h0, d_c0;
};

/// Gradients of a loss whose derivative with respect to the output h_t of
/// step t is d_h[t], accumulated over the whole unrolled sequence.
LstmGradients lstm_backward_through_time(const LstmParams& p, std::span<const LstmCache> caches,
                                         std::span<const std::vector<double>> d_h);

struct AdamState {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Tensor> m, v;
};

AdamState adam_init(const std::vector<const Tensor*>& params, double lr);
/// One bias-corrected Adam step, in place.
void adam_update(AdamState& state, const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

struct MseResult {
  double loss;
  std::vector<double> d_pred;
};

/// mean((pred - target)^2) and its gradient 2(pred - target)/n.
MseResult mse_loss(std::span<const double> pred, std::span<const double> target);

/// Central differences of `loss` with respect to every entry of `params`.
std::vector<Tensor> numeric_gradient(const std::function<double()>& loss, const std::vector<Tensor*>& params,
                                     double step = 1e-5);

/// max |a - n| / max(|a| + |n|, floor) over all entries; the floor keeps
/// entries whose true gradient is zero from dominating through rounding noise.
double max_relative_error(const std::vector<const Tensor*>& analytic, const std::vector<Tensor>& numeric,
                          double floor = 1e-6);

}  // namespace decembed

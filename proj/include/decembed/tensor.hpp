#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "decembed/rng.hpp"

namespace decembed {

/// Row-major dense matrix of doubles. Column vectors have cols == 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  static Tensor column(std::vector<double> values);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  void zero();
  bool operator==(const Tensor& o) const = default;
};

/// Throws std::invalid_argument with `what` when the shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Entries uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform_fan_in(Tensor& t, std::size_t fan_in, CounterRng& rng);
void init_uniform(Tensor& t, double lo, double hi, CounterRng& rng);

/// y = W x + b for a column vector x.
void affine(const Tensor& W, const Tensor& b, const double* x, double* y);

using NamedTensor = std::pair<std::string, const Tensor*>;

/// JSON text {"tensors":[{"name","shape":[r,c],"data":[...]}]} with
/// round-trip exact number formatting.
std::string tensors_to_json(const std::vector<NamedTensor>& tensors);
std::vector<std::pair<std::string, Tensor>> tensors_from_json(const std::string& text);

}  // namespace decembed

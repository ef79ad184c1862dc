#include "decembed/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace decembed {

Tensor Tensor::column(std::vector<double> values) {
  Tensor t;
  t.rows = values.size();
  t.cols = 1;
  t.data = std::move(values);
  return t;
}

void Tensor::zero() { std::fill(data.begin(), data.end(), 0.0); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                                std::to_string(b.cols) + ")");
}

void init_uniform(Tensor& t, double lo, double hi, CounterRng& rng) {
  for (double& v : t.data) v = lo + (hi - lo) * rng.uniform();
}

void init_uniform_fan_in(Tensor& t, std::size_t fan_in, CounterRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  init_uniform(t, -bound, bound, rng);
}

void affine(const Tensor& W, const Tensor& b, const double* x, double* y) {
  const std::size_t R = W.rows, C = W.cols;
  const double* w = W.data.data();
  for (std::size_t r = 0; r < R; ++r) {
    double acc = b.data[r];
    const double* row = w + r * C;
    for (std::size_t c = 0; c < C; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

std::string tensors_to_json(const std::vector<NamedTensor>& tensors) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, t] : tensors)
    arr.push_back({{"name", name}, {"shape", {t->rows, t->cols}}, {"data", t->data}});
  return nlohmann::json{{"tensors", arr}}.dump(1);
}

std::vector<std::pair<std::string, Tensor>> tensors_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& item : doc.at("tensors")) {
    Tensor t(item.at("shape").at(0).get<std::size_t>(), item.at("shape").at(1).get<std::size_t>());
    t.data = item.at("data").get<std::vector<double>>();
    if (t.data.size() != t.rows * t.cols) throw std::invalid_argument("checkpoint: tensor data does not match its shape");
    out.emplace_back(item.at("name").get<std::string>(), std::move(t));
  }
  return out;
}

}  // namespace decembed

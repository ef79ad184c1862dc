#include "decembed/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace decembed {

SchemeKind scheme_from_name(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (n == "rnn-e" || n == "rnne" || n == "rnn") return SchemeKind::rnn_e;
  if (n == "fmc") return SchemeKind::fmc;
  if (n == "pcac") return SchemeKind::pcac;
  throw std::invalid_argument("unknown embedding scheme '" + name + "'");
}

const char* to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::rnn_e: return "RNN-E";
    case SchemeKind::fmc: return "FMC";
    case SchemeKind::pcac: return "PCAC";
  }
  return "?";
}

SymmetricEigen jacobi_eigen(Tensor a, double tol, int max_sweeps) {
  if (a.rows != a.cols) throw std::invalid_argument("jacobi_eigen: matrix is not square");
  const std::size_t n = a.rows;
  Tensor v(n, n);
  for (std::size_t k = 0; k < n; ++k) v(k, k) = 1.0;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < max_sweeps && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  SymmetricEigen out;
  out.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.values[k] = a(k, k);
  out.vectors = std::move(v);
  return out;
}

PcaModel pca_fit(const std::vector<std::vector<double>>& data, std::size_t k) {
  if (data.empty()) throw std::invalid_argument("pca_fit: empty dataset");
  const std::size_t d = data.front().size();
  if (k == 0 || k > d) throw std::invalid_argument("pca_fit: k must lie in [1, " + std::to_string(d) + "]");
  for (const auto& row : data)
    if (row.size() != d) throw std::invalid_argument("pca_fit: rows differ in length");

  const double n = static_cast<double>(data.size());
  PcaModel m;
  m.mean.assign(d, 0.0);
  for (const auto& row : data)
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += row[j];
  for (double& x : m.mean) x /= n;

  Tensor cov(d, d);
  std::vector<double> centered(d);
  for (const auto& row : data) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = row[j] - m.mean[j];
    for (std::size_t p = 0; p < d; ++p) {
      if (centered[p] == 0.0) continue;
      for (std::size_t q = p; q < d; ++q) cov(p, q) += centered[p] * centered[q];
    }
  }
  for (std::size_t p = 0; p < d; ++p)
    for (std::size_t q = p; q < d; ++q) {
      cov(p, q) /= n;
      cov(q, p) = cov(p, q);
    }

  const SymmetricEigen eig = jacobi_eigen(cov);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return eig.values[x] > eig.values[y]; });

  m.projection = Tensor(k, d);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t col = order[r];
    double sign = 1.0;
    for (std::size_t j = 0; j < d; ++j)
      if (std::abs(eig.vectors(j, col)) > 1e-12) {
        sign = eig.vectors(j, col) > 0.0 ? 1.0 : -1.0;
        break;
      }
    for (std::size_t j = 0; j < d; ++j) m.projection(r, j) = sign * eig.vectors(j, col);
    m.eigenvalues.push_back(std::max(0.0, eig.values[col]));
  }
  return m;
}

std::vector<double> pca_project(const PcaModel& m, std::span<const double> x) {
  const std::size_t k = m.projection.rows, d = m.projection.cols;
  if (x.size() != d) throw std::invalid_argument("pca_project: wrong input length");
  std::vector<double> out(k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += m.projection(r, j) * (x[j] - m.mean[j]);
    out[r] = acc;
  }
  return out;
}

std::size_t EmbeddingScheme::dim() const {
  switch (kind) {
    case SchemeKind::fmc: return window * triple_width();
    case SchemeKind::pcac: return pca.projection.rows;
    case SchemeKind::rnn_e: return lstm.hidden;
  }
  return 0;
}

namespace {

EmbeddingScheme base_scheme(const EnvModel& env, SchemeKind kind) {
  EmbeddingScheme s;
  s.kind = kind;
  s.num_agents = env.num_agents;
  s.num_actions = env.num_actions(0);
  s.num_obs = env.num_private_obs(0);
  for (std::size_t i = 1; i < env.num_agents; ++i)
    if (env.num_actions(i) != s.num_actions || env.num_private_obs(i) != s.num_obs)
      throw std::invalid_argument("embedding schemes need agents with identical action and observation alphabets");
  s.num_common = env.num_common_obs();
  return s;
}

void check_indices(const EmbeddingScheme& s, int action, int obs, int common) {
  if (action < 0 || static_cast<std::size_t>(action) >= s.num_actions || obs < 0 ||
      static_cast<std::size_t>(obs) >= s.num_obs || common < 0 || static_cast<std::size_t>(common) >= s.num_common)
    throw std::out_of_range("embed_update: index out of range");
}

}  // namespace

EmbeddingScheme make_fmc(const EnvModel& env, std::size_t window) {
  if (window == 0) throw std::invalid_argument("FMC window must be positive");
  EmbeddingScheme s = base_scheme(env, SchemeKind::fmc);
  s.window = window;
  return s;
}

EmbeddingScheme make_rnn_e(const EnvModel& env, std::size_t hidden, CounterRng& rng) {
  EmbeddingScheme s = base_scheme(env, SchemeKind::rnn_e);
  s.lstm = LstmParams::init(s.num_actions + s.num_obs + s.num_common + s.num_agents, hidden, rng);
  return s;
}

EmbeddingScheme make_pcac(const EnvModel& env, std::size_t slots, std::size_t k, std::size_t samples, CounterRng& rng) {
  if (slots == 0 || samples == 0) throw std::invalid_argument("PCAC needs at least one slot and one sample");
  EmbeddingScheme s = base_scheme(env, SchemeKind::pcac);
  s.history_slots = slots;
  const std::size_t W = s.triple_width(), d = slots * W;
  std::vector<std::vector<double>> data(samples, std::vector<double>(d, 0.0));
  for (auto& row : data) {
    const std::size_t len = rng.below(slots + 1);
    for (std::size_t t = 0; t < len; ++t)
      encode_triple(s, static_cast<int>(rng.below(s.num_actions)), static_cast<int>(rng.below(s.num_obs)),
                    static_cast<int>(rng.below(s.num_common)), &row[t * W]);
  }
  s.pca = pca_fit(data, std::min(k, d));
  return s;
}

void encode_triple(const EmbeddingScheme& s, int action, int obs, int common, double* out) {
  std::fill(out, out + s.triple_width(), 0.0);
  out[action] = 1.0;
  out[s.num_actions + static_cast<std::size_t>(obs)] = 1.0;
  out[s.num_actions + s.num_obs + static_cast<std::size_t>(common)] = 1.0;
}

std::vector<double> rnn_input(const EmbeddingScheme& s, int agent, int action, int obs, int common) {
  check_indices(s, action, obs, common);
  std::vector<double> x(s.triple_width() + s.num_agents, 0.0);
  encode_triple(s, action, obs, common, x.data());
  x[s.triple_width() + static_cast<std::size_t>(agent)] = 1.0;
  return x;
}

EmbeddingState embed_init(const EmbeddingScheme& s, int agent) {
  if (agent < 0 || static_cast<std::size_t>(agent) >= s.num_agents) throw std::out_of_range("embed_init: invalid agent id");
  EmbeddingState st;
  st.agent = agent;
  switch (s.kind) {
    case SchemeKind::fmc:
      st.buffer.assign(s.dim(), 0.0);
      st.vec = st.buffer;
      break;
    case SchemeKind::pcac:
      st.buffer.assign(s.history_slots * s.triple_width(), 0.0);
      st.vec = pca_project(s.pca, st.buffer);
      break;
    case SchemeKind::rnn_e:
      st.h.assign(s.lstm.hidden, 0.0);
      st.c.assign(s.lstm.hidden, 0.0);
      st.vec = st.h;
      break;
  }
  return st;
}

EmbeddingState embed_update(const EmbeddingScheme& s, const EmbeddingState& prev, int action, int obs, int common) {
  check_indices(s, action, obs, common);
  EmbeddingState st = prev;
  ++st.updates;
  const std::size_t W = s.triple_width();
  switch (s.kind) {
    case SchemeKind::fmc:
      std::copy(st.buffer.begin() + static_cast<long>(W), st.buffer.end(), st.buffer.begin());
      encode_triple(s, action, obs, common, &st.buffer[st.buffer.size() - W]);
      st.vec = st.buffer;
      break;
    case SchemeKind::pcac: {
      const std::size_t slot = static_cast<std::size_t>(prev.updates);
      if (slot < s.history_slots) {
        encode_triple(s, action, obs, common, &st.buffer[slot * W]);
      } else {
        std::copy(st.buffer.begin() + static_cast<long>(W), st.buffer.end(), st.buffer.begin());
        encode_triple(s, action, obs, common, &st.buffer[st.buffer.size() - W]);
      }
      st.vec = pca_project(s.pca, st.buffer);
      break;
    }
    case SchemeKind::rnn_e: {
      const auto x = rnn_input(s, prev.agent, action, obs, common);
      auto step = lstm_step(s.lstm, x, prev.h, prev.c);
      st.h = std::move(step.h);
      st.c = std::move(step.c);
      st.vec = st.h;
      break;
    }
  }
  return st;
}

const std::vector<double>& embed_vector(const EmbeddingState& state) { return state.vec; }

}  // namespace decembed

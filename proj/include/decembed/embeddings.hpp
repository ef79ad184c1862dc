#pragma once

#include <span>
#include <string>
#include <vector>

#include "decembed/model.hpp"
#include "decembed/nn.hpp"
#include "decembed/tensor.hpp"

namespace decembed {

enum class SchemeKind { rnn_e, fmc, pcac };

SchemeKind scheme_from_name(const std::string& name);
const char* to_string(SchemeKind kind);

struct PcaModel {
  std::vector<double> mean;
  Tensor projection;  ///< k x d, rows are orthonormal principal axes
  std::vector<double> eigenvalues;  ///< the k kept ones, descending
};

struct SymmetricEigen {
  std::vector<double> values;
  Tensor vectors;  ///< column j belongs to values[j]
};

/// Cyclic Jacobi rotations until the off-diagonal norm drops below `tol`.
SymmetricEigen jacobi_eigen(Tensor a, double tol = 1e-12, int max_sweeps = 100);

/// Top-k principal axes of the sample covariance (1/n normalization).
/// Axes are sorted by eigenvalue, ties by original index, and signed so
/// that the first nonzero component is positive.
PcaModel pca_fit(const std::vector<std::vector<double>>& data, std::size_t k);
std::vector<double> pca_project(const PcaModel& model, std::span<const double> x);

/// History compression shared by all agents. Agents must have identical
/// action and observation alphabets.
struct EmbeddingScheme {
  SchemeKind kind = SchemeKind::fmc;
  std::size_t num_agents = 0;
  std::size_t num_actions = 0;
  std::size_t num_obs = 0;
  std::size_t num_common = 1;
  std::size_t window = 4;         ///< FMC memory length M
  std::size_t history_slots = 0;  ///< PCAC raw buffer length in triples
  PcaModel pca;
  LstmParams lstm;

  std::size_t triple_width() const { return num_actions + num_obs + num_common; }
  std::size_t dim() const;
};

EmbeddingScheme make_fmc(const EnvModel& env, std::size_t window);
EmbeddingScheme make_rnn_e(const EnvModel& env, std::size_t hidden, CounterRng& rng);
/// Fits the projection on `samples` random padded histories with up to
/// `slots` triples each.
EmbeddingScheme make_pcac(const EnvModel& env, std::size_t slots, std::size_t k, std::size_t samples, CounterRng& rng);

struct EmbeddingState {
  int agent = 0;
  int updates = 0;
  std::vector<double> buffer;  ///< FMC window or PCAC padded history
  std::vector<double> h, c;    ///< RNN-E
  std::vector<double> vec;
};

EmbeddingState embed_init(const EmbeddingScheme& scheme, int agent);
EmbeddingState embed_update(const EmbeddingScheme& scheme, const EmbeddingState& state, int action, int obs, int common);
const std::vector<double>& embed_vector(const EmbeddingState& state);

/// LSTM input for one RNN-E step: one-hot(a), one-hot(y), one-hot(z), one-hot(agent).
std::vector<double> rnn_input(const EmbeddingScheme& scheme, int agent, int action, int obs, int common);
/// One-hot (a, y, z) triple as used by FMC and PCAC.
void encode_triple(const EmbeddingScheme& scheme, int action, int obs, int common, double* out);

}  // namespace decembed

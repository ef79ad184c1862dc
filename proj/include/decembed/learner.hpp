#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "decembed/embeddings.hpp"
#include "decembed/model.hpp"
#include "decembed/nn.hpp"

namespace decembed {

struct TrainConfig {
  int episodes = 40000;
  std::size_t batch_size = 400;
  std::size_t replay_capacity = 4000;
  double lr = 1e-2;
  int target_interval = 100;
  double epsilon_start = 0.8;
  int train_horizon = 10;
  int eval_episodes = 2000;
  int runs = 10;
  std::uint64_t seed = 0;
  std::size_t dqn_hidden = 10;
  std::size_t rnn_hidden = 10;
  std::size_t fmc_window = 4;
  std::size_t pcac_k = 10;
  std::size_t pcac_samples = 10000;
  /// Learning-curve sampling: every `curve_interval` episodes run
  /// `curve_episodes` greedy episodes at the training horizon.
  int curve_interval = 1000;
  int curve_episodes = 100;
};

/// Throws std::invalid_argument on non-positive sizes.
void validate_config(const TrainConfig& cfg);

/// eps(e) = eps_start * (1 - e / episodes), clipped at 0. Episodes count from 0.
double epsilon_at(const TrainConfig& cfg, int episode);

struct Transition {
  std::vector<double> embedding;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_embedding;
  bool done = false;
  int agent = 0;
};

/// Fixed-capacity FIFO store.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Oldest first.
  const Transition& at(std::size_t k) const { return items_.at(k); }
  /// Uniform draws with replacement.
  std::vector<const Transition*> sample(std::size_t n, CounterRng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

/// Uniform action with probability epsilon, otherwise the first maximizer.
int select_action(std::span<const double> q, double epsilon, CounterRng& rng);
int argmax(std::span<const double> q);

/// DQN input: embedding followed by one-hot(agent).
std::vector<double> dqn_input(std::span<const double> embedding, int agent, std::size_t num_agents);

struct DqnStep {
  double loss = 0.0;
  MlpParams grads;
};

/// Targets r + (1 - done) max_a' Q_target(s', a'), undiscounted; loss is the
/// mean squared error of Q_online(s)[a] over the batch.
DqnStep dqn_train_step(const MlpParams& online, const MlpParams& target, std::span<const Transition* const> batch,
                       std::size_t num_agents);

/// Shared embedding scheme and shared Q network.
struct Policy {
  EmbeddingScheme scheme;
  MlpParams dqn;
};

/// Greedy action of `agent` for an embedding.
int greedy_action(const Policy& policy, const EmbeddingState& state);
/// Deterministic history policies equivalent to running the greedy policy.
std::vector<HistoryPolicy> greedy_history_policies(const Policy& policy);

struct CurvePoint {
  int episode;
  double epsilon;
  double eval_return;
};

struct TrainResult {
  Policy policy;
  std::vector<CurvePoint> curve;
};

/// One seeded training run.
TrainResult train(const EnvModel& env, SchemeKind kind, const TrainConfig& cfg, std::uint64_t run_seed);

struct EvalResult {
  double mean = 0.0;
  double stderr_mean = 0.0;
};

/// Greedy rollouts; episode k uses the stream (seed, k).
EvalResult evaluate(const EnvModel& env, const Policy& policy, int horizon, int episodes, std::uint64_t seed);

}  // namespace decembed

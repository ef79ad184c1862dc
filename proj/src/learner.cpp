#include "decembed/learner.hpp"

#include <cmath>
#include <stdexcept>

namespace decembed {

void validate_config(const TrainConfig& c) {
  if (c.episodes <= 0) throw std::invalid_argument("episodes must be positive");
  if (c.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (c.replay_capacity < c.batch_size) throw std::invalid_argument("replay capacity must hold at least one batch");
  if (!(c.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (c.target_interval <= 0) throw std::invalid_argument("target interval must be positive");
  if (c.epsilon_start < 0.0 || c.epsilon_start > 1.0) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (c.train_horizon <= 0) throw std::invalid_argument("train horizon must be positive");
  if (c.eval_episodes <= 0) throw std::invalid_argument("eval episodes must be positive");
  if (c.runs <= 0) throw std::invalid_argument("runs must be positive");
  if (c.dqn_hidden == 0 || c.rnn_hidden == 0 || c.fmc_window == 0 || c.pcac_k == 0 || c.pcac_samples == 0)
    throw std::invalid_argument("network and embedding sizes must be positive");
  if (c.curve_interval <= 0 || c.curve_episodes <= 0) throw std::invalid_argument("curve settings must be positive");
}

double epsilon_at(const TrainConfig& cfg, int episode) {
  const double e = cfg.epsilon_start * (1.0 - static_cast<double>(episode) / static_cast<double>(cfg.episodes));
  return e > 0.0 ? e : 0.0;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, CounterRng& rng) const {
  if (items_.empty()) throw std::logic_error("sample from an empty replay buffer");
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &items_[rng.below(items_.size())];
  return out;
}

int argmax(std::span<const double> q) {
  if (q.empty()) throw std::invalid_argument("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t k = 1; k < q.size(); ++k)
    if (q[k] > q[best]) best = k;
  return static_cast<int>(best);
}

int select_action(std::span<const double> q, double epsilon, CounterRng& rng) {
  if (q.empty()) throw std::invalid_argument("select_action: no actions");
  if (epsilon > 0.0 && rng.uniform() < epsilon) return static_cast<int>(rng.below(q.size()));
  return argmax(q);
}

std::vector<double> dqn_input(std::span<const double> embedding, int agent, std::size_t num_agents) {
  std::vector<double> x(embedding.begin(), embedding.end());
  x.resize(embedding.size() + num_agents, 0.0);
  x[embedding.size() + static_cast<std::size_t>(agent)] = 1.0;
  return x;
}

DqnStep dqn_train_step(const MlpParams& online, const MlpParams& target, std::span<const Transition* const> batch,
                       std::size_t num_agents) {
  if (batch.empty()) throw std::invalid_argument("dqn_train_step: empty batch");
  DqnStep out;
  out.grads = MlpParams::zeros(online.input_size(), online.hidden_size(), online.output_size());
  const double n = static_cast<double>(batch.size());
  std::vector<double> hidden, q_next, d_out(online.output_size());
  for (const Transition* tr : batch) {
    double y = tr->reward;
    if (!tr->done) {
      mlp_output(target, dqn_input(tr->next_embedding, tr->agent, num_agents), hidden, q_next);
      y += q_next[static_cast<std::size_t>(argmax(q_next))];
    }
    const MlpCache cache = mlp_forward(online, dqn_input(tr->embedding, tr->agent, num_agents));
    if (tr->action < 0 || static_cast<std::size_t>(tr->action) >= cache.out.size())
      throw std::invalid_argument("dqn_train_step: action out of range");
    const double diff = cache.out[static_cast<std::size_t>(tr->action)] - y;
    out.loss += diff * diff / n;
    std::fill(d_out.begin(), d_out.end(), 0.0);
    d_out[static_cast<std::size_t>(tr->action)] = 2.0 * diff / n;
    mlp_backward(online, cache, d_out, out.grads);
  }
  return out;
}

int greedy_action(const Policy& policy, const EmbeddingState& state) {
  std::vector<double> hidden, q;
  mlp_output(policy.dqn, dqn_input(embed_vector(state), state.agent, policy.scheme.num_agents), hidden, q);
  return argmax(q);
}

std::vector<HistoryPolicy> greedy_history_policies(const Policy& policy) {
  std::vector<HistoryPolicy> out;
  for (std::size_t i = 0; i < policy.scheme.num_agents; ++i) {
    out.push_back([&policy](const LocalHistory& h) {
      EmbeddingState st = embed_init(policy.scheme, h.agent);
      for (std::size_t k = 0; k < h.actions.size(); ++k)
        st = embed_update(policy.scheme, st, h.actions[k], h.observations[k + 1], h.commons[k + 1]);
      std::vector<double> dist(policy.dqn.output_size(), 0.0);
      dist[static_cast<std::size_t>(greedy_action(policy, st))] = 1.0;
      return dist;
    });
  }
  return out;
}

namespace {

struct AgentTrace {
  std::vector<std::vector<double>> embeddings;  // vec at t = 1..T
  std::vector<int> actions;
  std::vector<LstmCache> caches;  // caches[k] produced embeddings[k + 1]
};

struct Episode {
  std::vector<AgentTrace> agents;
  std::vector<double> rewards;
  double total = 0.0;
};

/// One episode with epsilon-greedy actions. RNN-E caches are kept when requested.
Episode run_episode(const EnvModel& env, const Policy& policy, int horizon, double epsilon, CounterRng& rng,
                    bool keep_caches) {
  const std::size_t N = env.num_agents;
  const auto& scheme = policy.scheme;
  Episode ep;
  ep.agents.resize(N);
  std::vector<EmbeddingState> states;
  for (std::size_t i = 0; i < N; ++i) states.push_back(embed_init(scheme, static_cast<int>(i)));

  int state = sample_initial(env, rng).state;
  std::vector<int> joint(N);
  std::vector<double> hidden, q;
  for (int t = 1; t <= horizon; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      mlp_output(policy.dqn, dqn_input(states[i].vec, static_cast<int>(i), N), hidden, q);
      joint[i] = select_action(q, epsilon, rng);
      ep.agents[i].embeddings.push_back(states[i].vec);
      ep.agents[i].actions.push_back(joint[i]);
    }
    if (t == horizon) {
      const double r = env.reward_of(static_cast<std::size_t>(state), env.joint_action_index(joint));
      ep.rewards.push_back(r);
      ep.total += r;
      break;
    }
    const StepResult res = step(env, state, joint, rng);
    ep.rewards.push_back(res.reward);
    ep.total += res.reward;
    for (std::size_t i = 0; i < N; ++i) {
      if (scheme.kind == SchemeKind::rnn_e && keep_caches) {
        const auto x = rnn_input(scheme, static_cast<int>(i), joint[i], res.private_obs[i], res.common_obs);
        LstmStep s = lstm_step(scheme.lstm, x, states[i].h, states[i].c);
        states[i].h = s.h;
        states[i].c = std::move(s.c);
        states[i].vec = std::move(s.h);
        ++states[i].updates;
        ep.agents[i].caches.push_back(std::move(s.cache));
      } else {
        states[i] = embed_update(scheme, states[i], joint[i], res.private_obs[i], res.common_obs);
      }
    }
    state = res.next_state;
  }
  return ep;
}

/// LSTM gradients of the episode's own temporal-difference loss.
LstmParams rnn_episode_gradients(const Policy& policy, const MlpParams& target, const Episode& ep) {
  const auto& scheme = policy.scheme;
  const std::size_t N = scheme.num_agents, H = scheme.lstm.hidden;
  const std::size_t T = ep.rewards.size();
  LstmParams total = LstmParams::zeros(scheme.lstm.input_size, H);
  if (T < 2) return total;
  const double n = static_cast<double>(N * T);
  MlpParams scratch = MlpParams::zeros(policy.dqn.input_size(), policy.dqn.hidden_size(), policy.dqn.output_size());
  std::vector<double> hidden, q_next, d_out(policy.dqn.output_size());
  for (std::size_t i = 0; i < N; ++i) {
    const AgentTrace& tr = ep.agents[i];
    std::vector<std::vector<double>> d_h(T - 1, std::vector<double>(H, 0.0));
    for (std::size_t t = 1; t < T; ++t) {
      double y = ep.rewards[t];
      if (t + 1 < T) {
        mlp_output(target, dqn_input(tr.embeddings[t + 1], static_cast<int>(i), N), hidden, q_next);
        y += q_next[static_cast<std::size_t>(argmax(q_next))];
      }
      const MlpCache cache = mlp_forward(policy.dqn, dqn_input(tr.embeddings[t], static_cast<int>(i), N));
      const std::size_t a = static_cast<std::size_t>(tr.actions[t]);
      std::fill(d_out.begin(), d_out.end(), 0.0);
      d_out[a] = 2.0 * (cache.out[a] - y) / n;
      const auto d_x = mlp_backward(policy.dqn, cache, d_out, scratch);
      for (std::size_t k = 0; k < H; ++k) d_h[t - 1][k] = d_x[k];
    }
    const auto g = lstm_backward_through_time(scheme.lstm, tr.caches, d_h);
    for (std::size_t k = 0; k < total.W.size(); ++k) total.W.data[k] += g.params.W.data[k];
    for (std::size_t k = 0; k < total.b.size(); ++k) total.b.data[k] += g.params.b.data[k];
  }
  return total;
}

constexpr std::uint64_t kInitStream = 0x1d0f5eedULL;
constexpr std::uint64_t kCurveStream = 0xc0ffee01ULL;

}  // namespace

TrainResult train(const EnvModel& env, SchemeKind kind, const TrainConfig& cfg, std::uint64_t run_seed) {
  validate_config(cfg);
  CounterRng init_rng(derive_seed(run_seed, kInitStream));
  TrainResult out;
  Policy& policy = out.policy;
  switch (kind) {
    case SchemeKind::fmc: policy.scheme = make_fmc(env, cfg.fmc_window); break;
    case SchemeKind::rnn_e: policy.scheme = make_rnn_e(env, cfg.rnn_hidden, init_rng); break;
    case SchemeKind::pcac:
      policy.scheme = make_pcac(env, static_cast<std::size_t>(std::max(1, cfg.train_horizon - 1)), cfg.pcac_k,
                                cfg.pcac_samples, init_rng);
      break;
  }
  const std::size_t N = env.num_agents;
  policy.dqn = MlpParams::init(policy.scheme.dim() + N, cfg.dqn_hidden, env.num_actions(0), init_rng);
  MlpParams target = policy.dqn;
  AdamState dqn_adam = adam_init(std::as_const(policy.dqn).tensors(), cfg.lr);
  AdamState lstm_adam = adam_init(std::as_const(policy.scheme.lstm).tensors(), cfg.lr);
  ReplayBuffer replay(cfg.replay_capacity);
  const bool recurrent = kind == SchemeKind::rnn_e;

  for (int e = 0; e < cfg.episodes; ++e) {
    const double eps = epsilon_at(cfg, e);
    CounterRng rng = CounterRng::for_episode(run_seed, static_cast<std::uint64_t>(e));
    const Episode ep = run_episode(env, policy, cfg.train_horizon, eps, rng, recurrent);
    const std::size_t T = ep.rewards.size();
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t t = 0; t < T; ++t) {
        Transition tr;
        tr.embedding = ep.agents[i].embeddings[t];
        tr.action = ep.agents[i].actions[t];
        tr.reward = ep.rewards[t];
        tr.done = t + 1 == T;
        tr.next_embedding = tr.done ? tr.embedding : ep.agents[i].embeddings[t + 1];
        tr.agent = static_cast<int>(i);
        replay.push(std::move(tr));
      }

    if (replay.size() >= cfg.batch_size) {
      LstmParams lstm_grads;
      if (recurrent) lstm_grads = rnn_episode_gradients(policy, target, ep);
      const auto batch = replay.sample(cfg.batch_size, rng);
      const DqnStep d = dqn_train_step(policy.dqn, target, batch, N);
      adam_update(dqn_adam, policy.dqn.tensors(), std::as_const(d.grads).tensors());
      if (recurrent) adam_update(lstm_adam, policy.scheme.lstm.tensors(), std::as_const(lstm_grads).tensors());
    }
    if ((e + 1) % cfg.target_interval == 0) target = policy.dqn;

    if ((e + 1) % cfg.curve_interval == 0 || e + 1 == cfg.episodes) {
      const auto r = evaluate(env, policy, cfg.train_horizon, cfg.curve_episodes,
                              derive_seed(run_seed, kCurveStream + static_cast<std::uint64_t>(e)));
      out.curve.push_back({e + 1, epsilon_at(cfg, e + 1), r.mean});
    }
  }
  return out;
}

EvalResult evaluate(const EnvModel& env, const Policy& policy, int horizon, int episodes, std::uint64_t seed) {
  if (episodes <= 0) throw std::invalid_argument("evaluate: episodes must be positive");
  std::vector<double> returns(static_cast<std::size_t>(episodes));
  for (int k = 0; k < episodes; ++k) {
    CounterRng rng = CounterRng::for_episode(seed, static_cast<std::uint64_t>(k));
    returns[static_cast<std::size_t>(k)] = run_episode(env, policy, horizon, 0.0, rng, false).total;
  }
  const double n = static_cast<double>(episodes);
  EvalResult out;
  for (double r : returns) out.mean += r;
  out.mean /= n;
  double ss = 0.0;
  for (double r : returns) ss += (r - out.mean) * (r - out.mean);
  out.stderr_mean = episodes > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return out;
}

}  // namespace decembed

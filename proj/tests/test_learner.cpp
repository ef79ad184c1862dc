#include <doctest.h>

#include <cmath>
#include <deque>

#include "decembed/envs.hpp"
#include "decembed/learner.hpp"
#include "decembed/oracle.hpp"

using namespace decembed;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.episodes = 600;
  c.batch_size = 40;
  c.replay_capacity = 400;
  c.train_horizon = 3;
  c.eval_episodes = 200;
  c.curve_interval = 200;
  c.curve_episodes = 20;
  c.pcac_samples = 500;
  return c;
}

/// Policy that always prefers `action`.
Policy constant_policy(const EnvModel& env, int action) {
  Policy p;
  p.scheme = make_fmc(env, 4);
  p.dqn = MlpParams::zeros(p.scheme.dim() + env.num_agents, 10, env.num_actions(0));
  p.dqn.b2.data[static_cast<std::size_t>(action)] = 1.0;
  return p;
}

}  // namespace

TEST_SUITE("learner") {

TEST_CASE("epsilon schedule") {
  TrainConfig c;
  CHECK(epsilon_at(c, 0) == 0.8);
  CHECK(epsilon_at(c, 20000) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(epsilon_at(c, 40000) == 0.0);
  CHECK(epsilon_at(c, 50000) == 0.0);
  for (int e = 0; e < 40000; e += 977) CHECK(epsilon_at(c, e) == 0.8 * (1.0 - e / 40000.0));
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(validate_config(c));
  c.episodes = 0;
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
  c = TrainConfig{};
  c.replay_capacity = 10;
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
  c = TrainConfig{};
  c.lr = 0.0;
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
}

TEST_CASE("greedy selection breaks ties at the lowest index") {
  CounterRng rng(1);
  CHECK(select_action(std::vector<double>{1, 3, 2}, 0.0, rng) == 1);
  CHECK(select_action(std::vector<double>{5, 5, 2}, 0.0, rng) == 0);
  CHECK(argmax(std::vector<double>{-1, 0, 0}) == 1);
}

TEST_CASE("epsilon one gives uniform actions") {
  CounterRng rng(2);
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int k = 0; k < n; ++k) ++counts[static_cast<std::size_t>(select_action(std::vector<double>{0, 9, 0, 0}, 1.0, rng))];
  const double se = std::sqrt(0.25 * 0.75 / n);
  for (int c : counts) CHECK(std::abs(c / static_cast<double>(n) - 0.25) <= 3.0 * se);
}

TEST_CASE("replay buffer evicts first in, first out") {
  CounterRng rng(3);
  ReplayBuffer buf(50);
  std::deque<double> model;
  for (int k = 0; k < 500; ++k) {
    const int burst = 1 + static_cast<int>(rng.below(7));
    for (int b = 0; b < burst; ++b) {
      Transition t;
      t.reward = k * 10 + b;
      buf.push(t);
      model.push_back(t.reward);
      if (model.size() > 50) model.pop_front();
      REQUIRE(buf.size() <= buf.capacity());
    }
    REQUIRE(buf.size() == model.size());
    for (std::size_t i = 0; i < model.size(); ++i) REQUIRE(buf.at(i).reward == model[i]);
  }
  const auto s = buf.sample(400, rng);
  CHECK(s.size() == 400);
  ReplayBuffer empty(5);
  CHECK_THROWS(empty.sample(1, rng));
}

TEST_CASE("terminal batches regress onto the rewards") {
  CounterRng rng(4);
  const MlpParams online = MlpParams::init(5, 10, 3, rng), target = MlpParams::init(5, 10, 3, rng);
  std::vector<Transition> items(6);
  double expect = 0.0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    auto& t = items[k];
    t.embedding = {rng.uniform(), rng.uniform(), rng.uniform()};
    t.next_embedding = t.embedding;
    t.action = static_cast<int>(k % 3);
    t.reward = static_cast<double>(k) - 2.0;
    t.done = true;
    t.agent = static_cast<int>(k % 2);
    const double q = mlp_forward(online, dqn_input(t.embedding, t.agent, 2)).out[static_cast<std::size_t>(t.action)];
    expect += (q - t.reward) * (q - t.reward) / 6.0;
  }
  std::vector<const Transition*> batch;
  for (const auto& t : items) batch.push_back(&t);
  CHECK(dqn_train_step(online, target, batch, 2).loss == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("zero fixed point gives zero loss and zero gradients") {
  CounterRng rng(5);
  MlpParams p = MlpParams::init(4, 10, 3, rng);
  p.W2.zero();
  p.b2.zero();
  std::vector<Transition> items(5);
  for (auto& t : items) {
    t.embedding = {rng.uniform(), rng.uniform()};
    t.next_embedding = {rng.uniform(), rng.uniform()};
    t.action = 1;
    t.reward = 0.0;
    t.done = false;
    t.agent = 1;
  }
  std::vector<const Transition*> batch;
  for (const auto& t : items) batch.push_back(&t);
  const DqnStep s = dqn_train_step(p, p, batch, 2);
  CHECK(s.loss == 0.0);
  for (const Tensor* t : std::as_const(s.grads).tensors())
    for (double g : t->data) CHECK(g == 0.0);
}

TEST_CASE("dqn input appends the agent one-hot") {
  CHECK(dqn_input(std::vector<double>{0.5, 2.0}, 1, 3) == std::vector<double>{0.5, 2.0, 0.0, 1.0, 0.0});
}

TEST_CASE("all-listen dectiger policy earns exactly -6 at T = 3") {
  const EnvModel tiger = load_builtin(Builtin::dectiger, 3);
  const EvalResult r = evaluate(tiger, constant_policy(tiger, 0), 3, 500, 9);
  CHECK(r.mean == -6.0);
  CHECK(r.stderr_mean == 0.0);
}

TEST_CASE("deterministic environment and policy have zero standard error") {
  const MazeParams p;
  const EnvModel maze = generate_corridor_maze(p);
  const EvalResult r = evaluate(maze, constant_policy(maze, kRight), 20, 50, 1);
  CHECK(r.mean == 0.0);
  CHECK(r.stderr_mean == 0.0);
}

TEST_CASE("zero-reward environment has a flat zero learning curve") {
  EnvModel toy = make_toy_env(3);
  std::fill(toy.reward.begin(), toy.reward.end(), 0.0);
  for (SchemeKind kind : {SchemeKind::fmc, SchemeKind::rnn_e, SchemeKind::pcac}) {
    const TrainResult r = train(toy, kind, small_config(), 7);
    REQUIRE(r.curve.size() == 3);
    for (const auto& c : r.curve) CHECK(c.eval_return == 0.0);
    CHECK(r.curve.back().episode == 600);
  }
}

TEST_CASE("training is bit-reproducible") {
  const EnvModel tiger = load_builtin(Builtin::dectiger, 3);
  for (SchemeKind kind : {SchemeKind::fmc, SchemeKind::rnn_e}) {
    const TrainResult a = train(tiger, kind, small_config(), 99), b = train(tiger, kind, small_config(), 99);
    CHECK(a.policy.dqn == b.policy.dqn);
    CHECK(a.policy.scheme.lstm == b.policy.scheme.lstm);
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t k = 0; k < a.curve.size(); ++k) CHECK(a.curve[k].eval_return == b.curve[k].eval_return);
    const TrainResult c = train(tiger, kind, small_config(), 100);
    CHECK_FALSE(c.policy.dqn == a.policy.dqn);
  }
}

TEST_CASE("both agents act through the same network") {
  const EnvModel tiger = load_builtin(Builtin::dectiger, 3);
  const TrainResult r = train(tiger, SchemeKind::fmc, small_config(), 3);
  const auto pols = greedy_history_policies(r.policy);
  // identical local histories differ only through the agent id input
  for (int agent = 0; agent < 2; ++agent) {
    LocalHistory h;
    h.agent = agent;
    h.observations = {kNullObservation, 0};
    h.actions = {0};
    h.commons = {kNullObservation, 0};
    EmbeddingState st = embed_init(r.policy.scheme, agent);
    st = embed_update(r.policy.scheme, st, 0, 0, 0);
    const auto dist = pols[static_cast<std::size_t>(agent)](h);
    CHECK(dist[static_cast<std::size_t>(greedy_action(r.policy, st))] == 1.0);
  }
}

TEST_CASE("Monte Carlo evaluation agrees with exact evaluation of the greedy policy") {
  const EnvModel tiger = load_builtin(Builtin::dectiger, 3);
  for (SchemeKind kind : {SchemeKind::fmc, SchemeKind::rnn_e}) {
    const TrainResult r = train(tiger, kind, small_config(), 21);
    const auto pols = greedy_history_policies(r.policy);
    JointPolicy jp;
    for (int i = 0; i < 2; ++i) jp.trees.push_back(tree_from_policy(tiger, i, 3, pols[static_cast<std::size_t>(i)]));
    const double exact = evaluate_joint_policy_exact(tiger, jp);
    const double exact2 = evaluate_stochastic_policy_exact(tiger, pols, 3);
    CHECK(exact == doctest::Approx(exact2).epsilon(1e-12));
    const EvalResult mc = evaluate(tiger, r.policy, 3, 20000, 77);
    CHECK(std::abs(mc.mean - exact) <= 4.0 * mc.stderr_mean + 1e-12);
  }
}

}

#include <doctest.h>

#include <cmath>
#include <functional>

#include "decembed/envs.hpp"
#include "decembed/oracle.hpp"

using namespace decembed;

namespace {

/// Straight recursion over (state, both observation paths); independent of
/// the planner's evaluator.
double reference_value(const EnvModel& m, const JointPolicy& jp, int horizon) {
  const std::size_t Z = m.num_common_obs();
  std::function<double(int, int, std::size_t, std::size_t)> rec = [&](int s, int t, std::size_t c0, std::size_t c1) {
    const std::vector<int> joint{jp.trees[0].action_at(t, c0), jp.trees[1].action_at(t, c1)};
    const std::size_t ja = m.joint_action_index(joint);
    double v = m.reward_of(static_cast<std::size_t>(s), ja);
    if (t == horizon) return v;
    for (std::size_t s2 = 0; s2 < m.num_states(); ++s2) {
      const double pt = m.transition_prob(static_cast<std::size_t>(s), ja, s2);
      if (pt == 0.0) continue;
      for (std::size_t jo = 0; jo < m.num_joint_obs(); ++jo) {
        const double po = m.obs_prob(ja, s2, jo);
        if (po == 0.0) continue;
        const auto ys = m.split_joint_obs(jo);
        for (std::size_t z = 0; z < Z; ++z) {
          const double pz = m.common_prob(ja, s2, z);
          if (pz == 0.0) continue;
          const std::size_t o0 = static_cast<std::size_t>(ys[0]) * Z + z, o1 = static_cast<std::size_t>(ys[1]) * Z + z;
          v += pt * po * pz *
               rec(static_cast<int>(s2), t + 1, c0 * jp.trees[0].branching + o0, c1 * jp.trees[1].branching + o1);
        }
      }
    }
    return v;
  };
  double total = 0.0;
  for (std::size_t s = 0; s < m.num_states(); ++s)
    if (m.start[s] > 0.0) total += m.start[s] * rec(static_cast<int>(s), 1, 0, 0);
  return total;
}

PolicyTree random_tree(const EnvModel& m, int agent, int horizon, CounterRng& rng) {
  PolicyTree t = PolicyTree::constant(m, agent, horizon, 0);
  for (int& a : t.actions) a = static_cast<int>(rng.below(m.num_actions(static_cast<std::size_t>(agent))));
  return t;
}

/// Exhaustive search written independently: odometer over both trees.
double reference_optimum(const EnvModel& m, int horizon) {
  PolicyTree t0 = PolicyTree::constant(m, 0, horizon, 0), t1 = PolicyTree::constant(m, 1, horizon, 0);
  auto bump = [&](PolicyTree& t, std::size_t A) {
    for (int& a : t.actions) {
      if (++a < static_cast<int>(A)) return true;
      a = 0;
    }
    return false;
  };
  double best = -1e300;
  do {
    do {
      best = std::max(best, reference_value(m, JointPolicy{{t0, t1}}, horizon));
    } while (bump(t1, m.num_actions(1)));
  } while (bump(t0, m.num_actions(0)));
  return best;
}

/// History-dependent random stochastic policy.
HistoryPolicy hashed_policy(std::uint64_t salt, std::size_t actions) {
  return [salt, actions](const LocalHistory& h) {
    std::uint64_t x = mix64(salt + static_cast<std::uint64_t>(h.agent));
    for (int o : h.observations) x = mix64(x ^ static_cast<std::uint64_t>(o + 7));
    for (int a : h.actions) x = mix64(x ^ static_cast<std::uint64_t>(a + 101));
    for (int z : h.commons) x = mix64(x ^ static_cast<std::uint64_t>(z + 1009));
    std::vector<double> d(actions);
    double s = 0.0;
    for (auto& p : d) {
      x = mix64(x);
      p = 0.05 + static_cast<double>(x >> 11) * 0x1.0p-53;
      s += p;
    }
    for (auto& p : d) p /= s;
    return d;
  };
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("tree indexing") {
  CHECK(PolicyTree::node_count(4, 3) == 1 + 4 + 16);
  CHECK(PolicyTree::depth_offset(4, 1) == 0);
  CHECK(PolicyTree::depth_offset(4, 3) == 5);
  const EnvModel tiger = load_builtin(Builtin::dectiger, 3);
  CHECK(joint_policy_count(tiger, 3) == std::pow(3.0, 14));
  CHECK(joint_policy_count(tiger, 2) == std::pow(3.0, 6));
}

TEST_CASE("exact evaluation agrees with a plain recursion on random trees") {
  CounterRng rng(12);
  for (const EnvModel& m : {load_builtin(Builtin::dectiger, 3), make_toy_env(3)}) {
    for (int k = 0; k < 25; ++k) {
      JointPolicy jp{{random_tree(m, 0, 3, rng), random_tree(m, 1, 3, rng)}};
      CHECK(evaluate_joint_policy_exact(m, jp) == doctest::Approx(reference_value(m, jp, 3)).epsilon(1e-12));
    }
  }
}

TEST_CASE("one-step toy optimum is the best expected immediate reward") {
  const EnvModel toy = make_toy_env(1);
  const PlanResult r = brute_force_optimal(toy, 1);
  CHECK(r.value == doctest::Approx(0.5));
  // (a0, a0) and (a1, a1) tie, the smaller encoding wins
  CHECK(r.policy.trees[0].actions[0] == 0);
  CHECK(r.policy.trees[1].actions[0] == 0);
}

TEST_CASE("brute force matches an independent exhaustive search") {
  for (const EnvModel& m : {load_builtin(Builtin::dectiger, 2), make_toy_env(2)}) {
    const PlanResult r = brute_force_optimal(m, 2);
    CHECK(r.value == doctest::Approx(reference_optimum(m, 2)).epsilon(1e-12));
    CHECK(evaluate_joint_policy_exact(m, r.policy) == doctest::Approx(r.value).epsilon(1e-12));
  }
  // dectiger T = 2: listen once, then listen again (-4)
  CHECK(brute_force_optimal(load_builtin(Builtin::dectiger, 2), 2).value == doctest::Approx(-4.0));
}

TEST_CASE("dectiger T = 3 optimum") {
  const PlanResult r = brute_force_optimal(load_builtin(Builtin::dectiger, 3), 3);
  CHECK(std::abs(r.value - 5.19) <= 0.005);
  CHECK(r.joint_policies == std::pow(3.0, 14));
  CHECK(r.policy.trees[0].actions[0] == 0);
}

TEST_CASE("worker count does not change the result") {
  const EnvModel toy = make_toy_env(2);
  OracleConfig one, four;
  four.workers = 4;
  const PlanResult a = brute_force_optimal(toy, 2, one), b = brute_force_optimal(toy, 2, four);
  CHECK(a.value == b.value);
  CHECK(a.policy.trees[0].actions == b.policy.trees[0].actions);
  CHECK(a.policy.trees[1].actions == b.policy.trees[1].actions);
}

TEST_CASE("guards refuse oversized searches") {
  const EnvModel tiger = load_builtin(Builtin::dectiger, 4);
  CHECK_THROWS_AS(brute_force_optimal(tiger, 4), GuardExceeded);
  try {
    brute_force_optimal(tiger, 4);
  } catch (const GuardExceeded& e) {
    CHECK(e.estimate() == std::pow(3.0, 30));
    CHECK(e.limit() == 1e7);
  }
}

TEST_CASE("stochastic exact evaluation matches Monte Carlo rollouts") {
  const EnvModel tiger = load_builtin(Builtin::dectiger, 3);
  for (std::uint64_t salt = 1; salt <= 2; ++salt) {
    const std::vector<HistoryPolicy> pols{hashed_policy(salt, 3), hashed_policy(salt, 3)};
    const double exact = evaluate_stochastic_policy_exact(tiger, pols, 3);
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
      CounterRng rng = CounterRng::for_episode(salt, static_cast<std::uint64_t>(k));
      const double r = rollout(tiger, pols, 3, rng).total_return;
      sum += r;
      sq += r * r;
    }
    const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / (n - 1));
    CHECK(std::abs(mean - exact) <= 4.0 * se);
  }
}

TEST_CASE("deterministic history policies evaluate like their trees") {
  const EnvModel toy = make_toy_env(3);
  CounterRng rng(31);
  const JointPolicy jp{{random_tree(toy, 0, 3, rng), random_tree(toy, 1, 3, rng)}};
  std::vector<HistoryPolicy> pols;
  for (int i = 0; i < 2; ++i) {
    const PolicyTree tree = jp.trees[static_cast<std::size_t>(i)];
    pols.push_back([tree, Z = toy.num_common_obs()](const LocalHistory& h) {
      std::size_t code = 0;
      for (std::size_t k = 1; k < h.observations.size(); ++k)
        code = code * tree.branching + static_cast<std::size_t>(h.observations[k]) * Z + static_cast<std::size_t>(h.commons[k]);
      std::vector<double> d(2, 0.0);
      d[static_cast<std::size_t>(tree.action_at(static_cast<int>(h.observations.size()), code))] = 1.0;
      return d;
    });
  }
  CHECK(evaluate_stochastic_policy_exact(toy, pols, 3) == doctest::Approx(evaluate_joint_policy_exact(toy, jp)).epsilon(1e-12));
  for (int i = 0; i < 2; ++i)
    CHECK(tree_from_policy(toy, i, 3, pols[static_cast<std::size_t>(i)]).actions == jp.trees[static_cast<std::size_t>(i)].actions);
}

TEST_CASE("policy json lists every node") {
  const EnvModel tiger = load_builtin(Builtin::dectiger, 2);
  const PlanResult r = brute_force_optimal(tiger, 2);
  const std::string j = joint_policy_to_json(tiger, r.policy, r.value);
  CHECK(j.find("hear-left") != std::string::npos);
  CHECK(j.find("listen") != std::string::npos);
}

}

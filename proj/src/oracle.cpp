#include "decembed/oracle.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <thread>

#include <json.hpp>

namespace decembed {

GuardExceeded::GuardExceeded(const std::string& what, double estimate, double limit)
    : std::runtime_error(what + ": " + std::to_string(static_cast<long double>(estimate)) + " exceeds the limit " +
                         std::to_string(static_cast<long double>(limit))),
      estimate_(estimate),
      limit_(limit) {}

int workers_from_env() {
  if (const char* w = std::getenv("DECEMBED_WORKERS"); w && *w) {
    const int n = std::atoi(w);
    if (n > 0) return n;
  }
  return 1;
}

std::size_t PolicyTree::depth_offset(std::size_t branching, int depth) {
  std::size_t offset = 0, width = 1;
  for (int t = 1; t < depth; ++t) {
    offset += width;
    width *= branching;
  }
  return offset;
}

std::size_t PolicyTree::node_count(std::size_t branching, int horizon) { return depth_offset(branching, horizon + 1); }

namespace {

std::size_t branching_of(const EnvModel& env, std::size_t agent) {
  return env.num_private_obs(agent) * env.num_common_obs();
}

double ipow(double base, int exp) {
  double r = 1.0;
  for (int k = 0; k < exp; ++k) r *= base;
  return r;
}

}  // namespace

PolicyTree PolicyTree::constant(const EnvModel& env, int agent, int horizon, int action) {
  PolicyTree t;
  t.agent = agent;
  t.horizon = horizon;
  t.branching = branching_of(env, static_cast<std::size_t>(agent));
  t.actions.assign(node_count(t.branching, horizon), action);
  return t;
}

namespace {

/// Forward evaluation of deterministic joint policies with reusable scratch.
class JointEvaluator {
 public:
  JointEvaluator(const EnvModel& env, int horizon, const OracleConfig& cfg) : env_(env), T_(horizon) {
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    N_ = env.num_agents;
    S_ = env.num_states();
    JA_ = env.num_joint_actions();
    double lattice = static_cast<double>(S_);
    for (std::size_t i = 0; i < N_; ++i) {
      b_.push_back(branching_of(env, i));
      lattice *= ipow(static_cast<double>(b_[i]), horizon - 1);
    }
    if (lattice > cfg.lattice_guard) throw GuardExceeded("state x node-profile lattice", lattice, cfg.lattice_guard);

    radix_.assign(static_cast<std::size_t>(T_) + 2, std::vector<std::size_t>(N_, 1));
    profiles_.assign(static_cast<std::size_t>(T_) + 2, 1);
    offsets_.assign(N_, std::vector<std::size_t>(static_cast<std::size_t>(T_) + 2, 0));
    for (int t = 1; t <= T_ + 1; ++t) {
      std::size_t p = 1;
      for (std::size_t i = 0; i < N_; ++i) {
        std::size_t r = 1;
        for (int k = 1; k < t; ++k) r *= b_[i];
        radix_[t][i] = r;
        p *= r;
        offsets_[i][t] = PolicyTree::depth_offset(b_[i], t);
      }
      profiles_[t] = p;
    }

    const std::size_t JO = env.num_joint_obs(), Z = env.num_common_obs();
    succ_begin_.assign(S_ * JA_ + 1, 0);
    for (std::size_t s = 0; s < S_; ++s)
      for (std::size_t ja = 0; ja < JA_; ++ja) {
        for (const auto& o : env.transitions(s, ja))
          for (std::size_t jo = 0; jo < JO; ++jo) {
            const double py = env.obs_prob(ja, static_cast<std::size_t>(o.next_state), jo);
            if (py <= 0.0) continue;
            const auto ys = env.split_joint_obs(jo);
            for (std::size_t z = 0; z < Z; ++z) {
              const double pz = env.common_prob(ja, static_cast<std::size_t>(o.next_state), z);
              if (pz <= 0.0) continue;
              next_.push_back(o.next_state);
              prob_.push_back(o.prob * py * pz);
              for (std::size_t i = 0; i < N_; ++i)
                codes_.push_back(static_cast<std::size_t>(ys[i]) * Z + z);
            }
          }
        succ_begin_[s * JA_ + ja + 1] = next_.size();
      }
    action_radix_.resize(N_);
    for (std::size_t i = 0; i < N_; ++i) action_radix_[i] = env.num_actions(i);
    codes_scratch_.resize(N_);
  }

  double run(const std::vector<const int*>& acts) {
    cur_.assign(S_, 0.0);
    for (std::size_t s = 0; s < S_; ++s) cur_[s] = env_.start[s];
    double value = 0.0;
    for (int t = 1; t <= T_; ++t) {
      const std::size_t P = profiles_[t];
      const bool last = t == T_;
      if (!last) nxt_.assign(S_ * profiles_[t + 1], 0.0);
      for (std::size_t s = 0; s < S_; ++s)
        for (std::size_t pc = 0; pc < P; ++pc) {
          const double p = cur_[s * P + pc];
          if (p == 0.0) continue;
          std::size_t rest = pc, ja = 0;
          for (std::size_t i = N_; i-- > 0;) {
            codes_scratch_[i] = rest % radix_[t][i];
            rest /= radix_[t][i];
          }
          for (std::size_t i = 0; i < N_; ++i)
            ja = ja * action_radix_[i] + static_cast<std::size_t>(acts[i][offsets_[i][t] + codes_scratch_[i]]);
          value += p * env_.reward_of(s, ja);
          if (last) continue;
          const std::size_t P2 = profiles_[t + 1];
          for (std::size_t k = succ_begin_[s * JA_ + ja]; k < succ_begin_[s * JA_ + ja + 1]; ++k) {
            std::size_t child = 0;
            const std::size_t* oc = &codes_[k * N_];
            for (std::size_t i = 0; i < N_; ++i) child = child * radix_[t + 1][i] + codes_scratch_[i] * b_[i] + oc[i];
            nxt_[static_cast<std::size_t>(next_[k]) * P2 + child] += p * prob_[k];
          }
        }
      if (!last) cur_.swap(nxt_);
    }
    return value;
  }

  std::size_t branching(std::size_t i) const { return b_[i]; }

 private:
  const EnvModel& env_;
  int T_;
  std::size_t N_ = 0, S_ = 0, JA_ = 0;
  std::vector<std::size_t> b_, profiles_, action_radix_, succ_begin_, codes_, codes_scratch_;
  std::vector<std::vector<std::size_t>> radix_, offsets_;
  std::vector<int> next_;
  std::vector<double> prob_, cur_, nxt_;
};

void check_joint_policy(const EnvModel& env, const JointPolicy& jp) {
  if (jp.trees.size() != env.num_agents) throw std::invalid_argument("joint policy needs one tree per agent");
  const int T = jp.trees.front().horizon;
  for (std::size_t i = 0; i < jp.trees.size(); ++i) {
    const auto& tr = jp.trees[i];
    if (tr.horizon != T) throw std::invalid_argument("policy trees disagree on the horizon");
    if (tr.branching != branching_of(env, i) || tr.actions.size() != PolicyTree::node_count(tr.branching, T))
      throw std::invalid_argument("policy tree shape does not match the model");
    for (int a : tr.actions)
      if (a < 0 || static_cast<std::size_t>(a) >= env.num_actions(i))
        throw std::invalid_argument("policy tree action out of range");
  }
}

}  // namespace

double evaluate_joint_policy_exact(const EnvModel& env, const JointPolicy& jp, const OracleConfig& cfg) {
  check_joint_policy(env, jp);
  JointEvaluator ev(env, jp.trees.front().horizon, cfg);
  std::vector<const int*> acts;
  for (const auto& tr : jp.trees) acts.push_back(tr.actions.data());
  return ev.run(acts);
}

double joint_policy_count(const EnvModel& env, int horizon) {
  double total = 1.0;
  for (std::size_t i = 0; i < env.num_agents; ++i)
    total *= std::pow(static_cast<double>(env.num_actions(i)),
                      static_cast<double>(PolicyTree::node_count(branching_of(env, i), horizon)));
  return total;
}

namespace {

/// Advances a base-`radix` digit array, last digit fastest. False on wrap-around.
bool increment(std::vector<int>& digits, int radix) {
  for (std::size_t k = digits.size(); k-- > 0;) {
    if (++digits[k] < radix) return true;
    digits[k] = 0;
  }
  return false;
}

struct SearchBest {
  double value = -INFINITY;
  std::vector<std::vector<int>> actions;
  bool found = false;
};

}  // namespace

PlanResult brute_force_optimal(const EnvModel& env, int horizon, const OracleConfig& cfg) {
  const double count = joint_policy_count(env, horizon);
  if (count > cfg.joint_policy_guard) throw GuardExceeded("joint policy count", count, cfg.joint_policy_guard);
  const std::size_t N = env.num_agents;
  std::vector<std::size_t> nodes(N);
  for (std::size_t i = 0; i < N; ++i) nodes[i] = PolicyTree::node_count(branching_of(env, i), horizon);
  const auto outer_count = static_cast<std::uint64_t>(
      std::llround(std::pow(static_cast<double>(env.num_actions(0)), static_cast<double>(nodes[0]))));

  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(outer_count)));
  std::vector<SearchBest> partial(static_cast<std::size_t>(workers));
  auto search = [&](int w) {
    JointEvaluator ev(env, horizon, cfg);
    const std::uint64_t begin = outer_count * static_cast<std::uint64_t>(w) / static_cast<std::uint64_t>(workers);
    const std::uint64_t end = outer_count * static_cast<std::uint64_t>(w + 1) / static_cast<std::uint64_t>(workers);
    std::vector<std::vector<int>> acts(N);
    for (std::size_t i = 0; i < N; ++i) acts[i].assign(nodes[i], 0);
    std::uint64_t rest = begin;
    for (std::size_t k = nodes[0]; k-- > 0;) {
      acts[0][k] = static_cast<int>(rest % env.num_actions(0));
      rest /= env.num_actions(0);
    }
    std::vector<const int*> ptrs(N);
    for (std::size_t i = 0; i < N; ++i) ptrs[i] = acts[i].data();
    SearchBest& best = partial[static_cast<std::size_t>(w)];
    for (std::uint64_t outer = begin; outer < end; ++outer) {
      for (std::size_t i = 1; i < N; ++i) std::fill(acts[i].begin(), acts[i].end(), 0);
      while (true) {
        const double v = ev.run(ptrs);
        if (!best.found || v > best.value) {
          best.value = v;
          best.actions = acts;
          best.found = true;
        }
        std::size_t i = N;
        bool advanced = false;
        while (i-- > 1) {
          if (increment(acts[i], static_cast<int>(env.num_actions(i)))) {
            advanced = true;
            break;
          }
        }
        if (!advanced) break;
      }
      increment(acts[0], static_cast<int>(env.num_actions(0)));
    }
  };
  if (workers == 1) {
    search(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(search, w);
    for (auto& th : pool) th.join();
  }

  SearchBest best;
  for (const auto& p : partial)
    if (p.found && (!best.found || p.value > best.value)) best = p;
  PlanResult out;
  out.value = best.value;
  out.joint_policies = count;
  for (std::size_t i = 0; i < N; ++i) {
    PolicyTree tr;
    tr.agent = static_cast<int>(i);
    tr.horizon = horizon;
    tr.branching = branching_of(env, i);
    tr.actions = best.actions[i];
    out.policy.trees.push_back(std::move(tr));
  }
  return out;
}

namespace {

/// Local histories of one agent, numbered in creation order.
class HistoryTrie {
 public:
  explicit HistoryTrie(int agent) {
    LocalHistory root;
    root.agent = agent;
    root.observations.push_back(kNullObservation);
    root.commons.push_back(kNullObservation);
    nodes_.push_back(std::move(root));
    children_.emplace_back();
  }
  int child(int id, int a, int y, int z) {
    const std::uint64_t key = (static_cast<std::uint64_t>(a) << 42) | (static_cast<std::uint64_t>(y) << 21) |
                              static_cast<std::uint64_t>(z);
    auto& kids = children_[static_cast<std::size_t>(id)];
    if (auto it = kids.find(key); it != kids.end()) return it->second;
    LocalHistory h = nodes_[static_cast<std::size_t>(id)];
    h.append(a, y, z);
    nodes_.push_back(std::move(h));
    children_.emplace_back();
    const int nid = static_cast<int>(nodes_.size()) - 1;
    children_[static_cast<std::size_t>(id)].emplace(key, nid);
    return nid;
  }
  const LocalHistory& history(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<LocalHistory> nodes_;
  std::vector<std::map<std::uint64_t, int>> children_;
};

}  // namespace

double evaluate_stochastic_policy_exact(const EnvModel& env, const std::vector<HistoryPolicy>& policies, int horizon,
                                        const OracleConfig& cfg) {
  const std::size_t N = env.num_agents;
  if (policies.size() != N) throw std::invalid_argument("one policy per agent required");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  std::vector<HistoryTrie> tries;
  std::vector<std::vector<std::vector<double>>> cache(N);
  for (std::size_t i = 0; i < N; ++i) tries.emplace_back(static_cast<int>(i));
  auto dist_of = [&](std::size_t i, int id) -> const std::vector<double>& {
    auto& c = cache[i];
    if (c.size() <= static_cast<std::size_t>(id)) c.resize(static_cast<std::size_t>(id) + 1);
    auto& d = c[static_cast<std::size_t>(id)];
    if (d.empty()) {
      d = policies[i](tries[i].history(id));
      check_distribution(d, env.num_actions(i), "policy");
    }
    return d;
  };

  const std::size_t JO = env.num_joint_obs(), Z = env.num_common_obs(), JA = env.num_joint_actions();
  std::map<std::vector<int>, double> cur;
  for (std::size_t s = 0; s < env.num_states(); ++s)
    if (env.start[s] > 0.0) {
      std::vector<int> key(N + 1, 0);
      key[0] = static_cast<int>(s);
      cur[key] += env.start[s];
    }
  std::vector<std::vector<int>> split_ja(JA), split_jo(JO);
  for (std::size_t ja = 0; ja < JA; ++ja) split_ja[ja] = env.split_joint_action(ja);
  for (std::size_t jo = 0; jo < JO; ++jo) split_jo[jo] = env.split_joint_obs(jo);

  double value = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    std::map<std::vector<int>, double> nxt;
    for (const auto& [key, p] : cur) {
      const std::size_t s = static_cast<std::size_t>(key[0]);
      for (std::size_t ja = 0; ja < JA; ++ja) {
        double pa = p;
        for (std::size_t i = 0; i < N && pa > 0.0; ++i)
          pa *= dist_of(i, key[i + 1])[static_cast<std::size_t>(split_ja[ja][i])];
        if (pa <= 0.0) continue;
        value += pa * env.reward_of(s, ja);
        if (t == horizon) continue;
        for (const auto& o : env.transitions(s, ja))
          for (std::size_t jo = 0; jo < JO; ++jo) {
            const double py = env.obs_prob(ja, static_cast<std::size_t>(o.next_state), jo);
            if (py <= 0.0) continue;
            for (std::size_t z = 0; z < Z; ++z) {
              const double pz = env.common_prob(ja, static_cast<std::size_t>(o.next_state), z);
              if (pz <= 0.0) continue;
              std::vector<int> child(N + 1);
              child[0] = o.next_state;
              for (std::size_t i = 0; i < N; ++i)
                child[i + 1] = tries[i].child(key[i + 1], split_ja[ja][i], split_jo[jo][i], static_cast<int>(z));
              nxt[child] += pa * o.prob * py * pz;
            }
          }
      }
    }
    if (static_cast<double>(nxt.size()) > cfg.history_guard)
      throw GuardExceeded("joint history count", static_cast<double>(nxt.size()), cfg.history_guard);
    cur.swap(nxt);
  }
  return value;
}

PolicyTree tree_from_policy(const EnvModel& env, int agent, int horizon, const HistoryPolicy& policy) {
  PolicyTree tree;
  tree.agent = agent;
  tree.horizon = horizon;
  tree.branching = branching_of(env, static_cast<std::size_t>(agent));
  tree.actions.assign(PolicyTree::node_count(tree.branching, horizon), 0);
  const std::size_t Z = env.num_common_obs(), A = env.num_actions(static_cast<std::size_t>(agent));

  struct Frame {
    int depth;
    std::size_t code;
    LocalHistory history;
  };
  LocalHistory root;
  root.agent = agent;
  root.observations.push_back(kNullObservation);
  root.commons.push_back(kNullObservation);
  std::vector<Frame> stack{{1, 0, root}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    const auto dist = policy(f.history);
    check_distribution(dist, A, "policy");
    int action = -1;
    for (std::size_t a = 0; a < A; ++a)
      if (dist[a] == 1.0) action = static_cast<int>(a);
    if (action < 0) throw std::invalid_argument("tree_from_policy: policy is not deterministic");
    tree.actions[PolicyTree::depth_offset(tree.branching, f.depth) + f.code] = action;
    if (f.depth == horizon) continue;
    for (std::size_t o = 0; o < tree.branching; ++o) {
      Frame child{f.depth + 1, f.code * tree.branching + o, f.history};
      child.history.append(action, static_cast<int>(o / Z), static_cast<int>(o % Z));
      stack.push_back(std::move(child));
    }
  }
  return tree;
}

std::string joint_policy_to_json(const EnvModel& env, const JointPolicy& jp, double value) {
  nlohmann::json agents = nlohmann::json::array();
  for (std::size_t i = 0; i < jp.trees.size(); ++i) {
    const auto& tr = jp.trees[i];
    const std::size_t Z = env.num_common_obs();
    nlohmann::json nodes = nlohmann::json::array();
    for (int t = 1; t <= tr.horizon; ++t) {
      std::size_t width = 1;
      for (int k = 1; k < t; ++k) width *= tr.branching;
      for (std::size_t code = 0; code < width; ++code) {
        std::vector<std::string> path;
        std::size_t rest = code;
        for (int k = t; k > 1; --k) {
          const std::size_t o = rest % tr.branching;
          rest /= tr.branching;
          std::string label = env.private_obs[i][o / Z];
          if (env.has_common_channel()) label += "|" + env.common_obs[o % Z];
          path.insert(path.begin(), label);
        }
        nodes.push_back({{"path", path}, {"action", env.actions[i][static_cast<std::size_t>(tr.action_at(t, code))]}});
      }
    }
    agents.push_back({{"agent", i}, {"nodes", nodes}});
  }
  return nlohmann::json{{"value", value}, {"horizon", jp.trees.empty() ? 0 : jp.trees.front().horizon}, {"agents", agents}}
      .dump(2);
}

}  // namespace decembed

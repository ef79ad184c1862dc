#include "decembed/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace decembed {

std::size_t EnvModel::num_joint_actions() const {
  std::size_t n = 1;
  for (const auto& a : actions) n *= a.size();
  return n;
}

std::size_t EnvModel::num_joint_obs() const {
  std::size_t n = 1;
  for (const auto& o : private_obs) n *= o.size();
  return n;
}

namespace {

std::size_t mixed_radix(std::span<const int> digits, const std::vector<std::vector<std::string>>& alphabets,
                        const char* what) {
  if (digits.size() != alphabets.size()) throw ModelError(std::string(what) + ": wrong number of agents");
  std::size_t index = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (digits[i] < 0 || static_cast<std::size_t>(digits[i]) >= alphabets[i].size())
      throw ModelError(std::string(what) + ": index out of range for agent " + std::to_string(i));
    index = index * alphabets[i].size() + static_cast<std::size_t>(digits[i]);
  }
  return index;
}

std::vector<int> split_radix(std::size_t index, const std::vector<std::vector<std::string>>& alphabets) {
  std::vector<int> out(alphabets.size());
  for (std::size_t i = alphabets.size(); i-- > 0;) {
    out[i] = static_cast<int>(index % alphabets[i].size());
    index /= alphabets[i].size();
  }
  return out;
}

}  // namespace

std::size_t EnvModel::joint_action_index(std::span<const int> per_agent) const {
  return mixed_radix(per_agent, actions, "joint action");
}

std::vector<int> EnvModel::split_joint_action(std::size_t ja) const { return split_radix(ja, actions); }

std::size_t EnvModel::joint_obs_index(std::span<const int> per_agent) const {
  return mixed_radix(per_agent, private_obs, "joint observation");
}

std::vector<int> EnvModel::split_joint_obs(std::size_t jo) const { return split_radix(jo, private_obs); }

double EnvModel::transition_prob(std::size_t s, std::size_t ja, std::size_t next) const {
  double p = 0.0;
  for (const auto& o : transitions(s, ja))
    if (static_cast<std::size_t>(o.next_state) == next) p += o.prob;
  return p;
}

void EnvModel::allocate() {
  const std::size_t S = num_states(), JA = num_joint_actions();
  transition.assign(S * JA, {});
  observation.assign(JA * S * num_joint_obs(), 0.0);
  common.assign(JA * S * num_common_obs(), 0.0);
  if (!has_common_channel()) std::fill(common.begin(), common.end(), 1.0);
  reward.assign(S * JA, 0.0);
  start.assign(S, 0.0);
}

bool operator==(const EnvModel& a, const EnvModel& b) {
  constexpr double tol = 1e-12;
  auto close = [](const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::abs(x[i] - y[i]) > tol) return false;
    return true;
  };
  if (a.num_agents != b.num_agents || a.states != b.states || a.actions != b.actions ||
      a.private_obs != b.private_obs || a.common_obs != b.common_obs || a.horizon != b.horizon ||
      std::abs(a.discount - b.discount) > tol)
    return false;
  if (!close(a.observation, b.observation) || !close(a.common, b.common) || !close(a.reward, b.reward) ||
      !close(a.start, b.start))
    return false;
  const std::size_t S = a.num_states(), JA = a.num_joint_actions();
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t ja = 0; ja < JA; ++ja) {
      std::vector<double> ra(S, 0.0), rb(S, 0.0);
      for (const auto& o : a.transitions(s, ja)) ra[o.next_state] += o.prob;
      for (const auto& o : b.transitions(s, ja)) rb[o.next_state] += o.prob;
      if (!close(ra, rb)) return false;
    }
  return true;
}

void LocalHistory::append(int action, int observation, int common_obs) {
  actions.push_back(action);
  observations.push_back(observation);
  commons.push_back(common_obs);
}

Belief Belief::initial(const EnvModel& model) {
  Belief b;
  for (std::size_t s = 0; s < model.num_states(); ++s) {
    if (model.start[s] <= 0.0) continue;
    JointPrivate privates(model.num_agents);
    for (auto& p : privates) p.observations.push_back(kNullObservation);
    b.support.push_back({static_cast<int>(s), std::move(privates)});
    b.probs.push_back(model.start[s]);
  }
  return b;
}

double Belief::total() const {
  double t = 0.0;
  for (double p : probs) t += p;
  return t;
}

void check_distribution(std::span<const double> dist, std::size_t size, const char* what) {
  if (dist.size() != size)
    throw ModelError(std::string(what) + ": expected " + std::to_string(size) + " probabilities, got " +
                     std::to_string(dist.size()));
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ModelError(std::string(what) + ": negative or non-finite entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ModelError(std::string(what) + ": probabilities sum to " + std::to_string(total));
}

InitialSample sample_initial(const EnvModel& model, CounterRng& rng) {
  InitialSample out;
  out.state = static_cast<int>(rng.categorical(model.start));
  out.private_obs.assign(model.num_agents, kNullObservation);
  out.common_obs = kNullObservation;
  return out;
}

StepResult step(const EnvModel& model, int state, std::span<const int> joint_action, CounterRng& rng) {
  if (state < 0 || static_cast<std::size_t>(state) >= model.num_states())
    throw ModelError("step: state index out of range");
  const std::size_t ja = model.joint_action_index(joint_action);
  const auto& outs = model.transitions(static_cast<std::size_t>(state), ja);

  StepResult r;
  r.reward = model.reward_of(static_cast<std::size_t>(state), ja);

  const double u = rng.uniform();
  double acc = 0.0;
  r.next_state = outs.back().next_state;
  for (const auto& o : outs) {
    acc += o.prob;
    if (u < acc) {
      r.next_state = o.next_state;
      break;
    }
  }

  const std::size_t JO = model.num_joint_obs();
  const double* row = &model.observation[(ja * model.num_states() + r.next_state) * JO];
  const std::size_t jo = rng.categorical(std::span<const double>(row, JO));
  r.private_obs = model.split_joint_obs(jo);

  const std::size_t Z = model.num_common_obs();
  const double* zrow = &model.common[(ja * model.num_states() + r.next_state) * Z];
  r.common_obs = Z == 1 ? 0 : static_cast<int>(rng.categorical(std::span<const double>(zrow, Z)));
  return r;
}

Belief belief_update(const EnvModel& model, const Belief& belief, std::span<const Prescription> prescriptions,
                     int common_obs) {
  if (prescriptions.size() != model.num_agents) throw ModelError("belief_update: one prescription per agent required");
  if (common_obs < 0 || static_cast<std::size_t>(common_obs) >= model.num_common_obs())
    throw ModelError("belief_update: common observation out of range");

  const std::size_t N = model.num_agents, JO = model.num_joint_obs();
  std::map<std::pair<int, JointPrivate>, double> next;

  for (std::size_t k = 0; k < belief.support.size(); ++k) {
    const auto& entry = belief.support[k];
    const double w = belief.probs[k];
    if (w <= 0.0) continue;

    std::vector<std::vector<double>> dists(N);
    for (std::size_t i = 0; i < N; ++i) {
      dists[i] = prescriptions[i](entry.privates[i]);
      check_distribution(dists[i], model.num_actions(i), "prescription");
    }
    for (std::size_t ja = 0; ja < model.num_joint_actions(); ++ja) {
      const auto acts = model.split_joint_action(ja);
      double pa = w;
      for (std::size_t i = 0; i < N && pa > 0.0; ++i) pa *= dists[i][acts[i]];
      if (pa <= 0.0) continue;
      for (const auto& o : model.transitions(entry.state, ja)) {
        const double pz = model.common_prob(ja, o.next_state, common_obs);
        if (pz <= 0.0) continue;
        for (std::size_t jo = 0; jo < JO; ++jo) {
          const double py = model.obs_prob(ja, o.next_state, jo);
          if (py <= 0.0) continue;
          const auto ys = model.split_joint_obs(jo);
          JointPrivate privates = entry.privates;
          for (std::size_t i = 0; i < N; ++i) {
            privates[i].actions.push_back(acts[i]);
            privates[i].observations.push_back(ys[i]);
          }
          next[{o.next_state, std::move(privates)}] += pa * o.prob * pz * py;
        }
      }
    }
  }

  double total = 0.0;
  for (const auto& [key, p] : next) total += p;
  if (!(total > 0.0)) throw ModelError("belief_update: common observation has zero probability");

  Belief out;
  out.support.reserve(next.size());
  for (auto& [key, p] : next) {
    out.support.push_back({key.first, key.second});
    out.probs.push_back(p / total);
  }
  return out;
}

EpisodeTrace rollout(const EnvModel& model, std::span<const HistoryPolicy> policies, int horizon, CounterRng& rng) {
  if (policies.size() != model.num_agents) throw ModelError("rollout: one policy per agent required");
  const std::size_t N = model.num_agents;
  const auto init = sample_initial(model, rng);

  std::vector<LocalHistory> histories(N);
  for (std::size_t i = 0; i < N; ++i) {
    histories[i].agent = static_cast<int>(i);
    histories[i].observations.push_back(init.private_obs[i]);
    histories[i].commons.push_back(init.common_obs);
  }

  EpisodeTrace trace;
  int state = init.state;
  trace.private_obs.push_back(init.private_obs);
  trace.commons.push_back(init.common_obs);
  for (int t = 1; t <= horizon; ++t) {
    trace.states.push_back(state);
    std::vector<int> joint(N);
    for (std::size_t i = 0; i < N; ++i) {
      const auto dist = policies[i](histories[i]);
      check_distribution(dist, model.num_actions(i), "policy");
      joint[i] = static_cast<int>(rng.categorical(dist));
    }
    trace.joint_actions.push_back(joint);
    if (t == horizon) {
      const double r = model.reward_of(static_cast<std::size_t>(state), model.joint_action_index(joint));
      trace.rewards.push_back(r);
      trace.total_return += r;
      break;
    }
    const auto res = step(model, state, joint, rng);
    trace.rewards.push_back(res.reward);
    trace.total_return += res.reward;
    for (std::size_t i = 0; i < N; ++i) histories[i].append(joint[i], res.private_obs[i], res.common_obs);
    trace.private_obs.push_back(res.private_obs);
    trace.commons.push_back(res.common_obs);
    state = res.next_state;
  }
  return trace;
}

}  // namespace decembed

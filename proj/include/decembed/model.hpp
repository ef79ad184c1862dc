#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "decembed/rng.hpp"

namespace decembed {

/// Observation index used at t = 1, before any transition has happened.
inline constexpr int kNullObservation = -1;

struct Outcome {
  int next_state;
  double prob;
};

/// Finite Dec-POMDP with an optional common observation channel.
///
/// Joint actions and joint private observations use mixed-radix indices with
/// agent 0 as the most significant digit. The private and the common
/// observation are drawn independently given (joint action, next state).
struct EnvModel {
  std::size_t num_agents = 0;
  std::vector<std::string> states;
  std::vector<std::vector<std::string>> actions;      ///< per agent
  std::vector<std::vector<std::string>> private_obs;  ///< per agent
  /// Empty when the model has no common channel; the alphabet is then the
  /// single constant symbol 0.
  std::vector<std::string> common_obs;

  /// transition[s * JA + ja] lists the successor states with positive mass.
  std::vector<std::vector<Outcome>> transition;
  /// observation[(ja * S + s') * JO + jo]
  std::vector<double> observation;
  /// common[(ja * S + s') * Z + z]
  std::vector<double> common;
  /// reward[s * JA + ja], expected over successor and observation.
  std::vector<double> reward;
  std::vector<double> start;
  double discount = 1.0;
  int horizon = 1;

  std::size_t num_states() const { return states.size(); }
  std::size_t num_actions(std::size_t agent) const { return actions.at(agent).size(); }
  std::size_t num_private_obs(std::size_t agent) const { return private_obs.at(agent).size(); }
  std::size_t num_common_obs() const { return common_obs.empty() ? 1 : common_obs.size(); }
  bool has_common_channel() const { return !common_obs.empty(); }
  std::size_t num_joint_actions() const;
  std::size_t num_joint_obs() const;

  std::size_t joint_action_index(std::span<const int> per_agent) const;
  std::vector<int> split_joint_action(std::size_t ja) const;
  std::size_t joint_obs_index(std::span<const int> per_agent) const;
  std::vector<int> split_joint_obs(std::size_t jo) const;

  const std::vector<Outcome>& transitions(std::size_t s, std::size_t ja) const {
    return transition[s * num_joint_actions() + ja];
  }
  double transition_prob(std::size_t s, std::size_t ja, std::size_t next) const;
  double obs_prob(std::size_t ja, std::size_t next, std::size_t jo) const {
    return observation[(ja * num_states() + next) * num_joint_obs() + jo];
  }
  double common_prob(std::size_t ja, std::size_t next, std::size_t z) const {
    return common[(ja * num_states() + next) * num_common_obs() + z];
  }
  double reward_of(std::size_t s, std::size_t ja) const { return reward[s * num_joint_actions() + ja]; }

  /// Allocates kernels for the current alphabets: identity-free zero rows.
  void allocate();
};

bool operator==(const EnvModel& a, const EnvModel& b);

/// Agent i's record {Y_1:t, A_1:t-1, Z_1:t}.
struct LocalHistory {
  int agent = 0;
  std::vector<int> observations;
  std::vector<int> actions;
  std::vector<int> commons;

  std::size_t length() const { return observations.size(); }
  void append(int action, int observation, int common);
  auto operator<=>(const LocalHistory&) const = default;
};

struct CommonInfo {
  std::vector<int> records;
  auto operator<=>(const CommonInfo&) const = default;
};

/// Local history minus the common part.
struct PrivateRecord {
  std::vector<int> observations;
  std::vector<int> actions;
  auto operator<=>(const PrivateRecord&) const = default;
};

using JointPrivate = std::vector<PrivateRecord>;

struct BeliefEntry {
  int state;
  JointPrivate privates;
};

/// Common-information belief over (state, joint private record).
struct Belief {
  std::vector<BeliefEntry> support;
  std::vector<double> probs;

  /// Belief at t = 1: the start distribution with null private records.
  static Belief initial(const EnvModel& model);
  double total() const;
};

using Prescription = std::function<std::vector<double>(const PrivateRecord&)>;
using HistoryPolicy = std::function<std::vector<double>(const LocalHistory&)>;

struct InitialSample {
  int state;
  std::vector<int> private_obs;
  int common_obs;
};

struct StepResult {
  int next_state;
  std::vector<int> private_obs;
  int common_obs;
  double reward;
};

struct EpisodeTrace {
  std::vector<int> states;
  std::vector<std::vector<int>> joint_actions;
  std::vector<std::vector<int>> private_obs;
  std::vector<int> commons;
  std::vector<double> rewards;
  double total_return = 0.0;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

InitialSample sample_initial(const EnvModel& model, CounterRng& rng);
StepResult step(const EnvModel& model, int state, std::span<const int> joint_action, CounterRng& rng);

/// Exact Bayes update of the common belief after the realized common observation.
Belief belief_update(const EnvModel& model, const Belief& belief,
                     std::span<const Prescription> prescriptions, int common_obs);

EpisodeTrace rollout(const EnvModel& model, std::span<const HistoryPolicy> policies, int horizon,
                     CounterRng& rng);

/// Throws ModelError unless `dist` is a probability vector of length `size`.
void check_distribution(std::span<const double> dist, std::size_t size, const char* what);

}  // namespace decembed

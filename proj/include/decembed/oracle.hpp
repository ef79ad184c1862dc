#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "decembed/model.hpp"

namespace decembed {

/// Refusal because an exact computation would exceed a configured size.
class GuardExceeded : public std::runtime_error {
 public:
  GuardExceeded(const std::string& what, double estimate, double limit);
  double estimate() const { return estimate_; }
  double limit() const { return limit_; }

 private:
  double estimate_;
  double limit_;
};

/// Deterministic policy of one agent over its observation histories.
///
/// Nodes are stored depth by depth. The node at depth t (1-based) reached by
/// the observation sequence o_2..o_t, with o = y * |Z| + z, has index
/// offset(t) + code where code is the base-(|Y||Z|) number o_2 o_3 ... o_t.
struct PolicyTree {
  int agent = 0;
  int horizon = 1;
  std::size_t branching = 1;
  std::vector<int> actions;

  static std::size_t node_count(std::size_t branching, int horizon);
  static std::size_t depth_offset(std::size_t branching, int depth);
  static PolicyTree constant(const EnvModel& env, int agent, int horizon, int action);
  int action_at(int depth, std::size_t code) const { return actions[depth_offset(branching, depth) + code]; }
};

struct JointPolicy {
  std::vector<PolicyTree> trees;
};

struct OracleConfig {
  double joint_policy_guard = 1e7;
  double lattice_guard = 1e8;
  double history_guard = 1e7;
  int workers = 1;
};

/// Worker count from DECEMBED_WORKERS, at least 1.
int workers_from_env();

double evaluate_joint_policy_exact(const EnvModel& env, const JointPolicy& jp, const OracleConfig& cfg = {});

struct PlanResult {
  double value = 0.0;
  JointPolicy policy;
  double joint_policies = 0.0;
};

/// Exhaustive search over all deterministic joint policy trees. Among equal
/// values the lexicographically smallest encoding wins (agent 0 first, node 0
/// most significant).
PlanResult brute_force_optimal(const EnvModel& env, int horizon, const OracleConfig& cfg = {});

/// Number of deterministic joint policies at `horizon`.
double joint_policy_count(const EnvModel& env, int horizon);

/// Exact expected return of history-dependent stochastic policies.
double evaluate_stochastic_policy_exact(const EnvModel& env, const std::vector<HistoryPolicy>& policies, int horizon,
                                        const OracleConfig& cfg = {});

/// Tree induced by a deterministic history policy.
PolicyTree tree_from_policy(const EnvModel& env, int agent, int horizon, const HistoryPolicy& policy);

/// JSON text: per agent a list of {"path": [observation labels], "action": name}.
std::string joint_policy_to_json(const EnvModel& env, const JointPolicy& jp, double value);

}  // namespace decembed

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "decembed/embeddings.hpp"
#include "decembed/model.hpp"
#include "decembed/wasserstein.hpp"

namespace decembed {

/// Embedding of a whole local history, alpha_t^i.
using EmbeddingMap = std::function<std::vector<double>(const LocalHistory&)>;

/// Replays the history through the scheme's recursive update.
EmbeddingMap scheme_map(const EmbeddingScheme& scheme);
/// Every agent picks uniformly at random.
std::vector<HistoryPolicy> uniform_strategies(const EnvModel& env);

struct EvalConfig {
  double atom_guard = 1e6;          ///< belief atoms summed over all common branches
  double prescription_guard = 1e7;  ///< joint prescriptions searched at one belief
  double work_guard = 5e7;          ///< prescriptions searched by one dynamic program
  std::size_t ot_guard = 4096;
};

struct BeliefAtom {
  int state;
  std::vector<int> ids;  ///< per agent: private record id or embedding id
  double prob;
};

/// One common history c_t reachable under the strategies.
struct CommonBranch {
  std::vector<int> commons;  ///< z_2 .. z_t
  double prob = 0.0;         ///< P(c_t)
  std::vector<BeliefAtom> belief;    ///< pi_t over (state, private record ids)
  std::vector<BeliefAtom> embedded;  ///< pi-hat_t over (state, embedding ids)
  std::vector<double> point;         ///< pi-hat_t in the level's coordinates
  std::vector<int> child;            ///< per z, branch index at t+1 or -1
};

/// (t, c_t, s_t) with its probability.
struct Realization {
  int branch;
  std::vector<int> records;
  std::vector<int> embeddings;
  double prob;
  std::vector<double> state_given;  ///< pi_t(x | s_t)
};

struct Enumeration {
  int horizon = 0;
  std::vector<std::vector<CommonBranch>> levels;       ///< levels[t-1]
  std::vector<std::vector<Realization>> realizations;  ///< per t
  /// Coordinates of embedded-belief points per level: (state, embedding ids),
  /// state-major, then lexicographic in the embedding vectors.
  std::vector<std::vector<BeliefAtom>> coordinates;
  std::vector<std::vector<PrivateRecord>> records;            ///< per agent, by id
  std::vector<std::vector<std::vector<double>>> embeddings;  ///< per agent, by id
};

Enumeration enumerate_reachable(const EnvModel& env, const EmbeddingMap& embedding,
                                const std::vector<HistoryPolicy>& strategies, int horizon, const EvalConfig& cfg = {});

struct WorstCase {
  int t = 0;
  std::vector<int> commons;
  int joint_action = -1;
  double value = 0.0;
};

struct MetricResult {
  double value = 0.0;
  std::vector<double> per_t;  ///< index t-1
  WorstCase worst;
};

/// max |E[R | pi_t, s_t, a] - E[R | pi-hat_t, s-hat_t, a]|
MetricResult epsilon_of(const EnvModel& env, const Enumeration& e);
/// max W1 between next embedded-belief laws given full and embedded information.
MetricResult delta_of(const EnvModel& env, const Enumeration& e, const EvalConfig& cfg = {});

double epsilon_of(const EnvModel& env, const EmbeddingMap& embedding, const std::vector<HistoryPolicy>& strategies,
                  int horizon, const EvalConfig& cfg = {});
double delta_of(const EnvModel& env, const EmbeddingMap& embedding, const std::vector<HistoryPolicy>& strategies,
                int horizon, const EvalConfig& cfg = {});

/// max over pairs of distinct points of |v - v'| / |p - p'|; 0 when all points coincide.
double lipschitz_estimate(const std::vector<std::vector<double>>& points, const std::vector<double>& values);

/// Optimal value from belief atoms at step t via exhaustive deterministic
/// prescriptions. `next(agent, id, a, y, z)` gives the successor local id.
using LocalUpdate = std::function<int(std::size_t, int, int, int, int)>;
double optimal_value(const EnvModel& env, const std::vector<BeliefAtom>& belief, int t, int horizon,
                     const LocalUpdate& next, const EvalConfig& cfg = {});

struct TimeReport {
  int t = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double lipschitz = 0.0;
  double value_gap = 0.0;
  double bound = 0.0;
  double margin = 0.0;
};

struct EpsDeltaReport {
  std::string scheme;
  int horizon = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double lipschitz = 0.0;
  bool theorem_checked = false;
  std::string theorem_note;
  std::vector<TimeReport> per_t;  ///< t = 1 .. T+1
  WorstCase worst_epsilon, worst_delta;
  bool corollary_holds = true;
  double corollary_min_slack = 0.0;  ///< min of L_V delta - |E_mu V - E_nu V|
  double worst_margin = 0.0;
};

/// epsilon and delta only.
EpsDeltaReport eps_delta_report(const EnvModel& env, const EmbeddingMap& embedding, const std::string& scheme_name,
                                const std::vector<HistoryPolicy>& strategies, int horizon, const EvalConfig& cfg = {});

/// Full report with both dynamic programs, the per-step bound
/// (T - t + 1)(eps + L_V delta) and the per-realization value check. Only FMC has a
/// finite embedded space with a recursive update on the vector itself;
/// other schemes throw std::invalid_argument.
EpsDeltaReport theorem_check(const EnvModel& env, const EmbeddingScheme& scheme, int horizon,
                             const std::vector<HistoryPolicy>& strategies, const EvalConfig& cfg = {});

std::string report_to_json(const EpsDeltaReport& report);

}  // namespace decembed

#include "decembed/embedding_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "decembed/oracle.hpp"

namespace decembed {

EmbeddingMap scheme_map(const EmbeddingScheme& scheme) {
  return [scheme](const LocalHistory& h) {
    EmbeddingState st = embed_init(scheme, h.agent);
    for (std::size_t k = 0; k < h.actions.size(); ++k)
      st = embed_update(scheme, st, h.actions[k], h.observations[k + 1], h.commons[k + 1]);
    return st.vec;
  };
}

std::vector<HistoryPolicy> uniform_strategies(const EnvModel& env) {
  std::vector<HistoryPolicy> out;
  for (std::size_t i = 0; i < env.num_agents; ++i) {
    const std::size_t A = env.num_actions(i);
    out.push_back([A](const LocalHistory&) { return std::vector<double>(A, 1.0 / static_cast<double>(A)); });
  }
  return out;
}

namespace {

template <typename Key>
class Interner {
 public:
  int id(const Key& k) {
    auto [it, inserted] = index_.try_emplace(k, static_cast<int>(values_.size()));
    if (inserted) values_.push_back(k);
    return it->second;
  }
  const Key& value(int id) const { return values_[static_cast<std::size_t>(id)]; }
  const std::vector<Key>& values() const { return values_; }

 private:
  std::map<Key, int> index_;
  std::vector<Key> values_;
};

LocalHistory history_of(int agent, const PrivateRecord& r, const std::vector<int>& commons) {
  LocalHistory h;
  h.agent = agent;
  h.observations = r.observations;
  h.actions = r.actions;
  h.commons.push_back(kNullObservation);
  h.commons.insert(h.commons.end(), commons.begin(), commons.end());
  return h;
}

std::vector<BeliefAtom> atoms_from(const std::map<std::vector<int>, double>& masses, double scale) {
  std::vector<BeliefAtom> out;
  for (const auto& [key, p] : masses) out.push_back({key[0], std::vector<int>(key.begin() + 1, key.end()), p * scale});
  return out;
}

bool lex_less(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

/// Groups realizations that share (pi-hat_t, s-hat_t).
std::vector<std::vector<int>> pooled_groups(const Enumeration& e, int t) {
  const auto& reals = e.realizations[static_cast<std::size_t>(t - 1)];
  const auto& branches = e.levels[static_cast<std::size_t>(t - 1)];
  std::vector<std::vector<int>> groups;
  std::vector<int> reps;
  for (std::size_t r = 0; r < reals.size(); ++r) {
    const auto& pr = branches[static_cast<std::size_t>(reals[r].branch)].point;
    bool placed = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& rep = reals[static_cast<std::size_t>(reps[g])];
      if (rep.embeddings != reals[r].embeddings) continue;
      if (max_abs_diff(branches[static_cast<std::size_t>(rep.branch)].point, pr) > 1e-10) continue;
      groups[g].push_back(static_cast<int>(r));
      placed = true;
      break;
    }
    if (!placed) {
      groups.push_back({static_cast<int>(r)});
      reps.push_back(static_cast<int>(r));
    }
  }
  return groups;
}

double expected_reward(const EnvModel& env, const std::vector<double>& state_given, std::size_t ja) {
  double v = 0.0;
  for (std::size_t x = 0; x < state_given.size(); ++x) v += state_given[x] * env.reward_of(x, ja);
  return v;
}

using BranchLaw = std::vector<std::pair<int, double>>;

/// Law of the next common branch given (pi_t, s_t, a).
BranchLaw next_branch_law(const EnvModel& env, const CommonBranch& b, const std::vector<double>& state_given,
                          std::size_t ja, int t) {
  const std::size_t Z = env.num_common_obs();
  std::vector<double> pz(Z, 0.0);
  for (std::size_t x = 0; x < state_given.size(); ++x) {
    if (state_given[x] <= 0.0) continue;
    for (const auto& o : env.transitions(x, ja))
      for (std::size_t z = 0; z < Z; ++z)
        pz[z] += state_given[x] * o.prob * env.common_prob(ja, static_cast<std::size_t>(o.next_state), z);
  }
  BranchLaw law;
  for (std::size_t z = 0; z < Z; ++z) {
    if (pz[z] <= 0.0) continue;
    if (b.child[z] < 0)
      throw std::runtime_error("common observation " + std::to_string(z) + " after step " + std::to_string(t) +
                               " is possible under some joint action but never under the strategy profile");
    law.emplace_back(b.child[z], pz[z]);
  }
  return law;
}

DiscreteDistribution law_distribution(const std::vector<CommonBranch>& next_level, const BranchLaw& law) {
  std::vector<std::vector<double>> pts;
  std::vector<double> ps;
  double total = 0.0;
  for (const auto& [br, p] : law) total += p;
  for (const auto& [br, p] : law) {
    pts.push_back(next_level[static_cast<std::size_t>(br)].point);
    ps.push_back(p / total);
  }
  return make_distribution(pts, ps);
}

struct LawPair {
  int realization;
  std::size_t joint_action;
  BranchLaw mu, nu;
};

/// mu and nu for every (t < T, realization, joint action).
std::vector<std::vector<LawPair>> transition_laws(const EnvModel& env, const Enumeration& e) {
  std::vector<std::vector<LawPair>> out(static_cast<std::size_t>(e.horizon));
  const std::size_t JA = env.num_joint_actions();
  for (int t = 1; t < e.horizon; ++t) {
    const auto& reals = e.realizations[static_cast<std::size_t>(t - 1)];
    const auto& branches = e.levels[static_cast<std::size_t>(t - 1)];
    for (const auto& group : pooled_groups(e, t)) {
      double wsum = 0.0;
      for (int r : group) wsum += reals[static_cast<std::size_t>(r)].prob;
      for (std::size_t ja = 0; ja < JA; ++ja) {
        std::vector<BranchLaw> mus;
        std::map<int, double> pooled;
        for (int r : group) {
          const auto& R = reals[static_cast<std::size_t>(r)];
          mus.push_back(next_branch_law(env, branches[static_cast<std::size_t>(R.branch)], R.state_given, ja, t));
          for (const auto& [br, p] : mus.back()) pooled[br] += p * R.prob / wsum;
        }
        BranchLaw nu(pooled.begin(), pooled.end());
        for (std::size_t k = 0; k < group.size(); ++k)
          out[static_cast<std::size_t>(t - 1)].push_back({group[k], ja, std::move(mus[k]), nu});
      }
    }
  }
  return out;
}

}  // namespace

Enumeration enumerate_reachable(const EnvModel& env, const EmbeddingMap& embedding,
                                const std::vector<HistoryPolicy>& strategies, int horizon, const EvalConfig& cfg) {
  const std::size_t N = env.num_agents, S = env.num_states(), Z = env.num_common_obs(), JA = env.num_joint_actions(),
                    JO = env.num_joint_obs();
  if (strategies.size() != N) throw std::invalid_argument("one strategy per agent required");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");

  std::vector<Interner<PrivateRecord>> records(N);
  std::vector<Interner<std::vector<double>>> embeds(N);
  PrivateRecord root;
  root.observations.push_back(kNullObservation);
  for (auto& r : records) r.id(root);

  std::vector<std::vector<int>> split_ja(JA), split_jo(JO);
  for (std::size_t ja = 0; ja < JA; ++ja) split_ja[ja] = env.split_joint_action(ja);
  for (std::size_t jo = 0; jo < JO; ++jo) split_jo[jo] = env.split_joint_obs(jo);

  Enumeration e;
  e.horizon = horizon;
  e.levels.resize(static_cast<std::size_t>(horizon));
  {
    CommonBranch first;
    first.prob = 1.0;
    for (std::size_t s = 0; s < S; ++s)
      if (env.start[s] > 0.0) first.belief.push_back({static_cast<int>(s), std::vector<int>(N, 0), env.start[s]});
    e.levels[0].push_back(std::move(first));
  }

  double atoms = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    auto& level = e.levels[static_cast<std::size_t>(t - 1)];
    for (std::size_t bi = 0; bi < level.size(); ++bi) {
      CommonBranch& b = level[bi];
      atoms += static_cast<double>(b.belief.size());
      if (atoms > cfg.atom_guard) throw GuardExceeded("enumerated belief atoms", atoms, cfg.atom_guard);

      std::map<std::vector<int>, double> pushed;
      for (const auto& a : b.belief) {
        std::vector<int> key{a.state};
        for (std::size_t i = 0; i < N; ++i)
          key.push_back(embeds[i].id(embedding(history_of(static_cast<int>(i), records[i].value(a.ids[i]), b.commons))));
        pushed[key] += a.prob;
      }
      b.embedded = atoms_from(pushed, 1.0);
      if (t == horizon) continue;

      std::vector<std::map<int, std::vector<double>>> dists(N);
      auto dist_of = [&](std::size_t i, int id) -> const std::vector<double>& {
        auto it = dists[i].find(id);
        if (it == dists[i].end()) {
          auto d = strategies[i](history_of(static_cast<int>(i), records[i].value(id), b.commons));
          check_distribution(d, env.num_actions(i), "strategy");
          it = dists[i].emplace(id, std::move(d)).first;
        }
        return it->second;
      };
      std::vector<std::map<std::vector<int>, double>> next(Z);
      for (const auto& a : b.belief) {
        for (std::size_t ja = 0; ja < JA; ++ja) {
          double pa = a.prob;
          for (std::size_t i = 0; i < N && pa > 0.0; ++i) pa *= dist_of(i, a.ids[i])[static_cast<std::size_t>(split_ja[ja][i])];
          if (pa <= 0.0) continue;
          for (const auto& o : env.transitions(static_cast<std::size_t>(a.state), ja))
            for (std::size_t jo = 0; jo < JO; ++jo) {
              const double py = env.obs_prob(ja, static_cast<std::size_t>(o.next_state), jo);
              if (py <= 0.0) continue;
              std::vector<int> key{o.next_state};
              for (std::size_t i = 0; i < N; ++i) {
                PrivateRecord r = records[i].value(a.ids[i]);
                r.actions.push_back(split_ja[ja][i]);
                r.observations.push_back(split_jo[jo][i]);
                key.push_back(records[i].id(r));
              }
              for (std::size_t z = 0; z < Z; ++z) {
                const double pz = env.common_prob(ja, static_cast<std::size_t>(o.next_state), z);
                if (pz > 0.0) next[z][key] += pa * o.prob * py * pz;
              }
            }
        }
      }
      b.child.assign(Z, -1);
      for (std::size_t z = 0; z < Z; ++z) {
        double total = 0.0;
        for (const auto& [k, p] : next[z]) total += p;
        if (total <= 0.0) continue;
        CommonBranch child;
        child.commons = b.commons;
        child.commons.push_back(static_cast<int>(z));
        child.prob = b.prob * total;
        child.belief = atoms_from(next[z], 1.0 / total);
        auto& next_level = e.levels[static_cast<std::size_t>(t)];
        b.child[z] = static_cast<int>(next_level.size());
        next_level.push_back(std::move(child));
      }
    }
  }

  for (std::size_t i = 0; i < N; ++i) {
    e.records.push_back(records[i].values());
    e.embeddings.push_back(embeds[i].values());
  }

  e.realizations.resize(static_cast<std::size_t>(horizon));
  e.coordinates.resize(static_cast<std::size_t>(horizon));
  for (int t = 1; t <= horizon; ++t) {
    auto& level = e.levels[static_cast<std::size_t>(t - 1)];
    std::map<std::vector<int>, int> coord_index;
    std::vector<BeliefAtom> coords;
    for (const auto& b : level)
      for (const auto& a : b.embedded) {
        std::vector<int> key{a.state};
        key.insert(key.end(), a.ids.begin(), a.ids.end());
        if (coord_index.emplace(key, 0).second) coords.push_back({a.state, a.ids, 0.0});
      }
    auto vectors_of = [&](const BeliefAtom& a) {
      std::vector<std::vector<double>> v;
      for (std::size_t i = 0; i < N; ++i) v.push_back(e.embeddings[i][static_cast<std::size_t>(a.ids[i])]);
      return v;
    };
    std::sort(coords.begin(), coords.end(), [&](const BeliefAtom& x, const BeliefAtom& y) {
      if (x.state != y.state) return x.state < y.state;
      return lex_less(vectors_of(x), vectors_of(y));
    });
    for (std::size_t k = 0; k < coords.size(); ++k) {
      std::vector<int> key{coords[k].state};
      key.insert(key.end(), coords[k].ids.begin(), coords[k].ids.end());
      coord_index[key] = static_cast<int>(k);
    }
    for (auto& b : level) {
      b.point.assign(coords.size(), 0.0);
      for (const auto& a : b.embedded) {
        std::vector<int> key{a.state};
        key.insert(key.end(), a.ids.begin(), a.ids.end());
        b.point[static_cast<std::size_t>(coord_index.at(key))] = a.prob;
      }
    }
    e.coordinates[static_cast<std::size_t>(t - 1)] = std::move(coords);

    auto& reals = e.realizations[static_cast<std::size_t>(t - 1)];
    for (std::size_t bi = 0; bi < level.size(); ++bi) {
      const auto& b = level[bi];
      std::map<std::vector<int>, std::vector<double>> by_record;
      for (const auto& a : b.belief) {
        auto& sg = by_record[a.ids];
        if (sg.empty()) sg.assign(S, 0.0);
        sg[static_cast<std::size_t>(a.state)] += a.prob;
      }
      for (auto& [ids, sg] : by_record) {
        double mass = 0.0;
        for (double p : sg) mass += p;
        for (double& p : sg) p /= mass;
        Realization r;
        r.branch = static_cast<int>(bi);
        r.records = ids;
        for (std::size_t i = 0; i < N; ++i)
          r.embeddings.push_back(embeds[i].id(
              embedding(history_of(static_cast<int>(i), e.records[i][static_cast<std::size_t>(ids[i])], b.commons))));
        r.prob = b.prob * mass;
        r.state_given = std::move(sg);
        reals.push_back(std::move(r));
      }
    }
  }
  return e;
}

MetricResult epsilon_of(const EnvModel& env, const Enumeration& e) {
  MetricResult out;
  out.per_t.assign(static_cast<std::size_t>(e.horizon), 0.0);
  const std::size_t JA = env.num_joint_actions();
  for (int t = 1; t <= e.horizon; ++t) {
    const auto& reals = e.realizations[static_cast<std::size_t>(t - 1)];
    for (const auto& group : pooled_groups(e, t)) {
      double wsum = 0.0;
      for (int r : group) wsum += reals[static_cast<std::size_t>(r)].prob;
      for (std::size_t ja = 0; ja < JA; ++ja) {
        double pooled = 0.0;
        for (int r : group)
          pooled += reals[static_cast<std::size_t>(r)].prob * expected_reward(env, reals[static_cast<std::size_t>(r)].state_given, ja);
        pooled /= wsum;
        for (int r : group) {
          const auto& R = reals[static_cast<std::size_t>(r)];
          const double err = std::abs(expected_reward(env, R.state_given, ja) - pooled);
          double& slot = out.per_t[static_cast<std::size_t>(t - 1)];
          slot = std::max(slot, err);
          if (err > out.value) {
            out.value = err;
            out.worst = {t, e.levels[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(R.branch)].commons,
                         static_cast<int>(ja), err};
          }
        }
      }
    }
  }
  return out;
}

MetricResult delta_of(const EnvModel& env, const Enumeration& e, const EvalConfig& cfg) {
  MetricResult out;
  out.per_t.assign(static_cast<std::size_t>(e.horizon), 0.0);
  const auto laws = transition_laws(env, e);
  for (int t = 1; t < e.horizon; ++t) {
    const auto& next_level = e.levels[static_cast<std::size_t>(t)];
    const auto& reals = e.realizations[static_cast<std::size_t>(t - 1)];
    for (const auto& lp : laws[static_cast<std::size_t>(t - 1)]) {
      const double w = wasserstein(law_distribution(next_level, lp.mu), law_distribution(next_level, lp.nu), cfg.ot_guard);
      double& slot = out.per_t[static_cast<std::size_t>(t - 1)];
      slot = std::max(slot, w);
      if (w > out.value) {
        const auto& R = reals[static_cast<std::size_t>(lp.realization)];
        out.value = w;
        out.worst = {t, e.levels[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(R.branch)].commons,
                     static_cast<int>(lp.joint_action), w};
      }
    }
  }
  return out;
}

double epsilon_of(const EnvModel& env, const EmbeddingMap& embedding, const std::vector<HistoryPolicy>& strategies,
                  int horizon, const EvalConfig& cfg) {
  return epsilon_of(env, enumerate_reachable(env, embedding, strategies, horizon, cfg)).value;
}

double delta_of(const EnvModel& env, const EmbeddingMap& embedding, const std::vector<HistoryPolicy>& strategies,
                int horizon, const EvalConfig& cfg) {
  return delta_of(env, enumerate_reachable(env, embedding, strategies, horizon, cfg), cfg).value;
}

double lipschitz_estimate(const std::vector<std::vector<double>>& points, const std::vector<double>& values) {
  if (points.size() != values.size()) throw std::invalid_argument("lipschitz_estimate: size mismatch");
  double best = 0.0;
  for (std::size_t a = 0; a < points.size(); ++a)
    for (std::size_t b = a + 1; b < points.size(); ++b) {
      const double d = euclidean(points[a], points[b]);
      if (d <= 1e-12) continue;
      best = std::max(best, std::abs(values[a] - values[b]) / d);
    }
  return best;
}

namespace {

/// Exhaustive dynamic program over deterministic prescriptions, memoized on
/// exact beliefs. At the last step the last agent best-responds pointwise.
class ValueSolver {
 public:
  ValueSolver(const EnvModel& env, int horizon, const LocalUpdate& next, const EvalConfig& cfg)
      : env_(env), T_(horizon), next_(next), cfg_(cfg), N_(env.num_agents), Z_(env.num_common_obs()),
        JA_(env.num_joint_actions()), JO_(env.num_joint_obs()), stride_(N_, 1) {
    for (std::size_t i = N_ - 1; i-- > 0;) stride_[i] = stride_[i + 1] * env.num_actions(i + 1);
    for (std::size_t ja = 0; ja < JA_; ++ja) split_ja_.push_back(env.split_joint_action(ja));
    for (std::size_t jo = 0; jo < JO_; ++jo) split_jo_.push_back(env.split_joint_obs(jo));
  }

  double value(const std::vector<BeliefAtom>& belief, int t) {
    if (belief.empty() || t > T_) return 0.0;
    std::string key(reinterpret_cast<const char*>(&t), sizeof t);
    for (const auto& a : belief) {
      key.append(reinterpret_cast<const char*>(&a.state), sizeof a.state);
      key.append(reinterpret_cast<const char*>(a.ids.data()), a.ids.size() * sizeof(int));
      key.append(reinterpret_cast<const char*>(&a.prob), sizeof a.prob);
    }
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const double v = t == T_ ? last_step(belief) : inner_step(belief, t);
    memo_.emplace(std::move(key), v);
    return v;
  }

 private:
  struct Slots {
    std::vector<std::size_t> count;                 ///< distinct local ids per agent
    std::vector<std::vector<std::size_t>> of_atom;  ///< [atom][agent]
  };

  Slots slots_of(const std::vector<BeliefAtom>& belief) const {
    Slots s;
    std::vector<std::map<int, std::size_t>> idx(N_);
    s.of_atom.assign(belief.size(), std::vector<std::size_t>(N_));
    for (std::size_t k = 0; k < belief.size(); ++k)
      for (std::size_t i = 0; i < N_; ++i)
        s.of_atom[k][i] = idx[i].emplace(belief[k].ids[i], idx[i].size()).first->second;
    for (const auto& m : idx) s.count.push_back(m.size());
    return s;
  }

  void charge(const Slots& s, std::size_t searched) {
    double count = 1.0;
    for (std::size_t i = 0; i < searched; ++i)
      count *= std::pow(static_cast<double>(env_.num_actions(i)), static_cast<double>(s.count[i]));
    if (count > cfg_.prescription_guard)
      throw GuardExceeded("joint prescriptions at one belief", count, cfg_.prescription_guard);
    work_ += count;
    if (work_ > cfg_.work_guard) throw GuardExceeded("prescriptions searched by the dynamic program", work_, cfg_.work_guard);
  }

  /// Odometer over the first `searched` agents' prescriptions.
  bool advance(std::vector<std::vector<int>>& presc, std::size_t searched) const {
    for (std::size_t i = searched; i-- > 0;)
      for (std::size_t k = presc[i].size(); k-- > 0;) {
        if (++presc[i][k] < static_cast<int>(env_.num_actions(i))) return true;
        presc[i][k] = 0;
      }
    return false;
  }

  double last_step(const std::vector<BeliefAtom>& belief) {
    const Slots s = slots_of(belief);
    const std::size_t L = N_ - 1, AL = env_.num_actions(L);
    charge(s, L);
    std::vector<std::vector<int>> presc(N_);
    for (std::size_t i = 0; i < N_; ++i) presc[i].assign(s.count[i], 0);
    std::vector<double> score(s.count[L] * AL);
    double best = -INFINITY;
    do {
      std::fill(score.begin(), score.end(), 0.0);
      for (std::size_t k = 0; k < belief.size(); ++k) {
        std::size_t partial = 0;
        for (std::size_t i = 0; i < L; ++i) partial += static_cast<std::size_t>(presc[i][s.of_atom[k][i]]) * stride_[i];
        const double* r = &env_.reward[static_cast<std::size_t>(belief[k].state) * JA_ + partial];
        double* row = &score[s.of_atom[k][L] * AL];
        for (std::size_t a = 0; a < AL; ++a) row[a] += belief[k].prob * r[a];
      }
      double v = 0.0;
      for (std::size_t r = 0; r < s.count[L]; ++r)
        v += *std::max_element(score.begin() + static_cast<long>(r * AL), score.begin() + static_cast<long>((r + 1) * AL));
      best = std::max(best, v);
    } while (advance(presc, L));
    return best;
  }

  int successor(std::size_t i, int id, int a, int y, int z) {
    const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(id)) << 32) |
                              (static_cast<std::uint64_t>(i) << 24) | (static_cast<std::uint64_t>(a) << 16) |
                              (static_cast<std::uint64_t>(y) << 8) | static_cast<std::uint64_t>(z);
    if (auto it = next_cache_.find(key); it != next_cache_.end()) return it->second;
    const int v = next_(i, id, a, y, z);
    next_cache_.emplace(key, v);
    return v;
  }

  double inner_step(const std::vector<BeliefAtom>& belief, int t) {
    const Slots s = slots_of(belief);
    charge(s, N_);

    struct Succ {
      std::size_t z;
      std::size_t key;
      double prob;
    };
    // Successors of every (atom, joint action), keys ranked in sorted order.
    std::map<std::vector<int>, std::size_t> key_index;
    std::vector<std::vector<Succ>> succ(belief.size() * JA_);
    for (std::size_t k = 0; k < belief.size(); ++k) {
      const auto& a = belief[k];
      for (std::size_t ja = 0; ja < JA_; ++ja) {
        auto& out = succ[k * JA_ + ja];
        for (const auto& o : env_.transitions(static_cast<std::size_t>(a.state), ja))
          for (std::size_t jo = 0; jo < JO_; ++jo) {
            const double py = env_.obs_prob(ja, static_cast<std::size_t>(o.next_state), jo);
            if (py <= 0.0) continue;
            for (std::size_t z = 0; z < Z_; ++z) {
              const double pz = env_.common_prob(ja, static_cast<std::size_t>(o.next_state), z);
              if (pz <= 0.0) continue;
              std::vector<int> key{o.next_state};
              for (std::size_t i = 0; i < N_; ++i)
                key.push_back(successor(i, a.ids[i], split_ja_[ja][i], split_jo_[jo][i], static_cast<int>(z)));
              const std::size_t id = key_index.emplace(std::move(key), key_index.size()).first->second;
              out.push_back({z, id, o.prob * py * pz});
            }
          }
      }
    }
    std::vector<std::size_t> rank(key_index.size());
    std::vector<const std::vector<int>*> by_rank(key_index.size());
    {
      std::size_t r = 0;
      for (const auto& [key, id] : key_index) {
        rank[id] = r;
        by_rank[r++] = &key;
      }
    }
    for (auto& list : succ)
      for (auto& x : list) x.key = rank[x.key];

    const std::size_t K = key_index.size();
    std::vector<double> mass(Z_ * K);
    std::vector<std::vector<int>> presc(N_);
    for (std::size_t i = 0; i < N_; ++i) presc[i].assign(s.count[i], 0);
    double best = -INFINITY;
    std::vector<BeliefAtom> child;
    do {
      std::fill(mass.begin(), mass.end(), 0.0);
      double v = 0.0;
      for (std::size_t k = 0; k < belief.size(); ++k) {
        std::size_t ja = 0;
        for (std::size_t i = 0; i < N_; ++i) ja += static_cast<std::size_t>(presc[i][s.of_atom[k][i]]) * stride_[i];
        const double p = belief[k].prob;
        v += p * env_.reward_of(static_cast<std::size_t>(belief[k].state), ja);
        for (const auto& x : succ[k * JA_ + ja]) mass[x.z * K + x.key] += p * x.prob;
      }
      for (std::size_t z = 0; z < Z_; ++z) {
        double total = 0.0;
        for (std::size_t r = 0; r < K; ++r) total += mass[z * K + r];
        if (total <= 0.0) continue;
        child.clear();
        for (std::size_t r = 0; r < K; ++r) {
          const double m = mass[z * K + r];
          if (m <= 0.0) continue;
          const auto& key = *by_rank[r];
          child.push_back({key[0], std::vector<int>(key.begin() + 1, key.end()), m / total});
        }
        v += total * value(child, t + 1);
      }
      best = std::max(best, v);
    } while (advance(presc, N_));
    return best;
  }

  const EnvModel& env_;
  int T_;
  const LocalUpdate& next_;
  const EvalConfig& cfg_;
  std::size_t N_, Z_, JA_, JO_;
  std::vector<std::size_t> stride_;
  std::vector<std::vector<int>> split_ja_, split_jo_;
  std::unordered_map<std::uint64_t, int> next_cache_;
  std::unordered_map<std::string, double> memo_;
  double work_ = 0.0;
};

}  // namespace

double optimal_value(const EnvModel& env, const std::vector<BeliefAtom>& belief, int t, int horizon,
                     const LocalUpdate& next, const EvalConfig& cfg) {
  ValueSolver solver(env, horizon, next, cfg);
  return solver.value(belief, t);
}

namespace {

EpsDeltaReport base_report(const EnvModel& env, const Enumeration& e, const std::string& scheme, const EvalConfig& cfg) {
  EpsDeltaReport rep;
  rep.scheme = scheme;
  rep.horizon = e.horizon;
  const MetricResult eps = epsilon_of(env, e);
  const MetricResult del = delta_of(env, e, cfg);
  rep.epsilon = eps.value;
  rep.delta = del.value;
  rep.worst_epsilon = eps.worst;
  rep.worst_delta = del.worst;
  for (int t = 1; t <= e.horizon + 1; ++t) {
    TimeReport tr;
    tr.t = t;
    if (t <= e.horizon) {
      tr.epsilon = eps.per_t[static_cast<std::size_t>(t - 1)];
      tr.delta = del.per_t[static_cast<std::size_t>(t - 1)];
    }
    rep.per_t.push_back(tr);
  }
  return rep;
}

}  // namespace

EpsDeltaReport eps_delta_report(const EnvModel& env, const EmbeddingMap& embedding, const std::string& scheme_name,
                                const std::vector<HistoryPolicy>& strategies, int horizon, const EvalConfig& cfg) {
  const Enumeration e = enumerate_reachable(env, embedding, strategies, horizon, cfg);
  EpsDeltaReport rep = base_report(env, e, scheme_name, cfg);
  rep.theorem_note = "value functions not computed";
  return rep;
}

EpsDeltaReport theorem_check(const EnvModel& env, const EmbeddingScheme& scheme, int horizon,
                             const std::vector<HistoryPolicy>& strategies, const EvalConfig& cfg) {
  if (scheme.kind != SchemeKind::fmc)
    throw std::invalid_argument(std::string("theorem check needs a finite embedded space with a recursive update on the "
                                            "embedding itself; ") +
                                to_string(scheme.kind) +
                                (scheme.kind == SchemeKind::rnn_e ? " embeds into a continuous space"
                                                                  : " re-projects a growing history buffer") +
                                ", so the embedded dynamic program cannot be enumerated");
  const std::size_t N = env.num_agents;
  const Enumeration e = enumerate_reachable(env, scheme_map(scheme), strategies, horizon, cfg);
  EpsDeltaReport rep = base_report(env, e, to_string(scheme.kind), cfg);
  rep.theorem_checked = true;

  std::vector<Interner<PrivateRecord>> records(N);
  std::vector<Interner<std::vector<double>>> embeds(N);
  for (std::size_t i = 0; i < N; ++i) {
    for (const auto& r : e.records[i]) records[i].id(r);
    for (const auto& v : e.embeddings[i]) embeds[i].id(v);
  }
  std::map<std::vector<int>, int> record_cache, embed_cache;
  const LocalUpdate record_next = [&](std::size_t i, int id, int a, int y, int z) {
    const std::vector<int> key{static_cast<int>(i), id, a, y, z};
    if (auto it = record_cache.find(key); it != record_cache.end()) return it->second;
    PrivateRecord r = records[i].value(id);
    r.actions.push_back(a);
    r.observations.push_back(y);
    return record_cache[key] = records[i].id(r);
  };
  const LocalUpdate embed_next = [&](std::size_t i, int id, int a, int y, int z) {
    const std::vector<int> key{static_cast<int>(i), id, a, y, z};
    if (auto it = embed_cache.find(key); it != embed_cache.end()) return it->second;
    EmbeddingState st;
    st.agent = static_cast<int>(i);
    st.buffer = embeds[i].value(id);
    st.vec = st.buffer;
    return embed_cache[key] = embeds[i].id(embed_update(scheme, st, a, y, z).vec);
  };

  const int T = horizon;
  ValueSolver full_dp(env, T, record_next, cfg), embedded_dp(env, T, embed_next, cfg);
  std::vector<std::vector<double>> v_full(static_cast<std::size_t>(T)), v_emb(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    const auto& level = e.levels[static_cast<std::size_t>(t - 1)];
    std::vector<std::vector<double>> points;
    for (const auto& b : level) {
      v_full[static_cast<std::size_t>(t - 1)].push_back(full_dp.value(b.belief, t));
      v_emb[static_cast<std::size_t>(t - 1)].push_back(embedded_dp.value(b.embedded, t));
      points.push_back(b.point);
    }
    auto& tr = rep.per_t[static_cast<std::size_t>(t - 1)];
    tr.lipschitz = lipschitz_estimate(points, v_emb[static_cast<std::size_t>(t - 1)]);
    for (std::size_t k = 0; k < level.size(); ++k)
      tr.value_gap = std::max(tr.value_gap, std::abs(v_full[static_cast<std::size_t>(t - 1)][k] -
                                                     v_emb[static_cast<std::size_t>(t - 1)][k]));
    rep.lipschitz = std::max(rep.lipschitz, tr.lipschitz);
  }
  rep.worst_margin = INFINITY;
  for (auto& tr : rep.per_t) {
    tr.bound = static_cast<double>(T - tr.t + 1) * (rep.epsilon + rep.lipschitz * rep.delta);
    tr.margin = tr.bound - tr.value_gap;
    rep.worst_margin = std::min(rep.worst_margin, tr.margin);
  }

  rep.corollary_min_slack = INFINITY;
  const auto laws = transition_laws(env, e);
  for (int t = 1; t < T; ++t) {
    const auto& next_level = e.levels[static_cast<std::size_t>(t)];
    const auto& values = v_emb[static_cast<std::size_t>(t)];
    for (const auto& lp : laws[static_cast<std::size_t>(t - 1)]) {
      double em = 0.0, en = 0.0, wm = 0.0, wn = 0.0;
      for (const auto& [br, p] : lp.mu) {
        em += p * values[static_cast<std::size_t>(br)];
        wm += p;
      }
      for (const auto& [br, p] : lp.nu) {
        en += p * values[static_cast<std::size_t>(br)];
        wn += p;
      }
      const double lhs = std::abs(em / wm - en / wn);
      const double w = wasserstein(law_distribution(next_level, lp.mu), law_distribution(next_level, lp.nu), cfg.ot_guard);
      const double slack = rep.lipschitz * w - lhs;
      rep.corollary_min_slack = std::min(rep.corollary_min_slack, slack);
      if (slack < -1e-9) rep.corollary_holds = false;
    }
  }
  if (rep.corollary_min_slack == INFINITY) rep.corollary_min_slack = 0.0;
  rep.theorem_note = "L_V is the maximum over reachable embedded beliefs";
  return rep;
}

std::string report_to_json(const EpsDeltaReport& r) {
  auto worst = [](const WorstCase& w) {
    return nlohmann::json{{"t", w.t}, {"commons", w.commons}, {"joint_action", w.joint_action}, {"value", w.value}};
  };
  nlohmann::json per_t = nlohmann::json::array();
  for (const auto& t : r.per_t) {
    nlohmann::json row{{"t", t.t}, {"epsilon", t.epsilon}, {"delta", t.delta}};
    if (r.theorem_checked) {
      row["lipschitz"] = t.lipschitz;
      row["value_gap"] = t.value_gap;
      row["bound"] = t.bound;
      row["margin"] = t.margin;
    }
    per_t.push_back(row);
  }
  nlohmann::json j{{"scheme", r.scheme},
                   {"horizon", r.horizon},
                   {"epsilon", r.epsilon},
                   {"delta", r.delta},
                   {"theorem_checked", r.theorem_checked},
                   {"note", r.theorem_note},
                   {"per_t", per_t},
                   {"worst_epsilon", worst(r.worst_epsilon)},
                   {"worst_delta", worst(r.worst_delta)}};
  if (r.theorem_checked) {
    j["lipschitz"] = r.lipschitz;
    j["worst_margin"] = r.worst_margin;
    j["corollary_holds"] = r.corollary_holds;
    j["corollary_min_slack"] = r.corollary_min_slack;
  }
  return j.dump(2);
}

}  // namespace decembed

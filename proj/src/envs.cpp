#include "decembed/envs.hpp"

#include <cmath>
#include <cstdlib>

#include "decembed/dpomdp.hpp"

namespace decembed {

Builtin builtin_from_name(const std::string& name) {
  if (name == "dectiger") return Builtin::dectiger;
  if (name == "grid3x3corners") return Builtin::grid3x3corners;
  if (name == "boxpushing") return Builtin::boxpushing;
  throw ModelError("unknown builtin environment '" + name + "'");
}

const char* to_string(Builtin b) {
  switch (b) {
    case Builtin::dectiger: return "dectiger";
    case Builtin::grid3x3corners: return "grid3x3corners";
    case Builtin::boxpushing: return "boxpushing";
  }
  return "?";
}

std::string data_dir() {
  if (const char* env = std::getenv("DECEMBED_DATA"); env && *env) return env;
  return DECEMBED_DATA_DIR;
}

std::string builtin_path(Builtin b) { return data_dir() + "/" + to_string(b) + ".dpomdp"; }

EnvModel load_builtin(Builtin b, int horizon) {
  EnvModel m = load_dpomdp_file(builtin_path(b));
  if (auto v = validate(m); !v.empty()) throw ModelError(std::string(to_string(b)) + ": " + v.front());
  m.horizon = horizon;
  return m;
}

namespace {

struct Cell {
  int row, col;
};

struct Geometry {
  int L, K, cells;
  std::vector<Cell> pos;  // by 1-based label
};

Geometry geometry(const MazeParams& p) {
  Geometry g;
  g.L = p.corridor_length;
  g.K = 2 * ((g.L - 1) / 2) + 1;
  g.cells = 2 * g.L + g.K;
  g.pos.assign(g.cells + 1, {-1, -1});
  for (int c = 0; c < g.L; ++c) g.pos[1 + c] = {0, c};
  for (int r = 1; r <= g.K; ++r) g.pos[g.L + r] = {r, g.L - 1};
  for (int c = g.L - 1; c >= 0; --c) g.pos[g.L + g.K + 1 + (g.L - 1 - c)] = {g.K + 1, c};
  return g;
}

void check_params(const MazeParams& p) {
  if (p.corridor_length < 2) throw ModelError("maze: corridor_length must be at least 2");
  if (!(p.discount > 0.0 && p.discount <= 1.0)) throw ModelError("maze: discount must lie in (0, 1]");
  if (p.horizon < 1) throw ModelError("maze: horizon must be at least 1");
  const MazeLayout lay = maze_layout(p);
  if (p.goal_state_label != std::to_string(lay.goal))
    throw ModelError("maze: goal label " + p.goal_state_label + " does not match the layout goal " +
                     std::to_string(lay.goal));
  if (p.start_labels.first != std::to_string(lay.start1) || p.start_labels.second != std::to_string(lay.start2))
    throw ModelError("maze: start labels must be " + std::to_string(lay.start1) + " and " + std::to_string(lay.start2));
}

}  // namespace

MazeLayout maze_layout(const MazeParams& p) {
  const Geometry g = geometry(p);
  MazeLayout lay;
  lay.num_cells = g.cells;
  lay.column_length = g.K;
  lay.goal = g.L + (g.K + 1) / 2;
  lay.start1 = 1;
  lay.start2 = g.cells;
  lay.meeting_step = g.L + (g.K + 1) / 2;
  return lay;
}

int maze_move(const MazeParams& p, int cell, int action) {
  const Geometry g = geometry(p);
  if (cell < 1 || cell > g.cells) throw ModelError("maze: cell out of range");
  Cell target = g.pos[cell];
  switch (action) {
    case kUp: --target.row; break;
    case kDown: ++target.row; break;
    case kLeft: --target.col; break;
    case kRight: ++target.col; break;
    default: throw ModelError("maze: action out of range");
  }
  for (int c = 1; c <= g.cells; ++c)
    if (g.pos[c].row == target.row && g.pos[c].col == target.col) return c;
  return cell;
}

int maze_state_index(const MazeParams& p, int cell1, int cell2, int step) {
  const int C = maze_layout(p).num_cells;
  return ((cell1 - 1) * C + (cell2 - 1)) * p.horizon + (step - 1);
}

EnvModel generate_corridor_maze(const MazeParams& p) {
  check_params(p);
  const MazeLayout lay = maze_layout(p);
  const int C = lay.num_cells, T = p.horizon;

  EnvModel m;
  m.num_agents = 2;
  for (int c1 = 1; c1 <= C; ++c1)
    for (int c2 = 1; c2 <= C; ++c2)
      for (int t = 1; t <= T; ++t)
        m.states.push_back(std::to_string(c1) + "_" + std::to_string(c2) + "_" + std::to_string(t));
  m.states.push_back("met");
  const int met = C * C * T;
  m.actions.assign(2, {"up", "down", "left", "right"});
  m.private_obs.assign(2, {"none"});
  m.discount = 1.0;
  m.horizon = T;
  m.allocate();

  std::vector<std::vector<int>> moves(C + 1, std::vector<int>(4));
  for (int c = 1; c <= C; ++c)
    for (int a = 0; a < 4; ++a) moves[c][a] = maze_move(p, c, a);

  const std::size_t JA = m.num_joint_actions();
  std::fill(m.observation.begin(), m.observation.end(), 1.0);
  for (int c1 = 1; c1 <= C; ++c1)
    for (int c2 = 1; c2 <= C; ++c2)
      for (int t = 1; t <= T; ++t) {
        const std::size_t s = static_cast<std::size_t>(maze_state_index(p, c1, c2, t));
        const bool together = c1 == lay.goal && c2 == lay.goal;
        for (std::size_t ja = 0; ja < JA; ++ja) {
          const int a1 = static_cast<int>(ja / 4), a2 = static_cast<int>(ja % 4);
          if (together) {
            m.transition[s * JA + ja] = {{met, 1.0}};
            m.reward[s * JA + ja] = std::pow(p.discount, t - 1);
          } else {
            const int next = maze_state_index(p, moves[c1][a1], moves[c2][a2], std::min(t + 1, T));
            m.transition[s * JA + ja] = {{next, 1.0}};
          }
        }
      }
  for (std::size_t ja = 0; ja < JA; ++ja) m.transition[static_cast<std::size_t>(met) * JA + ja] = {{met, 1.0}};
  m.start[static_cast<std::size_t>(maze_state_index(p, lay.start1, lay.start2, 1))] = 1.0;
  return m;
}

EnvModel make_toy_env(int horizon) {
  EnvModel m;
  m.num_agents = 2;
  m.states = {"left", "right"};
  m.actions.assign(2, {"a0", "a1"});
  m.private_obs.assign(2, {"y0", "y1"});
  m.common_obs = {"z0", "z1"};
  m.horizon = horizon;
  m.allocate();
  m.start = {0.5, 0.5};

  const double accuracy[2] = {0.8, 0.7};
  const double common_accuracy = 0.65;
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t ja = 0; ja < 4; ++ja) {
      const int a1 = static_cast<int>(ja / 2), a2 = static_cast<int>(ja % 2);
      double stay;
      if (a1 == 0 && a2 == 0) stay = 0.9;
      else if (a1 == 1 && a2 == 1) stay = s == 0 ? 0.3 : 0.7;
      else stay = 0.6;
      m.transition[s * 4 + ja] = {{static_cast<int>(s), stay}, {static_cast<int>(1 - s), 1.0 - stay}};

      const int target = static_cast<int>(s);
      double r;
      if (a1 == target && a2 == target) r = 2.0;
      else if (a1 != a2) r = -0.5;
      else r = -1.0;
      m.reward[s * 4 + ja] = r;
    }
  for (std::size_t ja = 0; ja < 4; ++ja)
    for (std::size_t n = 0; n < 2; ++n) {
      for (std::size_t jo = 0; jo < 4; ++jo) {
        const std::size_t y1 = jo / 2, y2 = jo % 2;
        const double p1 = y1 == n ? accuracy[0] : 1.0 - accuracy[0];
        const double p2 = y2 == n ? accuracy[1] : 1.0 - accuracy[1];
        m.observation[(ja * 2 + n) * 4 + jo] = p1 * p2;
      }
      for (std::size_t z = 0; z < 2; ++z)
        m.common[(ja * 2 + n) * 2 + z] = z == n ? common_accuracy : 1.0 - common_accuracy;
    }
  return m;
}

}  // namespace decembed

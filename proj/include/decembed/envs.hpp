#pragma once

#include <string>
#include <utility>

#include "decembed/model.hpp"

namespace decembed {

enum class Builtin { dectiger, grid3x3corners, boxpushing };

Builtin builtin_from_name(const std::string& name);
const char* to_string(Builtin b);

/// Directory holding the bundled `.dpomdp` files. DECEMBED_DATA overrides
/// the compiled-in default.
std::string data_dir();
std::string builtin_path(Builtin b);

/// Parsed and validated bundled benchmark. `horizon` replaces the file value.
EnvModel load_builtin(Builtin b, int horizon = 1);

/// Two-agent corridor rendezvous.
///
/// Layout for corridor length L (labels are 1-based):
///   top corridor     1 .. L, left to right, agent 1 starts at 1
///   column           L+1 .. L+K below cell L, K = 2*floor((L-1)/2)+1,
///                    the goal is its middle cell
///   bottom corridor  L+K+1 sits under the column, then L+K+2 .. 2L+K run
///                    leftwards; agent 2 starts at the far end 2L+K
/// For L = 8 this is 23 cells with the goal at 12. Both agents walk right
/// L-1 times and then down (agent 1) or up (agent 2) (K+1)/2 times.
struct MazeParams {
  int corridor_length = 8;
  std::string goal_state_label = "12";
  std::pair<std::string, std::string> start_labels{"1", "23"};
  double discount = 0.95;
  int horizon = 20;
};

/// Cell geometry of a generated maze, for scripted policies and tests.
struct MazeLayout {
  int num_cells = 0;
  int goal = 0;
  int start1 = 0;
  int start2 = 0;
  int column_length = 0;
  /// Step at which the scripted policy meets, 1-based.
  int meeting_step = 0;
};

enum MazeAction { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

MazeLayout maze_layout(const MazeParams& params);
/// Cell reached from `cell` (1-based label) under `action`; walls keep the agent in place.
int maze_move(const MazeParams& params, int cell, int action);

/// State = (cell 1, cell 2, step) plus an absorbing "met" state. Reward
/// discount^(t-1) when both agents stand on the goal at step t; the
/// episode then moves to "met" and earns nothing more. Throws ModelError
/// on inconsistent parameters.
EnvModel generate_corridor_maze(const MazeParams& params);
int maze_state_index(const MazeParams& params, int cell1, int cell2, int step);

/// Two-state, two-agent model with a binary common observation, small
/// enough for both exhaustive dynamic programs.
EnvModel make_toy_env(int horizon = 3);

}  // namespace decembed

// Command-line front end: parse, plan, train, eval, embed-eval, gen-maze.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "decembed/dpomdp.hpp"
#include "decembed/embedding_eval.hpp"
#include "decembed/envs.hpp"
#include "decembed/experiment.hpp"
#include "decembed/oracle.hpp"

using namespace decembed;
using nlohmann::json;

namespace {

constexpr int kExitBadInput = 1;
constexpr int kExitIo = 2;

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

EnvModel resolve_env(const std::string& name, int horizon, const MazeParams& maze) {
  if (name == "toy") return make_toy_env(horizon);
  return load_env(name, maze, horizon);
}

std::string model_sha(const std::string& name, const MazeParams& maze) {
  if (name == "toy") return git_blob_sha1(serialize_dpomdp(make_toy_env()));
  return git_blob_sha1(env_model_text(name, maze));
}

int cmd_parse(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    std::cerr << "error: no such file: " << path << "\n";
    return kExitIo;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << path << "\n";
    return kExitIo;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  EnvModel m;
  try {
    m = parse_dpomdp({ss.str(), path});
  } catch (const ParseError& e) {
    std::cerr << e.origin() << ":" << e.line() << ":" << e.column() << ": " << to_string(e.kind()) << ": " << e.message()
              << "\n";
    return kExitBadInput;
  }
  const auto problems = validate(m);
  for (const auto& p : problems) std::cerr << path << ": " << p << "\n";
  if (!problems.empty()) return kExitBadInput;
  std::cout << "agents: " << m.num_agents << "\n";
  std::cout << "states: " << m.num_states() << "\n";
  for (std::size_t i = 0; i < m.num_agents; ++i)
    std::cout << "agent " << i << ": " << m.num_actions(i) << " actions, " << m.num_private_obs(i) << " observations\n";
  std::cout << "common observations: " << (m.has_common_channel() ? m.common_obs.size() : 0) << "\n";
  std::cout << "horizon: " << m.horizon << "\n";
  std::cout << "model_sha1: " << git_blob_sha1(ss.str()) << "\n";
  return 0;
}

int cmd_plan(const std::string& env_name, int horizon, const std::string& out, const MazeParams& maze) {
  const EnvModel env = resolve_env(env_name, horizon, maze);
  OracleConfig cfg;
  cfg.workers = workers_from_env();
  PlanResult r;
  try {
    r = brute_force_optimal(env, horizon, cfg);
  } catch (const GuardExceeded& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kExitBadInput;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", r.value);
  std::cout << "optimal value: " << buf << "\n";
  std::cout << "joint policies searched: " << static_cast<long long>(r.joint_policies) << "\n";
  json j = json::parse(joint_policy_to_json(env, r.policy, r.value));
  j["env"] = env_name;
  j["horizon"] = horizon;
  j["model_sha1"] = model_sha(env_name, maze);
  write_text(out, j.dump(2) + "\n");
  std::cout << "policy written to " << out << "\n";
  return 0;
}

int cmd_train(ExperimentConfig cfg) {
  ExperimentSummary s;
  try {
    cfg = resolve_config(cfg);
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitBadInput;
  }
  s = run_experiment(cfg);
  std::cout << cfg.env << " " << to_string(cfg.scheme) << " (" << cfg.train.runs << " runs)\n";
  for (std::size_t k = 0; k < s.horizons.size(); ++k) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "T=%d  mean %.2f  stderr %.2f", s.horizons[k], s.mean[k], s.stderr_mean[k]);
    std::cout << buf << "\n";
  }
  std::cout << "results in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& env_name, const std::vector<int>& horizons, int episodes,
             std::uint64_t seed, const std::string& out, const MazeParams& maze) {
  std::ifstream in(checkpoint, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << checkpoint << "\n";
    return kExitIo;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  const Policy policy = policy_from_json(ss.str());
  json tests = json::array();
  for (int h : horizons) {
    const EnvModel env = resolve_env(env_name, h, maze);
    const EvalResult r = evaluate(env, policy, h, episodes, seed);
    char buf[96];
    std::snprintf(buf, sizeof buf, "T=%d  mean %.4f  stderr %.4f", h, r.mean, r.stderr_mean);
    std::cout << buf << "\n";
    tests.push_back({{"horizon", h}, {"mean", r.mean}, {"stderr", r.stderr_mean}});
  }
  const json j{{"checkpoint_sha1", git_blob_sha1(ss.str())},
               {"env", env_name},
               {"model_sha1", model_sha(env_name, maze)},
               {"episodes", episodes},
               {"seed", seed},
               {"tests", tests}};
  write_text(out, j.dump(2) + "\n");
  return 0;
}

int cmd_embed_eval(const std::string& env_name, const std::string& scheme_name, int horizon, std::size_t window,
                   std::uint64_t seed, const std::string& out, const MazeParams& maze) {
  const EnvModel env = resolve_env(env_name, horizon, maze);
  const SchemeKind kind = scheme_from_name(scheme_name);
  CounterRng rng(derive_seed(seed, 0xe3b));
  EmbeddingScheme scheme;
  switch (kind) {
    case SchemeKind::fmc: scheme = make_fmc(env, window); break;
    case SchemeKind::rnn_e: scheme = make_rnn_e(env, 10, rng); break;
    case SchemeKind::pcac: scheme = make_pcac(env, static_cast<std::size_t>(horizon), 10, 10000, rng); break;
  }
  const auto strategies = uniform_strategies(env);
  EpsDeltaReport rep;
  try {
    try {
      rep = theorem_check(env, scheme, horizon, strategies);
    } catch (const std::invalid_argument& e) {
      std::cout << "theorem check skipped: " << e.what() << "\n";
      rep = eps_delta_report(env, scheme_map(scheme), to_string(kind), strategies, horizon);
      rep.theorem_note = e.what();
    }
  } catch (const GuardExceeded& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kExitBadInput;
  }
  std::printf("epsilon: %.6g\ndelta: %.6g\n", rep.epsilon, rep.delta);
  if (rep.theorem_checked) {
    std::printf("L_V: %.6g\nworst margin: %.6g\ncorollary: %s\n", rep.lipschitz, rep.worst_margin,
                rep.corollary_holds ? "holds" : "violated");
  }
  json j = json::parse(report_to_json(rep));
  j["env"] = env_name;
  j["model_sha1"] = model_sha(env_name, maze);
  j["window"] = window;
  j["seed"] = seed;
  write_text(out, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-state embeddings for Dec-POMDPs"};
  app.require_subcommand(1);

  MazeParams maze;
  auto add_maze = [&maze](CLI::App* sub) {
    sub->add_option("--corridor", maze.corridor_length, "maze corridor length");
    sub->add_option("--goal", maze.goal_state_label, "maze goal cell label");
    sub->add_option("--start1", maze.start_labels.first, "maze start cell of agent 1");
    sub->add_option("--start2", maze.start_labels.second, "maze start cell of agent 2");
    sub->add_option("--discount", maze.discount, "maze reward discount");
    sub->add_option("--maze-horizon", maze.horizon, "maze step-count limit");
  };

  std::string parse_path;
  auto* parse = app.add_subcommand("parse", "parse and validate a .dpomdp file");
  parse->add_option("path", parse_path)->required();

  std::string env_name = "dectiger";
  int horizon = 3;
  std::string out;
  auto* plan = app.add_subcommand("plan", "exact optimal value by exhaustive policy-tree search");
  plan->add_option("env,--env", env_name, "dectiger, grid3x3corners, boxpushing, toy, maze or a file");
  plan->add_option("--horizon", horizon);
  plan->add_option("--out", out, "policy JSON path")->default_val("policy.json");
  add_maze(plan);

  std::string config_path;
  std::string train_env, train_scheme, train_out;
  std::vector<int> train_horizons;
  std::uint64_t train_seed = 0;
  int train_runs = 0, train_episodes = 0;
  auto* trainc = app.add_subcommand("train", "train embedding + DQN policies and test them");
  trainc->add_option("--config", config_path, "JSON config");
  trainc->add_option("--env", train_env);
  trainc->add_option("--scheme", train_scheme, "RNN-E, FMC or PCAC");
  trainc->add_option("--horizon", train_horizons, "test horizons");
  trainc->add_option("--seed", train_seed);
  trainc->add_option("--runs", train_runs);
  trainc->add_option("--episodes", train_episodes);
  trainc->add_option("--out", train_out, "output directory");

  std::string checkpoint;
  std::vector<int> eval_horizons{3};
  int eval_episodes = 2000;
  std::uint64_t eval_seed = 0;
  auto* evalc = app.add_subcommand("eval", "greedy test of a checkpoint");
  evalc->add_option("--checkpoint", checkpoint)->required();
  evalc->add_option("--env", env_name);
  evalc->add_option("--horizon", eval_horizons);
  evalc->add_option("--episodes", eval_episodes);
  evalc->add_option("--seed", eval_seed);
  evalc->add_option("--out", out)->default_val("eval.json");
  add_maze(evalc);

  std::string scheme = "FMC";
  std::size_t window = 4;
  std::uint64_t ee_seed = 0;
  auto* ee = app.add_subcommand("embed-eval", "exact epsilon, delta and value-gap report");
  ee->add_option("--env", env_name);
  ee->add_option("--scheme", scheme);
  ee->add_option("--horizon", horizon);
  ee->add_option("--window", window, "FMC memory length");
  ee->add_option("--seed", ee_seed);
  ee->add_option("--out", out)->default_val("embed_eval.json");
  add_maze(ee);

  auto* gm = app.add_subcommand("gen-maze", "write the corridor maze as a .dpomdp file");
  gm->add_option("--out", out)->default_val("maze.dpomdp");
  add_maze(gm);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*parse) return cmd_parse(parse_path);
    if (*plan) return cmd_plan(env_name, horizon, out, maze);
    if (*trainc) {
      ExperimentConfig cfg;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
          std::cerr << "error: cannot read " << config_path << "\n";
          return kExitIo;
        }
        try {
          cfg = config_from_json(json::parse(in));
        } catch (const std::exception& e) {
          std::cerr << "invalid config: " << e.what() << "\n";
          return kExitBadInput;
        }
      }
      if (!train_env.empty()) cfg.env = train_env;
      if (!train_scheme.empty()) cfg.scheme = scheme_from_name(train_scheme);
      if (!train_horizons.empty()) cfg.test_horizons = train_horizons;
      if (trainc->count("--seed")) cfg.train.seed = train_seed;
      if (trainc->count("--runs")) cfg.train.runs = train_runs;
      if (trainc->count("--episodes")) cfg.train.episodes = train_episodes;
      if (!train_out.empty()) cfg.out_dir = train_out;
      return cmd_train(cfg);
    }
    if (*evalc) return cmd_eval(checkpoint, env_name, eval_horizons, eval_episodes, eval_seed, out, maze);
    if (*ee) return cmd_embed_eval(env_name, scheme, horizon, window, ee_seed, out, maze);
    if (*gm) {
      write_text(out, serialize_dpomdp(generate_corridor_maze(maze)));
      const MazeLayout l = maze_layout(maze);
      std::cout << "cells: " << l.num_cells << ", goal: " << l.goal << ", meeting step: " << l.meeting_step << "\n";
      return 0;
    }
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const ParseError& e) {
    std::cerr << e.origin() << ":" << e.line() << ":" << e.column() << ": " << e.message() << "\n";
    return kExitBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}

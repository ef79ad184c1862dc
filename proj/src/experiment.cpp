#include "decembed/experiment.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "decembed/dpomdp.hpp"
#include "decembed/oracle.hpp"
#include "decembed/tensor.hpp"

namespace decembed {

namespace {

using nlohmann::json;

bool is_builtin(const std::string& name) {
  try {
    builtin_from_name(name);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

std::vector<int> default_test_horizons(const std::string& env, const MazeParams& maze) {
  if (env == "dectiger") return {3, 4, 5, 6, 7};
  if (env == "grid3x3corners") return {10};
  if (env == "boxpushing") return {4};
  if (env == "maze") return {maze.horizon};
  return {10};
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known{
      "env", "scheme", "episodes", "batch_size", "replay_capacity", "lr", "target_interval", "epsilon_start",
      "train_horizon", "eval_episodes", "runs", "seed", "dqn_hidden", "rnn_hidden", "fmc_window", "pcac_k",
      "pcac_samples", "curve_interval", "curve_episodes", "test_horizons", "out", "maze"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config field '" + k + "'");
  ExperimentConfig c;
  take(j, "env", c.env);
  if (j.contains("scheme")) {
    try {
      c.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config field 'scheme': ") + e.what());
    }
  }
  auto& t = c.train;
  take(j, "episodes", t.episodes);
  take(j, "batch_size", t.batch_size);
  take(j, "replay_capacity", t.replay_capacity);
  take(j, "lr", t.lr);
  take(j, "target_interval", t.target_interval);
  take(j, "epsilon_start", t.epsilon_start);
  take(j, "train_horizon", t.train_horizon);
  take(j, "eval_episodes", t.eval_episodes);
  take(j, "runs", t.runs);
  take(j, "seed", t.seed);
  take(j, "dqn_hidden", t.dqn_hidden);
  take(j, "rnn_hidden", t.rnn_hidden);
  take(j, "fmc_window", t.fmc_window);
  take(j, "pcac_k", t.pcac_k);
  take(j, "pcac_samples", t.pcac_samples);
  take(j, "curve_interval", t.curve_interval);
  take(j, "curve_episodes", t.curve_episodes);
  take(j, "test_horizons", c.test_horizons);
  take(j, "out", c.out_dir);
  if (j.contains("maze")) {
    const json& m = j.at("maze");
    if (!m.is_object()) throw ConfigError("config field 'maze' must be an object");
    take(m, "corridor_length", c.maze.corridor_length);
    take(m, "goal", c.maze.goal_state_label);
    if (m.contains("starts")) {
      std::vector<std::string> s;
      take(m, "starts", s);
      if (s.size() != 2) throw ConfigError("config field 'maze.starts' needs two labels");
      c.maze.start_labels = {s[0], s[1]};
    }
    take(m, "discount", c.maze.discount);
    take(m, "horizon", c.maze.horizon);
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  const auto& t = c.train;
  return json{{"env", c.env},
              {"scheme", to_string(c.scheme)},
              {"episodes", t.episodes},
              {"batch_size", t.batch_size},
              {"replay_capacity", t.replay_capacity},
              {"lr", t.lr},
              {"target_interval", t.target_interval},
              {"epsilon_start", t.epsilon_start},
              {"train_horizon", t.train_horizon},
              {"eval_episodes", t.eval_episodes},
              {"runs", t.runs},
              {"seed", t.seed},
              {"dqn_hidden", t.dqn_hidden},
              {"rnn_hidden", t.rnn_hidden},
              {"fmc_window", t.fmc_window},
              {"pcac_k", t.pcac_k},
              {"pcac_samples", t.pcac_samples},
              {"curve_interval", t.curve_interval},
              {"curve_episodes", t.curve_episodes},
              {"test_horizons", c.test_horizons},
              {"maze",
               {{"corridor_length", c.maze.corridor_length},
                {"goal", c.maze.goal_state_label},
                {"starts", {c.maze.start_labels.first, c.maze.start_labels.second}},
                {"discount", c.maze.discount},
                {"horizon", c.maze.horizon}}}};
}

ExperimentConfig resolve_config(ExperimentConfig cfg) {
  try {
    validate_config(cfg.train);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.test_horizons.empty()) cfg.test_horizons = default_test_horizons(cfg.env, cfg.maze);
  for (int h : cfg.test_horizons)
    if (h < 1) throw ConfigError("test horizons must be positive");
  if (cfg.env == "maze") maze_layout(cfg.maze);
  return cfg;
}

std::string env_model_text(const std::string& env, const MazeParams& maze) {
  if (env == "maze") return serialize_dpomdp(generate_corridor_maze(maze));
  if (is_builtin(env)) return read_file(builtin_path(builtin_from_name(env)));
  return read_file(env);
}

EnvModel load_env(const std::string& env, const MazeParams& maze, int horizon) {
  EnvModel m;
  if (env == "maze") {
    MazeParams p = maze;
    m = generate_corridor_maze(p);
  } else if (is_builtin(env)) {
    m = load_builtin(builtin_from_name(env), horizon);
  } else {
    m = load_dpomdp_file(env);
  }
  m.horizon = horizon;
  return m;
}

std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(buf, sizeof buf, "%02x", md[k]);
    hex += buf;
  }
  return hex;
}

std::string policy_to_json(const Policy& p) {
  const EmbeddingScheme& s = p.scheme;
  std::vector<NamedTensor> ts{{"dqn.W1", &p.dqn.W1}, {"dqn.b1", &p.dqn.b1}, {"dqn.W2", &p.dqn.W2}, {"dqn.b2", &p.dqn.b2}};
  Tensor pca_mean = Tensor::column(s.pca.mean);
  Tensor pca_eig = Tensor::column(s.pca.eigenvalues);
  if (s.kind == SchemeKind::rnn_e) {
    ts.emplace_back("lstm.W", &s.lstm.W);
    ts.emplace_back("lstm.b", &s.lstm.b);
  } else if (s.kind == SchemeKind::pcac) {
    ts.emplace_back("pca.mean", &pca_mean);
    ts.emplace_back("pca.projection", &s.pca.projection);
    ts.emplace_back("pca.eigenvalues", &pca_eig);
  }
  json j = json::parse(tensors_to_json(ts));
  j["scheme"] = {{"kind", to_string(s.kind)},
                 {"num_agents", s.num_agents},
                 {"num_actions", s.num_actions},
                 {"num_obs", s.num_obs},
                 {"num_common", s.num_common},
                 {"window", s.window},
                 {"history_slots", s.history_slots},
                 {"lstm_input", s.lstm.input_size},
                 {"lstm_hidden", s.lstm.hidden}};
  return j.dump(1);
}

Policy policy_from_json(const std::string& text) {
  json j = json::parse(text);
  const json& m = j.at("scheme");
  Policy p;
  EmbeddingScheme& s = p.scheme;
  s.kind = scheme_from_name(m.at("kind").get<std::string>());
  s.num_agents = m.at("num_agents").get<std::size_t>();
  s.num_actions = m.at("num_actions").get<std::size_t>();
  s.num_obs = m.at("num_obs").get<std::size_t>();
  s.num_common = m.at("num_common").get<std::size_t>();
  s.window = m.at("window").get<std::size_t>();
  s.history_slots = m.at("history_slots").get<std::size_t>();
  s.lstm.input_size = m.at("lstm_input").get<std::size_t>();
  s.lstm.hidden = m.at("lstm_hidden").get<std::size_t>();
  for (auto& [name, t] : tensors_from_json(text)) {
    if (name == "dqn.W1") p.dqn.W1 = t;
    else if (name == "dqn.b1") p.dqn.b1 = t;
    else if (name == "dqn.W2") p.dqn.W2 = t;
    else if (name == "dqn.b2") p.dqn.b2 = t;
    else if (name == "lstm.W") s.lstm.W = t;
    else if (name == "lstm.b") s.lstm.b = t;
    else if (name == "pca.mean") s.pca.mean = t.data;
    else if (name == "pca.projection") s.pca.projection = t;
    else if (name == "pca.eigenvalues") s.pca.eigenvalues = t.data;
    else throw std::runtime_error("checkpoint: unknown tensor " + name);
  }
  if (p.dqn.input_size() != s.dim() + s.num_agents) throw std::runtime_error("checkpoint: DQN input does not match scheme");
  return p;
}

RunReport run_experiment_once(const ExperimentConfig& cfg, int run) {
  RunReport r;
  r.run = run;
  r.seed = derive_seed(cfg.train.seed, static_cast<std::uint64_t>(run));
  const EnvModel env = load_env(cfg.env, cfg.maze, cfg.train.train_horizon);
  TrainResult tr = train(env, cfg.scheme, cfg.train, r.seed);
  r.curve = std::move(tr.curve);
  r.policy = std::move(tr.policy);
  for (std::size_t k = 0; k < cfg.test_horizons.size(); ++k) {
    const int h = cfg.test_horizons[k];
    const EnvModel test_env = load_env(cfg.env, cfg.maze, h);
    r.tests.push_back(evaluate(test_env, r.policy, h, cfg.train.eval_episodes, derive_seed(r.seed, 0x7e57 + k)));
  }
  return r;
}

std::string curve_csv(const ExperimentConfig& cfg, const std::string& model_sha1, const RunReport& run) {
  std::string out = "# config: " + config_to_json(cfg).dump() + "\n";
  out += "# model_sha1: " + model_sha1 + "\n";
  out += "# run: " + std::to_string(run.run) + " seed: " + std::to_string(run.seed) + "\n";
  out += "episode,epsilon,eval_return\n";
  for (const auto& c : run.curve) out += std::to_string(c.episode) + "," + fmt(c.epsilon) + "," + fmt(c.eval_return) + "\n";
  return out;
}

json summary_json(const ExperimentConfig& cfg, const std::string& model_sha1, const ExperimentSummary& s) {
  json per = json::array();
  json row = json::object();
  for (std::size_t k = 0; k < s.horizons.size(); ++k) {
    json runs = json::array();
    for (const auto& r : s.runs) runs.push_back(r.tests[k].mean);
    per.push_back({{"horizon", s.horizons[k]}, {"mean", s.mean[k]}, {"stderr", s.stderr_mean[k]}, {"runs", runs}});
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", s.mean[k]);
    row["T=" + std::to_string(s.horizons[k])] = buf;
  }
  json seeds = json::array();
  for (const auto& r : s.runs) seeds.push_back(r.seed);
  return json{{"config", config_to_json(cfg)},
              {"model_sha1", model_sha1},
              {"env", cfg.env},
              {"scheme", to_string(cfg.scheme)},
              {"run_seeds", seeds},
              {"horizons", per},
              {"table_row", row}};
}

ExperimentSummary run_experiment(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = resolve_config(raw);
  const std::string sha = git_blob_sha1(env_model_text(cfg.env, cfg.maze));
  const int runs = cfg.train.runs;
  std::vector<RunReport> reports(static_cast<std::size_t>(runs));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(runs));
  const int workers = std::max(1, std::min(workers_from_env(), runs));
  std::mutex m;
  int next = 0;
  auto worker = [&] {
    while (true) {
      int k;
      {
        std::lock_guard<std::mutex> lock(m);
        if (next >= runs) return;
        k = next++;
      }
      try {
        reports[static_cast<std::size_t>(k)] = run_experiment_once(cfg, k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentSummary s;
  s.horizons = cfg.test_horizons;
  for (std::size_t k = 0; k < s.horizons.size(); ++k) {
    double mean = 0.0;
    for (const auto& r : reports) mean += r.tests[k].mean;
    mean /= runs;
    double var = 0.0;
    for (const auto& r : reports) var += (r.tests[k].mean - mean) * (r.tests[k].mean - mean);
    const double se = runs > 1 ? std::sqrt(var / (runs - 1) / runs) : 0.0;
    s.mean.push_back(mean);
    s.stderr_mean.push_back(se);
  }
  s.runs = std::move(reports);

  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  for (const auto& r : s.runs) {
    const std::string stem = "run_" + std::to_string(r.run);
    write_file(dir / (stem + ".csv"), curve_csv(cfg, sha, r));
    json ck = json::parse(policy_to_json(r.policy));
    ck["config"] = config_to_json(cfg);
    ck["model_sha1"] = sha;
    ck["seed"] = r.seed;
    write_file(dir / (stem + "_checkpoint.json"), ck.dump(1) + "\n");
    json ev = json::array();
    for (std::size_t k = 0; k < s.horizons.size(); ++k)
      ev.push_back({{"horizon", s.horizons[k]}, {"mean", r.tests[k].mean}, {"stderr", r.tests[k].stderr_mean}});
    write_file(dir / (stem + "_eval.json"),
               json{{"config", config_to_json(cfg)}, {"model_sha1", sha}, {"run", r.run}, {"seed", r.seed}, {"tests", ev}}
                       .dump(2) +
                   "\n");
  }
  write_file(dir / "summary.json", summary_json(cfg, sha, s).dump(2) + "\n");
  return s;
}

}  // namespace decembed

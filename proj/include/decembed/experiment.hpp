#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "decembed/embeddings.hpp"
#include "decembed/envs.hpp"
#include "decembed/learner.hpp"
#include "decembed/model.hpp"

namespace decembed {

/// Flat experiment description. `env` is a bundled benchmark name, "maze",
/// or a path to a `.dpomdp` file.
struct ExperimentConfig {
  std::string env = "dectiger";
  MazeParams maze;
  SchemeKind scheme = SchemeKind::fmc;
  TrainConfig train;
  std::vector<int> test_horizons;  ///< empty: the environment's default
  std::string out_dir = "out";
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown keys and ill-typed values raise ConfigError; missing keys keep defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Everything except the output directory, so results do not depend on where they are written.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Validates and fills in default test horizons.
ExperimentConfig resolve_config(ExperimentConfig cfg);

std::vector<int> default_test_horizons(const std::string& env, const MazeParams& maze);

/// The model text that identifies the environment: file bytes for bundled
/// and file models, the serialized text for generated ones.
std::string env_model_text(const std::string& env, const MazeParams& maze);
EnvModel load_env(const std::string& env, const MazeParams& maze, int horizon);

/// SHA-1 of "blob <size>\0<content>", hex encoded.
std::string git_blob_sha1(const std::string& content);

/// Checkpoint: scheme metadata plus named tensors.
std::string policy_to_json(const Policy& policy);
Policy policy_from_json(const std::string& text);

struct RunReport {
  int run = 0;
  std::uint64_t seed = 0;
  std::vector<CurvePoint> curve;
  std::vector<EvalResult> tests;  ///< aligned with the test horizons
  Policy policy;
};

/// One training run followed by its tests. Run k uses derive_seed(seed, k).
RunReport run_experiment_once(const ExperimentConfig& cfg, int run);

struct ExperimentSummary {
  std::vector<int> horizons;
  std::vector<double> mean;    ///< across runs of the per-run test means
  std::vector<double> stderr_mean;
  std::vector<RunReport> runs;
};

/// Every run, in parallel over DECEMBED_WORKERS threads; writes
/// run_<k>.csv, run_<k>_checkpoint.json, run_<k>_eval.json and summary.json
/// under cfg.out_dir.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

std::string curve_csv(const ExperimentConfig& cfg, const std::string& model_sha1, const RunReport& run);
nlohmann::json summary_json(const ExperimentConfig& cfg, const std::string& model_sha1, const ExperimentSummary& s);

}  // namespace decembed

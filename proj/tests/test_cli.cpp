#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "decembed/envs.hpp"
#include "decembed/experiment.hpp"

using namespace decembed;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("decembed_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Runs the CLI, stdout and stderr to `log`; returns the exit status.
int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + DECEMBED_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kSmallConfig = R"({"env": "dectiger", "scheme": "FMC", "episodes": 300, "batch_size": 40,
  "replay_capacity": 400, "train_horizon": 3, "eval_episodes": 50, "runs": 2, "seed": 4,
  "curve_interval": 100, "curve_episodes": 10, "test_horizons": [2, 3]})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("git blob hash") {
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("config parsing") {
  const auto cfg = resolve_config(config_from_json(nlohmann::json::parse(kSmallConfig)));
  CHECK(cfg.train.episodes == 300);
  CHECK(cfg.test_horizons == std::vector<int>{2, 3});
  CHECK(resolve_config(config_from_json(nlohmann::json::parse(R"({"env": "dectiger"})"))).test_horizons ==
        std::vector<int>{3, 4, 5, 6, 7});
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"epsiodes": 10})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"episodes": "many"})")), ConfigError);
  CHECK_THROWS_AS(resolve_config(config_from_json(nlohmann::json::parse(R"({"episodes": 0})"))), ConfigError);
  const auto back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
}

TEST_CASE("checkpoints round-trip") {
  const EnvModel tiger = load_builtin(Builtin::dectiger, 3);
  TrainConfig c;
  c.episodes = 60;
  c.batch_size = 20;
  c.replay_capacity = 200;
  c.train_horizon = 3;
  c.pcac_samples = 200;
  c.curve_interval = 60;
  c.curve_episodes = 5;
  for (SchemeKind k : {SchemeKind::fmc, SchemeKind::rnn_e, SchemeKind::pcac}) {
    const Policy p = train(tiger, k, c, 9).policy;
    const std::string text = policy_to_json(p);
    const Policy q = policy_from_json(text);
    CHECK(policy_to_json(q) == text);
    const auto a = evaluate(tiger, p, 3, 100, 1), b = evaluate(tiger, q, 3, 100, 1);
    CHECK(a.mean == b.mean);
  }
}

TEST_CASE("parse exit codes") {
  const fs::path dir = scratch("parse");
  CHECK(cli("parse \"" + builtin_path(Builtin::dectiger) + "\"", dir / "ok.log") == 0);
  CHECK(slurp(dir / "ok.log").find("model_sha1: " + git_blob_sha1(slurp(builtin_path(Builtin::dectiger)))) !=
        std::string::npos);
  {
    std::ofstream bad(dir / "bad.dpomdp");
    bad << "agents: 2\ndiscount: 1\nvalues: reward\nstates: a b\nstart: uniform\nactions:\nx\nx\n"
           "observations:\no\no\nT: * : a : b 2\n";
  }
  CHECK(cli("parse \"" + (dir / "bad.dpomdp").string() + "\"", dir / "bad.log") == 1);
  CHECK(slurp(dir / "bad.log").find("bad.dpomdp:") != std::string::npos);
  CHECK(cli("parse \"" + (dir / "missing.dpomdp").string() + "\"", dir / "missing.log") == 2);
}

TEST_CASE("plan prints the optimum and refuses oversized searches") {
  const fs::path dir = scratch("plan");
  CHECK(cli("plan dectiger --horizon 2 --out \"" + (dir / "p.json").string() + "\"", dir / "plan.log") == 0);
  CHECK(slurp(dir / "plan.log").find("optimal value: -4.00") != std::string::npos);
  CHECK(nlohmann::json::parse(slurp(dir / "p.json")).contains("agents"));
  CHECK(cli("plan dectiger --horizon 4 --out \"" + (dir / "q.json").string() + "\"", dir / "refuse.log") == 1);
  CHECK(slurp(dir / "refuse.log").find("refused") != std::string::npos);
}

TEST_CASE("train rejects bad configs") {
  const fs::path dir = scratch("badcfg");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"episodes": 0})";
  }
  CHECK(cli("train --config \"" + (dir / "c.json").string() + "\" --out \"" + (dir / "o").string() + "\"",
            dir / "log") != 0);
  CHECK(!fs::exists(dir / "o" / "summary.json"));
}

TEST_CASE("reruns are byte-identical") {
  const fs::path dir = scratch("rerun");
  {
    std::ofstream f(dir / "c.json");
    f << kSmallConfig;
  }
  for (const char* name : {"a", "b"})
    REQUIRE(cli("train --config \"" + (dir / "c.json").string() + "\" --out \"" + (dir / name).string() + "\"",
                dir / (std::string(name) + ".log")) == 0);
  for (const char* f : {"summary.json", "run_0.csv", "run_1.csv", "run_0_checkpoint.json", "run_1_eval.json"}) {
    const std::string a = slurp(dir / "a" / f);
    CHECK(!a.empty());
    CHECK(a == slurp(dir / "b" / f));
  }
  const std::string csv = slurp(dir / "a" / "run_0.csv");
  CHECK(csv.find("episode,epsilon,eval_return") != std::string::npos);
  CHECK(csv.find("# model_sha1: " + git_blob_sha1(slurp(builtin_path(Builtin::dectiger)))) != std::string::npos);

  const std::string ck = (dir / "a" / "run_0_checkpoint.json").string();
  for (const char* name : {"e1.json", "e2.json"})
    REQUIRE(cli("eval --checkpoint \"" + ck + "\" --env dectiger --horizon 3 --episodes 200 --seed 2 --out \"" +
                    (dir / name).string() + "\"",
                dir / "eval.log") == 0);
  CHECK(slurp(dir / "e1.json") == slurp(dir / "e2.json"));

  for (const char* name : {"p1.json", "p2.json"})
    REQUIRE(cli("plan toy --horizon 2 --out \"" + (dir / name).string() + "\"", dir / "plan.log") == 0);
  CHECK(slurp(dir / "p1.json") == slurp(dir / "p2.json"));
}

TEST_CASE("embedding report on the toy model") {
  const fs::path dir = scratch("embed");
  REQUIRE(cli("embed-eval --env toy --scheme FMC --window 1 --horizon 2 --out \"" + (dir / "r.json").string() + "\"",
              dir / "log") == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "r.json"));
  CHECK(j["theorem_checked"] == true);
  CHECK(j["worst_margin"].get<double>() >= -1e-9);
  CHECK(slurp(dir / "log").find("epsilon:") != std::string::npos);
}

TEST_CASE("maze file generation") {
  const fs::path dir = scratch("maze");
  REQUIRE(cli("gen-maze --corridor 4 --goal 6 --start1 1 --start2 11 --maze-horizon 8 --out \"" +
                  (dir / "m.dpomdp").string() + "\"",
              dir / "log") == 0);
  CHECK(cli("parse \"" + (dir / "m.dpomdp").string() + "\"", dir / "parse.log") == 0);
}

}

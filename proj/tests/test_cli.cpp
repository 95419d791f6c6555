#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config_json.hpp"
#include "schedlab/bytes.hpp"

using namespace schedlab;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "schedlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("schedlab_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Small, fast configuration shared by the end-to-end cases.
fs::path tiny_config(const fs::path& dir) {
  SystemConfig c;
  c.users = 2;
  c.rbs = 4;
  c.episode_slots = 40;
  c.batch_size = 8;
  c.metrics_window_episodes = 1;
  c.episodes = 2;
  c.flags = {true, true, true};
  const fs::path p = dir / "tiny.json";
  std::ofstream(p) << dump_config(c);
  return p;
}

}  // namespace

TEST_CASE("config json round trip and field errors") {
  SystemConfig c;
  c.users = 4;
  c.mode = Mode::kStraightforward;
  c.flags = {true, false, true};
  c.is_normalization = IsNormalization::kBatchMax;
  c.channel_model = ChannelModel::kFixed;
  c.reward_eps_floor = 1e-7;
  CHECK(config_from_json(config_to_json(c)) == c);
  CHECK(config_from_json(nlohmann::json::parse(dump_config(c))) == c);

  auto field_of = [](const nlohmann::json& j) {
    try {
      config_from_json(j);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of({{"no_such_key", 1}}) == "no_such_key");
  CHECK(field_of({{"users", "three"}}) == "users");
  CHECK(field_of({{"users", 0}}) == "users");
  CHECK(field_of({{"d_min", 9}}) == "d_max");  // d_min <= d_max is checked on d_max
  CHECK(field_of({{"mode", "fancy"}}) == "mode");
}

TEST_CASE("flag strings") {
  CHECK(parse_flags("none") == TrainerFlags{});
  CHECK(parse_flags("mh,rs,is") == TrainerFlags{true, true, true});
  CHECK(parse_flags("is rs") == TrainerFlags{false, true, true});
  CHECK_THROWS_AS(parse_flags("mh,xx"), ConfigError);
  CHECK(parse_flags(flags_to_string(TrainerFlags{true, false, true})) ==
        TrainerFlags{true, false, true});
}

TEST_CASE("output directory resolution") {
  ::setenv("SCHEDLAB_OUT", "/tmp/from_env", 1);
  CHECK(resolve_out_dir("/tmp/from_flag") == fs::path("/tmp/from_flag"));
  CHECK(resolve_out_dir("") == fs::path("/tmp/from_env"));
  ::unsetenv("SCHEDLAB_OUT");
  CHECK(resolve_out_dir("") == fs::current_path());
}

TEST_CASE("usage and configuration errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"dance"}).code == 2);
  CHECK(cli({"evaluate", "--bogus"}).code == 2);
  const Run bad = cli({"evaluate", "--users", "0", "--out", scratch("bad").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("'users'") != std::string::npos);
  const Run pol = cli({"evaluate", "--policy", "pf", "--out", scratch("bad").string()});
  CHECK(pol.code == 2);
  CHECK(pol.err.find("--policy") != std::string::npos);
  CHECK(cli({"oracle", "nonsense", "--out", scratch("bad").string()}).code == 2);
  CHECK(cli({"evaluate", "--policy", "actor", "--actor", "/nonexistent/actor.bin", "--out",
             scratch("bad").string()})
            .code == 4);
}

TEST_CASE("oracle subcommand reports pass lines and a csv") {
  const fs::path dir = scratch("oracle");
  const Run r = cli({"oracle", "shaping", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS shaping.max_q_offset_error") != std::string::npos);
  const std::string csv = slurp(dir / "oracle_shaping.csv");
  CHECK(csv.rfind("suite,metric,value,bound,pass\n", 0) == 0);
}

TEST_CASE("fixed seeds give byte-identical outputs") {
  const fs::path base = scratch("determinism");
  const fs::path cfg = tiny_config(base);
  for (int rep = 0; rep < 2; ++rep) {
    const std::string d = (base / ("run" + std::to_string(rep))).string();
    REQUIRE(cli({"train-offline", "--config", cfg.string(), "--seed", "5", "--out", d}).code == 0);
    REQUIRE(cli({"evaluate", "--config", cfg.string(), "--policy", "edf", "--out", d}).code == 0);
    REQUIRE(cli({"evaluate", "--config", cfg.string(), "--policy", "actor", "--actor",
                 d + "/actor.bin", "--out", d + "/actor_eval"})
                .code == 0);
    REQUIRE(cli({"run-online", "--config", cfg.string(), "--actor", d + "/actor.bin", "--critic",
                 d + "/critic.bin", "--snr-offset-db", "-3", "--out", d})
                .code == 0);
    REQUIRE(cli({"export", "--params", d + "/actor.bin", "--out", d}).code == 0);
  }
  for (const char* f : {"metrics.csv", "evaluate.csv", "actor_eval/evaluate.csv", "online.csv",
                        "actor_params.csv", "actor.bin", "critic.bin", "online_actor.bin",
                        "config.json"}) {
    CAPTURE(f);
    CHECK(slurp(base / "run0" / f) == slurp(base / "run1" / f));
  }
  const std::string metrics = slurp(base / "run0" / "metrics.csv");
  CHECK(metrics.rfind("window,user,loss_prob,avg_reward,worst_reward\n", 0) == 0);
  // header plus 2 windows x 2 users
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 5);
}

TEST_CASE("serial and parallel kernels give identical training output") {
  const fs::path base = scratch("exec");
  const fs::path cfg = tiny_config(base);
  for (const char* exec : {"serial", "parallel"})
    REQUIRE(cli({"train-offline", "--config", cfg.string(), "--exec", exec, "--out",
                 (base / exec).string()})
                .code == 0);
  CHECK(slurp(base / "serial" / "metrics.csv") == slurp(base / "parallel" / "metrics.csv"));
  CHECK(slurp(base / "serial" / "actor.bin") == slurp(base / "parallel" / "actor.bin"));
}

TEST_CASE("parameter files round-trip and reject garbage") {
  const fs::path dir = scratch("params");
  Rng rng(3);
  const std::array dims{4, 8, 2};
  MlpParams net = MlpParams::random(dims, OutputMap::kHalfTanh, rng);
  net.version = 9;
  write_params_file(dir / "a.bin", net);
  CHECK(read_params_file(dir / "a.bin", OutputMap::kHalfTanh) == net);
  std::ofstream(dir / "junk.bin") << "not a parameter file";
  CHECK_THROWS_AS(read_params_file(dir / "junk.bin", OutputMap::kHalfTanh), DecodeError);
}

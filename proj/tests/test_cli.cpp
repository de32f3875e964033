#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "jumpguard/cli.hpp"

using namespace jumpguard;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("jumpguard-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "jumpguard");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

/// Runs the installed binary in `cwd` and returns its exit status.
int run_binary(const std::string& args, const fs::path& cwd) {
  const std::string command = "cd '" + cwd.string() + "' && '" JUMPGUARD_BIN "' " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::set<std::string> tree(const fs::path& root) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) out.insert(fs::relative(e.path(), root).string());
  return out;
}

}  // namespace

TEST_CASE("key-value parsing") {
  const auto kv = cli::parse_key_values("# comment\ngamma = 2\n\nt_max=3 # trailing\nmode = sampled\n");
  CHECK(kv.at("gamma") == "2");
  CHECK(kv.at("t-max") == "3");
  CHECK(kv.at("mode") == "sampled");
  CHECK(kv.size() == 3);

  auto rejected = [](const std::string& text, const std::string& needle) {
    try {
      cli::parse_key_values(text);
      FAIL("accepted: " << text);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  rejected("colour = red\n", "colour");
  rejected("[run]\ngamma = 1\n", "[run]");
  rejected("model.gamma = 1\n", "model.gamma");
  rejected("gamma = 1\ngamma = 2\n", "gamma");
  rejected("gamma\n", "gamma");
  rejected("gamma = \n", "gamma");
}

TEST_CASE("config resolution") {
  const ScenarioId id = ScenarioId::qutrit_protection;
  const auto a = cli::parse_config(id, {{"gamma", "2"}}, {});
  CHECK(a.config.gamma == 2.0);
  CHECK(a.config.dt == doctest::Approx(5e-4));
  CHECK(a.config.tau == doctest::Approx(0.04));

  const auto b = cli::parse_config(id, {{"dt", "0.002"}}, {{"dt", "0.0005"}});
  CHECK(b.config.dt == 0.0005);
  REQUIRE(b.warnings.size() == 1);
  CHECK(b.warnings[0].find("dt") != std::string::npos);

  const auto c = cli::parse_config(id, {{"gamma", "1"}, {"t-max", "3"}}, {{"gamma", "2"}});
  CHECK(c.config.gamma == 2.0);
  CHECK(c.config.t_max == 3.0);

  const auto phys = cli::parse_config(ScenarioId::cavity_thermal, {{"units", "physical"}}, {});
  CHECK(phys.config.gamma == doctest::Approx(1 / 0.129));
  CHECK(phys.config.nbar == std::vector<double>{0.0, 0.05, 0.5});

  const auto n = cli::parse_config(ScenarioId::cavity_thermal, {}, {{"nbar", "0.1,0.2"}});
  CHECK(n.config.nbar == std::vector<double>{0.1, 0.2});

  CHECK_THROWS_AS(cli::parse_config(id, {}, {{"mode", "quantum"}}), ConfigError);
  CHECK_THROWS_AS(cli::parse_config(id, {}, {{"gamma", "fast"}}), ConfigError);
  CHECK_THROWS_AS(cli::parse_config(id, {}, {{"samples", "-3"}}), ConfigError);
  try {
    cli::parse_config(ScenarioId::singlet_conversion, {}, {{"alpha", "0.7"}});
    FAIL("alpha 0.7 accepted");
  } catch (const ConfigError& e) {
    CHECK(e.parameter() == "alpha");
    CHECK(std::string(e.what()).find("(0, 1/2]") != std::string::npos);
  }
}

TEST_CASE("config echo round-trips") {
  ScenarioConfig cfg = default_config(ScenarioId::cavity_thermal, true);
  cfg.alpha = 0.1 + 0.2;
  cfg.nbar = {0.0, 1.0 / 3.0, 0.7};
  cfg.seed = 18446744073709551615ULL;
  cfg.n_samples = 123;
  cfg.tau = 0.0123456789012345;
  const std::string echo = cli::config_echo(cfg);
  const auto back = cli::parse_config(cfg.id, cli::parse_key_values(echo), {});
  CHECK(back.config == cfg);
  CHECK(back.warnings.empty());

  for (ScenarioId id : {ScenarioId::bell_monitoring, ScenarioId::singlet_conversion, ScenarioId::qutrit_protection,
                        ScenarioId::cavity_2x3}) {
    const ScenarioConfig d = default_config(id);
    CHECK(cli::parse_config(id, cli::parse_key_values(cli::config_echo(d)), {}).config == d);
  }

  TempDir dir("echo");
  std::ofstream(dir.path / "run.cfg") << echo;
  CHECK(cli::parse_config_file(dir.path / "run.cfg", cfg.id).config == cfg);
  CHECK_THROWS_AS(cli::parse_config_file(dir.path / "missing.cfg", cfg.id), ConfigError);
}

TEST_CASE("curve CSV format") {
  const Series s{"P_NJ", "probability", {0.0, 0.5}, {1.0, 1.0 / 3.0}, {}};
  CHECK(cli::curve_csv(s) == "t,P_NJ,probability\n0,1,probability\n0.5,0.333333333333,probability\n");
}

TEST_CASE("list and version") {
  const CliRun l = invoke({"list"});
  CHECK(l.code == 0);
  CHECK(l.out.find("qutrit-protection → Fig. 1") != std::string::npos);
  CHECK(l.out.find("cavity-2x3 → Fig. 2a–c") != std::string::npos);
  CHECK(l.out.find("cavity-thermal → Fig. 2d") != std::string::npos);
  const CliRun v = invoke({"version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("run writes curves, summary and manifest") {
  TempDir dir("run");
  const fs::path out = dir.path / "bell";
  const CliRun r = invoke({"run", "bell-monitoring", "--grid-points", "11", "--out-dir", out.string()});
  REQUIRE(r.code == 0);
  for (const char* f : {"E_F.csv", "E_2.csv", "P_NJ.csv", "summary.json", "manifest.json", "config.txt"})
    CHECK(fs::exists(out / f));
  const std::string csv = slurp(out / "P_NJ.csv");
  CHECK(csv.rfind("t,P_NJ,probability\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
  CHECK(csv.find('\r') == std::string::npos);

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["version"] == "0.1.0");
  CHECK(manifest["seed"] == 0);
  std::size_t csvs = 0;
  for (const auto& f : manifest["outputs"]) {
    CHECK(fs::exists(out / f.get<std::string>()));
    csvs += f.get<std::string>().ends_with(".csv");
  }
  CHECK(csvs == 3);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["P_NJ_t_max"].get<double>() == doctest::Approx(std::exp(-5.0)).epsilon(1e-9));
  for (const auto& e : fs::directory_iterator(out)) CHECK(e.path().extension() != ".tmp");
}

TEST_CASE("singlet conversion summary carries p_ok") {
  TempDir dir("singlet");
  const CliRun r = invoke({"run", "singlet-conversion", "--alpha", "0.25", "--out-dir", dir.path.string()});
  REQUIRE(r.code == 0);
  const std::string text = slurp(dir.path / "summary.json");
  CHECK(text.find("\"p_ok\": 0.5") != std::string::npos);
  CHECK(nlohmann::json::parse(text)["p_ok"] == 0.5);
}

TEST_CASE("same seed gives byte-identical outputs") {
  TempDir dir("det");
  const std::vector<std::string> common{"run", "qutrit-protection", "--grid-points", "6", "--samples", "40",
                                        "--seed", "5", "--out-dir"};
  auto a = common;
  a.push_back((dir.path / "a").string());
  auto b = common;
  b.push_back((dir.path / "b").string());
  REQUIRE(invoke(a).code == 0);
  REQUIRE(invoke(b).code == 0);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "a")) {
    if (e.path().filename() == "manifest.json") continue;
    CHECK(slurp(e.path()) == slurp(dir.path / "b" / e.path().filename()));
    ++compared;
  }
  CHECK(compared > 10);
}

TEST_CASE("exit codes from the binary") {
  TempDir dir("exit");
  CHECK(run_binary("list", dir.path) == 0);
  CHECK(run_binary("version", dir.path) == 0);
  CHECK(run_binary("run singlet-conversion --grid-points 5 --out-dir ok", dir.path) == 0);
  CHECK(run_binary("run singlet-conversion --alpha 0.7 --out-dir bad", dir.path) == 2);
  CHECK(run_binary("run teleportation", dir.path) == 2);
  CHECK(run_binary("run bell-monitoring --colour red", dir.path) == 2);
  CHECK(run_binary("run bell-monitoring --config nowhere.cfg", dir.path) == 2);
  CHECK(run_binary("run singlet-conversion --max-jumps 1 --grid-points 5 --out-dir trunc", dir.path) == 3);
  std::ofstream(dir.path / "blocker") << "x";
  CHECK(run_binary("run singlet-conversion --grid-points 5 --out-dir blocker/sub", dir.path) == 4);
  CHECK_FALSE(fs::exists(dir.path / "bad"));
  CHECK_FALSE(fs::exists(dir.path / "trunc"));
}

TEST_CASE("config file and flag precedence through the binary") {
  TempDir dir("cfg");
  std::ofstream(dir.path / "run.cfg") << "dt = 0.002\ngrid-points = 5\n";
  CHECK(run_binary("run bell-monitoring --config run.cfg --dt 0.0005 --out-dir o", dir.path) == 0);
  const std::string echo = slurp(dir.path / "o" / "config.txt");
  CHECK(echo.find("dt = 0.0005") != std::string::npos);
  CHECK(echo.find("dt = 0.002") == std::string::npos);
  const auto manifest = nlohmann::json::parse(slurp(dir.path / "o" / "manifest.json"));
  bool warned = false;
  for (const auto& w : manifest["warnings"]) warned = warned || w.get<std::string>().find("dt") != std::string::npos;
  CHECK(warned);

  std::ofstream(dir.path / "nested.cfg") << "[section]\n";
  CHECK(run_binary("run bell-monitoring --config nested.cfg --out-dir n", dir.path) == 2);
}

TEST_CASE("outputs stay inside the output directory") {
  TempDir dir("sandbox");
  fs::create_directories(dir.path / "work");
  std::ofstream(dir.path / "work" / "keep.txt") << "keep";
  const auto before = tree(dir.path);
  CHECK(run_binary("run cavity-2x3 --grid-points 5 --alpha-points 3 --surface-time-points 3 --out-dir out",
                   dir.path / "work") == 0);
  auto after = tree(dir.path);
  std::set<std::string> added;
  for (const auto& p : after)
    if (!before.count(p)) added.insert(p);
  for (const auto& p : added) CHECK(p.rfind("work/out", 0) == 0);
  CHECK(added.count("work/out/surface_E23_minus_E22.csv") == 1);

  // The environment default is honoured when no flag is given.
  const fs::path env_out = dir.path / "env-out";
  const std::string cmd = "cd '" + dir.path.string() + "' && JUMPGUARD_OUT_DIR='" + env_out.string() + "' '" +
                          JUMPGUARD_BIN "' run singlet-conversion --grid-points 5 >/dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(env_out / "summary.json"));
}

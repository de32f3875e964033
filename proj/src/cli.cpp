#include "jumpguard/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef JUMPGUARD_VERSION
#define JUMPGUARD_VERSION "0.0.0"
#endif

namespace jumpguard::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Accepted keys, in echo order.
const std::vector<std::string> kKeys = {
    "scenario", "units",     "gamma",   "alpha", "eta",  "tau",       "nbar",         "gamma-atom",
    "dt",       "t-max",     "grid-points", "mode", "samples", "seed", "max-jumps", "alpha-points",
    "surface-time-points",
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string canonical_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

bool known_key(const std::string& key) { return std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end(); }

std::string format_double(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double parse_double(const std::string& key, const std::string& text) {
  if (text.empty()) throw ConfigError(key, key + ": missing value");
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(v))
    throw ConfigError(key, key + ": expected a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  if (text.empty()) throw ConfigError(key, key + ": missing value");
  if (text.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(key, key + ": expected a non-negative integer, got '" + text + "'");
  try {
    return std::stoull(text);
  } catch (const std::out_of_range&) {
    throw ConfigError(key, key + ": value out of range");
  }
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) throw ConfigError(key, key + ": missing value");
  return out;
}

/// Merged view: flag values override file values.
class Values {
 public:
  Values(const KeyValues& file, const KeyValues& flags, std::vector<std::string>& warnings) {
    for (const auto& [k, v] : file) values_[k] = v;
    for (const auto& [k, v] : flags) {
      if (file.count(k) && file.at(k) != v)
        warnings.push_back(k + " set in both config file and flags; using the flag value " + v);
      values_[k] = v;
    }
  }
  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

 private:
  KeyValues values_;
};

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

/// Rounds to 12 significant digits so JSON scalars match the CSV precision.
double rounded(double v) { return std::strtod(format_double(v, 12).c_str(), nullptr); }

std::string safe_file_stem(const std::string& label) {
  std::string out;
  for (char c : label) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.') ? c : '_';
  return out;
}

json echo_json(const ScenarioConfig& cfg) {
  json j = json::object();
  std::stringstream ss(config_echo(cfg));
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    j[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return j;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::stringstream ss(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(line_no);
    if (line.front() == '[') throw ConfigError("config", where + ": sections are not supported (" + line + ")");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config", where + ": expected 'key = value', got '" + line + "'");
    const std::string key = canonical_key(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config", where + ": missing key");
    if (key.find('.') != std::string::npos || (!value.empty() && (value.front() == '{' || value.front() == '[')))
      throw ConfigError(key, where + ": nested values are not supported (" + key + ")");
    if (!known_key(key)) throw ConfigError(key, where + ": unknown key '" + key + "'");
    if (value.empty()) throw ConfigError(key, where + ": missing value for '" + key + "'");
    if (out.count(key)) throw ConfigError(key, where + ": duplicate key '" + key + "'");
    out[key] = value;
  }
  return out;
}

ParsedConfig parse_config(ScenarioId id, const KeyValues& file_values, const KeyValues& flag_values) {
  ParsedConfig parsed;
  for (const auto* kv : {&file_values, &flag_values})
    for (const auto& [k, v] : *kv)
      if (!known_key(k)) throw ConfigError(k, "unknown key '" + k + "'");
  const Values values(file_values, flag_values, parsed.warnings);

  if (auto s = values.get("scenario")) {
    const auto named = parse_scenario(*s);
    if (!named) throw ConfigError("scenario", "scenario: unknown scenario '" + *s + "'");
    if (*named != id)
      throw ConfigError("scenario", "scenario: config is for '" + *s + "' but '" +
                                        std::string(scenario_name(id)) + "' was requested");
  }
  bool physical = false;
  if (auto u = values.get("units")) {
    if (*u == "physical")
      physical = true;
    else if (*u != "natural")
      throw ConfigError("units", "units: expected natural or physical, got '" + *u + "'");
  }
  ScenarioConfig cfg = default_config(id, physical);
  if (auto v = values.get("gamma")) rescale_time_defaults(cfg, parse_double("gamma", *v));

  const auto number = [&](const char* key, double& field) {
    if (auto v = values.get(key)) field = parse_double(key, *v);
  };
  const auto count = [&](const char* key, auto& field) {
    if (auto v = values.get(key)) field = static_cast<std::remove_reference_t<decltype(field)>>(parse_unsigned(key, *v));
  };
  number("alpha", cfg.alpha);
  number("eta", cfg.eta);
  number("tau", cfg.tau);
  number("gamma-atom", cfg.gamma_atom);
  number("dt", cfg.dt);
  number("t-max", cfg.t_max);
  if (auto v = values.get("nbar")) cfg.nbar = parse_list("nbar", *v);
  count("grid-points", cfg.grid_points);
  count("samples", cfg.n_samples);
  count("seed", cfg.seed);
  count("max-jumps", cfg.max_jumps);
  count("alpha-points", cfg.alpha_points);
  count("surface-time-points", cfg.surface_time_points);
  if (auto m = values.get("mode")) {
    if (*m == "exact")
      cfg.mode = RunMode::exact;
    else if (*m == "sampled")
      cfg.mode = RunMode::sampled;
    else
      throw ConfigError("mode", "mode: expected exact or sampled, got '" + *m + "'");
  }
  validate(cfg);
  parsed.config = cfg;
  return parsed;
}

ParsedConfig parse_config_file(const fs::path& path, ScenarioId id) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", "config: cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(id, parse_key_values(ss.str()), {});
}

std::string config_echo(const ScenarioConfig& cfg) {
  std::ostringstream out;
  const auto line = [&](const char* key, const std::string& value) { out << key << " = " << value << '\n'; };
  const auto num = [](double v) { return format_double(v, 17); };
  std::string nbar;
  for (std::size_t i = 0; i < cfg.nbar.size(); ++i) nbar += (i ? "," : "") + num(cfg.nbar[i]);
  line("scenario", std::string(scenario_name(cfg.id)));
  line("units", cfg.physical_units ? "physical" : "natural");
  line("gamma", num(cfg.gamma));
  line("alpha", num(cfg.alpha));
  line("eta", num(cfg.eta));
  line("tau", num(cfg.tau));
  line("nbar", nbar);
  line("gamma-atom", num(cfg.gamma_atom));
  line("dt", num(cfg.dt));
  line("t-max", num(cfg.t_max));
  line("grid-points", std::to_string(cfg.grid_points));
  line("mode", std::string(mode_name(cfg.mode)));
  line("samples", std::to_string(cfg.n_samples));
  line("seed", std::to_string(cfg.seed));
  line("max-jumps", std::to_string(cfg.max_jumps));
  line("alpha-points", std::to_string(cfg.alpha_points));
  line("surface-time-points", std::to_string(cfg.surface_time_points));
  return out.str();
}

std::string curve_csv(const Series& s) {
  std::string out = "t," + s.label + "," + s.measure + "\n";
  for (std::size_t i = 0; i < s.times.size(); ++i)
    out += format_double(s.times[i], 12) + "," + format_double(s.values[i], 12) + "," + s.measure + "\n";
  return out;
}

std::string surface_csv(const Surface& s) {
  std::string out = "alpha\\t";
  for (double t : s.times) out += "," + format_double(t, 12);
  out += "\n";
  for (std::size_t i = 0; i < s.alphas.size(); ++i) {
    out += format_double(s.alphas[i], 12);
    for (double v : s.values[i]) out += "," + format_double(v, 12);
    out += "\n";
  }
  return out;
}

RunManifest write_outputs(const ScenarioConfig& cfg, const ScenarioResult& result, const fs::path& out_dir,
                          double wall_seconds, const std::vector<std::string>& extra_warnings) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());

  RunManifest manifest;
  manifest.config_echo = config_echo(cfg);
  manifest.version = JUMPGUARD_VERSION;
  manifest.seed = cfg.seed;
  manifest.wall_seconds = wall_seconds;
  manifest.warnings = extra_warnings;
  manifest.warnings.insert(manifest.warnings.end(), result.warnings.begin(), result.warnings.end());
  if (result.truncation_mass > 0.0)
    manifest.warnings.push_back("exact mode truncated probability mass " + format_double(result.truncation_mass, 6));

  const auto emit = [&](const std::string& name, const std::string& content) {
    const fs::path path = out_dir / name;
    write_atomic(path, content);
    manifest.outputs.push_back(path);
  };
  for (const auto& s : result.series) emit(safe_file_stem(s.label) + ".csv", curve_csv(s));
  for (const auto& s : result.surfaces) emit("surface_" + safe_file_stem(s.label) + ".csv", surface_csv(s));

  json summary;
  summary["scenario"] = std::string(scenario_name(result.id));
  summary["mode"] = std::string(mode_name(cfg.mode));
  summary["seed"] = cfg.seed;
  for (const auto& [key, value] : result.scalars) summary[key] = rounded(value);
  summary["truncation_mass"] = rounded(result.truncation_mass);
  json sigma = json::object();
  for (const auto& s : result.series)
    if (!s.std_error.empty()) sigma[s.label] = rounded(*std::max_element(s.std_error.begin(), s.std_error.end()));
  summary["sampling_sigma_max"] = sigma;
  summary["warnings"] = manifest.warnings;
  emit("summary.json", summary.dump(2) + "\n");
  emit("config.txt", manifest.config_echo);

  json m;
  m["tool"] = "jumpguard";
  m["version"] = manifest.version;
  m["seed"] = manifest.seed;
  m["wall_seconds"] = wall_seconds;
  m["config"] = echo_json(cfg);
  std::vector<std::string> files;
  for (const auto& p : manifest.outputs) files.push_back(p.filename().string());
  files.push_back("manifest.json");
  m["outputs"] = files;
  m["warnings"] = manifest.warnings;
  write_atomic(out_dir / "manifest.json", m.dump(2) + "\n");
  manifest.outputs.push_back(out_dir / "manifest.json");
  return manifest;
}

std::string list_scenarios() {
  std::ostringstream out;
  for (const auto& info : scenario_catalog()) {
    out << scenario_name(info.id) << " → " << info.figure << "\n";
    out << "    " << info.summary << "\n";
    out << "    defaults: " << info.parameters << "\n";
  }
  return out.str();
}

std::string version() { return std::string("jumpguard ") + JUMPGUARD_VERSION; }

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantum-jump trajectories with reservoir monitoring and local feedback", "jumpguard"};
  app.require_subcommand(1);
  CLI::App* list_cmd = app.add_subcommand("list", "List scenarios and the figures they reproduce");
  CLI::App* version_cmd = app.add_subcommand("version", "Print the tool version");
  CLI::App* run_cmd = app.add_subcommand("run", "Run a scenario and write CSV/JSON outputs");

  std::string scenario;
  run_cmd->add_option("scenario", scenario, "Scenario id (see `jumpguard list`)")->required();
  KeyValues flags;
  std::map<std::string, std::string> raw;
  const std::vector<std::pair<std::string, std::string>> options = {
      {"gamma", "Decay rate"},
      {"alpha", "Initial-state weight"},
      {"eta", "Detection efficiency for the non-ideal curve"},
      {"tau", "Feedback delay for the non-ideal curve"},
      {"nbar", "Thermal occupation, comma-separated list"},
      {"gamma-atom", "Atomic decay rate (cavity scenarios)"},
      {"dt", "Time step"},
      {"t-max", "Final time"},
      {"grid-points", "Output grid points"},
      {"mode", "exact or sampled"},
      {"samples", "Trajectories in sampled mode"},
      {"seed", "Random seed"},
      {"max-jumps", "Enumeration depth in exact mode"},
      {"alpha-points", "Surface resolution along alpha"},
      {"surface-time-points", "Surface resolution along t"},
      {"units", "natural or physical"},
  };
  for (const auto& [key, help] : options) run_cmd->add_option("--" + key, raw[key], help);
  std::string config_path;
  std::string out_dir;
  run_cmd->add_option("--config", config_path, "Flat key = value config file");
  run_cmd->add_option("--out-dir", out_dir, "Output directory (default $JUMPGUARD_OUT_DIR or ./jumpguard-out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode::config_error;
  }

  if (*list_cmd) {
    out << list_scenarios();
    return ExitCode::ok;
  }
  if (*version_cmd) {
    out << version() << "\n";
    return ExitCode::ok;
  }

  const auto id = parse_scenario(scenario);
  if (!id) {
    err << "error: unknown scenario '" << scenario << "'; run `jumpguard list`\n";
    return ExitCode::config_error;
  }
  for (const auto& [key, help] : options)
    if (run_cmd->count("--" + key) > 0) flags[key] = raw[key];

  ParsedConfig parsed;
  try {
    KeyValues file_values;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("config", "config: cannot read " + config_path);
      std::stringstream ss;
      ss << f.rdbuf();
      file_values = parse_key_values(ss.str());
    }
    parsed = parse_config(*id, file_values, flags);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return ExitCode::config_error;
  }
  for (const auto& w : parsed.warnings) err << "warning: " << w << "\n";

  if (out_dir.empty()) {
    const char* env = std::getenv("JUMPGUARD_OUT_DIR");
    out_dir = (env && *env) ? env : "jumpguard-out";
  }

  const auto start = std::chrono::steady_clock::now();
  ScenarioResult result;
  try {
    result = run_scenario(parsed.config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return ExitCode::config_error;
  } catch (const std::exception& e) {
    err << "scenario error: " << e.what() << "\n";
    return ExitCode::scenario_error;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  try {
    const RunManifest manifest = write_outputs(parsed.config, result, out_dir, seconds, parsed.warnings);
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    out << "wrote " << manifest.outputs.size() << " files to " << out_dir << "\n";
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return ExitCode::io_error;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return ExitCode::io_error;
  }
  return ExitCode::ok;
}

}  // namespace jumpguard::cli

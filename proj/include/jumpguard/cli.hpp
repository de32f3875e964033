#pragma once

// Command-line front end: config parsing, scenario runs and artifact output.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jumpguard/scenarios.hpp"

namespace jumpguard::cli {

enum ExitCode : int { ok = 0, config_error = 2, scenario_error = 3, io_error = 4 };

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered key = value pairs; keys use the dashed flag spelling.
using KeyValues = std::map<std::string, std::string>;

/// Parses a flat `key = value` file body. `#` starts a comment. Throws ConfigError
/// on malformed lines, nested keys, duplicates and unknown keys.
KeyValues parse_key_values(const std::string& text);

struct ParsedConfig {
  ScenarioConfig config;
  std::vector<std::string> warnings;
};

/// Builds a validated config from file values and flag values; flags win.
ParsedConfig parse_config(ScenarioId id, const KeyValues& file_values, const KeyValues& flag_values);
/// Reads and parses a config file for a scenario (or the scenario named in the file).
ParsedConfig parse_config_file(const std::filesystem::path& path, ScenarioId id);

/// `key = value` lines that parse back to the same config.
std::string config_echo(const ScenarioConfig& cfg);

struct RunManifest {
  std::string config_echo;
  std::string version;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> warnings;
};

/// Writes CSVs, summary.json, config.txt and manifest.json into out_dir.
RunManifest write_outputs(const ScenarioConfig& cfg, const ScenarioResult& result, const std::filesystem::path& out_dir,
                          double wall_seconds, const std::vector<std::string>& extra_warnings);

/// Curve CSV body: header `t,<label>,<measure>`, values with 12 significant digits.
std::string curve_csv(const Series& s);
std::string surface_csv(const Surface& s);

std::string list_scenarios();
std::string version();

/// Full CLI: returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace jumpguard::cli

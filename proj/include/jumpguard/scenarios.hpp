#pragma once

// Named experiments: model presets, unravelings, feedback and measures wired
// together, plus closed-form references for the atom-cavity setup.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jumpguard/entanglement.hpp"
#include "jumpguard/open_system.hpp"
#include "jumpguard/trajectories.hpp"

namespace jumpguard {

enum class ScenarioId { bell_monitoring, singlet_conversion, qutrit_protection, cavity_2x3, cavity_thermal };
enum class RunMode { exact, sampled };

std::string_view scenario_name(ScenarioId id);
/// Accepts the dashed CLI form ("qutrit-protection") and the underscore form.
std::optional<ScenarioId> parse_scenario(std::string_view name);
std::string_view mode_name(RunMode mode);

/// Decay time of the microwave cavity used for physical units, in seconds.
inline constexpr double kCavityDecayTime = 0.129;

struct ScenarioConfig {
  ScenarioId id = ScenarioId::bell_monitoring;
  bool physical_units = false;
  double gamma = 1.0;
  double alpha = 0.25;
  double eta = 0.92;
  double tau = 0.08;
  std::vector<double> nbar = {0.0, 0.05, 0.5};
  double gamma_atom = 0.0;
  double dt = 1e-3;
  double t_max = 5.0;
  std::size_t grid_points = 101;
  RunMode mode = RunMode::exact;
  std::size_t n_samples = 2000;
  std::uint64_t seed = 0;
  std::size_t max_jumps = 4;
  std::size_t alpha_points = 101;
  std::size_t surface_time_points = 201;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Defaults for a scenario. Times scale with 1/gamma; physical units fix
/// gamma to the cavity decay rate.
ScenarioConfig default_config(ScenarioId id, bool physical_units = false);
/// Rescales the gamma-dependent defaults (dt, t_max, tau) to a new gamma.
void rescale_time_defaults(ScenarioConfig& cfg, double gamma);

/// A parameter outside its documented range.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string parameter, const std::string& what)
      : std::invalid_argument(what), parameter_(std::move(parameter)) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

/// Failure while running a valid configuration.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void validate(const ScenarioConfig& cfg);

struct Series {
  std::string label;
  std::string measure;
  std::vector<double> times;
  std::vector<double> values;
  /// Standard error per point; empty for deterministic curves.
  std::vector<double> std_error;
};

/// values[i][j] at (alphas[i], times[j]).
struct Surface {
  std::string label;
  std::string measure;
  std::vector<double> alphas;
  std::vector<double> times;
  std::vector<std::vector<double>> values;
};

struct ScenarioResult {
  ScenarioId id = ScenarioId::bell_monitoring;
  std::vector<Series> series;
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<Surface> surfaces;
  std::vector<std::string> warnings;
  double truncation_mass = 0.0;

  const Series& curve(std::string_view label) const;
  double scalar(std::string_view name) const;
  bool has_curve(std::string_view label) const;
};

/// t_i = t_max i / (n - 1).
std::vector<double> time_grid(double t_max, std::size_t n);

ScenarioResult run_bell_monitoring(const ScenarioConfig& cfg);
ScenarioResult run_singlet_conversion(const ScenarioConfig& cfg);
ScenarioResult run_qutrit_protection(const ScenarioConfig& cfg);
ScenarioResult run_cavity_2x3(const ScenarioConfig& cfg);
ScenarioResult run_cavity_thermal(const ScenarioConfig& cfg);
ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// Initial states.
StateVector bell_state();            // (|10> + |01>)/sqrt 2 on [2, 2]
StateVector singlet_input(double alpha);  // sqrt(a)|00> + sqrt(1-a)|11>
StateVector qutrit_code_state();     // (|12> + |21>)/sqrt 2 on [3, 3]
/// sqrt(a)|e, n> + sqrt(1-a)|g, n+1> on [2, cavity_dim], atom |g> = 0, |e> = 1.
StateVector cavity_input(double alpha, std::size_t cavity_dim);

/// Atom-cavity model: lossless atom (or gamma_atom), cavity lowering operator at gamma.
OpenSystemModel build_atom_cavity(double gamma, std::size_t cavity_dim, double gamma_atom = 0.0);

/// Optimal stopping time for singlet conversion: exp(-gamma t*) = sqrt(a/(1-a)).
double singlet_stopping_time(double alpha, double gamma);

/// Closed forms for the atom-cavity protocol.
namespace cavity {
/// Unnormalized no-jump state on [2, 3].
StateVector no_jump_state(double alpha, double gamma, double t);
/// Unnormalized one-jump state for a jump at t_jump.
StateVector one_jump_state(double alpha, double gamma, double t_jump, double t);
double p_no_jump(double alpha, double gamma, double t);
double p_one_jump(double alpha, double gamma, double t);
/// Entropy of the normalized no-jump and one-jump states.
double entropy_no_jump(double alpha, double gamma, double t);
double entropy_one_jump(double alpha, double gamma, double t);
double e23(double alpha, double gamma, double t);
/// Qubit-cavity reference on [2, 2]: no-jump contribution only.
double e22(double alpha, double gamma, double t);
/// One-jump state at t from the engine: no-jump flow, jump at t_jump, no-jump flow.
StateVector engine_one_jump_state(double alpha, double gamma, double t_jump, double t);
}  // namespace cavity

struct ScenarioInfo {
  ScenarioId id;
  std::string_view figure;
  std::string_view summary;
  std::string_view parameters;
};

const std::vector<ScenarioInfo>& scenario_catalog();

}  // namespace jumpguard

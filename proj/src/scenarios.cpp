#include "jumpguard/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

namespace jumpguard {

namespace {

constexpr double kLeakWarning = 1e-3;

struct NamedScenario {
  ScenarioId id;
  std::string_view name;
};

constexpr NamedScenario kNames[] = {
    {ScenarioId::bell_monitoring, "bell-monitoring"},
    {ScenarioId::singlet_conversion, "singlet-conversion"},
    {ScenarioId::qutrit_protection, "qutrit-protection"},
    {ScenarioId::cavity_2x3, "cavity-2x3"},
    {ScenarioId::cavity_thermal, "cavity-thermal"},
};

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

UnravelingConfig unraveling(const ScenarioConfig& cfg, double t_max) {
  UnravelingConfig u;
  u.dt = cfg.dt;
  u.t_max = t_max;
  u.max_jumps = cfg.max_jumps;
  u.n_samples = cfg.n_samples;
  u.seed = cfg.seed;
  return u;
}

Series make_series(std::string label, std::string measure, const std::vector<double>& grid,
                   std::vector<double> values, std::vector<double> std_error = {}) {
  return {std::move(label), std::move(measure), grid, std::move(values), std::move(std_error)};
}

/// Runs exact enumeration at every grid time and reduces each result to a number.
std::vector<std::vector<double>> exact_curves(
    const OpenSystemModel& model, const StateVector& psi0, const ScenarioConfig& cfg, const FeedbackPolicy& policy,
    const std::vector<double>& grid, const std::vector<std::function<double(const EnumerationResult&)>>& reducers,
    ScenarioResult& result) {
  std::vector<std::vector<double>> out(reducers.size());
  for (double t : grid) {
    const EnumerationResult e = enumerate_trajectories(model, psi0, unraveling(cfg, t), policy);
    result.truncation_mass = std::max(result.truncation_mass, e.truncation_mass);
    for (std::size_t r = 0; r < reducers.size(); ++r) out[r].push_back(reducers[r](e));
  }
  return out;
}

SampledSeries sampled_curves(const OpenSystemModel& model, const StateVector& psi0, const ScenarioConfig& cfg,
                             const FeedbackPolicy& policy, const std::vector<double>& grid,
                             const std::vector<StateFunctional>& functionals) {
  return sample_series(model, psi0, unraveling(cfg, grid.back()), policy, grid, functionals);
}

std::vector<double> binomial_error(const std::vector<double>& p, std::size_t n) {
  std::vector<double> out;
  for (double v : p) out.push_back(std::sqrt(std::max(0.0, v * (1.0 - v)) / static_cast<double>(n)));
  return out;
}

double no_event_probability(const EnumerationResult& e) {
  double p = 0.0;
  for (const auto& rec : e.records)
    if (rec.events.empty()) p += rec.probability;
  return p;
}

struct CurveSpec {
  std::string label;
  Measure measure;
};

/// Trajectory-averaged measures for one model, exact or sampled per cfg.mode.
std::vector<Series> averaged_measures(const std::vector<CurveSpec>& specs, const OpenSystemModel& model,
                                      const StateVector& psi0, const ScenarioConfig& cfg, const FeedbackPolicy& policy,
                                      const std::vector<double>& grid, bool force_sampled, ScenarioResult& result) {
  const SpaceLayout& layout = model.layout();
  std::vector<Series> out;
  if (cfg.mode == RunMode::exact && !force_sampled) {
    std::vector<std::function<double(const EnumerationResult&)>> reducers;
    for (const auto& spec : specs)
      reducers.push_back([&layout, m = spec.measure](const EnumerationResult& e) {
        return average_entanglement(e.records, m, layout);
      });
    auto curves = exact_curves(model, psi0, cfg, policy, grid, reducers, result);
    for (std::size_t i = 0; i < specs.size(); ++i)
      out.push_back(make_series(specs[i].label, std::string(measure_name(specs[i].measure)), grid, std::move(curves[i])));
    return out;
  }
  std::vector<StateFunctional> fs;
  for (const auto& spec : specs)
    fs.push_back([&layout, m = spec.measure](const ConditionalState& s) { return evaluate(m, s, layout); });
  SampledSeries s = sampled_curves(model, psi0, cfg, policy, grid, fs);
  for (std::size_t i = 0; i < specs.size(); ++i)
    out.push_back(make_series(specs[i].label, std::string(measure_name(specs[i].measure)), grid, std::move(s.mean[i]),
                              std::move(s.std_error[i])));
  return out;
}

Series averaged_measure(std::string label, const OpenSystemModel& model, const StateVector& psi0,
                        const ScenarioConfig& cfg, const FeedbackPolicy& policy, const std::vector<double>& grid,
                        Measure m, bool force_sampled, ScenarioResult& result) {
  return std::move(averaged_measures({{std::move(label), m}}, model, psi0, cfg, policy, grid, force_sampled, result)[0]);
}

std::vector<double> master_measure(const OpenSystemModel& model, const StateVector& psi0,
                                   const std::vector<double>& grid, Measure m) {
  std::vector<double> out;
  for (const auto& rho : evolve_master(model, psi0.projector(), grid)) out.push_back(evaluate(m, rho, model.layout()));
  return out;
}

void require(bool ok, const std::string& parameter, const std::string& message) {
  if (!ok) throw ConfigError(parameter, parameter + ": " + message);
}

/// Largest total jump rate over the models a scenario may sample.
double largest_rate(const ScenarioConfig& cfg) {
  switch (cfg.id) {
    case ScenarioId::bell_monitoring:
    case ScenarioId::singlet_conversion:
      return build_qubit_pair(cfg.gamma).max_rate();
    case ScenarioId::qutrit_protection:
      return build_qutrit_pair(CascadeSpec::harmonic_oscillator(cfg.gamma)).max_rate();
    case ScenarioId::cavity_2x3:
      return build_atom_cavity(cfg.gamma, 3, cfg.gamma_atom).max_rate();
    case ScenarioId::cavity_thermal: {
      double rate = 0.0;
      for (double nbar : cfg.nbar) {
        std::vector<LocalChannel> atom;
        if (cfg.gamma_atom > 0.0) atom.push_back({lowering_operator(2), cfg.gamma_atom});
        rate = std::max(rate, build_local_model(SpaceLayout{2, 3}, {atom, thermal_channels(cfg.gamma, ThermalSpec{nbar}, 3)})
                                  .max_rate());
      }
      return rate;
    }
  }
  return cfg.gamma;
}

}  // namespace

std::string_view scenario_name(ScenarioId id) {
  for (const auto& n : kNames)
    if (n.id == id) return n.name;
  return "unknown";
}

std::optional<ScenarioId> parse_scenario(std::string_view name) {
  std::string dashed(name);
  std::replace(dashed.begin(), dashed.end(), '_', '-');
  for (const auto& n : kNames)
    if (n.name == dashed) return n.id;
  return std::nullopt;
}

std::string_view mode_name(RunMode mode) { return mode == RunMode::exact ? "exact" : "sampled"; }

void rescale_time_defaults(ScenarioConfig& cfg, double gamma) {
  cfg.gamma = gamma;
  cfg.dt = 1e-3 / gamma;
  cfg.t_max = 5.0 / gamma;
  cfg.tau = 0.08 / gamma;
}

ScenarioConfig default_config(ScenarioId id, bool physical_units) {
  ScenarioConfig cfg;
  cfg.id = id;
  cfg.physical_units = physical_units;
  cfg.alpha = id == ScenarioId::cavity_thermal ? 0.5 : 0.25;
  if (id == ScenarioId::cavity_thermal) cfg.mode = RunMode::sampled;
  rescale_time_defaults(cfg, physical_units ? 1.0 / kCavityDecayTime : 1.0);
  return cfg;
}

void validate(const ScenarioConfig& cfg) {
  require(std::isfinite(cfg.gamma) && cfg.gamma > 0.0, "gamma", "must be positive");
  switch (cfg.id) {
    case ScenarioId::singlet_conversion:
      require(cfg.alpha > 0.0 && cfg.alpha <= 0.5, "alpha", "must lie in (0, 1/2] for singlet conversion");
      break;
    case ScenarioId::cavity_2x3:
    case ScenarioId::cavity_thermal:
      require(cfg.alpha >= 0.0 && cfg.alpha <= 1.0, "alpha", "must lie in [0, 1]");
      break;
    default:
      break;
  }
  require(cfg.eta >= 0.0 && cfg.eta <= 1.0, "eta", "must lie in [0, 1]");
  require(cfg.tau >= 0.0 && std::isfinite(cfg.tau), "tau", "must be non-negative");
  require(cfg.gamma_atom >= 0.0 && std::isfinite(cfg.gamma_atom), "gamma-atom", "must be non-negative");
  for (double n : cfg.nbar) require(n >= 0.0 && std::isfinite(n), "nbar", "must be non-negative");
  if (cfg.id == ScenarioId::cavity_thermal) require(!cfg.nbar.empty(), "nbar", "needs at least one value");
  require(std::isfinite(cfg.t_max) && cfg.t_max > 0.0, "t-max", "must be positive");
  require(std::isfinite(cfg.dt) && cfg.dt > 0.0 && cfg.dt <= cfg.t_max, "dt", "must lie in (0, t-max]");
  require(cfg.grid_points >= 2, "grid-points", "must be at least 2");
  require(cfg.n_samples >= 1, "samples", "must be at least 1");
  require(cfg.max_jumps >= 1, "max-jumps", "must be at least 1");
  require(cfg.alpha_points >= 2, "alpha-points", "must be at least 2");
  require(cfg.surface_time_points >= 2, "surface-time-points", "must be at least 2");
  require(largest_rate(cfg) * cfg.dt <= 1e-2, "dt", "largest jump rate times dt must not exceed 1e-2");
}

const Series& ScenarioResult::curve(std::string_view label) const {
  for (const auto& s : series)
    if (s.label == label) return s;
  throw std::out_of_range("no curve named " + std::string(label));
}

bool ScenarioResult::has_curve(std::string_view label) const {
  return std::any_of(series.begin(), series.end(), [&](const Series& s) { return s.label == label; });
}

double ScenarioResult::scalar(std::string_view name) const {
  for (const auto& [key, value] : scalars)
    if (key == name) return value;
  throw std::out_of_range("no scalar named " + std::string(name));
}

std::vector<double> time_grid(double t_max, std::size_t n) {
  if (n < 2) throw std::invalid_argument("time_grid: need at least two points");
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = t_max * static_cast<double>(i) / static_cast<double>(n - 1);
  grid.back() = t_max;
  return grid;
}

StateVector bell_state() {
  const SpaceLayout l{2, 2};
  return (1.0 / std::sqrt(2.0)) * (ket({1, 0}, l) + ket({0, 1}, l));
}

StateVector singlet_input(double alpha) {
  const SpaceLayout l{2, 2};
  return std::sqrt(alpha) * ket({0, 0}, l) + std::sqrt(1.0 - alpha) * ket({1, 1}, l);
}

StateVector qutrit_code_state() {
  const SpaceLayout l{3, 3};
  return (1.0 / std::sqrt(2.0)) * (ket({1, 2}, l) + ket({2, 1}, l));
}

StateVector cavity_input(double alpha, std::size_t cavity_dim) {
  if (cavity_dim < 2) throw DimensionError("cavity_input: cavity needs at least two levels");
  const SpaceLayout l{2, cavity_dim};
  const std::size_t n = cavity_dim - 2;
  return std::sqrt(alpha) * ket({1, n}, l) + std::sqrt(1.0 - alpha) * ket({0, n + 1}, l);
}

OpenSystemModel build_atom_cavity(double gamma, std::size_t cavity_dim, double gamma_atom) {
  std::vector<LocalChannel> atom;
  if (gamma_atom > 0.0) atom.push_back({lowering_operator(2), gamma_atom});
  return build_local_model(SpaceLayout{2, cavity_dim}, {atom, {{lowering_operator(cavity_dim), gamma}}});
}

double singlet_stopping_time(double alpha, double gamma) {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw std::invalid_argument("singlet_stopping_time: alpha must lie in (0, 1/2]");
  return -std::log(std::sqrt(alpha / (1.0 - alpha))) / gamma;
}

namespace cavity {

namespace {

/// (a + b) h(a / (a + b)), zero when both weights vanish.
double weighted_entropy(double a, double b) {
  const double total = a + b;
  return total > 0.0 ? total * binary_entropy(a / total) : 0.0;
}

}  // namespace

StateVector no_jump_state(double alpha, double gamma, double t) {
  const SpaceLayout l{2, 3};
  const double x = std::exp(-0.5 * gamma * t);
  return x * (std::sqrt(alpha) * ket({1, 1}, l) + std::sqrt(1.0 - alpha) * x * ket({0, 2}, l));
}

StateVector one_jump_state(double alpha, double gamma, double t_jump, double t) {
  const SpaceLayout l{2, 3};
  return std::exp(-0.5 * gamma * t_jump) *
         (std::sqrt(alpha) * ket({1, 0}, l) +
          std::sqrt(2.0 * (1.0 - alpha)) * std::exp(-0.5 * gamma * t) * ket({0, 1}, l));
}

double p_no_jump(double alpha, double gamma, double t) {
  const double x = std::exp(-gamma * t);
  return alpha * x + (1.0 - alpha) * x * x;
}

double p_one_jump(double alpha, double gamma, double t) {
  const double x = std::exp(-gamma * t);
  return (alpha + 2.0 * (1.0 - alpha) * x) * (1.0 - x);
}

double entropy_no_jump(double alpha, double gamma, double t) {
  const double x = std::exp(-gamma * t);
  return weighted_entropy(alpha, (1.0 - alpha) * x) / (alpha + (1.0 - alpha) * x);
}

double entropy_one_jump(double alpha, double gamma, double t) {
  const double x = std::exp(-gamma * t);
  return weighted_entropy(alpha, 2.0 * (1.0 - alpha) * x) / (alpha + 2.0 * (1.0 - alpha) * x);
}

double e23(double alpha, double gamma, double t) {
  const double x = std::exp(-gamma * t);
  return x * weighted_entropy(alpha, (1.0 - alpha) * x) + (1.0 - x) * weighted_entropy(alpha, 2.0 * (1.0 - alpha) * x);
}

double e22(double alpha, double gamma, double t) {
  return weighted_entropy(alpha, (1.0 - alpha) * std::exp(-gamma * t));
}

StateVector engine_one_jump_state(double alpha, double gamma, double t_jump, double t) {
  if (!(t_jump >= 0.0 && t_jump <= t)) throw std::invalid_argument("engine_one_jump_state: need 0 <= t_jump <= t");
  const OpenSystemModel model = build_atom_cavity(gamma, 3);
  const StateVector before = no_jump_step(model, cavity_input(alpha, 3), t_jump).state;
  const StateVector jumped = jump_step(model, before, 0, 1.0).state;
  return no_jump_step(model, jumped, t - t_jump).state;
}

}  // namespace cavity

ScenarioResult run_bell_monitoring(const ScenarioConfig& cfg) {
  validate(cfg);
  ScenarioResult result;
  result.id = cfg.id;
  const auto grid = time_grid(cfg.t_max, cfg.grid_points);
  const OpenSystemModel model = build_qubit_pair(cfg.gamma);
  const StateVector psi0 = bell_state();
  const FeedbackPolicy policy = FeedbackPolicy::none();

  const auto ef = master_measure(model, psi0, grid, Measure::entanglement_of_formation);
  Series e2, pnj;
  if (cfg.mode == RunMode::exact) {
    auto curves = exact_curves(
        model, psi0, cfg, policy, grid,
        {[&](const EnumerationResult& e) {
           return average_entanglement(e.records, Measure::entanglement_of_formation, model.layout());
         },
         no_event_probability},
        result);
    e2 = make_series("E_2", "entanglement_of_formation", grid, std::move(curves[0]));
    pnj = make_series("P_NJ", "probability", grid, std::move(curves[1]));
  } else {
    const std::vector<StateFunctional> fs{
        [&](const ConditionalState& s) { return evaluate(Measure::entanglement_of_formation, s, model.layout()); }};
    SampledSeries s = sampled_curves(model, psi0, cfg, policy, grid, fs);
    e2 = make_series("E_2", "entanglement_of_formation", grid, std::move(s.mean[0]), std::move(s.std_error[0]));
    auto err = binomial_error(s.no_event_fraction, s.samples);
    pnj = make_series("P_NJ", "probability", grid, std::move(s.no_event_fraction), std::move(err));
  }

  double min_fidelity = 1.0;
  for (double t : grid) min_fidelity = std::min(min_fidelity, fidelity(no_jump_step(model, psi0, t).state.normalized(), psi0));

  result.series.push_back(make_series("E_F", "entanglement_of_formation", grid, ef));
  result.scalars.emplace_back("P_NJ_t_max", pnj.values.back());
  result.scalars.emplace_back("E_2_t_max", e2.values.back());
  result.scalars.emplace_back("E_F_t_max", ef.back());
  result.scalars.emplace_back("no_jump_fidelity_min", min_fidelity);
  result.series.push_back(std::move(e2));
  result.series.push_back(std::move(pnj));
  return result;
}

ScenarioResult run_singlet_conversion(const ScenarioConfig& cfg) {
  validate(cfg);
  ScenarioResult result;
  result.id = cfg.id;
  const auto grid = time_grid(cfg.t_max, cfg.grid_points);
  const OpenSystemModel model = build_qubit_pair(cfg.gamma);
  const SpaceLayout& layout = model.layout();
  const StateVector psi0 = singlet_input(cfg.alpha);
  const double t_star = singlet_stopping_time(cfg.alpha, cfg.gamma);

  std::vector<double> pnj, entropy;
  for (double t : grid) {
    const StepResult r = no_jump_step(model, psi0, t);
    pnj.push_back(r.probability);
    entropy.push_back(entanglement_entropy(r.state.normalized(), layout));
  }

  const StepResult at_star = no_jump_step(model, psi0, t_star);
  double p_ok = 0.0;
  double entropy_star = entanglement_entropy(at_star.state.normalized(), layout);
  if (cfg.mode == RunMode::exact) {
    const EnumerationResult e = enumerate_trajectories(model, psi0, unraveling(cfg, t_star), FeedbackPolicy::none());
    result.truncation_mass = e.truncation_mass;
    for (const auto& rec : e.records) {
      if (!rec.events.empty()) continue;
      p_ok += rec.probability;
      entropy_star = evaluate(Measure::entropy_of_entanglement, rec.state, layout);
    }
  } else {
    const std::vector<double> star{t_star};
    const SampledSeries s = sampled_curves(model, psi0, cfg, FeedbackPolicy::none(), star, {});
    p_ok = s.no_event_fraction[0];
    result.scalars.emplace_back("p_ok_sigma", binomial_error(s.no_event_fraction, s.samples)[0]);
  }

  result.scalars.emplace_back("t_star", t_star);
  result.scalars.emplace_back("p_ok", p_ok);
  result.scalars.emplace_back("p_ok_closed_form", 2.0 * cfg.alpha);
  result.scalars.emplace_back("p_no_jump_t_star", at_star.probability);
  result.scalars.emplace_back("entropy_t_star", entropy_star);
  if (t_star > cfg.t_max) result.warnings.push_back("t_star lies beyond t_max; curves stop before the optimal time");
  result.series.push_back(make_series("P_NJ", "probability", grid, std::move(pnj)));
  result.series.push_back(make_series("S_NJ", "entropy_of_entanglement", grid, std::move(entropy)));
  return result;
}

ScenarioResult run_qutrit_protection(const ScenarioConfig& cfg) {
  validate(cfg);
  ScenarioResult result;
  result.id = cfg.id;
  const auto grid = time_grid(cfg.t_max, cfg.grid_points);
  const Measure neg = Measure::negativity;
  const OpenSystemModel qubits = build_qubit_pair(cfg.gamma);
  const OpenSystemModel degenerate = build_qutrit_pair(CascadeSpec::degenerate(cfg.gamma));
  const OpenSystemModel oscillator = build_qutrit_pair(CascadeSpec::harmonic_oscillator(cfg.gamma));
  const StateVector bell = bell_state();
  const StateVector code = qutrit_code_state();
  const Matrix u = cyclic_feedback_unitary();
  const FeedbackPolicy off = FeedbackPolicy::none();
  const FeedbackPolicy ideal = FeedbackPolicy::uniform(u, 2);
  const FeedbackPolicy lossy = FeedbackPolicy::uniform(u, 2, 0.0, cfg.eta);
  const FeedbackPolicy delayed = FeedbackPolicy::uniform(u, 2, cfg.tau, 1.0);

  result.series.push_back(make_series("E_F", "negativity", grid, master_measure(qubits, bell, grid, neg)));
  result.series.push_back(averaged_measure("E_2", qubits, bell, cfg, off, grid, neg, false, result));
  const auto both = [&](const std::string& label, const OpenSystemModel& model, const FeedbackPolicy& policy,
                        bool force_sampled) {
    for (auto& series : averaged_measures({{label, neg}, {label + "_entropy", Measure::entropy_of_entanglement}}, model,
                                          code, cfg, policy, grid, force_sampled, result))
      result.series.push_back(std::move(series));
  };
  both("E_3", degenerate, off, false);
  both("E_3f", degenerate, ideal, false);
  both("E_3ho", oscillator, off, false);
  if (cfg.mode == RunMode::exact)
    result.warnings.push_back(
        "E_3fho: feedback on the oscillator cascade leaves the code space after one jump, so the jump tree does not "
        "close at max_jumps; curve is sampled");
  both("E_3fho", oscillator, ideal, true);
  result.series.push_back(averaged_measure("E_3f_eta", degenerate, code, cfg, lossy, grid, neg, true, result));
  both("E_3f_tau", degenerate, delayed, true);
  result.series.push_back(make_series("E_3_master", "negativity", grid, master_measure(degenerate, code, grid, neg)));

  for (const auto& s : result.series) result.scalars.emplace_back(s.label + "_t_max", s.values.back());
  return result;
}

ScenarioResult run_cavity_2x3(const ScenarioConfig& cfg) {
  validate(cfg);
  ScenarioResult result;
  result.id = cfg.id;
  const double a = cfg.alpha;
  const double g = cfg.gamma;
  const auto grid = time_grid(cfg.t_max, cfg.grid_points);
  if (a > 0.5)
    result.warnings.push_back("alpha above 1/2: the excited-atom branch carries most of the weight");
  if (cfg.gamma_atom > 0.0)
    result.warnings.push_back("gamma_atom > 0: closed-form curves assume a lossless atom and are reference only");

  std::vector<double> p0, p1, e_nj, e_oj, e23, e22, diff;
  for (double t : grid) {
    p0.push_back(cavity::p_no_jump(a, g, t));
    p1.push_back(cavity::p_one_jump(a, g, t));
    e_nj.push_back(cavity::entropy_no_jump(a, g, t));
    e_oj.push_back(cavity::entropy_one_jump(a, g, t));
    e23.push_back(cavity::e23(a, g, t));
    e22.push_back(cavity::e22(a, g, t));
    diff.push_back(e23.back() - e22.back());
  }

  const OpenSystemModel model3 = build_atom_cavity(g, 3, cfg.gamma_atom);
  const OpenSystemModel model2 = build_atom_cavity(g, 2, cfg.gamma_atom);
  const StateVector psi3 = cavity_input(a, 3);
  const StateVector psi2 = cavity_input(a, 2);
  const FeedbackPolicy off = FeedbackPolicy::none();
  const Measure ent = Measure::entropy_of_entanglement;
  const SpaceLayout l3{2, 3};

  Series p0_engine, p1_engine, e23_engine;
  if (cfg.mode == RunMode::exact) {
    double nj_fid = 1.0;
    double oj_fid = 1.0;
    std::size_t index = 0;
    auto curves = exact_curves(
        model3, psi3, cfg, off, grid,
        {no_event_probability,
         [](const EnumerationResult& e) {
           double p = 0.0;
           for (const auto& rec : e.records)
             if (rec.events.size() == 1) p += rec.probability;
           return p;
         },
         [&](const EnumerationResult& e) { return average_entanglement(e.records, ent, l3); },
         [&](const EnumerationResult& e) {
           const double t = grid[index++];
           for (const auto& rec : e.records) {
             const auto& psi = std::get<StateVector>(rec.state);
             if (rec.events.empty()) nj_fid = std::min(nj_fid, fidelity(psi, cavity::no_jump_state(a, g, t).normalized()));
             if (rec.events.size() == 1 && cfg.gamma_atom == 0.0)
               oj_fid = std::min(oj_fid, fidelity(psi, cavity::one_jump_state(a, g, rec.events[0].time, t).normalized()));
           }
           return 0.0;
         }},
        result);
    p0_engine = make_series("P_chi0_engine", "probability", grid, std::move(curves[0]));
    p1_engine = make_series("P_chi1_engine", "probability", grid, std::move(curves[1]));
    e23_engine = make_series("E23_engine", std::string(measure_name(ent)), grid, std::move(curves[2]));
    result.scalars.emplace_back("no_jump_fidelity_min", nj_fid);
    result.scalars.emplace_back("one_jump_fidelity_min", oj_fid);
  } else {
    // Zero, one and two jumps land in orthogonal subspaces, so the populations identify the record class.
    const std::vector<StateFunctional> fs{
        [&](const ConditionalState& s) {
          const auto& psi = std::get<StateVector>(s);
          return std::norm(psi[4]) + std::norm(psi[2]) > 0.5 ? 1.0 : 0.0;  // span{|e1>, |g2>}
        },
        [&](const ConditionalState& s) {
          const auto& psi = std::get<StateVector>(s);
          return std::norm(psi[3]) + std::norm(psi[1]) > 0.5 ? 1.0 : 0.0;  // span{|e0>, |g1>}
        },
        [&](const ConditionalState& s) { return evaluate(ent, s, l3); }};
    SampledSeries s = sampled_curves(model3, psi3, cfg, off, grid, fs);
    p0_engine = make_series("P_chi0_engine", "probability", grid, std::move(s.mean[0]), std::move(s.std_error[0]));
    p1_engine = make_series("P_chi1_engine", "probability", grid, std::move(s.mean[1]), std::move(s.std_error[1]));
    e23_engine =
        make_series("E23_engine", std::string(measure_name(ent)), grid, std::move(s.mean[2]), std::move(s.std_error[2]));
  }
  Series e22_engine = averaged_measure("E22_engine", model2, psi2, cfg, off, grid, ent, false, result);

  // The one-jump state does not depend on when the jump happened.
  double independence = 1.0;
  const double t_ref = cfg.t_max;
  const StateVector reference = cavity::one_jump_state(a, g, 0.0, t_ref).normalized();
  for (double frac : {0.1, 0.5, 0.9})
    independence =
        std::min(independence, fidelity(cavity::engine_one_jump_state(a, g, frac * t_ref, t_ref).normalized(), reference));

  const auto alphas = time_grid(1.0, cfg.alpha_points);
  const auto times = time_grid(cfg.t_max, cfg.surface_time_points);
  const auto surface = [&](std::string label, auto&& f) {
    Surface s{std::move(label), std::string(measure_name(ent)), alphas, times, {}};
    for (double al : alphas) {
      std::vector<double> row;
      for (double t : times) row.push_back(f(al, t));
      s.values.push_back(std::move(row));
    }
    return s;
  };
  result.surfaces.push_back(surface("E23_no_jump", [&](double al, double t) {
    return cavity::p_no_jump(al, g, t) * cavity::entropy_no_jump(al, g, t);
  }));
  result.surfaces.push_back(surface("E23_one_jump", [&](double al, double t) {
    return cavity::p_one_jump(al, g, t) * cavity::entropy_one_jump(al, g, t);
  }));
  result.surfaces.push_back(surface("E23", [&](double al, double t) { return cavity::e23(al, g, t); }));
  result.surfaces.push_back(surface("E22", [&](double al, double t) { return cavity::e22(al, g, t); }));
  result.surfaces.push_back(surface("E23_minus_E22", [&](double al, double t) {
    return cavity::e23(al, g, t) - cavity::e22(al, g, t);
  }));
  double min_gain = result.surfaces.back().values[0][0];
  for (const auto& row : result.surfaces.back().values)
    for (double v : row) min_gain = std::min(min_gain, v);

  result.scalars.emplace_back("jump_time_independence_min_fidelity", independence);
  result.scalars.emplace_back("E23_minus_E22_min", min_gain);
  result.scalars.emplace_back("E23_t_max", e23.back());
  result.scalars.emplace_back("E22_t_max", e22.back());

  result.series.push_back(make_series("P_chi0", "probability", grid, std::move(p0)));
  result.series.push_back(std::move(p0_engine));
  result.series.push_back(make_series("P_chi1", "probability", grid, std::move(p1)));
  result.series.push_back(std::move(p1_engine));
  result.series.push_back(make_series("E_chiNJ", std::string(measure_name(ent)), grid, std::move(e_nj)));
  result.series.push_back(make_series("E_chiOJ", std::string(measure_name(ent)), grid, std::move(e_oj)));
  result.series.push_back(make_series("E23", std::string(measure_name(ent)), grid, std::move(e23)));
  result.series.push_back(std::move(e23_engine));
  result.series.push_back(make_series("E22", std::string(measure_name(ent)), grid, std::move(e22)));
  result.series.push_back(std::move(e22_engine));
  result.series.push_back(make_series("E23_minus_E22", std::string(measure_name(ent)), grid, std::move(diff)));
  return result;
}

ScenarioResult run_cavity_thermal(const ScenarioConfig& cfg) {
  validate(cfg);
  ScenarioResult result;
  result.id = cfg.id;
  const auto grid = time_grid(cfg.t_max, cfg.grid_points);
  const SpaceLayout layout{2, 3};
  const StateVector psi0 = cavity_input(cfg.alpha, 3);
  const Measure ent = Measure::entropy_of_entanglement;
  if (cfg.mode == RunMode::exact)
    result.warnings.push_back("cavity-thermal: absorption events make the jump tree unbounded; curves are sampled");

  std::vector<LocalChannel> atom;
  if (cfg.gamma_atom > 0.0) atom.push_back({lowering_operator(2), cfg.gamma_atom});
  for (double nbar : cfg.nbar) {
    const OpenSystemModel model =
        build_local_model(layout, {atom, thermal_channels(cfg.gamma, ThermalSpec{nbar}, 3)});
    const std::vector<StateFunctional> fs{
        [&](const ConditionalState& s) { return evaluate(ent, s, layout); },
        [](const ConditionalState& s) {
          const auto& psi = std::get<StateVector>(s);
          return std::norm(psi[2]) + std::norm(psi[5]);  // cavity top level
        }};
    SampledSeries s = sampled_curves(model, psi0, cfg, FeedbackPolicy::none(), grid, fs);
    const std::string tag = "E23_nbar_" + format_number(nbar);

    // Absorption out of the top level is cut by the truncation; estimate the lost flux.
    double leak = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      leak += 0.5 * (s.mean[1][i] + s.mean[1][i - 1]) * (grid[i] - grid[i - 1]);
    leak *= cfg.gamma * nbar;
    result.scalars.emplace_back(tag + "_t_max", s.mean[0].back());
    result.scalars.emplace_back("leak_nbar_" + format_number(nbar), leak);
    if (leak > kLeakWarning)
      result.warnings.push_back("nbar = " + format_number(nbar) + ": estimated truncation leak " +
                                format_number(leak) + " exceeds " + format_number(kLeakWarning));
    result.series.push_back(make_series(tag, std::string(measure_name(ent)), grid, std::move(s.mean[0]),
                                        std::move(s.std_error[0])));
  }
  std::vector<double> reference;
  for (double t : grid) reference.push_back(cavity::e23(cfg.alpha, cfg.gamma, t));
  result.series.push_back(make_series("E23_closed_form", std::string(measure_name(ent)), grid, std::move(reference)));
  return result;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  try {
    switch (cfg.id) {
      case ScenarioId::bell_monitoring:
        return run_bell_monitoring(cfg);
      case ScenarioId::singlet_conversion:
        return run_singlet_conversion(cfg);
      case ScenarioId::qutrit_protection:
        return run_qutrit_protection(cfg);
      case ScenarioId::cavity_2x3:
        return run_cavity_2x3(cfg);
      case ScenarioId::cavity_thermal:
        return run_cavity_thermal(cfg);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const TruncationError& e) {
    throw ScenarioError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
  throw ScenarioError("unknown scenario");
}

const std::vector<ScenarioInfo>& scenario_catalog() {
  static const std::vector<ScenarioInfo> catalog = {
      {ScenarioId::bell_monitoring, "Fig. 1 (E_F and E_2 baselines)",
       "Bell pair of qubits with monitored local decay: E_F of the master equation, trajectory-averaged E_2, P_NJ",
       "gamma=1 t-max=5/gamma dt=1e-3/gamma grid-points=101 mode=exact samples=2000 seed=0 max-jumps=4"},
      {ScenarioId::singlet_conversion, "optimal singlet conversion (no figure)",
       "stop at the no-jump time where the conditional state becomes maximally entangled; p_ok = 2 alpha",
       "alpha in (0, 1/2] default 0.25, gamma=1 mode=exact samples=2000 seed=0"},
      {ScenarioId::qutrit_protection, "Fig. 1",
       "qutrit pair with degenerate or oscillator cascades, with and without local feedback; negativity curves",
       "gamma=1 eta=0.92 tau=0.08/gamma t-max=5/gamma grid-points=101 mode=exact samples=2000 seed=0"},
      {ScenarioId::cavity_2x3, "Fig. 2a–c",
       "atom plus three-level cavity: closed forms and engine curves, (alpha, t) surfaces, E23 - E22",
       "alpha in [0, 1] default 0.25, gamma=1 t-max=5/gamma grid-points=101 alpha-points=101 "
       "surface-time-points=201"},
      {ScenarioId::cavity_thermal, "Fig. 2d",
       "atom plus cavity coupled to a thermal reservoir for each nbar; sampled E23(t)",
       "alpha=0.5 nbar=0,0.05,0.5 gamma=1 (units=physical: gamma=1/0.129 s^-1) mode=sampled samples=2000 seed=0"},
  };
  return catalog;
}

}  // namespace jumpguard

#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "jumpguard/scenarios.hpp"
#include "oracles.hpp"

using namespace jumpguard;

namespace {

ScenarioConfig config(ScenarioId id) {
  ScenarioConfig c = default_config(id);
  c.grid_points = 21;
  return c;
}

std::size_t index_of(const Series& s, double t) {
  for (std::size_t i = 0; i < s.times.size(); ++i)
    if (std::abs(s.times[i] - t) < 1e-12) return i;
  FAIL("time not on grid: " << t);
  return 0;
}

std::string nbar_label(double nbar) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "E23_nbar_%g", nbar);
  return buf;
}

}  // namespace

TEST_CASE("scenario names and catalog") {
  for (ScenarioId id : {ScenarioId::bell_monitoring, ScenarioId::singlet_conversion, ScenarioId::qutrit_protection,
                        ScenarioId::cavity_2x3, ScenarioId::cavity_thermal}) {
    CHECK(parse_scenario(scenario_name(id)) == id);
  }
  CHECK(parse_scenario("qutrit_protection") == ScenarioId::qutrit_protection);
  CHECK(parse_scenario("cavity-2x3") == ScenarioId::cavity_2x3);
  CHECK_FALSE(parse_scenario("teleportation").has_value());
  CHECK(scenario_catalog().size() == 5);
}

TEST_CASE("defaults and units") {
  const ScenarioConfig thermal = default_config(ScenarioId::cavity_thermal);
  CHECK(thermal.alpha == 0.5);
  CHECK(thermal.mode == RunMode::sampled);
  CHECK(thermal.nbar == std::vector<double>{0.0, 0.05, 0.5});

  const ScenarioConfig phys = default_config(ScenarioId::cavity_thermal, true);
  CHECK(phys.physical_units);
  CHECK(phys.gamma == doctest::Approx(1 / 0.129));
  CHECK(phys.t_max == doctest::Approx(5 * 0.129));
  CHECK(phys.dt * phys.gamma == doctest::Approx(1e-3));

  ScenarioConfig q = default_config(ScenarioId::qutrit_protection);
  CHECK(q.tau == doctest::Approx(0.08));
  CHECK(q.eta == doctest::Approx(0.92));
  rescale_time_defaults(q, 4.0);
  CHECK(q.gamma == 4.0);
  CHECK(q.tau == doctest::Approx(0.02));
  CHECK(q.t_max == doctest::Approx(1.25));
  CHECK(q.dt == doctest::Approx(2.5e-4));
}

TEST_CASE("config validation") {
  auto rejects = [](ScenarioConfig c, const std::string& parameter) {
    try {
      validate(c);
      FAIL("accepted invalid " << parameter);
    } catch (const ConfigError& e) {
      CHECK(e.parameter() == parameter);
    }
  };
  ScenarioConfig s = default_config(ScenarioId::singlet_conversion);
  CHECK_NOTHROW(validate(s));
  s.alpha = 0.7;
  rejects(s, "alpha");
  s.alpha = 0.0;
  rejects(s, "alpha");
  s.alpha = 0.5;
  CHECK_NOTHROW(validate(s));

  ScenarioConfig c = default_config(ScenarioId::cavity_2x3);
  c.alpha = 1.0;
  CHECK_NOTHROW(validate(c));
  c.alpha = 1.1;
  rejects(c, "alpha");

  ScenarioConfig q = default_config(ScenarioId::qutrit_protection);
  q.eta = 1.2;
  rejects(q, "eta");
  q = default_config(ScenarioId::qutrit_protection);
  q.tau = -0.1;
  rejects(q, "tau");
  q = default_config(ScenarioId::qutrit_protection);
  q.dt = 0.0;
  rejects(q, "dt");
  q = default_config(ScenarioId::qutrit_protection);
  q.dt = 0.05;
  rejects(q, "dt");
  q = default_config(ScenarioId::qutrit_protection);
  q.gamma = -1.0;
  rejects(q, "gamma");
  q = default_config(ScenarioId::qutrit_protection);
  q.grid_points = 1;
  rejects(q, "grid-points");
  q = default_config(ScenarioId::qutrit_protection);
  q.n_samples = 0;
  rejects(q, "samples");

  ScenarioConfig t = default_config(ScenarioId::cavity_thermal);
  t.nbar = {0.0, -0.1};
  rejects(t, "nbar");
}

TEST_CASE("bell monitoring") {
  const ScenarioResult r = run_scenario(config(ScenarioId::bell_monitoring));
  const Series& pnj = r.curve("P_NJ");
  const Series& e2 = r.curve("E_2");
  const Series& ef = r.curve("E_F");
  CHECK(r.series.size() == 3);
  CHECK(pnj.values[index_of(pnj, 1.0)] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(r.scalar("no_jump_fidelity_min") >= 1 - 1e-12);
  for (std::size_t i = 0; i < pnj.times.size(); ++i) {
    CHECK(e2.values[i] == doctest::Approx(std::exp(-e2.times[i])).epsilon(1e-9));
    const double c = std::exp(-ef.times[i]);
    CHECK(ef.values[i] == doctest::Approx(oracle::binary_entropy((1 + std::sqrt(1 - c * c)) / 2)).epsilon(1e-6));
    if (e2.times[i] > 0) CHECK(e2.values[i] >= ef.values[i]);
  }
  CHECK(e2.measure == "entanglement_of_formation");
  CHECK(pnj.measure == "probability");
}

TEST_CASE("singlet conversion") {
  for (double alpha : {0.1, 0.25, 0.4}) {
    ScenarioConfig c = config(ScenarioId::singlet_conversion);
    c.alpha = alpha;
    const ScenarioResult r = run_scenario(c);
    const double t_star = -0.5 * std::log(alpha / (1 - alpha));
    CHECK(r.scalar("t_star") == doctest::Approx(t_star).epsilon(1e-12));
    CHECK(r.scalar("p_ok") == doctest::Approx(2 * alpha).epsilon(1e-6));
    CHECK(r.scalar("entropy_t_star") == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(r.scalar("p_no_jump_t_star") == doctest::Approx(alpha + (1 - alpha) * std::exp(-2 * t_star)).epsilon(1e-9));
    const Series& p = r.curve("P_NJ");
    for (std::size_t i = 0; i < p.times.size(); ++i)
      CHECK(p.values[i] == doctest::Approx(alpha + (1 - alpha) * std::exp(-2 * p.times[i])).epsilon(1e-9));
  }
  ScenarioConfig c = config(ScenarioId::singlet_conversion);
  c.alpha = 0.25;
  CHECK(run_scenario(c).scalar("t_star") == doctest::Approx(0.5 * std::log(3.0)).epsilon(1e-12));
  c.alpha = 0.5;
  const ScenarioResult half = run_scenario(c);
  CHECK(half.scalar("t_star") == 0.0);
  CHECK(half.scalar("p_ok") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(half.scalar("entropy_t_star") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("qutrit protection curves") {
  ScenarioConfig c = config(ScenarioId::qutrit_protection);
  c.n_samples = 300;
  const ScenarioResult r = run_scenario(c);
  const Series& e3f = r.curve("E_3f");
  const Series& e3 = r.curve("E_3");
  const Series& e2 = r.curve("E_2");
  const Series& ef = r.curve("E_F");
  const double tol = 10 * c.gamma * c.dt;
  for (std::size_t i = 0; i < e3f.times.size(); ++i) {
    CHECK(e3f.values[i] == doctest::Approx(0.5).epsilon(tol));
    CHECK(e3f.values[i] >= e3.values[i]);
    CHECK(e3.values[i] >= e2.values[i]);
    CHECK(e2.values[i] >= ef.values[i]);
    if (e3f.times[i] == 0.0) continue;
    CHECK(e3.values[i] > e2.values[i]);
    for (const char* label : {"E_3f_eta", "E_3f_tau"}) {
      const double v = r.curve(label).values[i];
      CHECK(v < e3f.values[i]);
      CHECK(v > ef.values[i]);
    }
  }
  CHECK(e3f.measure == "negativity");
  CHECK(r.curve("E_3_entropy").measure == "entropy_of_entanglement");
  CHECK(r.curve("E_3f_entropy").values.back() == doctest::Approx(1.0).epsilon(tol));
  CHECK(r.truncation_mass < 1e-4);
  // The oscillator cascade loses the code space on a single jump.
  CHECK(r.curve("E_3ho").values.back() < e3.values.back());
}

TEST_CASE("atom-cavity closed forms against an independent propagator") {
  const double g = 1.0;
  const OpenSystemModel model = build_atom_cavity(g, 3);
  const oracle::CMat gen = oracle::to_eigen(model.effective_decay());
  for (double alpha : {0.1, 0.5, 0.8})
    for (double t : {0.2, 0.5, 1.0, 2.0}) {
      const StateVector psi = cavity_input(alpha, 3);
      const jumpguard::Matrix u = oracle::from_eigen((-t * gen).exp());
      const StateVector evolved = u * psi;
      const StateVector closed = cavity::no_jump_state(alpha, g, t);
      for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(evolved[i] - closed[i]) < 1e-12);
      CHECK(cavity::p_no_jump(alpha, g, t) ==
            doctest::Approx(alpha * std::exp(-g * t) + (1 - alpha) * std::exp(-2 * g * t)).epsilon(1e-12));
      CHECK(cavity::entropy_no_jump(alpha, g, t) ==
            doctest::Approx(oracle::entropy(evolved.normalized(), 2, 3)).epsilon(1e-9));
    }
  CHECK(cavity::p_no_jump(0.3, g, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("cavity 2x3: engine against closed forms") {
  ScenarioConfig c = config(ScenarioId::cavity_2x3);
  c.t_max = 2.0;
  c.alpha_points = 21;
  c.surface_time_points = 21;
  for (double alpha : {0.1, 0.25, 0.5}) {
    c.alpha = alpha;
    const ScenarioResult r = run_scenario(c);
    const Series& p0 = r.curve("P_chi0");
    for (double t : {0.2, 0.5, 1.0, 2.0}) {
      const std::size_t i = index_of(p0, t);
      CHECK(p0.values[i] == doctest::Approx(r.curve("P_chi0_engine").values[i]).epsilon(1e-6));
      CHECK(r.curve("P_chi1").values[i] == doctest::Approx(r.curve("P_chi1_engine").values[i]).epsilon(1e-6));
      CHECK(r.curve("E23").values[i] == doctest::Approx(r.curve("E23_engine").values[i]).epsilon(1e-6));
      CHECK(r.curve("E22").values[i] == doctest::Approx(r.curve("E22_engine").values[i]).epsilon(1e-6));
    }
    CHECK(p0.values.front() == doctest::Approx(1.0));
    CHECK(r.scalar("no_jump_fidelity_min") >= 1 - 1e-8);
    CHECK(r.scalar("one_jump_fidelity_min") >= 1 - 1e-8);
    CHECK(r.scalar("jump_time_independence_min_fidelity") >= 1 - 1e-12);
    CHECK(r.scalar("E23_minus_E22_min") >= 0.0);
    REQUIRE(r.surfaces.size() == 5);
    for (const Surface& s : r.surfaces) {
      CHECK(s.alphas.size() == 21);
      CHECK(s.times.size() == 21);
      if (s.label != "E23_minus_E22") continue;
      for (const auto& row : s.values)
        for (double v : row) CHECK(v >= -1e-15);
    }
  }
}

TEST_CASE("cavity 2x3: jump-time independence") {
  const double g = 1.0;
  const double t = 1.5;
  for (double alpha : {0.2, 0.6}) {
    const StateVector ref = cavity::engine_one_jump_state(alpha, g, 0.1 * t, t);
    for (double frac : {0.5, 0.9}) {
      const StateVector s = cavity::engine_one_jump_state(alpha, g, frac * t, t);
      CHECK(fidelity(s, ref) >= 1 - 1e-12);
      CHECK(fidelity(s, cavity::one_jump_state(alpha, g, frac * t, t)) >= 1 - 1e-12);
    }
  }
}

TEST_CASE("cavity thermal") {
  ScenarioConfig c = config(ScenarioId::cavity_thermal);
  c.grid_points = 11;
  const ScenarioResult r = run_scenario(c);
  const Series& cold = r.curve(nbar_label(0.0));
  const Series& warm = r.curve(nbar_label(0.05));
  const Series& hot = r.curve(nbar_label(0.5));
  const Series& closed = r.curve("E23_closed_form");
  for (std::size_t i = 1; i < cold.times.size(); ++i) {
    CHECK(cold.values[i] > warm.values[i]);
    CHECK(warm.values[i] > hot.values[i]);
    CHECK(std::abs(cold.values[i] - closed.values[i]) < 4 * cold.std_error[i] + 1e-12);
  }
  CHECK(cold.values[0] == doctest::Approx(1.0));
  CHECK(closed.values[3] == doctest::Approx(cavity::e23(0.5, 1.0, closed.times[3])));
  CHECK_FALSE(r.warnings.empty());

  ScenarioConfig bad = c;
  bad.nbar = {-1.0};
  CHECK_THROWS_AS(run_scenario(bad), ConfigError);
}

TEST_CASE("scenario runs are deterministic") {
  ScenarioConfig c = config(ScenarioId::bell_monitoring);
  c.mode = RunMode::sampled;
  c.n_samples = 200;
  c.seed = 99;
  const ScenarioResult a = run_scenario(c);
  const ScenarioResult b = run_scenario(c);
  REQUIRE(a.series.size() == b.series.size());
  for (std::size_t i = 0; i < a.series.size(); ++i) CHECK(a.series[i].values == b.series[i].values);
  c.seed = 100;
  const ScenarioResult other = run_scenario(c);
  CHECK(other.curve("P_NJ").values != a.curve("P_NJ").values);
}

TEST_CASE("sampled singlet conversion") {
  ScenarioConfig c = config(ScenarioId::singlet_conversion);
  c.mode = RunMode::sampled;
  c.n_samples = 20000;
  c.dt = 5e-3;
  c.alpha = 0.25;
  const ScenarioResult r = run_scenario(c);
  CHECK(std::abs(r.scalar("p_ok") - 0.5) < 3 * r.scalar("p_ok_sigma"));
  CHECK(r.scalar("entropy_t_star") == doctest::Approx(1.0).epsilon(1e-8));
}

#pragma once

// Canned reproductions of the six counterexample scenarios: per-run lock
// verdicts, pairwise model comparisons and, for the step-size scenario,
// return-map limit cycles and a pull-in probe.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "costas_lab/analysis.hpp"
#include "costas_lab/integrators.hpp"
#include "costas_lab/io.hpp"
#include "costas_lab/models.hpp"
#include "costas_lab/parallel.hpp"

namespace costas {

// --------------------------------------------------------------------------
// Common parameter set

struct ReferenceConstants {
  static constexpr double omega3 = 1.2566e6;
  static constexpr double tau1 = 2e-5;
  static constexpr double tau2 = 3.9789e-6;
  static constexpr double omega1 = 2.0 * kPi * 400000.0;
  static constexpr double L = 4.8e6;
};

/// Shared loop: first-order LPFs at omega3, PI loop filter, carrier 400 kHz.
inline LoopParams reference_params(double omega_delta_free, double lpf_dc_gain = 1.0) {
  LoopParams p;
  p.lpf1 = make_first_order_lowpass(ReferenceConstants::omega3, lpf_dc_gain);
  p.lpf2 = make_first_order_lowpass(ReferenceConstants::omega3, lpf_dc_gain);
  p.loop_filter = make_pi_loop_filter(ReferenceConstants::tau1, ReferenceConstants::tau2);
  p.L = ReferenceConstants::L;
  p.omega1 = ReferenceConstants::omega1;
  p.theta1_0 = 0.0;
  p.set_omega_delta_free(omega_delta_free);
  return p;
}

/// RK4 at 2 ns, sampled once per carrier period.
inline IntegratorConfig reference_integrator(const LoopParams& p, double t_end = 5e-3) {
  IntegratorConfig c;
  c.scheme = Scheme::fixed_rk4;
  c.dt = 2e-9;
  c.t_end = t_end;
  c.sample_dt = 2.0 * kPi / p.omega1;
  return c;
}

// --------------------------------------------------------------------------
// Runs

struct RunSpec {
  std::string name;
  ModelKind kind = ModelKind::SignalSpace;
  LoopParams params;
  InitialConditions ic;
  IntegratorConfig cfg;
  bool expect_lock = true;
  double max_t_end = 20e-3;  // horizon doubles up to this while the tail is not stationary
};

struct RunResult {
  std::string name;
  ModelKind kind = ModelKind::SignalSpace;
  bool expect_lock = true;
  bool failed = false;  // integration error
  std::string diagnostics;
  LockReport lock;
  double t_end_used = 0.0;
  double settling_time = 0.0;
  IntegrationStats stats;
  std::string csv_path;
  Trajectory trajectory;

  [[nodiscard]] bool matches() const { return !failed && lock.locked == expect_lock; }
};

/// Integrate, doubling t_end until the tail is stationary or max_t_end is reached.
inline RunResult execute_run(const RunSpec& spec, const LockCriterion& crit = {}) {
  RunResult r;
  r.name = spec.name;
  r.kind = spec.kind;
  r.expect_lock = spec.expect_lock;
  IntegratorConfig cfg = spec.cfg;
  try {
    const StateVector s0 = make_state(spec.kind, spec.params, spec.ic);
    for (;;) {
      r.trajectory = integrate(spec.kind, spec.params, s0, cfg);
      if (tail_is_stationary(r.trajectory, crit) || 2.0 * cfg.t_end > spec.max_t_end * (1 + 1e-12)) break;
      cfg.t_end *= 2.0;
    }
    r.t_end_used = cfg.t_end;
    r.lock = detect_lock(r.trajectory, crit);
    r.settling_time = settling_time(r.trajectory);
    r.stats = r.trajectory.stats;
  } catch (const IntegrationError& e) {
    r.failed = true;
    r.diagnostics = e.what();
    r.t_end_used = cfg.t_end;
  }
  return r;
}

// --------------------------------------------------------------------------
// Model comparison

struct PairComparison {
  ModelKind a{}, b{};
  double sup_theta_diff = 0.0;
  double sup_g_diff = 0.0;
  std::optional<double> steady_theta_diff;  // both runs locked
  std::optional<double> steady_g_diff;
};

struct ModelComparison {
  std::vector<ModelKind> kinds;
  std::vector<Trajectory> trajectories;
  std::vector<LockReport> locks;
  std::vector<PairComparison> pairs;
};

/// Integrate each kind with the same parameters and integrator settings, so
/// all trajectories share one sample grid, and compare theta_delta and g.
inline ModelComparison compare_models(const std::vector<ModelKind>& kinds, const LoopParams& p,
                                      const std::vector<StateVector>& s0, const IntegratorConfig& cfg,
                                      const LockCriterion& crit = {}) {
  if (kinds.size() != s0.size()) {
    throw ContractViolation("compare_models: one initial state per model kind is required");
  }
  for (std::size_t i = 0; i < kinds.size(); ++i) check_layout(kinds[i], p, s0[i].size());
  ModelComparison out;
  out.kinds = kinds;
  out.trajectories.resize(kinds.size());
  parallel_for(kinds.size(), [&](std::size_t i) { out.trajectories[i] = integrate(kinds[i], p, s0[i], cfg); });
  for (const auto& tr : out.trajectories) out.locks.push_back(detect_lock(tr, crit));
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    for (std::size_t j = i + 1; j < kinds.size(); ++j) {
      const Trajectory& a = out.trajectories[i];
      const Trajectory& b = out.trajectories[j];
      if (a.times != b.times) {
        throw ContractViolation("compare_models: sample grids differ between " +
                                std::string(to_string(kinds[i])) + " and " + std::string(to_string(kinds[j])));
      }
      PairComparison c;
      c.a = kinds[i];
      c.b = kinds[j];
      for (std::size_t k = 0; k < a.size(); ++k) {
        c.sup_theta_diff = std::max(c.sup_theta_diff, std::abs(a.theta_delta[k] - b.theta_delta[k]));
        c.sup_g_diff = std::max(c.sup_g_diff, std::abs(a.g[k] - b.g[k]));
      }
      if (out.locks[i].locked && out.locks[j].locked) {
        c.steady_theta_diff = *out.locks[i].steady_theta_delta - *out.locks[j].steady_theta_delta;
        c.steady_g_diff = *out.locks[i].steady_g - *out.locks[j].steady_g;
      }
      out.pairs.push_back(c);
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Reports

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct StepVerdict {
  double dt = 0.0;  // 0 for the adaptive arm
  bool locked = false;
  bool diverged = false;
  double tail_freq_err = 0.0;
};

struct ExperimentReport {
  int id = 0;
  std::string title;
  std::vector<RunResult> runs;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<Check> checks;
  std::vector<std::string> notes;
  // step-size scenario only
  std::vector<StepVerdict> step_sweep;
  std::optional<StepVerdict> adaptive_arm;
  std::optional<CycleReport> cycles;
  std::vector<PullinRow> pullin;
  std::vector<std::string> artifacts;

  [[nodiscard]] bool pass() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  [[nodiscard]] const RunResult* run(const std::string& name) const {
    for (const auto& r : runs) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }
  [[nodiscard]] std::optional<double> metric(const std::string& name) const {
    for (const auto& [k, v] : metrics) {
      if (k == name) return v;
    }
    return std::nullopt;
  }
};

struct ExperimentOptions {
  std::string outdir;          // empty: no files written
  double lpf_dc_gain = 1.0;    // 2 selects the transfer-function reading of the low-pass filters
  bool keep_trajectories = true;
  LockCriterion criterion;
};

namespace detail {

inline RunSpec reference_run(std::string name, ModelKind kind, const LoopParams& p, InitialConditions ic,
                              bool expect_lock) {
  RunSpec s;
  s.name = std::move(name);
  s.kind = kind;
  s.params = p;
  s.ic = std::move(ic);
  s.cfg = reference_integrator(p);
  s.expect_lock = expect_lock;
  return s;
}

inline InitialConditions zero_ic() {
  InitialConditions ic;
  ic.x1 = {0.0};
  ic.x2 = {0.0};
  ic.x = {0.0};
  return ic;
}

inline std::string verdict(bool locked) { return locked ? "lock" : "no lock"; }

inline void run_all(ExperimentReport& rep, const std::vector<RunSpec>& specs, const ExperimentOptions& opt) {
  rep.runs.resize(specs.size());
  parallel_for(specs.size(), [&](std::size_t i) { rep.runs[i] = execute_run(specs[i], opt.criterion); });
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const RunResult& r = rep.runs[i];
    Check c;
    c.name = r.name + " (" + std::string(to_string(r.kind)) + ")";
    c.pass = r.matches();
    c.detail = r.failed ? "integration failed: " + r.diagnostics
                        : "expected " + verdict(r.expect_lock) + ", got " +
                              verdict(r.lock.locked);
    rep.checks.push_back(c);
  }
}

inline void write_outputs(ExperimentReport& rep, const ExperimentOptions& opt) {
  if (opt.outdir.empty()) return;
  std::filesystem::create_directories(opt.outdir);
  for (auto& r : rep.runs) {
    if (r.failed) continue;
    r.csv_path = (std::filesystem::path(opt.outdir) / ("example" + std::to_string(rep.id) + "_" + r.name + ".csv")).string();
    write_file(r.csv_path, [&](std::ostream& os) { write_trajectory_csv(os, r.trajectory); });
    rep.artifacts.push_back(r.csv_path);
  }
}

// Scenario 1: locked phases of the averaged and the full model differ.
inline void example1(ExperimentReport& rep, const ExperimentOptions& opt) {
  rep.title = "Phase-space model vs signal-space model at omega_delta_free = 6e5";
  const LoopParams p = reference_params(6e5, opt.lpf_dc_gain);
  run_all(rep,
          {reference_run("phase_space", ModelKind::PhaseSpace, p, zero_ic(), true),
           reference_run("signal_space", ModelKind::SignalSpace, p, zero_ic(), true)},
          opt);
  const auto& a = rep.runs[0];
  const auto& b = rep.runs[1];
  Check c{"steady theta_delta differs by more than 0.05 rad", false, "a run did not lock"};
  if (a.lock.steady_theta_delta && b.lock.steady_theta_delta) {
    const double d = *a.lock.steady_theta_delta - *b.lock.steady_theta_delta;
    rep.metrics.emplace_back("steady_theta_phase_space", *a.lock.steady_theta_delta);
    rep.metrics.emplace_back("steady_theta_signal_space", *b.lock.steady_theta_delta);
    rep.metrics.emplace_back("steady_theta_difference", d);
    // theta_delta is unwrapped; the reduced value separates slip count from phase offset
    rep.metrics.emplace_back("steady_theta_difference_mod_pi", wrap_angle(d));
    c.pass = std::abs(d) > 0.05;
    c.detail = "difference " + format_double(d) + " rad";
  }
  rep.checks.push_back(c);
  rep.metrics.emplace_back("omega_delta_over_omega1", 6e5 / p.omega1);
}

// Scenario 2: nonzero LPF initial state prevents lock.
inline void example2(ExperimentReport& rep, const ExperimentOptions& opt) {
  rep.title = "Signal-space model, omega_delta_free = 2, zero vs nonzero LPF initial state";
  const LoopParams p = reference_params(2.0, opt.lpf_dc_gain);
  InitialConditions red = zero_ic();
  red.x1 = {0.02};
  run_all(rep,
          {reference_run("zero_state", ModelKind::SignalSpace, p, zero_ic(), true),
           reference_run("x1_0.02", ModelKind::SignalSpace, p, red, false)},
          opt);
}

// Scenario 3: periodic data prevents lock at a large initial deviation.
inline void example3(ExperimentReport& rep, const ExperimentOptions& opt) {
  rep.title = "Signal-space model, omega2_free = 3.2e6, constant vs periodic data";
  LoopParams p = reference_params(0.0, opt.lpf_dc_gain);
  p.omega2_free = 3.2e6;
  LoopParams pm = p;
  pm.data = DataSignal::periodic_square(2.0 * kPi * 1e5);
  run_all(rep,
          {reference_run("constant_data", ModelKind::SignalSpace, p, zero_ic(), true),
           reference_run("periodic_data", ModelKind::SignalSpace, pm, zero_ic(), false)},
          opt);
  const RunResult& r = rep.runs[1];
  rep.checks.push_back({"no step straddles a data transition", !r.failed && r.stats.breakpoint_straddles == 0,
                        std::to_string(r.stats.breakpoint_straddles) + " straddling steps"});
  rep.metrics.emplace_back("omega_delta_free", p.omega_delta_free());
}

// Scenario 4: only the classic phase-space model locks.
inline void example4(ExperimentReport& rep, const ExperimentOptions& opt) {
  rep.title = "Models (16), (11), (19) at omega_delta_free = 5e5";
  const LoopParams p = reference_params(5e5, opt.lpf_dc_gain);
  InitialConditions ic = zero_ic();
  run_all(rep,
          {reference_run("phase_space", ModelKind::PhaseSpace, p, ic, false),
           reference_run("simplified_signal_space", ModelKind::SimplifiedSignalSpace, p, ic, false),
           reference_run("classic_phase_space", ModelKind::ClassicPhaseSpace, p, ic, true)},
          opt);
  if (!rep.runs[0].failed) {
    const IdealLpfError e = ideal_lpf_error(rep.runs[0].trajectory);
    rep.metrics.emplace_back("phase_space_ideal_lpf_error_g1", e.e1_max);
    rep.metrics.emplace_back("phase_space_ideal_lpf_error_g2", e.e2_max);
  }
}

// Scenario 5: a tiny loop-filter initial state prevents lock.
inline void example5(ExperimentReport& rep, const ExperimentOptions& opt) {
  rep.title = "Signal-space model, omega_delta_free = 10, zero vs nonzero loop-filter state";
  const LoopParams p = reference_params(10.0, opt.lpf_dc_gain);
  InitialConditions red = zero_ic();
  red.x = {-1e-5};
  run_all(rep,
          {reference_run("zero_state", ModelKind::SignalSpace, p, zero_ic(), true),
           reference_run("x_-1e-5", ModelKind::SignalSpace, p, red, false)},
          opt);
  const double w0 = initial_frequency_difference(ModelKind::SignalSpace, p, make_state(ModelKind::SignalSpace, p, red));
  rep.metrics.emplace_back("initial_frequency_difference_red", w0);
  rep.checks.push_back({"initial frequency difference of the red run is 2400010 rad/s",
                        std::abs(w0 - 2400010.0) <= 1e-6 * 2400010.0, format_double(w0)});
}

}  // namespace detail

// --------------------------------------------------------------------------
// Step-size scenario

struct StepScenario {
  double L = 1000.0;
  double omega_delta_free = 89.45;
  double omega1 = 1e4;  // inert for the classic model
  double x0 = 0.0125;
  double theta0 = -3.4035;
  std::vector<double> fixed_steps{1e-3, 1e-2, 2e-2, 5e-2, 7e-2, 1e-1};
  double tau2_ratio = 0.29;           // lead-lag fallback: tau2 = ratio * tau1
  double tau1_lo = 0.1, tau1_hi = 10.0;
  std::size_t tau1_points = 21;       // log-spaced
  double map_dt = 1e-4;               // RK4 step for the return map
};

struct StepScenarioFilter {
  std::string description;
  LoopParams params;
  CycleReport cycles;
  double bracket_lo = 0.0, bracket_hi = 0.0;
  double tau1 = 0.0, tau2 = 0.0;
  bool lead_lag = false;
};

namespace detail {

inline LoopParams step_scenario_params(const StepScenario& sc, FilterSS loop_filter) {
  LoopParams p;
  p.loop_filter = std::move(loop_filter);
  p.L = sc.L;
  p.omega1 = sc.omega1;
  p.set_omega_delta_free(sc.omega_delta_free);
  return p;
}

inline double slow_time_scale(const LoopParams& p) {
  const double a = std::abs(p.loop_filter.A()(0, 0));
  return a > 0.0 ? 1.0 / a : 1.0;
}

inline IntegratorConfig return_map_config(const StepScenario& sc, const LoopParams& p) {
  IntegratorConfig c;
  c.scheme = Scheme::fixed_rk4;
  c.dt = sc.map_dt;
  c.t_end = std::max(5.0, 20.0 * slow_time_scale(p));
  return c;
}

/// Return-map search in the band of rotation speeds (2, 2 omega_delta_free).
inline StepScenarioFilter cycles_for(const StepScenario& sc, const LoopParams& p) {
  StepScenarioFilter f;
  f.params = p;
  const double Lc = sc.L * p.loop_filter.c()[0];
  f.bracket_lo = (sc.omega_delta_free - 2.0 * sc.omega_delta_free) / Lc;
  f.bracket_hi = (sc.omega_delta_free - 2.0) / Lc;
  f.cycles = find_limit_cycles(p, f.bracket_lo, f.bracket_hi, 0.0, return_map_config(sc, p));
  return f;
}

}  // namespace detail

/// Locate a loop filter exhibiting a stable/unstable rotational cycle pair:
/// first the common PI filter, then lead-lag filters over a tau1 scan.
inline StepScenarioFilter select_step_scenario_filter(const StepScenario& sc) {
  StepScenarioFilter pi = detail::cycles_for(
      sc, detail::step_scenario_params(sc, make_pi_loop_filter(ReferenceConstants::tau1, ReferenceConstants::tau2)));
  pi.tau1 = ReferenceConstants::tau1;
  pi.tau2 = ReferenceConstants::tau2;
  pi.description = "PI filter tau1=" + format_double(pi.tau1) + " tau2=" + format_double(pi.tau2);
  if (pi.cycles.has_stable_unstable_pair()) return pi;
  for (std::size_t i = 0; i < sc.tau1_points; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(sc.tau1_points - 1);
    const double tau1 = sc.tau1_lo * std::pow(sc.tau1_hi / sc.tau1_lo, f);
    const double tau2 = sc.tau2_ratio * tau1;
    StepScenarioFilter ll =
        detail::cycles_for(sc, detail::step_scenario_params(sc, make_lead_lag_filter(tau1, tau2)));
    ll.tau1 = tau1;
    ll.tau2 = tau2;
    ll.lead_lag = true;
    ll.description = "lead-lag filter tau1=" + format_double(tau1) + " tau2=" + format_double(tau2);
    if (ll.cycles.has_stable_unstable_pair()) return ll;
  }
  pi.description += " (no lead-lag filter in the scan shows a cycle pair)";
  return pi;
}

namespace detail {

inline StepVerdict step_verdict(const LoopParams& p, const StateVector& s0, const IntegratorConfig& cfg,
                                const LockCriterion& crit) {
  StepVerdict v;
  v.dt = cfg.scheme == Scheme::fixed_rk4 ? cfg.dt : 0.0;
  try {
    const Trajectory tr = integrate(ModelKind::ClassicPhaseSpace, p, s0, cfg);
    const LockReport r = detect_lock(tr, crit);
    v.locked = r.locked;
    v.tail_freq_err = r.tail_mean_freq_error;
  } catch (const IntegrationError&) {
    v.diverged = true;
  }
  return v;
}

inline void example6(ExperimentReport& rep, const ExperimentOptions& opt) {
  rep.title = "Classic model, L = 1000, omega_delta_free = 89.45: step size and hidden cycles";
  const StepScenario sc;
  const StepScenarioFilter f = select_step_scenario_filter(sc);
  const LoopParams& p = f.params;
  rep.notes.push_back("loop filter: " + f.description);
  rep.metrics.emplace_back("loop_filter_tau1", f.tau1);
  rep.metrics.emplace_back("loop_filter_tau2", f.tau2);
  rep.metrics.emplace_back("loop_filter_lead_lag", f.lead_lag ? 1.0 : 0.0);
  rep.cycles = f.cycles;

  const StateVector s0{sc.x0, sc.theta0};
  const double horizon = std::max(60.0, 60.0 * slow_time_scale(p));
  rep.step_sweep.resize(sc.fixed_steps.size());
  parallel_for(sc.fixed_steps.size(), [&](std::size_t i) {
    IntegratorConfig c;
    c.dt = sc.fixed_steps[i];
    c.t_end = horizon;
    rep.step_sweep[i] = step_verdict(p, s0, c, opt.criterion);
  });
  IntegratorConfig loose;
  loose.scheme = Scheme::adaptive_dp45;
  loose.rel_tol = 1e-3;
  loose.abs_tol = 1e-6;
  loose.t_end = horizon;
  rep.adaptive_arm = step_verdict(p, s0, loose, opt.criterion);

  std::optional<double> lock_dt, escape_dt;
  for (const auto& v : rep.step_sweep) {
    if (v.locked && !lock_dt) lock_dt = v.dt;
    if (!v.locked && !escape_dt) escape_dt = v.dt;
  }
  rep.checks.push_back({"two fixed step sizes give different lock verdicts", lock_dt && escape_dt,
                        lock_dt && escape_dt ? "dt=" + format_double(*lock_dt) + " locks, dt=" +
                                                   format_double(*escape_dt) + " does not"
                                             : "all step sizes agree"});
  if (lock_dt && escape_dt && *lock_dt < *escape_dt) {
    rep.notes.push_back("the fine step locks and the coarse step rotates");
  }

  bool residual_ok = !f.cycles.cycles.empty();
  for (const auto& c : f.cycles.cycles) residual_ok = residual_ok && c.residual < 1e-10;
  rep.checks.push_back({"return map has a stable/unstable fixed-point pair with |P(x)-x| < 1e-10",
                        f.cycles.has_stable_unstable_pair() && residual_ok,
                        std::to_string(f.cycles.cycles.size()) + " fixed points"});

  // Initial states across the rotational band plus the scenario's own.
  std::vector<StateVector> ics{s0};
  for (int i = 0; i < 9; ++i) {
    const double x = f.bracket_lo + (f.bracket_hi - f.bracket_lo) * i / 8.0;
    ics.push_back({x, 0.0});
  }
  IntegratorConfig fine;
  fine.dt = sc.fixed_steps.front();
  fine.t_end = horizon;
  rep.pullin = pullin_probe(p, {0.0, sc.omega_delta_free}, ics, fine, opt.criterion);
  rep.checks.push_back({"omega_delta_free = 89.45 is outside the pull-in range", !rep.pullin[1].all_lock,
                        std::to_string(rep.pullin[1].escapes) + " of " + std::to_string(rep.pullin[1].runs) +
                            " initial states escape"});
}

}  // namespace detail

inline ExperimentReport run_example(int id, const ExperimentOptions& opt = {}) {
  if (id < 1 || id > 6) throw ParameterError("example id must be in 1..6, got " + std::to_string(id));
  ExperimentReport rep;
  rep.id = id;
  switch (id) {
    case 1: detail::example1(rep, opt); break;
    case 2: detail::example2(rep, opt); break;
    case 3: detail::example3(rep, opt); break;
    case 4: detail::example4(rep, opt); break;
    case 5: detail::example5(rep, opt); break;
    default: detail::example6(rep, opt); break;
  }
  for (const auto& r : rep.runs) {
    if (!r.failed && r.lock.locked && r.settling_time > 0.0) {
      rep.metrics.emplace_back(r.name + "_t_end_over_settling", r.t_end_used / r.settling_time);
    }
  }
  detail::write_outputs(rep, opt);
  if (!opt.keep_trajectories) {
    for (auto& r : rep.runs) r.trajectory = Trajectory{};
  }
  return rep;
}

/// Flat key = value summary of a report.
inline std::string format_report(const ExperimentReport& rep) {
  std::ostringstream os;
  os << "example = " << rep.id << "\n";
  os << "title = " << rep.title << "\n";
  os << "pass = " << (rep.pass() ? "true" : "false") << "\n";
  for (const auto& r : rep.runs) {
    const std::string k = "run." + r.name;
    os << k << ".model = " << to_string(r.kind) << "\n";
    os << k << ".expect_lock = " << (r.expect_lock ? "true" : "false") << "\n";
    if (r.failed) {
      os << k << ".failed = " << r.diagnostics << "\n";
      continue;
    }
    os << k << ".locked = " << (r.lock.locked ? "true" : "false") << "\n";
    os << k << ".tail_freq_err = " << format_double(r.lock.tail_mean_freq_error) << "\n";
    os << k << ".tail_phase_span = " << format_double(r.lock.tail_phase_span) << "\n";
    if (r.lock.steady_theta_delta) os << k << ".steady_theta = " << format_double(*r.lock.steady_theta_delta) << "\n";
    os << k << ".t_end = " << format_double(r.t_end_used) << "\n";
    os << k << ".settling_time = " << format_double(r.settling_time) << "\n";
    if (!r.csv_path.empty()) os << k << ".csv = " << r.csv_path << "\n";
  }
  for (const auto& [name, v] : rep.metrics) os << "metric." << name << " = " << format_double(v) << "\n";
  for (const auto& v : rep.step_sweep) {
    os << "step." << format_double(v.dt) << " = " << (v.diverged ? "diverged" : v.locked ? "lock" : "no lock") << "\n";
  }
  if (rep.adaptive_arm) {
    os << "step.adaptive_loose = " << (rep.adaptive_arm->locked ? "lock" : "no lock") << "\n";
  }
  if (rep.cycles) {
    os << "cycles.section_angle = " << format_double(rep.cycles->section_angle) << "\n";
    for (std::size_t i = 0; i < rep.cycles->cycles.size(); ++i) {
      const auto& c = rep.cycles->cycles[i];
      os << "cycle." << i << " = x=" << format_double(c.fixed_point_x) << " multiplier=" << format_double(c.multiplier)
         << " " << to_string(c.stability) << " residual=" << format_double(c.residual) << "\n";
    }
  }
  for (const auto& r : rep.pullin) {
    os << "pullin." << format_double(r.omega_delta) << " = " << (r.all_lock ? "all-lock" : "some-escape")
       << " escapes=" << r.escapes << "/" << r.runs << " hold_in=" << (r.hold_in ? "true" : "false") << "\n";
  }
  for (const auto& c : rep.checks) {
    os << "check = " << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  }
  for (const auto& n : rep.notes) os << "note = " << n << "\n";
  return os.str();
}

}  // namespace costas

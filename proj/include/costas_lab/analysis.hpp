#pragma once

// Lock detection, averaged-vs-original discrepancy, ideal-LPF error,
// Poincare return maps of the classic model and a pull-in probe.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "costas_lab/errors.hpp"
#include "costas_lab/integrators.hpp"
#include "costas_lab/models.hpp"
#include "costas_lab/parallel.hpp"

namespace costas {

// --------------------------------------------------------------------------
// Lock detection

struct LockCriterion {
  double freq_tol = 1.0;           // rad/s
  double phase_drift_tol = 0.01;   // rad
  double tail_fraction = 0.2;

  void validate() const {
    if (!(freq_tol > 0.0)) throw ParameterError("freq_tol must be > 0");
    if (!(phase_drift_tol > 0.0)) throw ParameterError("phase_drift_tol must be > 0");
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) {
      throw ParameterError("tail_fraction must lie in (0, 1)");
    }
  }
};

struct LockReport {
  bool locked = false;
  double tail_mean_freq_error = 0.0;  // rad/s
  double tail_phase_span = 0.0;       // rad
  std::optional<double> steady_theta_delta;
  std::optional<double> steady_g;
  std::size_t tail_samples = 0;
};

/// Lock verdict from the trailing tail of a trajectory.
///
/// The frequency error is the mean |d theta_delta / dt| over the tail, from
/// central differences on the sample grid. theta_delta' = omega1 - omega2
/// holds for every kind, and differencing samples taken once per carrier
/// period removes the double-frequency ripple that the instantaneous omega2
/// carries.
inline LockReport detect_lock(const Trajectory& tr, const LockCriterion& crit = {}) {
  crit.validate();
  const std::size_t n = tr.size();
  if (n < 10) {
    throw InsufficientData("detect_lock needs at least 10 samples, got " + std::to_string(n));
  }
  const auto tail = std::max<std::size_t>(
      3, static_cast<std::size_t>(std::ceil(crit.tail_fraction * static_cast<double>(n))));
  const std::size_t first = n - tail;
  const auto& th = tr.theta_delta;
  const auto& t = tr.times;

  double freq = 0.0;
  double lo = th[first], hi = th[first];
  double theta_sum = 0.0, g_sum = 0.0;
  for (std::size_t i = first; i < n; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 < n ? i + 1 : i;
    freq += std::abs((th[b] - th[a]) / (t[b] - t[a]));
    lo = std::min(lo, th[i]);
    hi = std::max(hi, th[i]);
    theta_sum += th[i];
    g_sum += tr.g[i];
  }
  LockReport r;
  r.tail_samples = tail;
  r.tail_mean_freq_error = freq / static_cast<double>(tail);
  r.tail_phase_span = hi - lo;
  r.locked = std::isfinite(r.tail_mean_freq_error) && r.tail_mean_freq_error < crit.freq_tol &&
             r.tail_phase_span < crit.phase_drift_tol;
  if (r.locked) {
    r.steady_theta_delta = theta_sum / static_cast<double>(tail);
    r.steady_g = g_sum / static_cast<double>(tail);
  }
  return r;
}

/// Time of the last tail sample where theta_delta differs from its final
/// value by more than `band`; 0 if it never does.
inline double settling_time(const Trajectory& tr, double band = 0.01) {
  const double last = tr.theta_delta.back();
  for (std::size_t i = tr.size(); i-- > 0;) {
    if (std::abs(tr.theta_delta[i] - last) > band) return tr.times[i];
  }
  return 0.0;
}

/// A tail is stationary when it is locked, or when it slips at a steady
/// rate: the mean |theta_delta'| of the two tail halves agrees to 1%.
inline bool tail_is_stationary(const Trajectory& tr, const LockCriterion& crit = {}) {
  const LockReport r = detect_lock(tr, crit);
  if (r.locked) return true;
  const std::size_t n = tr.size();
  const std::size_t first = n - r.tail_samples;
  const std::size_t mid = first + r.tail_samples / 2;
  auto mean_rate = [&](std::size_t a, std::size_t b) {
    return std::abs(tr.theta_delta[b] - tr.theta_delta[a]) / (tr.times[b] - tr.times[a]);
  };
  const double r1 = mean_rate(first, mid);
  const double r2 = mean_rate(mid, n - 1);
  return r1 > crit.freq_tol && std::abs(r1 - r2) <= 0.01 * std::max(r1, r2);
}

// --------------------------------------------------------------------------
// Averaging discrepancy

/// An original model and its averaged counterpart.
enum class AveragingPair {
  ModifiedVsClassic,       // (x, theta2) against (x, theta_delta)
  SimplifiedVsPhaseSpace,  // (x1, x2, x, theta_delta) against the same layout
};

inline ModelKind original_kind(AveragingPair pair) {
  return pair == AveragingPair::ModifiedVsClassic ? ModelKind::ModifiedSignalSpace
                                                  : ModelKind::SimplifiedSignalSpace;
}

inline ModelKind averaged_kind(AveragingPair pair) {
  return pair == AveragingPair::ModifiedVsClassic ? ModelKind::ClassicPhaseSpace
                                                  : ModelKind::PhaseSpace;
}

struct AveragingRow {
  double omega1 = 0.0;
  double sup_error = 0.0;        // sup |theta_delta difference|, rad
  double sup_state_error = 0.0;  // sup max-norm over filter states and theta_delta
  bool detuning_too_large = false;
};

struct AveragingOptions {
  AveragingPair pair = AveragingPair::ModifiedVsClassic;
  double t_end = 2e-4;
  double steps_per_period = 200.0;  // RK4 step = (2 pi / omega1) / steps_per_period
  double max_detuning_ratio = 0.1;   // flag when |omega_delta_free| / omega1 exceeds this
};

/// True when |omega_delta_free| / omega1 exceeds the ratio, i.e. the
/// frequency deviation is not small against the carrier.
inline bool detuning_too_large(double omega_delta_free, double omega1, double ratio = 0.1) {
  return std::abs(omega_delta_free) / omega1 > ratio;
}

/// For each carrier frequency, integrate the original and averaged models
/// from the same initial data with the same RK4 grid and return the sup of
/// their difference over the samples. omega_delta_free is held fixed.
inline std::vector<AveragingRow> averaging_discrepancy(const LoopParams& base,
                                                       const std::vector<double>& omega1_list,
                                                       const InitialConditions& ic,
                                                       const AveragingOptions& opt = {}) {
  const double wd = base.omega_delta_free();
  std::vector<AveragingRow> rows(omega1_list.size());
  parallel_for(omega1_list.size(), [&](std::size_t i) {
    const double w1 = omega1_list[i];
    LoopParams p = base;
    p.omega1 = w1;
    p.set_omega_delta_free(wd);
    IntegratorConfig cfg;
    cfg.scheme = Scheme::fixed_rk4;
    cfg.dt = (2.0 * kPi / w1) / opt.steps_per_period;
    cfg.t_end = opt.t_end;
    cfg.sample_stride = 1;
    const ModelKind ko = original_kind(opt.pair);
    const ModelKind ka = averaged_kind(opt.pair);
    Trajectory a, b;
    try {
      a = integrate(ko, p, make_state(ko, p, ic), cfg);
      b = integrate(ka, p, make_state(ka, p, ic), cfg);
    } catch (const IntegrationError& e) {
      throw IntegrationError(e.kind(), e.last_good_time(),
                             std::string(e.what()) + " (omega1 = " + std::to_string(w1) + ")");
    }
    const StateLayout la = layout(ko, p);
    AveragingRow row;
    row.omega1 = w1;
    row.detuning_too_large = detuning_too_large(wd, w1, opt.max_detuning_ratio);
    const std::size_t m = std::min(a.size(), b.size());
    for (std::size_t k = 0; k < m; ++k) {
      const double dth = std::abs(a.theta_delta[k] - b.theta_delta[k]);
      row.sup_error = std::max(row.sup_error, dth);
      double ds = dth;
      const auto sa = a.state(k);
      const auto sb = b.state(k);
      for (std::size_t j = 0; j < la.dimension; ++j) {
        if (j == la.angle) continue;  // same layout apart from the angle
        ds = std::max(ds, std::abs(sa[j] - sb[j]));
      }
      row.sup_state_error = std::max(row.sup_state_error, ds);
    }
    rows[i] = row;
  });
  return rows;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InsufficientData("loglog_slope needs at least two points");
  }
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// --------------------------------------------------------------------------
// Ideal low-pass filter error

struct IdealLpfError {
  double e1_max = 0.0;  // max |c1.x1 - cos(theta_delta)/2|
  double e2_max = 0.0;  // max |c2.x2 - sin(theta_delta)/2|
};

inline IdealLpfError ideal_lpf_error(const Trajectory& tr, double tail_fraction = 0.2) {
  if (!tr.has_lpf_outputs()) {
    throw ContractViolation("ideal_lpf_error needs a trajectory with low-pass filter outputs");
  }
  const std::size_t n = tr.size();
  const auto first = n - std::max<std::size_t>(
                             1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
  IdealLpfError e;
  for (std::size_t i = first; i < n; ++i) {
    const IdealLpfOutputs ideal = ideal_lpf_outputs(tr.theta_delta[i], 1.0);
    e.e1_max = std::max(e.e1_max, std::abs(tr.g1[i] - ideal.g1));
    e.e2_max = std::max(e.e2_max, std::abs(tr.g2[i] - ideal.g2));
  }
  return e;
}

// --------------------------------------------------------------------------
// Return map of the classic model on the section theta_delta = const

struct ReturnMapResult {
  bool captured = false;  // no crossing of theta_start + pi before the horizon
  double x_out = std::numeric_limits<double>::quiet_NaN();
};

/// Integrate the classic model from (x_in, theta_start) until theta_delta
/// reaches theta_start + pi (one rotation on the cylinder, phi has period pi)
/// and return the loop-filter state there. cfg.t_end is the horizon.
inline ReturnMapResult return_map(const LoopParams& p, double x_in, double theta_start,
                                  const IntegratorConfig& cfg) {
  if (p.loop_filter.order() != 1) {
    throw ContractViolation("return_map needs a scalar loop-filter state");
  }
  const double dir = p.omega_delta_free() >= 0.0 ? 1.0 : -1.0;
  const StateVector s0{x_in, theta_start};
  const SectionCrossing c = integrate_to_section(ModelKind::ClassicPhaseSpace, p, s0, cfg,
                                                 theta_start + dir * kPi, dir > 0 ? +1 : -1);
  ReturnMapResult r;
  r.captured = !c.crossed;
  if (c.crossed) r.x_out = c.state[0];
  return r;
}

enum class Stability { stable, unstable };

inline std::string_view to_string(Stability s) { return s == Stability::stable ? "stable" : "unstable"; }

struct LimitCycle {
  double fixed_point_x = 0.0;
  double multiplier = 0.0;
  Stability stability = Stability::unstable;
  double residual = 0.0;  // |P(x) - x| at the reported point
};

struct CycleReport {
  std::vector<LimitCycle> cycles;
  double section_angle = 0.0;

  [[nodiscard]] bool has_stable_unstable_pair() const {
    bool s = false, u = false;
    for (const auto& c : cycles) (c.stability == Stability::stable ? s : u) = true;
    return s && u;
  }
};

struct CycleSearchOptions {
  std::size_t grid_points = 64;
  double residual_tol = 1e-10;
  int max_bisections = 200;
};

/// Fixed points of the return map in [lo, hi]: scan a grid for sign changes
/// of P(x) - x between points where the map is defined, refine by bisection
/// and classify by the finite-difference multiplier.
inline CycleReport find_limit_cycles(const LoopParams& p, double lo, double hi, double theta_start,
                                     const IntegratorConfig& cfg, const CycleSearchOptions& opt = {}) {
  if (!(hi > lo)) throw ParameterError("find_limit_cycles: bracket must satisfy lo < hi");
  const std::size_t n = std::max<std::size_t>(opt.grid_points, 64);
  std::vector<double> xs(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  auto defect = [&](double x) {
    const ReturnMapResult r = return_map(p, x, theta_start, cfg);
    return r.captured ? std::numeric_limits<double>::quiet_NaN() : r.x_out - x;
  };
  parallel_for(n, [&](std::size_t i) { d[i] = defect(xs[i]); });

  std::vector<std::pair<double, double>> brackets;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::isfinite(d[i]) && std::isfinite(d[i + 1]) && (d[i] == 0.0 || d[i] * d[i + 1] < 0.0)) {
      brackets.emplace_back(xs[i], xs[i + 1]);
    }
  }
  CycleReport report;
  report.section_angle = theta_start;
  report.cycles.resize(brackets.size());
  parallel_for(brackets.size(), [&](std::size_t k) {
    double a = brackets[k].first, b = brackets[k].second;
    double da = defect(a);
    double x = a, dx = da;
    for (int it = 0; it < opt.max_bisections && std::abs(dx) >= opt.residual_tol; ++it) {
      x = 0.5 * (a + b);
      dx = defect(x);
      if (!std::isfinite(dx)) break;
      if ((dx < 0.0) == (da < 0.0)) {
        a = x;
        da = dx;
      } else {
        b = x;
      }
      if (b - a <= 4 * std::numeric_limits<double>::epsilon() * std::abs(x)) break;
    }
    const double h = 1e-6 * std::max(std::abs(x), 1e-6);
    const ReturnMapResult up = return_map(p, x + h, theta_start, cfg);
    const ReturnMapResult dn = return_map(p, x - h, theta_start, cfg);
    LimitCycle c;
    c.fixed_point_x = x;
    c.residual = std::abs(dx);
    c.multiplier = (up.captured || dn.captured) ? std::numeric_limits<double>::quiet_NaN()
                                                : (up.x_out - dn.x_out) / (2.0 * h);
    c.stability = std::abs(c.multiplier) < 1.0 ? Stability::stable : Stability::unstable;
    report.cycles[k] = c;
  });
  return report;
}

// --------------------------------------------------------------------------
// Pull-in probe with a hold-in by-product

struct Equilibrium {
  StateVector state;
  std::vector<std::complex<double>> eigenvalues;
  bool stable = false;
};

/// Equilibria of the classic model in one period of theta_delta, with the
/// Jacobian spectrum of each. Empty when omega_delta_free is outside the
/// range where phi(theta) can balance it.
inline std::vector<Equilibrium> classic_equilibria(const LoopParams& p) {
  const FilterSS& f = p.loop_filter;
  const auto n = static_cast<Eigen::Index>(f.order());
  const double wd = p.omega_delta_free();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(f.A());
  std::vector<std::pair<double, Eigen::VectorXd>> points;  // (theta, x)
  if (n == 0 || lu.isInvertible()) {
    // x = -A^{-1} b phi and wd = K phi with K = L (h - c A^{-1} b)
    const Eigen::VectorXd Ainv_b = n == 0 ? Eigen::VectorXd() : Eigen::VectorXd(lu.solve(f.b()));
    const double K = p.L * (f.h() - (n == 0 ? 0.0 : f.c().dot(Ainv_b)));
    const double phi = wd / K;
    if (!(std::abs(phi) <= 0.125)) return {};
    const double base = 0.5 * std::asin(8.0 * phi);
    for (double th : {base, 0.5 * kPi - base}) {
      points.emplace_back(th, n == 0 ? Eigen::VectorXd() : Eigen::VectorXd(-Ainv_b * phi));
    }
  } else if (n == 1 && f.A()(0, 0) == 0.0) {
    // perfect integrator: phi = 0 and c x = wd / L
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, wd / (p.L * f.c()[0]));
    points.emplace_back(0.0, x);
    points.emplace_back(0.5 * kPi, x);
  } else {
    return {};
  }
  std::vector<Equilibrium> out;
  for (const auto& [th, x] : points) {
    const double dphi = 0.25 * std::cos(2.0 * th);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n + 1, n + 1);
    if (n > 0) {
      J.topLeftCorner(n, n) = f.A();
      J.topRightCorner(n, 1) = f.b() * dphi;
      J.bottomLeftCorner(1, n) = -p.L * f.c().transpose();
    }
    J(n, n) = -p.L * f.h() * dphi;
    const Eigen::EigenSolver<Eigen::MatrixXd> es(J, false);
    Equilibrium e;
    e.state.assign(x.data(), x.data() + n);
    e.state.push_back(th);
    e.stable = true;
    for (Eigen::Index i = 0; i <= n; ++i) {
      e.eigenvalues.push_back(es.eigenvalues()[i]);
      if (!(es.eigenvalues()[i].real() < 0.0)) e.stable = false;
    }
    out.push_back(std::move(e));
  }
  return out;
}

struct PullinRow {
  double omega_delta = 0.0;
  bool all_lock = false;
  std::size_t runs = 0;
  std::size_t escapes = 0;
  bool hold_in = false;  // some equilibrium is locally asymptotically stable
};

/// For every frequency deviation, simulate the classic model from each
/// initial state; all_lock iff every run locks. Divergence counts as escape.
inline std::vector<PullinRow> pullin_probe(const LoopParams& base, const std::vector<double>& omega_delta_grid,
                                           const std::vector<StateVector>& ic_grid,
                                           const IntegratorConfig& cfg, const LockCriterion& crit = {}) {
  const std::size_t nw = omega_delta_grid.size();
  const std::size_t ni = ic_grid.size();
  std::vector<char> locked(nw * ni, 0);
  parallel_for(nw * ni, [&](std::size_t job) {
    LoopParams p = base;
    p.set_omega_delta_free(omega_delta_grid[job / ni]);
    try {
      const Trajectory tr = integrate(ModelKind::ClassicPhaseSpace, p, ic_grid[job % ni], cfg);
      locked[job] = detect_lock(tr, crit).locked ? 1 : 0;
    } catch (const IntegrationError&) {
      locked[job] = 0;
    }
  });
  std::vector<PullinRow> rows(nw);
  for (std::size_t w = 0; w < nw; ++w) {
    LoopParams p = base;
    p.set_omega_delta_free(omega_delta_grid[w]);
    PullinRow& r = rows[w];
    r.omega_delta = omega_delta_grid[w];
    r.runs = ni;
    for (std::size_t i = 0; i < ni; ++i) r.escapes += locked[w * ni + i] ? 0 : 1;
    r.all_lock = r.escapes == 0;
    for (const auto& e : classic_equilibria(p)) r.hold_in = r.hold_in || e.stable;
  }
  return rows;
}

}  // namespace costas

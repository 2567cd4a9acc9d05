#pragma once

// Explicit Runge-Kutta integration for the loop models.
//
// Steps never straddle a breakpoint: data-signal transitions and sample
// instants are hit exactly, so a piecewise-constant input is constant over
// every step (the system sees the step interval and evaluates m there).

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "costas_lab/errors.hpp"
#include "costas_lab/models.hpp"

namespace costas {

enum class Scheme { fixed_rk4, adaptive_dp45 };

inline std::string_view to_string(Scheme s) {
  return s == Scheme::fixed_rk4 ? "fixed_rk4" : "adaptive_dp45";
}

struct IntegratorConfig {
  Scheme scheme = Scheme::fixed_rk4;
  double dt = 1e-9;  // fixed_rk4 step
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  double t_end = 0.0;
  double sample_dt = 0.0;         // > 0: sample on this grid (hit exactly)
  std::size_t sample_stride = 1;  // used when sample_dt == 0: every n-th step

  /// Throws ParameterError whose message starts with the offending field name.
  void validate() const {
    auto bad = [](const std::string& what) { throw ParameterError(what); };
    if (scheme == Scheme::fixed_rk4 && !(dt > 0.0 && std::isfinite(dt))) bad("dt must be > 0");
    if (scheme == Scheme::adaptive_dp45) {
      if (!(rel_tol > 0.0)) bad("rel_tol must be > 0");
      if (!(abs_tol > 0.0)) bad("abs_tol must be > 0");
    }
    if (!(max_step > 0.0)) bad("max_step must be > 0");
    if (!(t_end > 0.0 && std::isfinite(t_end))) bad("t_end must be > 0");
    if (!(sample_dt >= 0.0 && std::isfinite(sample_dt))) bad("sample_dt must be >= 0");
    if (sample_stride == 0) bad("sample_stride must be positive");
  }
};

struct IntegrationStats {
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t rhs_evaluations = 0;
  std::size_t breakpoint_straddles = 0;  // steps whose interior contains an input transition
  double min_step = std::numeric_limits<double>::infinity();
  double max_step = 0.0;
};

/// An ODE system y' = f(t, y) evaluated on the step interval [t0, t1].
template <class S>
concept OdeSystem = requires(const S& s, double t, std::span<const double> y, std::span<double> dy) {
  { s.dimension() } -> std::convertible_to<std::size_t>;
  s(t, y, dy, t, t);
  { s.next_breakpoint(t) } -> std::convertible_to<double>;
};

/// Wraps f(t, y, dy) with no breakpoints.
template <class F>
class FunctionSystem {
 public:
  FunctionSystem(std::size_t dim, F f) : dim_(dim), f_(std::move(f)) {}
  [[nodiscard]] std::size_t dimension() const { return dim_; }
  void operator()(double t, std::span<const double> y, std::span<double> dy, double, double) const {
    f_(t, y, dy);
  }
  [[nodiscard]] double next_breakpoint(double) const {
    return std::numeric_limits<double>::infinity();
  }

 private:
  std::size_t dim_;
  F f_;
};

template <class F>
FunctionSystem<F> make_system(std::size_t dim, F f) {
  return FunctionSystem<F>(dim, std::move(f));
}

/// A loop model bound to its parameters. The data value is evaluated at the
/// step midpoint, so it is constant on each step.
class ModelSystem {
 public:
  ModelSystem(ModelKind kind, const LoopParams& p) : kind_(kind), p_(&p), dim_(layout(kind, p).dimension) {}

  [[nodiscard]] std::size_t dimension() const { return dim_; }
  [[nodiscard]] ModelKind kind() const { return kind_; }
  [[nodiscard]] const LoopParams& params() const { return *p_; }

  void operator()(double t, std::span<const double> y, std::span<double> dy, double t0, double t1) const {
    const double m = uses_data() ? p_->data(0.5 * (t0 + t1)) : 1.0;
    rhs(kind_, t, y, *p_, m, dy);
  }

  [[nodiscard]] double next_breakpoint(double t) const {
    return uses_data() ? p_->data.next_transition_after(t) : std::numeric_limits<double>::infinity();
  }

  /// Independent check that no transition lies strictly inside (t0, t1).
  [[nodiscard]] bool straddles(double t0, double t1) const {
    if (!uses_data()) return false;
    const double eps = 1e-6 * (t1 - t0);
    return p_->data.segment(t0 + eps) != p_->data.segment(t1 - eps);
  }

 private:
  [[nodiscard]] bool uses_data() const {
    return kind_ == ModelKind::SignalSpace && !p_->data.is_constant();
  }

  ModelKind kind_;
  const LoopParams* p_;
  std::size_t dim_;
};

namespace detail {

/// Scratch buffers for one integration run.
struct Workspace {
  explicit Workspace(std::size_t n) : k(7, std::vector<double>(n)), tmp(n), y5(n), err(n) {}
  std::vector<std::vector<double>> k;
  std::vector<double> tmp, y5, err;
};

template <OdeSystem Sys>
void rk4_step(const Sys& sys, double t, double h, std::span<const double> y, std::span<double> out,
              Workspace& w, IntegrationStats& st) {
  const std::size_t n = y.size();
  auto& k1 = w.k[0];
  auto& k2 = w.k[1];
  auto& k3 = w.k[2];
  auto& k4 = w.k[3];
  const double t1 = t + h;
  sys(t, y, k1, t, t1);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = y[i] + 0.5 * h * k1[i];
  sys(t + 0.5 * h, w.tmp, k2, t, t1);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = y[i] + 0.5 * h * k2[i];
  sys(t + 0.5 * h, w.tmp, k3, t, t1);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = y[i] + h * k3[i];
  sys(t1, w.tmp, k4, t, t1);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  st.rhs_evaluations += 4;
}

// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
// b - b_hat
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

/// One Dormand-Prince step; writes the 5th-order solution and returns the
/// scaled max-norm error estimate.
template <OdeSystem Sys>
double dp45_step(const Sys& sys, double t, double h, std::span<const double> y, std::span<double> out,
                 double rtol, double atol, Workspace& w, IntegrationStats& st) {
  const std::size_t n = y.size();
  auto& k = w.k;
  auto& tmp = w.tmp;
  const double t1 = t + h;
  sys(t, y, k[0], t, t1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k[0][i];
  sys(t + c2 * h, tmp, k[1], t, t1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k[0][i] + a32 * k[1][i]);
  sys(t + c3 * h, tmp, k[2], t, t1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i]);
  sys(t + c4 * h, tmp, k[3], t, t1);
  for (std::size_t i = 0; i < n; ++i)
    tmp[i] = y[i] + h * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i] + a54 * k[3][i]);
  sys(t + c5 * h, tmp, k[4], t, t1);
  for (std::size_t i = 0; i < n; ++i)
    tmp[i] = y[i] + h * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i] + a64 * k[3][i] + a65 * k[4][i]);
  sys(t1, tmp, k[5], t, t1);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = y[i] + h * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i] + b5 * k[4][i] + b6 * k[5][i]);
  sys(t1, out, k[6], t, t1);
  st.rhs_evaluations += 7;
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] +
                          e7 * k[6][i]);
    const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(out[i]));
    err = std::max(err, std::abs(e) / scale);
  }
  return err;
}

inline bool all_finite(std::span<const double> y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace detail

/// Step-level driver. `on_step(t0, y0, t1, y1)` is called after every accepted
/// step and returns false to stop. Returns the final time reached.
template <OdeSystem Sys, class OnStep>
double drive(const Sys& sys, std::span<const double> y0, const IntegratorConfig& cfg,
             const std::vector<double>& extra_breakpoints, IntegrationStats& st, OnStep&& on_step) {
  cfg.validate();
  const std::size_t n = sys.dimension();
  if (y0.size() != n) {
    throw ContractViolation("initial state has length " + std::to_string(y0.size()) + ", expected " +
                            std::to_string(n));
  }
  detail::Workspace w(n);
  std::vector<double> y(y0.begin(), y0.end()), y1(n);
  const double t_end = cfg.t_end;
  std::size_t next_extra = 0;

  // Breakpoints closer than `gap` are merged; the system's own (data
  // transitions) take precedence over sample instants.
  const double gap = 1e-12 * t_end;
  auto next_bp = [&](double t) {
    while (next_extra < extra_breakpoints.size() && extra_breakpoints[next_extra] <= t + gap) ++next_extra;
    double own = sys.next_breakpoint(t);
    if (own <= t + gap) own = sys.next_breakpoint(own);
    double bp = std::min(own, t_end);
    if (next_extra < extra_breakpoints.size() && extra_breakpoints[next_extra] < bp - gap) {
      bp = extra_breakpoints[next_extra];
    }
    return bp;
  };

  auto accept = [&](double t0, double t1) -> bool {
    if (!detail::all_finite(y1)) {
      throw IntegrationError(IntegrationError::Kind::divergence, t0,
                             "non-finite state after t = " + std::to_string(t0));
    }
    const double h = t1 - t0;
    ++st.accepted_steps;
    st.min_step = std::min(st.min_step, h);
    st.max_step = std::max(st.max_step, h);
    if constexpr (requires { sys.straddles(t0, t1); }) {
      if (sys.straddles(t0, t1)) ++st.breakpoint_straddles;
    }
    const bool go_on = on_step(t0, std::span<const double>(y), t1, std::span<const double>(y1));
    y.swap(y1);
    return go_on;
  };

  double t = 0.0;
  if (cfg.scheme == Scheme::fixed_rk4) {
    const double dt = std::min(cfg.dt, cfg.max_step);
    const double snap = 1e-6 * dt;
    long long k = 0;
    while (t < t_end) {
      const double grid = static_cast<double>(k + 1) * dt;
      const double bp = next_bp(t);
      double t1;
      if (bp < grid - snap) {
        t1 = bp;
      } else {
        t1 = (std::abs(bp - grid) <= snap) ? bp : grid;
        ++k;
      }
      if (t1 <= t) {  // grid point already passed through a breakpoint
        ++k;
        continue;
      }
      detail::rk4_step(sys, t, t1 - t, y, y1, w, st);
      if (!accept(t, t1)) return t1;
      t = t1;
    }
    return t;
  }

  // adaptive Dormand-Prince 5(4)
  const double h_min = 1e-15 * t_end;
  double h = std::min({cfg.max_step, 1e-3 * t_end});
  while (t < t_end) {
    const double bp = next_bp(t);
    double h_try = std::min(h, cfg.max_step);
    bool clipped = false;
    if (t + h_try >= bp - 1e-12 * h_try) {
      h_try = bp - t;
      clipped = true;
    }
    if (h_try < h_min) {
      throw IntegrationError(IntegrationError::Kind::step_underflow, t,
                             "adaptive step underflow at t = " + std::to_string(t));
    }
    const double err = detail::dp45_step(sys, t, h_try, y, y1, cfg.rel_tol, cfg.abs_tol, w, st);
    if (!std::isfinite(err) || err > 1.0) {
      ++st.rejected_steps;
      const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      h = h_try * fac;
      if (h < h_min) {
        throw IntegrationError(IntegrationError::Kind::step_underflow, t,
                               "adaptive step underflow at t = " + std::to_string(t));
      }
      continue;
    }
    const double t1 = clipped ? bp : t + h_try;
    if (!accept(t, t1)) return t1;
    t = t1;
    const double fac = err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
    // A step shortened to meet a breakpoint does not shrink the controller.
    h = clipped ? std::max(h, h_try * fac) : h_try * fac;
  }
  return t;
}

// --------------------------------------------------------------------------
// Trajectory

struct Trajectory {
  ModelKind kind = ModelKind::ClassicPhaseSpace;
  std::size_t dimension = 0;
  std::vector<double> times;
  std::vector<double> states;  // row-major, times.size() x dimension
  std::vector<double> g, g1, g2, theta_delta, omega2;  // g1/g2 empty for kinds without LPFs
  IntegrationStats stats;

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
  [[nodiscard]] bool has_lpf_outputs() const noexcept { return !g1.empty(); }
  [[nodiscard]] std::span<const double> state(std::size_t i) const {
    return std::span<const double>(states).subspan(i * dimension, dimension);
  }
  [[nodiscard]] std::span<const double> final_state() const { return state(size() - 1); }
};

/// Recompute derived signals from stored states.
inline void fill_derived(Trajectory& tr, const LoopParams& p) {
  const std::size_t m = tr.size();
  const bool lpf = has_lowpass_blocks(tr.kind);
  tr.g.resize(m);
  tr.theta_delta.resize(m);
  tr.omega2.resize(m);
  tr.g1.assign(lpf ? m : 0, 0.0);
  tr.g2.assign(lpf ? m : 0, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const DerivedSample d = derive(tr.kind, tr.times[i], tr.state(i), p);
    tr.g[i] = d.g;
    tr.theta_delta[i] = d.theta_delta;
    tr.omega2[i] = d.omega2;
    if (lpf) {
      tr.g1[i] = d.g1;
      tr.g2[i] = d.g2;
    }
  }
}

namespace detail {

inline std::vector<double> sample_grid(const IntegratorConfig& cfg) {
  std::vector<double> grid;
  if (cfg.sample_dt > 0.0) {
    const auto count = static_cast<std::size_t>(std::floor(cfg.t_end / cfg.sample_dt + 1e-9));
    grid.reserve(count);
    for (std::size_t j = 1; j <= count; ++j) {
      const double ts = static_cast<double>(j) * cfg.sample_dt;
      if (ts < cfg.t_end) grid.push_back(ts);
    }
  }
  return grid;
}

}  // namespace detail

/// Integrate a generic system, recording states on the sample grid (or every
/// sample_stride steps) plus t = 0 and t_end.
template <OdeSystem Sys>
Trajectory integrate_system(const Sys& sys, std::span<const double> y0, const IntegratorConfig& cfg) {
  cfg.validate();
  Trajectory tr;
  tr.dimension = sys.dimension();
  const auto grid = detail::sample_grid(cfg);
  const std::size_t expected = cfg.sample_dt > 0.0 ? grid.size() + 2 : 1024;
  tr.times.reserve(expected);
  tr.states.reserve(expected * tr.dimension);
  auto record = [&](double t, std::span<const double> y) {
    tr.times.push_back(t);
    tr.states.insert(tr.states.end(), y.begin(), y.end());
  };
  record(0.0, y0);
  std::size_t gi = 0;
  std::size_t since = 0;
  drive(sys, y0, cfg, grid, tr.stats,
        [&](double, std::span<const double>, double t1, std::span<const double> y1) {
          bool take = false;
          if (cfg.sample_dt > 0.0) {
            while (gi < grid.size() && grid[gi] < t1 - 1e-9 * (t1 > 0 ? t1 : 1.0)) ++gi;
            if (gi < grid.size() && std::abs(grid[gi] - t1) <= 1e-9 * t1) {
              take = true;
              ++gi;
            }
          } else if (++since >= cfg.sample_stride) {
            take = true;
            since = 0;
          }
          if (t1 >= cfg.t_end) take = true;
          if (take && t1 > tr.times.back()) record(t1, y1);
          return true;
        });
  return tr;
}

/// Integrate a loop model over [0, t_end].
inline Trajectory integrate(ModelKind kind, const LoopParams& p, std::span<const double> s0,
                            const IntegratorConfig& cfg) {
  p.validate();
  check_layout(kind, p, s0.size());
  const ModelSystem sys(kind, p);
  Trajectory tr = integrate_system(sys, s0, cfg);
  tr.kind = kind;
  fill_derived(tr, p);
  return tr;
}

// --------------------------------------------------------------------------
// Section crossing

struct SectionCrossing {
  bool crossed = false;
  double time = 0.0;
  StateVector state;  // at the crossing, or at t_end when not crossed
};

/// Integrate the classic model until theta_delta crosses theta_star in the
/// given direction (+1 increasing, -1 decreasing). The crossing is localized by
/// bisection on the length of the last step to |theta_delta - theta_star| < 1e-10.
inline SectionCrossing integrate_to_section(ModelKind kind, const LoopParams& p,
                                            std::span<const double> s0, const IntegratorConfig& cfg,
                                            double theta_star, int direction = +1) {
  if (kind != ModelKind::ClassicPhaseSpace) {
    throw ContractViolation("integrate_to_section requires the classic phase-space model");
  }
  p.validate();
  check_layout(kind, p, s0.size());
  const ModelSystem sys(kind, p);
  const std::size_t ai = layout(kind, p).angle;
  const double dir = direction >= 0 ? 1.0 : -1.0;
  SectionCrossing out;
  IntegrationStats st;
  detail::Workspace w(sys.dimension());
  std::vector<double> trial(sys.dimension());
  std::vector<double> last(s0.begin(), s0.end());

  auto single_step = [&](double t0, std::span<const double> y0, double h) {
    if (cfg.scheme == Scheme::fixed_rk4) {
      detail::rk4_step(sys, t0, h, y0, trial, w, st);
    } else {
      (void)detail::dp45_step(sys, t0, h, y0, trial, cfg.rel_tol, cfg.abs_tol, w, st);
    }
    return dir * (trial[ai] - theta_star);
  };

  const double t_final = drive(
      sys, s0, cfg, {}, st,
      [&](double t0, std::span<const double> y0, double t1, std::span<const double> y1) {
        const double f0 = dir * (y0[ai] - theta_star);
        const double f1 = dir * (y1[ai] - theta_star);
        last.assign(y1.begin(), y1.end());
        if (!(f0 < 0.0 && f1 >= 0.0)) return true;
        double lo = 0.0, hi = t1 - t0;
        std::vector<double> best(y1.begin(), y1.end());
        double best_t = t1;
        if (std::abs(f1) >= 1e-10) {
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = single_step(t0, y0, mid);
            if (fm >= 0.0) {
              hi = mid;
              best = trial;
              best_t = t0 + mid;
            } else {
              lo = mid;
            }
            if (std::abs(fm) < 1e-10) {
              best = trial;
              best_t = t0 + mid;
              break;
            }
          }
        }
        out.crossed = true;
        out.time = best_t;
        out.state = std::move(best);
        return false;
      });
  if (!out.crossed) {
    out.time = t_final;
    out.state = std::move(last);
  }
  return out;
}

}  // namespace costas

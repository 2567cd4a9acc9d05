#pragma once

// Right-hand sides of the BPSK Costas loop model hierarchy.
//
// All angles are unwrapped reals. theta_delta = theta1 - theta2, where
// theta1(t) = omega1 t + theta1_0 is the carrier phase and theta2 the VCO phase.
//
//   SignalSpace            (x1, x2, x, theta2)       full loop with data m(t)
//   SimplifiedSignalSpace  (x1, x2, x, theta_delta)  m == 1, written in theta_delta
//   PhaseSpace             (x1, x2, x, theta_delta)  fast terms averaged out
//   ClassicPhaseSpace      (x, theta_delta)          ideal low-pass filters
//   ModifiedSignalSpace    (x, theta2)               loop filter fed by the raw mixer product

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "costas_lab/errors.hpp"
#include "costas_lab/filters.hpp"

namespace costas {

using StateVector = std::vector<double>;

inline constexpr double kPi = std::numbers::pi;

// --------------------------------------------------------------------------
// Data signal

class DataSignal {
 public:
  enum class Kind { constant_one, periodic_square };

  static DataSignal constant_one() { return DataSignal{}; }

  /// m(t) = sign(sin(omega_m t)) with sign(0) = +1. Transitions at t_k = k pi / omega_m.
  static DataSignal periodic_square(double omega_m) {
    if (!(omega_m > 0.0) || !std::isfinite(omega_m)) {
      throw ParameterError("periodic_square: omega_m must be positive");
    }
    DataSignal d;
    d.kind_ = Kind::periodic_square;
    d.omega_m_ = omega_m;
    return d;
  }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] double omega_m() const noexcept { return omega_m_; }
  [[nodiscard]] bool is_constant() const noexcept { return kind_ == Kind::constant_one; }

  /// Index k of the half-period [t_k, t_{k+1}) containing t.
  [[nodiscard]] long long segment(double t) const {
    return static_cast<long long>(std::floor(t * omega_m_ / kPi));
  }

  [[nodiscard]] double transition_time(long long k) const {
    return static_cast<double>(k) * kPi / omega_m_;
  }

  [[nodiscard]] double operator()(double t) const {
    if (kind_ == Kind::constant_one) return 1.0;
    const long long k = segment(t);
    return (k % 2 == 0) ? 1.0 : -1.0;
  }

  /// First transition strictly after t (+inf for constant data).
  [[nodiscard]] double next_transition_after(double t) const {
    if (kind_ == Kind::constant_one) return std::numeric_limits<double>::infinity();
    long long k = segment(t) + 1;
    double tk = transition_time(k);
    while (tk <= t) tk = transition_time(++k);
    return tk;
  }

 private:
  Kind kind_ = Kind::constant_one;
  double omega_m_ = 0.0;
};

// --------------------------------------------------------------------------
// Parameters

struct LoopParams {
  FilterSS lpf1;
  FilterSS lpf2;
  FilterSS loop_filter;
  double L = 0.0;            // VCO gain, rad/(s V)
  double omega2_free = 0.0;  // rad/s
  double omega1 = 0.0;       // carrier, rad/s
  double theta1_0 = 0.0;     // rad
  DataSignal data = DataSignal::constant_one();

  [[nodiscard]] double omega_delta_free() const noexcept { return omega1 - omega2_free; }

  void set_omega_delta_free(double wd) noexcept { omega2_free = omega1 - wd; }

  [[nodiscard]] double carrier_phase(double t) const noexcept { return omega1 * t + theta1_0; }

  void validate() const {
    if (!(omega1 > 0.0) || !std::isfinite(omega1)) throw ParameterError("omega1 must be positive");
    if (!(L > 0.0) || !std::isfinite(L)) throw ParameterError("L must be positive");
    if (!std::isfinite(omega2_free)) throw ParameterError("omega2_free must be finite");
    if (!std::isfinite(theta1_0)) throw ParameterError("theta1_0 must be finite");
  }
};

// --------------------------------------------------------------------------
// Model kinds and state layout

enum class ModelKind {
  SignalSpace,
  SimplifiedSignalSpace,
  PhaseSpace,
  ClassicPhaseSpace,
  ModifiedSignalSpace,
};

inline constexpr std::array<ModelKind, 5> kAllModelKinds = {
    ModelKind::SignalSpace, ModelKind::SimplifiedSignalSpace, ModelKind::PhaseSpace,
    ModelKind::ClassicPhaseSpace, ModelKind::ModifiedSignalSpace};

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::SignalSpace: return "signal_space";
    case ModelKind::SimplifiedSignalSpace: return "simplified_signal_space";
    case ModelKind::PhaseSpace: return "phase_space";
    case ModelKind::ClassicPhaseSpace: return "classic_phase_space";
    case ModelKind::ModifiedSignalSpace: return "modified_signal_space";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (ModelKind k : kAllModelKinds) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

/// True for kinds carrying LPF1/LPF2 states.
inline bool has_lowpass_blocks(ModelKind k) {
  return k == ModelKind::SignalSpace || k == ModelKind::SimplifiedSignalSpace ||
         k == ModelKind::PhaseSpace;
}

/// True when the angle component is the VCO phase theta2 rather than theta_delta.
inline bool angle_is_vco_phase(ModelKind k) {
  return k == ModelKind::SignalSpace || k == ModelKind::ModifiedSignalSpace;
}

/// Kinds whose right-hand side depends explicitly on time.
inline bool is_time_dependent(ModelKind k) {
  return k == ModelKind::SignalSpace || k == ModelKind::SimplifiedSignalSpace ||
         k == ModelKind::ModifiedSignalSpace;
}

struct StateLayout {
  std::size_t n1 = 0, n2 = 0, n = 0;
  std::size_t x1 = 0, x2 = 0, x = 0, angle = 0;
  std::size_t dimension = 0;
};

inline StateLayout layout(ModelKind kind, const LoopParams& p) {
  StateLayout l;
  l.n = p.loop_filter.order();
  if (has_lowpass_blocks(kind)) {
    l.n1 = p.lpf1.order();
    l.n2 = p.lpf2.order();
  }
  l.x1 = 0;
  l.x2 = l.n1;
  l.x = l.n1 + l.n2;
  l.angle = l.x + l.n;
  l.dimension = l.angle + 1;
  return l;
}

inline void check_layout(ModelKind kind, const LoopParams& p, std::size_t size) {
  const auto d = layout(kind, p).dimension;
  if (size != d) {
    throw ContractViolation(std::string(to_string(kind)) + ": state has length " +
                            std::to_string(size) + ", expected " + std::to_string(d));
  }
}

/// Initial data by name. Filter blocks default to zero; theta_delta(0) defaults
/// to 0, so theta2(0) = theta1(0).
struct InitialConditions {
  std::vector<double> x1;
  std::vector<double> x2;
  std::vector<double> x;
  double theta_delta = 0.0;
};

inline StateVector make_state(ModelKind kind, const LoopParams& p, const InitialConditions& ic) {
  const StateLayout l = layout(kind, p);
  StateVector s(l.dimension, 0.0);
  auto fill = [&](const std::vector<double>& v, std::size_t off, std::size_t n, const char* name) {
    if (v.empty()) return;
    if (v.size() != n) {
      throw ContractViolation(std::string("initial ") + name + " has length " +
                              std::to_string(v.size()) + ", expected " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) s[off + i] = v[i];
  };
  if (has_lowpass_blocks(kind)) {
    fill(ic.x1, l.x1, l.n1, "x1");
    fill(ic.x2, l.x2, l.n2, "x2");
  }
  fill(ic.x, l.x, l.n, "x");
  s[l.angle] = angle_is_vco_phase(kind) ? p.theta1_0 - ic.theta_delta : ic.theta_delta;
  return s;
}

// --------------------------------------------------------------------------
// Phase detector

/// phi(theta) = sin(2 theta) / 8.
inline double pd_characteristic(double theta_delta) { return 0.125 * std::sin(2.0 * theta_delta); }

struct IdealLpfOutputs {
  double g1;
  double g2;
};

/// Ideal low-pass outputs g1 = m cos(theta)/2, g2 = m sin(theta)/2.
inline IdealLpfOutputs ideal_lpf_outputs(double theta_delta, double m) {
  return {0.5 * m * std::cos(theta_delta), 0.5 * m * std::sin(theta_delta)};
}

// --------------------------------------------------------------------------
// Right-hand sides

namespace detail {

struct Blocks {
  std::span<const double> x1, x2, x;
  double angle;
};

inline Blocks split(const StateLayout& l, std::span<const double> s) {
  return {s.subspan(l.x1, l.n1), s.subspan(l.x2, l.n2), s.subspan(l.x, l.n), s[l.angle]};
}

}  // namespace detail

/// Signal-space model with an explicit data value m. The public entry points
/// below evaluate m = p.data(t); the integrator holds m fixed on each step.
inline void rhs_signal_space_with_data(double t, std::span<const double> s, const LoopParams& p,
                                       double m, std::span<double> ds) {
  const StateLayout l = layout(ModelKind::SignalSpace, p);
  check_layout(ModelKind::SignalSpace, p, s.size());
  const auto b = detail::split(l, s);
  const double theta2 = b.angle;
  const double carrier = m * std::sin(p.carrier_phase(t));
  p.lpf1.derivative(b.x1, carrier * std::sin(theta2), ds.subspan(l.x1, l.n1));
  p.lpf2.derivative(b.x2, carrier * std::cos(theta2), ds.subspan(l.x2, l.n2));
  const double phi = p.lpf1.state_output(b.x1) * p.lpf2.state_output(b.x2);
  p.loop_filter.derivative(b.x, phi, ds.subspan(l.x, l.n));
  const double g = p.loop_filter.state_output(b.x) + p.loop_filter.h() * phi;
  ds[l.angle] = p.omega2_free + p.L * g;
}

inline void rhs_signal_space(double t, std::span<const double> s, const LoopParams& p,
                             std::span<double> ds) {
  rhs_signal_space_with_data(t, s, p, p.data(t), ds);
}

/// m == 1; the data field of p is not consulted.
inline void rhs_simplified_signal(double t, std::span<const double> s, const LoopParams& p,
                                  std::span<double> ds) {
  const StateLayout l = layout(ModelKind::SimplifiedSignalSpace, p);
  check_layout(ModelKind::SimplifiedSignalSpace, p, s.size());
  const auto b = detail::split(l, s);
  const double a = p.carrier_phase(t);
  const double carrier = std::sin(a);
  const double vco = a - b.angle;  // theta2 = theta1 - theta_delta
  p.lpf1.derivative(b.x1, carrier * std::sin(vco), ds.subspan(l.x1, l.n1));
  p.lpf2.derivative(b.x2, carrier * std::cos(vco), ds.subspan(l.x2, l.n2));
  const double phi = p.lpf1.state_output(b.x1) * p.lpf2.state_output(b.x2);
  p.loop_filter.derivative(b.x, phi, ds.subspan(l.x, l.n));
  const double g = p.loop_filter.state_output(b.x) + p.loop_filter.h() * phi;
  ds[l.angle] = p.omega_delta_free() - p.L * g;
}

inline void rhs_phase_space(std::span<const double> s, const LoopParams& p, std::span<double> ds) {
  const StateLayout l = layout(ModelKind::PhaseSpace, p);
  check_layout(ModelKind::PhaseSpace, p, s.size());
  const auto b = detail::split(l, s);
  p.lpf1.derivative(b.x1, 0.5 * std::cos(b.angle), ds.subspan(l.x1, l.n1));
  p.lpf2.derivative(b.x2, 0.5 * std::sin(b.angle), ds.subspan(l.x2, l.n2));
  const double phi = p.lpf1.state_output(b.x1) * p.lpf2.state_output(b.x2);
  p.loop_filter.derivative(b.x, phi, ds.subspan(l.x, l.n));
  const double g = p.loop_filter.state_output(b.x) + p.loop_filter.h() * phi;
  ds[l.angle] = p.omega_delta_free() - p.L * g;
}

inline void rhs_classic(std::span<const double> s, const LoopParams& p, std::span<double> ds) {
  const StateLayout l = layout(ModelKind::ClassicPhaseSpace, p);
  check_layout(ModelKind::ClassicPhaseSpace, p, s.size());
  const auto x = s.subspan(l.x, l.n);
  const double phi = pd_characteristic(s[l.angle]);
  p.loop_filter.derivative(x, phi, ds.subspan(l.x, l.n));
  const double g = p.loop_filter.state_output(x) + p.loop_filter.h() * phi;
  ds[l.angle] = p.omega_delta_free() - p.L * g;
}

/// Mixer product driving the modified loop: sin^2(theta1) sin(theta2) cos(theta2).
inline double modified_loop_input(double theta1, double theta2) {
  const double s1 = std::sin(theta1);
  return s1 * s1 * std::sin(theta2) * std::cos(theta2);
}

/// The data signal cancels (m^2 = 1) and is not consulted.
inline void rhs_modified_signal(double t, std::span<const double> s, const LoopParams& p,
                                std::span<double> ds) {
  const StateLayout l = layout(ModelKind::ModifiedSignalSpace, p);
  check_layout(ModelKind::ModifiedSignalSpace, p, s.size());
  const auto x = s.subspan(l.x, l.n);
  const double phi = modified_loop_input(p.carrier_phase(t), s[l.angle]);
  p.loop_filter.derivative(x, phi, ds.subspan(l.x, l.n));
  const double g = p.loop_filter.state_output(x) + p.loop_filter.h() * phi;
  ds[l.angle] = p.omega2_free + p.L * g;
}

/// Dispatch by kind; `m` is the data value used by SignalSpace.
inline void rhs(ModelKind kind, double t, std::span<const double> s, const LoopParams& p, double m,
                std::span<double> ds) {
  switch (kind) {
    case ModelKind::SignalSpace: rhs_signal_space_with_data(t, s, p, m, ds); return;
    case ModelKind::SimplifiedSignalSpace: rhs_simplified_signal(t, s, p, ds); return;
    case ModelKind::PhaseSpace: rhs_phase_space(s, p, ds); return;
    case ModelKind::ClassicPhaseSpace: rhs_classic(s, p, ds); return;
    case ModelKind::ModifiedSignalSpace: rhs_modified_signal(t, s, p, ds); return;
  }
}

// --------------------------------------------------------------------------
// Derived quantities

/// Loop filter input phi for a state (data value m applies to SignalSpace only
/// through the filter states, so it is not needed here).
inline double loop_filter_input(ModelKind kind, double t, std::span<const double> s,
                                const LoopParams& p) {
  const StateLayout l = layout(kind, p);
  switch (kind) {
    case ModelKind::SignalSpace:
    case ModelKind::SimplifiedSignalSpace:
    case ModelKind::PhaseSpace:
      return p.lpf1.state_output(s.subspan(l.x1, l.n1)) * p.lpf2.state_output(s.subspan(l.x2, l.n2));
    case ModelKind::ClassicPhaseSpace: return pd_characteristic(s[l.angle]);
    case ModelKind::ModifiedSignalSpace: return modified_loop_input(p.carrier_phase(t), s[l.angle]);
  }
  return 0.0;
}

struct DerivedSample {
  double g = 0.0;
  double g1 = std::numeric_limits<double>::quiet_NaN();  // NaN when the kind has no LPF blocks
  double g2 = std::numeric_limits<double>::quiet_NaN();
  double theta_delta = 0.0;
  double omega2 = 0.0;
};

inline DerivedSample derive(ModelKind kind, double t, std::span<const double> s, const LoopParams& p) {
  check_layout(kind, p, s.size());
  const StateLayout l = layout(kind, p);
  DerivedSample d;
  if (has_lowpass_blocks(kind)) {
    d.g1 = p.lpf1.state_output(s.subspan(l.x1, l.n1));
    d.g2 = p.lpf2.state_output(s.subspan(l.x2, l.n2));
  }
  const double phi = loop_filter_input(kind, t, s, p);
  d.g = p.loop_filter.state_output(s.subspan(l.x, l.n)) + p.loop_filter.h() * phi;
  d.theta_delta = angle_is_vco_phase(kind) ? p.carrier_phase(t) - s[l.angle] : s[l.angle];
  d.omega2 = p.omega2_free + p.L * d.g;
  return d;
}

/// Initial frequency difference omega_delta(0) = omega_delta_free - L c.x(0) - L h phi(0),
/// with phi(0) the loop-filter input at t = 0 (the LPF output product for
/// four-block kinds, pd_characteristic(theta_delta(0)) for the classic kind).
inline double initial_frequency_difference(ModelKind kind, const LoopParams& p,
                                           std::span<const double> s0) {
  check_layout(kind, p, s0.size());
  const StateLayout l = layout(kind, p);
  const double phi = loop_filter_input(kind, 0.0, s0, p);
  return p.omega_delta_free() - p.L * p.loop_filter.state_output(s0.subspan(l.x, l.n)) -
         p.L * p.loop_filter.h() * phi;
}

/// Reduce an angle to [-period/2, period/2).
inline double wrap_angle(double theta, double period = kPi) {
  double r = std::fmod(theta + 0.5 * period, period);
  if (r < 0.0) r += period;
  return r - 0.5 * period;
}

}  // namespace costas

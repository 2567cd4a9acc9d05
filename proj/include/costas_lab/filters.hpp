#pragma once

// Linear SISO filters in state-space form:
//
//   x' = A x + b u,   y = c.x + h u
//
// Low-pass filters must be strictly stable; the loop filter may be marginally
// stable (A = 0 is a perfect integrator).

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "costas_lab/errors.hpp"

namespace costas {

class FilterSS {
 public:
  FilterSS() = default;

  FilterSS(Eigen::MatrixXd A, Eigen::VectorXd b, Eigen::VectorXd c, double h,
           bool requires_stable)
      : A_(std::move(A)), b_(std::move(b)), c_(std::move(c)), h_(h),
        requires_stable_(requires_stable) {
    const auto n = A_.rows();
    if (A_.cols() != n || b_.size() != n || c_.size() != n) {
      throw ParameterError("FilterSS: inconsistent dimensions of A, b, c");
    }
    if (!A_.allFinite() || !b_.allFinite() || !c_.allFinite() || !std::isfinite(h_)) {
      throw ParameterError("FilterSS: non-finite coefficient");
    }
    if (requires_stable_ && n > 0) {
      const double abscissa = spectral_abscissa();
      if (!(abscissa < 0.0)) {
        throw ParameterError("FilterSS: A is not Hurwitz (max Re(lambda) = " +
                             std::to_string(abscissa) + ")");
      }
    }
  }

  [[nodiscard]] const Eigen::MatrixXd& A() const noexcept { return A_; }
  [[nodiscard]] const Eigen::VectorXd& b() const noexcept { return b_; }
  [[nodiscard]] const Eigen::VectorXd& c() const noexcept { return c_; }
  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] std::size_t order() const noexcept { return static_cast<std::size_t>(A_.rows()); }
  [[nodiscard]] bool requires_stable() const noexcept { return requires_stable_; }

  /// Largest real part of the eigenvalues of A (-inf for n = 0).
  [[nodiscard]] double spectral_abscissa() const {
    if (A_.rows() == 0) return -std::numeric_limits<double>::infinity();
    const Eigen::EigenSolver<Eigen::MatrixXd> es(A_, /*computeEigenvectors=*/false);
    return es.eigenvalues().real().maxCoeff();
  }

  /// c.x, the state contribution to the output.
  [[nodiscard]] double state_output(std::span<const double> x) const {
    check_state(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += c_[static_cast<Eigen::Index>(i)] * x[i];
    return acc;
  }

  /// dx = A x + b u, written into `dx`. No allocation; used in model RHS.
  void derivative(std::span<const double> x, double u, std::span<double> dx) const {
    const auto n = static_cast<Eigen::Index>(x.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = b_[i] * u;
      for (Eigen::Index j = 0; j < n; ++j) acc += A_(i, j) * x[static_cast<std::size_t>(j)];
      dx[static_cast<std::size_t>(i)] = acc;
    }
  }

  void check_state(std::span<const double> x) const {
    if (x.size() != order()) {
      throw ContractViolation("filter state has length " + std::to_string(x.size()) +
                              ", expected " + std::to_string(order()));
    }
  }

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  Eigen::VectorXd c_;
  double h_ = 0.0;
  bool requires_stable_ = false;
};

/// First-order lag dc_gain / (s/omega3 + 1): A = -omega3, b = 1, c = dc_gain*omega3, h = 0.
inline FilterSS make_first_order_lowpass(double omega3, double dc_gain = 1.0) {
  if (!(omega3 > 0.0) || !std::isfinite(omega3)) {
    throw ParameterError("lowpass: omega3 must be positive, got " + std::to_string(omega3));
  }
  if (!(dc_gain > 0.0) || !std::isfinite(dc_gain)) {
    throw ParameterError("lowpass: dc_gain must be positive, got " + std::to_string(dc_gain));
  }
  return FilterSS(Eigen::MatrixXd::Constant(1, 1, -omega3), Eigen::VectorXd::Ones(1),
                  Eigen::VectorXd::Constant(1, dc_gain * omega3), 0.0, true);
}

/// Proportional-integral filter (tau2 s + 1) / (tau1 s): A = 0, b = 1, c = 1/tau1, h = tau2/tau1.
inline FilterSS make_pi_loop_filter(double tau1, double tau2) {
  if (!(tau1 > 0.0) || !std::isfinite(tau1)) {
    throw ParameterError("pi filter: tau1 must be positive, got " + std::to_string(tau1));
  }
  if (!(tau2 >= 0.0) || !std::isfinite(tau2)) {
    throw ParameterError("pi filter: tau2 must be non-negative, got " + std::to_string(tau2));
  }
  return FilterSS(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1),
                  Eigen::VectorXd::Constant(1, 1.0 / tau1), tau2 / tau1, false);
}

/// Lead-lag filter (1 + tau2 s) / (1 + tau1 s) with unit DC gain:
/// A = -1/tau1, b = 1, c = (1 - tau2/tau1)/tau1, h = tau2/tau1.
inline FilterSS make_lead_lag_filter(double tau1, double tau2) {
  if (!(tau1 > 0.0) || !std::isfinite(tau1)) {
    throw ParameterError("lead-lag: tau1 must be positive, got " + std::to_string(tau1));
  }
  if (!(tau2 >= 0.0) || !std::isfinite(tau2)) {
    throw ParameterError("lead-lag: tau2 must be non-negative, got " + std::to_string(tau2));
  }
  const double r = tau2 / tau1;
  return FilterSS(Eigen::MatrixXd::Constant(1, 1, -1.0 / tau1), Eigen::VectorXd::Ones(1),
                  Eigen::VectorXd::Constant(1, (1.0 - r) / tau1), r, true);
}

/// Output c.x + h u.
inline double filter_output(const FilterSS& f, std::span<const double> x, double u) {
  return f.state_output(x) + f.h() * u;
}

namespace detail {

inline Eigen::MatrixXd expm(const Eigen::MatrixXd& M) {
  if (M.rows() == 1) return Eigen::MatrixXd::Constant(1, 1, std::exp(M(0, 0)));
  return M.exp();
}

}  // namespace detail

/// Zero-input response c exp(A t) x0.
inline double zero_input_response(const FilterSS& f, std::span<const double> x0, double t) {
  f.check_state(x0);
  if (f.order() == 0) return 0.0;
  const Eigen::Map<const Eigen::VectorXd> x(x0.data(), static_cast<Eigen::Index>(x0.size()));
  return f.c().dot(detail::expm(f.A() * t) * x);
}

/// Impulse response c exp(A t) b of the dynamic part. The feedthrough h is
/// not included; it acts through filter_output.
inline double impulse_response(const FilterSS& f, double t) {
  if (f.order() == 0) return 0.0;
  return f.c().dot(detail::expm(f.A() * t) * f.b());
}

/// Unit-step response from zero state: h + int_0^t c exp(A s) b ds.
/// The integral comes from the exponential of the augmented matrix [[A, b], [0, 0]],
/// which stays valid for singular A.
inline double step_response(const FilterSS& f, double t) {
  const auto n = static_cast<Eigen::Index>(f.order());
  if (n == 0) return f.h();
  if (n == 1) {
    const double a = f.A()(0, 0);
    const double cb = f.c()[0] * f.b()[0];
    const double integral = (a == 0.0) ? t : std::expm1(a * t) / a;
    return f.h() + cb * integral;
  }
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + 1, n + 1);
  M.topLeftCorner(n, n) = f.A() * t;
  M.topRightCorner(n, 1) = f.b() * t;
  const Eigen::MatrixXd E = M.exp();
  return f.h() + f.c().dot(E.col(n).head(n));
}

}  // namespace costas

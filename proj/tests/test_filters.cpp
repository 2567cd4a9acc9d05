#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "costas_lab/filters.hpp"
#include "costas_lab/integrators.hpp"

using namespace costas;

namespace {

constexpr double kOmega3 = 1.2566e6;
constexpr double kTau1 = 2e-5;
constexpr double kTau2 = 3.9789e-6;

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Lowpass, StateSpaceCoefficients) {
  const FilterSS f = make_first_order_lowpass(kOmega3);
  EXPECT_EQ(f.order(), 1u);
  EXPECT_DOUBLE_EQ(f.A()(0, 0), -kOmega3);
  EXPECT_DOUBLE_EQ(f.b()[0], 1.0);
  EXPECT_DOUBLE_EQ(f.c()[0], kOmega3);
  EXPECT_DOUBLE_EQ(f.h(), 0.0);
  EXPECT_TRUE(f.requires_stable());
}

TEST(Lowpass, DcGainTwoVariant) {
  const FilterSS f = make_first_order_lowpass(kOmega3, 2.0);
  // DC gain of c (sI - A)^-1 b + h at s = 0
  EXPECT_NEAR(-f.c()[0] * f.b()[0] / f.A()(0, 0) + f.h(), 2.0, 1e-15);
  EXPECT_NEAR(step_response(f, 50.0 / kOmega3), 2.0, 1e-12);
}

TEST(Lowpass, RejectsBadParameters) {
  EXPECT_THROW(make_first_order_lowpass(0.0), ParameterError);
  EXPECT_THROW(make_first_order_lowpass(-1.0), ParameterError);
  EXPECT_THROW(make_first_order_lowpass(1.0, 0.0), ParameterError);
}

TEST(Lowpass, UnitLagImpulseResponse) {
  const FilterSS f = make_first_order_lowpass(1.0);
  for (double t : {0.0, 0.5, 1.0, 3.0}) EXPECT_NEAR(impulse_response(f, t), std::exp(-t), 1e-15);
}

TEST(Lowpass, ImpulseResponseMatchesExponential) {
  const FilterSS f = make_first_order_lowpass(kOmega3);
  for (int i = 0; i <= 1000; ++i) {
    const double t = 10.0 / kOmega3 * i / 1000.0;
    EXPECT_LT(rel_err(impulse_response(f, t), kOmega3 * std::exp(-kOmega3 * t)), 1e-12) << t;
  }
  EXPECT_DOUBLE_EQ(impulse_response(f, 0.0), kOmega3);
  EXPECT_LT(rel_err(impulse_response(f, 1.0 / kOmega3), kOmega3 * std::exp(-1.0)), 1e-12);
}

TEST(PiFilter, Coefficients) {
  const FilterSS f = make_pi_loop_filter(kTau1, kTau2);
  EXPECT_DOUBLE_EQ(f.A()(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(f.b()[0], 1.0);
  EXPECT_NEAR(f.c()[0], 5e4, 1e-9);
  EXPECT_NEAR(f.h(), 0.198945, 1e-12);
  EXPECT_FALSE(f.requires_stable());
}

TEST(PiFilter, RejectsBadTimeConstants) {
  EXPECT_THROW(make_pi_loop_filter(0.0, 1.0), ParameterError);
  EXPECT_THROW(make_pi_loop_filter(-1.0, 1.0), ParameterError);
  EXPECT_THROW(make_pi_loop_filter(1.0, -1.0), ParameterError);
}

TEST(PiFilter, StepResponseIsAffine) {
  const FilterSS f = make_pi_loop_filter(kTau1, kTau2);
  EXPECT_LT(rel_err(step_response(f, 1e-5), 0.198945 + 0.5), 1e-12);
  EXPECT_DOUBLE_EQ(step_response(f, 0.0), f.h());
}

TEST(PiFilter, PureIntegratorWithoutProportionalPath) {
  const FilterSS f = make_pi_loop_filter(1.0, 0.0);
  EXPECT_DOUBLE_EQ(f.h(), 0.0);
  EXPECT_DOUBLE_EQ(step_response(f, 2.5), 2.5);
}

TEST(PiFilter, ImpulseResponseIsConstant) {
  const FilterSS f = make_pi_loop_filter(kTau1, kTau2);
  for (double t : {0.0, 1e-6, 1e-3, 1.0}) EXPECT_NEAR(impulse_response(f, t), 5e4, 1e-9);
}

TEST(FilterOutput, Evaluation) {
  const std::vector<double> zero{0.0};
  EXPECT_NEAR(filter_output(make_pi_loop_filter(kTau1, kTau2), zero, 1.0), 0.198945, 1e-12);
  EXPECT_EQ(filter_output(make_pi_loop_filter(kTau1, kTau2), zero, 0.0), 0.0);
  EXPECT_EQ(filter_output(make_first_order_lowpass(kOmega3), zero, 0.0), 0.0);
  const std::vector<double> x{0.02};
  EXPECT_NEAR(filter_output(make_first_order_lowpass(kOmega3), x, 0.0), 25132.0, 1e-9);
}

TEST(FilterOutput, DimensionMismatchIsContractViolation) {
  const std::vector<double> two{0.0, 0.0};
  EXPECT_THROW(filter_output(make_pi_loop_filter(kTau1, kTau2), two, 0.0), ContractViolation);
  EXPECT_THROW(zero_input_response(make_first_order_lowpass(kOmega3), two, 0.0), ContractViolation);
}

TEST(ZeroInput, Values) {
  const FilterSS f = make_first_order_lowpass(kOmega3);
  const std::vector<double> x{0.02};
  EXPECT_NEAR(zero_input_response(f, x, 0.0), 25132.0, 1e-9);
  EXPECT_LT(rel_err(zero_input_response(f, x, 5.0 / kOmega3), 25132.0 * std::exp(-5.0)), 1e-12);
  EXPECT_NEAR(zero_input_response(f, x, 5.0 / kOmega3), 169.3, 0.05);
  const std::vector<double> zero{0.0};
  EXPECT_EQ(zero_input_response(f, zero, 1e-3), 0.0);
}

TEST(ZeroInput, DecaysAtSpectralAbscissa) {
  const FilterSS f = make_first_order_lowpass(kOmega3);
  const double sigma = -f.spectral_abscissa();
  const std::vector<double> x{0.7};
  for (int i = 0; i < 50; ++i) {
    const double t1 = i * 0.1 / kOmega3;
    const double t2 = t1 + 0.37 / kOmega3;
    EXPECT_LE(std::abs(zero_input_response(f, x, t2)),
              std::abs(zero_input_response(f, x, t1)) * std::exp(-sigma * (t2 - t1)) * (1 + 1e-12));
  }
}

TEST(FilterSS, StabilityCheckedAtConstruction) {
  EXPECT_THROW(FilterSS(Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1),
                        0.0, true),
               ParameterError);
  EXPECT_THROW(FilterSS(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1), 0.0, true),
               ParameterError);
  EXPECT_NO_THROW(
      FilterSS(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1), 0.0, false));
  EXPECT_THROW(FilterSS(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(2), 0.0, false),
               ParameterError);
}

TEST(FilterSS, SecondOrderUsesMatrixExponential) {
  Eigen::MatrixXd A(2, 2);
  A << -1.0, 0.0, 0.0, -2.0;
  const FilterSS f(A, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2), 0.25, true);
  for (double t : {0.0, 0.3, 1.0, 4.0}) {
    EXPECT_NEAR(impulse_response(f, t), std::exp(-t) + std::exp(-2 * t), 1e-12);
    EXPECT_NEAR(step_response(f, t), 0.25 + (1 - std::exp(-t)) + 0.5 * (1 - std::exp(-2 * t)), 1e-12);
  }
  // rotation block: exp of [[0, w], [-w, 0]]
  Eigen::MatrixXd R(2, 2);
  R << -0.1, 3.0, -3.0, -0.1;
  const FilterSS g(R, Eigen::VectorXd::Unit(2, 0), Eigen::VectorXd::Unit(2, 0), 0.0, true);
  for (double t : {0.2, 1.5}) EXPECT_NEAR(impulse_response(g, t), std::exp(-0.1 * t) * std::cos(3 * t), 1e-12);
}

namespace {

// Integrate x' = A x + b (unit step) with the adaptive scheme and return c.x + h.
double simulated_step(const FilterSS& f, double t_end) {
  auto sys = make_system(f.order(), [&](double, std::span<const double> x, std::span<double> dx) {
    f.derivative(x, 1.0, dx);
  });
  IntegratorConfig cfg;
  cfg.scheme = Scheme::adaptive_dp45;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-14;
  cfg.t_end = t_end;
  const std::vector<double> x0(f.order(), 0.0);
  const Trajectory tr = integrate_system(sys, x0, cfg);
  return filter_output(f, tr.final_state(), 1.0);
}

}  // namespace

TEST(StepResponse, AdaptiveSimulationMatchesAnalytic) {
  const FilterSS lpf = make_first_order_lowpass(kOmega3);
  for (double t : {0.5 / kOmega3, 2.0 / kOmega3, 8.0 / kOmega3}) {
    EXPECT_LT(rel_err(simulated_step(lpf, t), step_response(lpf, t)), 1e-6);
  }
  const FilterSS pi = make_pi_loop_filter(kTau1, kTau2);
  for (double t : {1e-6, 1e-5, 1e-4}) EXPECT_LT(rel_err(simulated_step(pi, t), step_response(pi, t)), 1e-6);
  const FilterSS ll = make_lead_lag_filter(0.1, 0.029);
  for (double t : {0.01, 0.1, 1.0}) EXPECT_LT(rel_err(simulated_step(ll, t), step_response(ll, t)), 1e-6);
}

TEST(LeadLag, UnitDcGainAndFeedthrough) {
  const FilterSS f = make_lead_lag_filter(0.1, 0.029);
  EXPECT_NEAR(f.h(), 0.29, 1e-15);
  EXPECT_NEAR(step_response(f, 100.0), 1.0, 1e-12);
  EXPECT_NEAR(step_response(f, 0.0), 0.29, 1e-15);
  EXPECT_THROW(make_lead_lag_filter(0.0, 0.1), ParameterError);
}

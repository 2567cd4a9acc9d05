#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "costas_lab/experiments.hpp"
#include "costas_lab/integrators.hpp"
#include "costas_lab/models.hpp"

using namespace costas;

namespace {

LoopParams loop(double wd) { return reference_params(wd); }

std::vector<double> d(ModelKind k, double t, const StateVector& s, const LoopParams& p, double m = 1.0) {
  std::vector<double> out(s.size());
  rhs(k, t, s, p, m, out);
  return out;
}

}  // namespace

TEST(PhaseDetector, Values) {
  EXPECT_EQ(pd_characteristic(0.0), 0.0);
  EXPECT_DOUBLE_EQ(pd_characteristic(kPi / 4), 0.125);
  EXPECT_DOUBLE_EQ(pd_characteristic(0.3), 0.125 * std::sin(0.6));
  EXPECT_NEAR(pd_characteristic(0.3 + kPi), pd_characteristic(0.3), 1e-16);
}

TEST(PhaseDetector, OddAndPiPeriodic) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double th = u(rng);
    EXPECT_EQ(pd_characteristic(-th), -pd_characteristic(th));
    EXPECT_NEAR(pd_characteristic(th + kPi), pd_characteristic(th), 4e-16);
    EXPECT_LE(std::abs(pd_characteristic(th)), 0.125);
  }
}

TEST(PhaseDetector, IdealLpfOutputs) {
  const auto a = ideal_lpf_outputs(0.0, 1.0);
  EXPECT_DOUBLE_EQ(a.g1, 0.5);
  EXPECT_DOUBLE_EQ(a.g2, 0.0);
  const auto b = ideal_lpf_outputs(kPi / 2, 1.0);
  EXPECT_NEAR(b.g1, 0.0, 1e-16);
  EXPECT_DOUBLE_EQ(b.g2, 0.5);
  const auto c = ideal_lpf_outputs(kPi / 4, 1.0);
  EXPECT_NEAR(c.g1 * c.g2, pd_characteristic(kPi / 4), 1e-16);
  const auto m = ideal_lpf_outputs(0.4, -1.0);
  EXPECT_NEAR(m.g1 * m.g2, pd_characteristic(0.4), 1e-16);  // data sign cancels in the product
}

TEST(DataSignal, SquareWave) {
  const DataSignal s = DataSignal::periodic_square(2 * kPi * 1e5);
  EXPECT_EQ(s(0.0), 1.0);  // sign(0) = +1
  EXPECT_EQ(s(2e-6), 1.0);
  EXPECT_EQ(s(7e-6), -1.0);
  EXPECT_EQ(s(12e-6), 1.0);
  for (double t = 0; t < 1e-4; t += 3.7e-7) EXPECT_EQ(s(t) * s(t), 1.0);
  EXPECT_NEAR(s.transition_time(3), 15e-6, 1e-18);
  EXPECT_NEAR(s.next_transition_after(0.0), 5e-6, 1e-18);
  EXPECT_GT(s.next_transition_after(s.transition_time(4)), s.transition_time(4));
  EXPECT_TRUE(std::isinf(DataSignal::constant_one().next_transition_after(1.0)));
  EXPECT_THROW(DataSignal::periodic_square(0.0), ParameterError);
}

TEST(Layout, DimensionsAndInitialAngle) {
  LoopParams p = loop(2.0);
  p.theta1_0 = 0.4;
  EXPECT_EQ(layout(ModelKind::SignalSpace, p).dimension, 4u);
  EXPECT_EQ(layout(ModelKind::PhaseSpace, p).dimension, 4u);
  EXPECT_EQ(layout(ModelKind::ClassicPhaseSpace, p).dimension, 2u);
  EXPECT_EQ(layout(ModelKind::ModifiedSignalSpace, p).dimension, 2u);
  InitialConditions ic;
  ic.theta_delta = 0.1;
  EXPECT_DOUBLE_EQ(make_state(ModelKind::SignalSpace, p, ic)[3], 0.3);
  EXPECT_DOUBLE_EQ(make_state(ModelKind::SimplifiedSignalSpace, p, ic)[3], 0.1);
  EXPECT_DOUBLE_EQ(make_state(ModelKind::ModifiedSignalSpace, p, ic)[1], 0.3);
  std::vector<double> ds(3);
  const StateVector bad(3, 0.0);
  EXPECT_THROW(rhs(ModelKind::PhaseSpace, 0.0, bad, p, 1.0, ds), ContractViolation);
  EXPECT_THROW(rhs_classic(bad, p, ds), ContractViolation);
  for (ModelKind k : kAllModelKinds) EXPECT_EQ(parse_model_kind(to_string(k)), k);
}

TEST(Rhs, SignalSpaceAtRest) {
  const LoopParams p = loop(2.0);
  const auto v = d(ModelKind::SignalSpace, 0.0, StateVector(4, 0.0), p);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_EQ(v[1], 0.0);
  EXPECT_EQ(v[2], 0.0);
  EXPECT_EQ(v[3], p.omega2_free);
}

TEST(Rhs, SimplifiedAtRest) {
  const LoopParams p = loop(123.0);
  for (double th : {0.0, 0.7, -2.0}) {
    const auto v = d(ModelKind::SimplifiedSignalSpace, 0.0, {0, 0, 0, th}, p);
    EXPECT_DOUBLE_EQ(v[3], 123.0);
  }
}

TEST(Rhs, PhaseSpaceAtZeroPhase) {
  const LoopParams p = loop(50.0);
  const auto v = d(ModelKind::PhaseSpace, 0.0, {0, 0, 0, 0}, p);
  EXPECT_DOUBLE_EQ(v[0], 0.5);
  EXPECT_DOUBLE_EQ(v[1], 0.0);
  EXPECT_DOUBLE_EQ(v[2], 0.0);
  EXPECT_DOUBLE_EQ(v[3], 50.0);
}

TEST(Rhs, PhaseSpaceEquilibrium) {
  const LoopParams p = loop(0.0);
  const double x1 = 1.0 / (2.0 * ReferenceConstants::omega3);  // c1.x1 = 1/2
  const StateVector s{x1, 0.0, 0.0, 0.0};
  EXPECT_NEAR(p.lpf1.state_output(std::span<const double>(s).first(1)), 0.5, 1e-15);
  for (double v : d(ModelKind::PhaseSpace, 0.0, s, p)) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Rhs, ClassicAtRest) {
  const LoopParams p = loop(7.0);
  const auto v = d(ModelKind::ClassicPhaseSpace, 0.0, {0.0, 0.0}, p);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_DOUBLE_EQ(v[1], 7.0);
}

TEST(Rhs, ModifiedAtRest) {
  const LoopParams p = loop(7.0);
  EXPECT_EQ(modified_loop_input(0.0, 0.0), 0.0);
  const auto v = d(ModelKind::ModifiedSignalSpace, 0.0, {0.0, 0.0}, p);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_DOUBLE_EQ(v[1], p.omega2_free);
}

TEST(Rhs, ModifiedInputAveragesToCharacteristic) {
  // (1/2pi) int_0^{2pi} sin^2(tau) sin(tau - th) cos(tau - th) dtau = sin(2 th) / 8
  const int n = 4096;
  for (double th : {-2.0, -0.3, 0.0, 0.25, 0.785398, 1.4, 3.0}) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double tau = 2 * kPi * i / n;
      acc += modified_loop_input(tau, tau - th);
    }
    EXPECT_NEAR(acc / n, pd_characteristic(th), 1e-15) << th;
  }
}

// Averaging each model's right-hand side over one carrier period with the
// slow variables frozen reproduces the averaged model's right-hand side.
TEST(Rhs, CarrierPeriodAverageMatchesAveragedModels) {
  LoopParams p = loop(3e4);
  p.theta1_0 = 0.2;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 512;
  const double T = 2 * kPi / p.omega1;
  for (int trial = 0; trial < 100; ++trial) {
    const double x1 = u(rng) * 1e-6, x2 = u(rng) * 1e-6, x = u(rng) * 1e-5, th = 3.0 * u(rng);
    std::vector<double> avg10(4, 0.0), avg11(4, 0.0), avg20(2, 0.0);
    double avg20_dtheta = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t = T * i / n;
      const double theta2 = p.carrier_phase(t) - th;
      const auto a = d(ModelKind::SignalSpace, t, {x1, x2, x, theta2}, p);
      const auto b = d(ModelKind::SimplifiedSignalSpace, t, {x1, x2, x, th}, p);
      const auto c = d(ModelKind::ModifiedSignalSpace, t, {x, theta2}, p);
      for (int k = 0; k < 4; ++k) {
        avg10[k] += a[k] / n;
        avg11[k] += b[k] / n;
      }
      avg20[0] += c[0] / n;
      avg20_dtheta += (p.omega1 - c[1]) / n;
    }
    const auto ps = d(ModelKind::PhaseSpace, 0.0, {x1, x2, x, th}, p);
    const auto cl = d(ModelKind::ClassicPhaseSpace, 0.0, {x, th}, p);
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(avg10[k], ps[k], 1e-12 * (1 + std::abs(ps[k])));
      EXPECT_NEAR(avg11[k], ps[k], 1e-12 * (1 + std::abs(ps[k])));
    }
    EXPECT_NEAR(p.omega1 - avg10[3], ps[3], 1e-6);
    EXPECT_NEAR(avg11[3], ps[3], 1e-6);
    EXPECT_NEAR(avg20[0], cl[0], 1e-14);
    EXPECT_NEAR(avg20_dtheta, cl[1], 1e-6);
  }
}

TEST(InitialFrequencyDifference, Values) {
  const LoopParams p = loop(10.0);
  EXPECT_DOUBLE_EQ(initial_frequency_difference(ModelKind::SignalSpace, p, StateVector(4, 0.0)), 10.0);
  const StateVector red{0.0, 0.0, -1e-5, 0.0};
  EXPECT_NEAR(initial_frequency_difference(ModelKind::SignalSpace, p, red), 2400010.0, 2400010.0 * 1e-12);
  const StateVector lpf{0.02, 0.0, 1e-6, 0.0};
  EXPECT_NEAR(initial_frequency_difference(ModelKind::SignalSpace, p, lpf), 10.0 - p.L * 5e4 * 1e-6, 1e-6);
  const StateVector cl{0.0, 0.3};
  EXPECT_NEAR(initial_frequency_difference(ModelKind::ClassicPhaseSpace, p, cl),
              10.0 - p.L * p.loop_filter.h() * pd_characteristic(0.3), 1e-9);
}

TEST(Derive, SignalsPerKind) {
  const LoopParams p = loop(2.0);
  const DerivedSample a = derive(ModelKind::SignalSpace, 1e-6, StateVector{1e-7, 2e-7, 3e-7, 0.5}, p);
  EXPECT_NEAR(a.theta_delta, p.carrier_phase(1e-6) - 0.5, 1e-15);
  EXPECT_NEAR(a.g1, ReferenceConstants::omega3 * 1e-7, 1e-12);
  EXPECT_NEAR(a.omega2, p.omega2_free + p.L * a.g, 1e-6);
  const DerivedSample c = derive(ModelKind::ClassicPhaseSpace, 0.0, StateVector{1e-7, 0.5}, p);
  EXPECT_TRUE(std::isnan(c.g1));
  EXPECT_DOUBLE_EQ(c.theta_delta, 0.5);
}

TEST(WrapAngle, ReducesToHalfOpenInterval) {
  EXPECT_NEAR(wrap_angle(kPi + 0.1), 0.1, 1e-15);
  EXPECT_NEAR(wrap_angle(-0.1), -0.1, 1e-15);
  EXPECT_NEAR(wrap_angle(7.0, 2 * kPi), 7.0 - 2 * kPi, 1e-15);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pwmsi/sim.hpp"

using namespace pwmsi;

namespace {

const PwmConfig kPwm{1e-3, 20.0};

Scenario short_scenario() {
  Scenario s;
  s.d_step_time = 0.2;
  s.ref_step_time = 0.5;
  s.ref_filter_time_constant = 0.5;
  s.t_end = 1.0;
  return s;
}

Scenario quiet_scenario() {
  Scenario s = short_scenario();
  s.d_value = 0.0;
  s.ref_amplitude = 0.0;
  return s;
}

ControllerObserver zero_controller() {
  ControllerObserver co = build_paper_controller();
  co.K.setZero();
  co.k = 0.0;
  co.L.setZero();
  co.assemble();
  return co;
}

}  // namespace

TEST(FindSwitchings, ConstantInputs) {
  const auto zero = find_switchings([](double) { return 0.0; }, 0, kPwm, 1e-12);
  ASSERT_EQ(zero.times.size(), 2u);
  EXPECT_NEAR(zero.times[0], 0.25e-3, 1e-14);
  EXPECT_NEAR(zero.times[1], 0.75e-3, 1e-14);
  EXPECT_FALSE(zero.chattering);

  // carrier = u_m (1 - 4 sigma) on the falling ramp
  const auto ten = find_switchings([](double) { return 10.0; }, 7, kPwm, 1e-12);
  ASSERT_EQ(ten.times.size(), 2u);
  EXPECT_NEAR(ten.times[0], 7.125e-3, 1e-14);
  EXPECT_NEAR(ten.times[1], 7.875e-3, 1e-14);
}

TEST(FindSwitchings, FastInputChatters) {
  const auto s = find_switchings(
      [](double t) { return 15.0 * std::sin(2.0 * std::numbers::pi * t / (1e-3 / 7.0)); }, 0, kPwm, 1e-12);
  EXPECT_TRUE(s.chattering);
  EXPECT_GT(s.times.size(), 2u);
}

TEST(FindSwitchings, SaturatedInputNeverSwitches) {
  for (int j = 0; j < 100; ++j) EXPECT_EQ(modulate(20.0, j / 100.0, kPwm), 20.0);
}

TEST(Sim, ConfigValidation) {
  SimConfig s;
  s.substeps_per_period = 4;
  EXPECT_THROW(s.validate(kPwm), std::invalid_argument);
  SimConfig noisy;
  noisy.noise_enabled = true;
  noisy.noise_sample_time = 2e-4;
  EXPECT_THROW(noisy.validate(kPwm), std::invalid_argument);
}

TEST(Sim, ActualTraceInvariants) {
  const SisoPlant plant = triple_integrator();
  const ControllerObserver co = build_paper_controller();
  const SimConfig sim;
  const Scenario sc = short_scenario();
  const SimTrace tr = simulate_actual(plant, co, kPwm, sim, sc);

  ASSERT_EQ(tr.size(), 1000u * 100u + 1u);
  for (std::size_t i = 1; i < tr.size(); ++i) ASSERT_GT(tr.t[i], tr.t[i - 1]);
  EXPECT_NEAR(tr.t.back(), sc.t_end, 1e-12);
  EXPECT_EQ(tr.switchings_per_period.size(), 1000u);
  EXPECT_TRUE(std::all_of(tr.switchings_per_period.begin(), tr.switchings_per_period.end(),
                          [](int c) { return c == 2; }));
  EXPECT_FALSE(tr.chattering);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    ASSERT_EQ(std::abs(tr.u_pwm[i]), 20.0);
    ASSERT_TRUE(tr.x[i].allFinite());
    ASSERT_EQ(tr.y_noisy[i], tr.y[i]);
  }
  // Period means of u_pwm follow u (natural sampling, slowly varying u).
  const int n = sim.substeps_per_period;
  double worst = 0.0;
  for (std::size_t p = 5; p + 1 < tr.switchings_per_period.size(); ++p) {
    double mp = 0.0, mu = 0.0;
    for (int j = 0; j < n; ++j) {
      mp += tr.u_pwm[p * n + j] / n;
      mu += tr.u[p * n + j] / n;
    }
    worst = std::max(worst, std::abs(mp - mu));
  }
  // Sampled at 100 points, one switch can shift the mean by 2 u_m / N.
  EXPECT_LT(worst, 2.0 * 2.0 * 20.0 / n);
}

TEST(Sim, QuietScenarioRippleBound) {
  const SisoPlant plant = triple_integrator();
  const ControllerObserver co = build_paper_controller();
  const SimTrace act = simulate_actual(plant, co, kPwm, SimConfig{}, quiet_scenario());
  const SimTrace avg = simulate_ideal(plant, co, kPwm, SimConfig{}, quiet_scenario());
  double x3 = 0.0, x12 = 0.0, ideal = 0.0;
  for (std::size_t i = 0; i < act.size(); ++i) {
    x3 = std::max(x3, std::abs(act.x[i](2)));
    x12 = std::max({x12, std::abs(act.x[i](0)), std::abs(act.x[i](1))});
    ideal = std::max(ideal, avg.x[i].cwiseAbs().maxCoeff());
  }
  EXPECT_EQ(ideal, 0.0);
  EXPECT_LE(x3, 1.05 * 1e-3 * 20.0 / 4.0);
  EXPECT_GT(x3, 0.95 * 1e-3 * 20.0 / 4.0);
  EXPECT_LT(x12, 1e-5);
}

TEST(Sim, IdealZeroInputIsPolynomial) {
  const SisoPlant plant = triple_integrator();
  const ControllerObserver co = zero_controller();
  SimConfig sim;
  sim.x0 = Vector(3);
  sim.x0 << 0.0, 0.0, 0.3;
  const SimTrace tr = simulate_ideal(plant, co, kPwm, sim, quiet_scenario());
  for (std::size_t i = 0; i < tr.size(); i += 997) {
    const double t = tr.t[i];
    EXPECT_NEAR(tr.x[i](2), 0.3, 1e-15);
    EXPECT_NEAR(tr.x[i](1), 0.3 * t, 1e-12);
    EXPECT_NEAR(tr.x[i](0), 0.15 * t * t, 1e-12);
    EXPECT_EQ(tr.u_pwm[i], 0.0);
  }
}

TEST(Sim, IdealPaperScenario) {
  const SisoPlant plant = triple_integrator();
  const ControllerObserver co = build_paper_controller();
  const SimTrace tr = simulate_ideal(plant, co, kPwm, SimConfig{}, Scenario{});
  double before_ref = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.t[i] >= 12.0 && tr.t[i] < 14.0) before_ref = std::max(before_ref, std::abs(tr.x[i](0)));
  }
  EXPECT_LT(before_ref, 0.02);
  EXPECT_NEAR(tr.x.back()(0), 1.0, 0.02);
  EXPECT_NEAR(tr.eta[14 * 100000](3), -0.25, 1e-2);
  EXPECT_EQ(tr.yhat_v[12345], 1e-3 * tr.x[12345](0));
}

TEST(Sim, IdealIsConvergedInStepSize) {
  const SisoPlant plant = triple_integrator();
  const ControllerObserver co = build_paper_controller();
  SimConfig coarse, fine;
  coarse.substeps_per_period = 50;
  fine.substeps_per_period = 100;
  const Scenario sc = short_scenario();
  const SimTrace a = simulate_ideal(plant, co, kPwm, coarse, sc);
  const SimTrace b = simulate_ideal(plant, co, kPwm, fine, sc);
  const Vector za = a.x.back(), zb = b.x.back();
  EXPECT_LT((za - zb).norm(), 1e-8 * (1.0 + zb.norm()));
}

TEST(Sim, SaturationIsReported) {
  const SisoPlant plant = triple_integrator();
  const ControllerObserver co = build_paper_controller();
  Scenario sc = short_scenario();
  // unfiltered step: u jumps by k1 times the amplitude
  sc.ref_filter_time_constant = 0.0;
  sc.ref_amplitude = 0.1;
  try {
    simulate_actual(plant, co, kPwm, SimConfig{}, sc);
    FAIL() << "expected SaturationError";
  } catch (const SaturationError& e) {
    EXPECT_GE(e.time, sc.ref_step_time);
    EXPECT_GT(std::abs(e.input), 20.0);
  }
}

TEST(Sim, NoiseIsSeeded) {
  const SisoPlant plant = triple_integrator();
  const ControllerObserver co = build_paper_controller();
  SimConfig sim;
  sim.noise_enabled = true;
  sim.rng_seed = 5;
  Scenario sc = short_scenario();
  sc.t_end = 0.6;
  const SimTrace a = simulate_actual(plant, co, kPwm, sim, sc);
  const SimTrace b = simulate_actual(plant, co, kPwm, sim, sc);
  EXPECT_EQ(a.y_noisy, b.y_noisy);
  EXPECT_EQ(a.yhat_v, b.yhat_v);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a.y_noisy[i] - a.y[i]));
  EXPECT_GT(diff, 0.02);
  EXPECT_LT(diff, 0.08);
}

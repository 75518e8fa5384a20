#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pwmsi/analysis.hpp"

using namespace pwmsi;

namespace {

const PwmConfig kPwm{1e-3, 20.0};

// A hand-built averaged trace on the N = 100 grid with constant input.
SimTrace constant_trace(double u, std::size_t samples) {
  SimTrace tr;
  tr.kind = SimTrace::Kind::kIdeal;
  tr.epsilon = kPwm.epsilon;
  tr.samples_per_period = 100;
  for (std::size_t i = 0; i < samples; ++i) {
    Sample s;
    s.t = i * 1e-5;
    s.x = Vector(3);
    s.x << 0.1, 0.2, 0.3;
    s.eta = Vector::Zero(4);
    s.u = u;
    s.u_pwm = u;
    tr.append(s);
  }
  return tr;
}

}  // namespace

TEST(Analysis, RippleOnlyInInputChannel) {
  const SisoPlant plant = triple_integrator();
  const SimTrace tr = constant_trace(0.0, 250);
  const auto pred = ripple_prediction(tr, plant, kPwm);
  double x3 = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    EXPECT_EQ(pred[i](0), tr.x[i](0));
    EXPECT_EQ(pred[i](1), tr.x[i](1));
    x3 = std::max(x3, std::abs(pred[i](2) - tr.x[i](2)));
    if (i % 100 == 0) {
      EXPECT_EQ(pred[i](2), tr.x[i](2));
    }
  }
  EXPECT_NEAR(x3, kPwm.epsilon * 5.0, 1e-12);
}

TEST(Analysis, NoRippleAtRangeLimit) {
  const SisoPlant plant = triple_integrator();
  const SimTrace tr = constant_trace(20.0, 150);
  const auto pred = ripple_prediction(tr, plant, kPwm);
  for (std::size_t i = 0; i < tr.size(); ++i) EXPECT_NEAR((pred[i] - tr.x[i]).norm(), 0.0, 1e-15);
}

TEST(Analysis, IdenticalTracesGiveZeroDeviation) {
  const SisoPlant plant = triple_integrator();
  const SimTrace tr = constant_trace(20.0, 600);
  AnalysisWindow w;
  const DeviationMetrics m = deviation_metrics(tr, tr, plant, kPwm, w);
  for (double v : m.state) EXPECT_EQ(v, 0.0);
  for (double v : m.residual) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(m.eta, 0.0);
  EXPECT_EQ(m.samples, 599u);
}

TEST(Analysis, GridMismatchThrows) {
  const SisoPlant plant = triple_integrator();
  EXPECT_THROW(deviation_metrics(constant_trace(0.0, 10), constant_trace(0.0, 11), plant, kPwm, {}),
               std::invalid_argument);
}

TEST(Analysis, WindowExclusions) {
  const AnalysisWindow w = default_window(Scenario{}, kPwm);
  EXPECT_TRUE(w.excluded(0.0));
  EXPECT_TRUE(w.excluded(3e-3));
  EXPECT_FALSE(w.excluded(3.1e-3));
  EXPECT_TRUE(w.excluded(2.05));
  EXPECT_FALSE(w.excluded(2.11));
  EXPECT_TRUE(w.excluded(14.0));
  EXPECT_FALSE(w.excluded(13.99));
}

TEST(Analysis, FitOrderRecoversPowerLaw) {
  const std::vector<double> eps{1e-3, 5e-4, 2.5e-4, 1.25e-4};
  std::vector<double> err;
  for (double e : eps) err.push_back(7.0 * e * e);
  EXPECT_NEAR(fit_order(eps, err), 2.0, 1e-12);
  err[1] = 0.0;
  EXPECT_TRUE(std::isnan(fit_order(eps, err)));
}

TEST(Analysis, ConvergenceOrderFlagsAndValidates) {
  auto synthetic = [](double eps) {
    DeviationMetrics m;
    m.state = {3.0 * eps * eps, 2.0 * eps * eps, 5.0 * eps};
    m.residual = {3.0 * eps * eps, 2.0 * eps * eps, 4.0 * eps * eps};
    m.ripple_term = {0.0, 0.0, 5.0 * eps};
    m.eta = eps;  // wrong order on purpose
    m.yhat_a = eps * eps;
    m.yhat_v = 0.5 * eps * eps;
    return m;
  };
  const std::vector<double> eps{1e-3, 5e-4, 2.5e-4};
  const OrderReport r = convergence_order(synthetic, eps);
  EXPECT_NEAR(r.channel("x1").fitted_order, 2.0, 1e-9);
  EXPECT_EQ(r.channel("x3").expected_order, 1.0);
  EXPECT_FALSE(r.channel("x3").flagged);
  EXPECT_FALSE(r.channel("x3_residual").flagged);
  EXPECT_TRUE(r.channel("eta").flagged);
  EXPECT_FALSE(r.channel("yhat_v").flagged);
  EXPECT_THROW(r.channel("nope"), std::out_of_range);

  const std::vector<double> two{1e-3, 5e-4};
  EXPECT_THROW(convergence_order(synthetic, two), std::invalid_argument);
  const std::vector<double> increasing{2.5e-4, 5e-4, 1e-3};
  EXPECT_THROW(convergence_order(synthetic, increasing), std::invalid_argument);
}

TEST(Analysis, RunFailuresPropagate) {
  auto failing = [](double) -> DeviationMetrics { throw SaturationError(1.0, 25.0, 20.0); };
  const std::vector<double> eps{1e-3, 5e-4, 2.5e-4};
  EXPECT_THROW(convergence_order(failing, eps), SaturationError);
}

TEST(Analysis, ShortClosedLoopRunIsCloseToAveraged) {
  const SisoPlant plant = triple_integrator();
  const ControllerObserver co = build_paper_controller();
  Scenario sc;
  sc.d_step_time = 0.2;
  sc.ref_step_time = 0.6;
  sc.t_end = 1.2;
  const DeviationMetrics streamed = simulate_deviations(plant, co, kPwm, SimConfig{}, sc, default_window(sc, kPwm));
  const SimTrace act = simulate_actual(plant, co, kPwm, SimConfig{}, sc);
  const SimTrace avg = simulate_ideal(plant, co, kPwm, SimConfig{}, sc);
  const DeviationMetrics stored = deviation_metrics(act, avg, plant, kPwm, default_window(sc, kPwm));
  EXPECT_EQ(streamed.state, stored.state);
  EXPECT_EQ(streamed.eta, stored.eta);
  EXPECT_EQ(streamed.yhat_v, stored.yhat_v);
  // Ripple dominates x3; x1 stays an order of magnitude closer.
  EXPECT_GT(stored.state[2], 10.0 * stored.state[0]);
}

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "pwmsi/control.hpp"
#include "pwmsi/demod.hpp"
#include "pwmsi/format.hpp"
#include "pwmsi/plant.hpp"
#include "pwmsi/pwm.hpp"
#include "pwmsi/sim.hpp"

namespace pwmsi {

namespace quad {

/// Root of a continuous f on [a, b] with f(a) f(b) <= 0, by bisection.
inline double bisect(const std::function<double(double)>& f, double a, double b, int iters = 200) {
  double fa = f(a);
  for (int i = 0; i < iters && b - a > 0.0; ++i) {
    const double m = 0.5 * (a + b);
    if (m == a || m == b) break;
    const double fm = f(m);
    if ((fm <= 0.0) == (fa <= 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// Phases in (0, 1) where u meets the carrier, located numerically on each ramp.
inline std::vector<double> switching_phases(double u, const PwmConfig& cfg) {
  std::vector<double> out;
  auto gap = [&](double s) { return u - carrier(s * cfg.epsilon, cfg); };
  for (auto [a, b] : {std::pair{0.0, 0.5}, std::pair{0.5, 1.0}}) {
    if ((gap(a) <= 0.0) != (gap(b) <= 0.0)) out.push_back(bisect(gap, a, b));
  }
  return out;
}

/// Mean over [0, 1] of f, integrated exactly for piecewise polynomials of
/// degree <= 5 whose pieces end at `breaks` (3-point Gauss-Legendre per piece).
inline double piecewise_mean(const std::function<double(double)>& f, std::vector<double> breaks) {
  breaks.push_back(0.0);
  breaks.push_back(1.0);
  std::sort(breaks.begin(), breaks.end());
  static constexpr std::array<double, 3> nodes{-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr std::array<double, 3> weights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    if (!(b > a)) continue;
    const double c = 0.5 * (a + b), r = 0.5 * (b - a);
    for (int k = 0; k < 3; ++k) sum += weights[k] * r * f(c + r * nodes[k]);
  }
  return sum;
}

/// Composite Simpson mean over [0, 1] with `intervals` (even) subintervals.
inline double simpson_mean(const std::function<double(double)>& f, long intervals) {
  if (intervals % 2) ++intervals;
  const double h = 1.0 / static_cast<double>(intervals);
  double sum = f(0.0) + f(1.0);
  for (long i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(static_cast<double>(i) * h);
  return sum * h / 3.0;
}

}  // namespace quad

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Structural invariants of every module plus one closed-loop scenario run at
/// the configured parameters.
inline std::vector<CheckResult> run_validation(const PwmConfig& pwm, const SimConfig& sim, const Scenario& sc) {
  std::vector<CheckResult> out;
  auto check = [&out](std::string name, const std::function<std::string(bool&)>& body) {
    CheckResult r{std::move(name), false, {}};
    try {
      r.detail = body(r.passed);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    out.push_back(std::move(r));
  };
  const double um = pwm.u_m;

  check("modulation mean equals input", [&](bool& ok) {
    double worst = 0.0, worst_s = 0.0;
    for (int i = 0; i < 50; ++i) {
      const double u = um * (-0.98 + 1.96 * i / 49.0);
      const auto br = quad::switching_phases(u, pwm);
      worst = std::max(worst, std::abs(quad::piecewise_mean([&](double s) { return modulate(u, s, pwm); }, br) - u));
      worst_s = std::max({worst_s, std::abs(quad::piecewise_mean([&](double s) { return s0(u, s, pwm); }, br)),
                          std::abs(quad::piecewise_mean([&](double s) { return s1(u, s, pwm); }, br))});
    }
    ok = worst <= 1e-6 * um && worst_s < 1e-10;
    return "max |mean M - u| = " + format_double(worst) + ", max |mean s0|,|mean s1| = " + format_double(worst_s);
  });

  check("s1 is the primitive of s0", [&](bool& ok) {
    double worst = 0.0;
    const int cells = 4000;
    for (int i = 0; i < 21; ++i) {
      const double u = um * (-0.95 + 1.9 * i / 20.0);
      const auto br = quad::switching_phases(u, pwm);
      for (int j = 0; j < cells; ++j) {
        const double a = static_cast<double>(j) / cells, b = static_cast<double>(j + 1) / cells;
        const bool straddles = std::any_of(br.begin(), br.end(), [&](double s) { return s >= a && s <= b; });
        if (straddles || (a < 0.5 && b > 0.5)) continue;
        const double slope = (s1(u, b, pwm) - s1(u, a, pwm)) * cells;
        worst = std::max(worst, std::abs(slope - s0(u, 0.5 * (a + b), pwm)));
      }
    }
    ok = worst < 1e-6 * um;
    return "max |ds1/dsigma - s0| = " + format_double(worst);
  });

  check("s1 mean square matches quadrature", [&](bool& ok) {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double u = um * (-0.95 + 1.9 * i / 19.0);
      const auto br = quad::switching_phases(u, pwm);
      const double q = quad::piecewise_mean([&](double s) { return std::pow(s1(u, s, pwm), 2); }, br);
      worst = std::max(worst, std::abs(s1_mean_square(u, pwm) - q) / q);
    }
    const double at_zero = s1_mean_square(0.0, pwm);
    ok = worst < 1e-8 && std::abs(at_zero - um * um / 48.0) < 1e-12 * um * um;
    return "max relative error = " + format_double(worst) + ", value at u = 0: " + format_double(at_zero);
  });

  check("pole placement reproduces the design spectra", [&](bool& ok) {
    const ControllerObserver co = build_paper_controller();
    const LinearClosedLoop cl = assemble_closed_loop(triple_integrator_linear(), co);
    std::vector<std::complex<double>> want(paper_controller_poles());
    want.insert(want.end(), paper_observer_poles().begin(), paper_observer_poles().end());
    Eigen::VectorXcd got = cl.A.eigenvalues();
    double worst = 0.0;
    std::vector<bool> used(want.size(), false);
    for (Eigen::Index i = 0; i < got.size(); ++i) {
      double best = 1e300;
      std::size_t bj = 0;
      for (std::size_t j = 0; j < want.size(); ++j) {
        if (!used[j] && std::abs(got(i) - want[j]) < best) {
          best = std::abs(got(i) - want[j]);
          bj = j;
        }
      }
      used[bj] = true;
      worst = std::max(worst, best);
    }
    ok = worst < 1e-6;
    return "max closed-loop eigenvalue error = " + format_double(worst);
  });

  check("averaged-loop steady states", [&](bool& ok) {
    const ControllerObserver co = build_paper_controller();
    const LinearClosedLoop cl = assemble_closed_loop(triple_integrator_linear(), co);
    const Eigen::VectorXd rej = cl.steady_state(0.0, -0.25);
    const Eigen::VectorXd trk = cl.steady_state(1.0, 0.0);
    const double e1 = std::abs(rej(0)), e2 = std::abs(trk(0) - 1.0), e3 = std::abs(rej(6) + 0.25);
    ok = e1 < 1e-9 && e2 < 1e-9 && e3 < 1e-9;
    return "|x1| under disturbance = " + format_double(e1) + ", |x1 - r| = " + format_double(e2) +
           ", |dhat - d| = " + format_double(e3);
  });

  check("estimators exact on frozen signals", [&](bool& ok) {
    const int n = sim.substeps_per_period;
    DemodState ds(pwm, n);
    const double u = 0.3 * um, ya = 0.7, yv = 2e-3, slope = 0.4;
    double err_a = 0.0, err_v = 0.0;
    for (int k = 0; k <= 6 * n; ++k) {
      const double t = k * pwm.epsilon / n;
      ds.push(t, ya + slope * t + yv * s1(u, static_cast<double>(k) / n, pwm), u);
      if (auto a = ds.yhat_a()) err_a = std::max(err_a, std::abs(*a - (ya + slope * t)));
      if (auto v = ds.yhat_v()) err_v = std::max(err_v, std::abs(*v - yv));
    }
    ok = err_a < 1e-9 && err_v < 1e-9;
    return "yhat_a error = " + format_double(err_a) + ", yhat_v error = " + format_double(err_v);
  });

  check("closed-loop scenario", [&](bool& ok) {
    const SisoPlant plant = triple_integrator();
    const ControllerObserver co = build_paper_controller();
    SimConfig quiet = sim;
    quiet.noise_enabled = false;
    const SimTrace tr = simulate_actual(plant, co, pwm, quiet, sc);
    const bool two = std::all_of(tr.switchings_per_period.begin(), tr.switchings_per_period.end(),
                                 [](int c) { return c == 2; });
    // Disturbance must be rejected within 10 s of its onset.
    const double settle_from = std::min(sc.d_step_time + 10.0, sc.ref_step_time);
    double rejection = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      if (tr.t[i] >= settle_from && tr.t[i] < sc.ref_step_time) rejection = std::max(rejection, std::abs(tr.x[i](0)));
    }
    const double tracking = std::abs(tr.x.back()(0) - tr.x1ref.back());
    const double tol = 0.02 * std::max(1.0, std::abs(sc.ref_amplitude));
    ok = two && !tr.chattering && rejection < 0.02 && tracking < tol;
    return std::string(two ? "2 switchings in every period" : "switching count off") +
           ", max |x1| before reference step = " + format_double(rejection) +
           ", final tracking error = " + format_double(tracking);
  });

  return out;
}

}  // namespace pwmsi

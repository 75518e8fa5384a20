#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwmsi/control.hpp"
#include "pwmsi/plant.hpp"
#include "pwmsi/pwm.hpp"
#include "pwmsi/sim.hpp"

namespace pwmsi {

/// Samples excluded from sup norms: the demodulator warm-up [0, warmup] and
/// `transient` seconds after each scenario discontinuity.
struct AnalysisWindow {
  double warmup = 0.0;
  std::vector<double> discontinuities;
  double transient = 0.1;

  bool excluded(double t) const {
    if (t <= warmup) return true;
    for (double td : discontinuities) {
      if (t >= td && t <= td + transient) return true;
    }
    return false;
  }
};

inline AnalysisWindow default_window(const Scenario& sc, const PwmConfig& pwm) {
  return AnalysisWindow{3.0 * pwm.epsilon, {sc.d_step_time, sc.ref_step_time}, 0.1};
}

/// x_bar + eps g(x_bar) s1(u_bar, sigma): the switched state predicted from
/// the averaged one.
inline Vector predicted_state(const SisoPlant& plant, const PwmConfig& pwm, const Vector& xbar, double ubar,
                              double sigma) {
  return xbar + pwm.epsilon * plant.g(xbar) * s1(ubar, sigma, pwm);
}

/// x - eps g(x) s1(u, sigma): the averaged state recovered from a switched one.
inline Vector averaged_state(const SisoPlant& plant, const PwmConfig& pwm, const Vector& x, double u, double sigma) {
  return x - pwm.epsilon * plant.g(x) * s1(u, sigma, pwm);
}

/// Ripple prediction on every sample of an averaged-loop trace.
inline std::vector<Vector> ripple_prediction(const SimTrace& ideal, const SisoPlant& plant, const PwmConfig& pwm) {
  std::vector<Vector> out;
  out.reserve(ideal.size());
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    const double sigma = static_cast<double>(i) / ideal.samples_per_period;
    out.push_back(predicted_state(plant, pwm, ideal.x[i], ideal.u[i], sigma));
  }
  return out;
}

/// Sup-norm deviations between the switched and the averaged loop.
struct DeviationMetrics {
  /// sup_t |x_i - xbar_i|
  std::vector<double> state;
  /// sup_t |x_i - predicted_i|
  std::vector<double> residual;
  /// sup_t |eps g_i(xbar) s1(ubar, t/eps)|, the size of the predicted ripple.
  std::vector<double> ripple_term;
  /// sup_t max_j |eta_j - etabar_j|
  double eta = 0.0;
  /// Estimator errors against h(x_rec) and eps h'(x_rec) g(x_rec), with
  /// x_rec = x - eps g(x) s1(u, t/eps) recovered from the switched run.
  double yhat_a = 0.0;
  double yhat_v = 0.0;
  /// sup |x - xbar|_inf over samples with |ubar| <= near_zero_input.
  double ripple_near_zero_input = 0.0;
  double near_zero_input = 0.0;
  std::size_t samples = 0;
  std::size_t near_zero_samples = 0;
};

/// Accumulates DeviationMetrics one aligned sample pair at a time, so sweeps
/// at small epsilon need not store traces.
class DeviationAccumulator {
 public:
  DeviationAccumulator(const SisoPlant& plant, const PwmConfig& pwm, int samples_per_period, AnalysisWindow window)
      : plant_(plant), pwm_(pwm), n_(samples_per_period), window_(std::move(window)) {
    m_.state.assign(static_cast<std::size_t>(plant.dim), 0.0);
    m_.residual.assign(static_cast<std::size_t>(plant.dim), 0.0);
    m_.ripple_term.assign(static_cast<std::size_t>(plant.dim), 0.0);
    m_.near_zero_input = 0.05 * pwm.u_m;
  }

  void add(long long index, const Sample& actual, const Sample& ideal) {
    if (std::abs(actual.t - ideal.t) > 1e-9 * (1.0 + std::abs(actual.t))) {
      throw std::invalid_argument("deviation metrics: traces are not on the same grid");
    }
    if (window_.excluded(actual.t)) return;
    const double sigma = static_cast<double>(index) / n_;
    const Vector pred = predicted_state(plant_, pwm_, ideal.x, ideal.u, sigma);
    for (int i = 0; i < plant_.dim; ++i) {
      const auto k = static_cast<std::size_t>(i);
      m_.state[k] = std::max(m_.state[k], std::abs(actual.x(i) - ideal.x(i)));
      m_.residual[k] = std::max(m_.residual[k], std::abs(actual.x(i) - pred(i)));
      m_.ripple_term[k] = std::max(m_.ripple_term[k], std::abs(pred(i) - ideal.x(i)));
    }
    m_.eta = std::max(m_.eta, (actual.eta - ideal.eta).cwiseAbs().maxCoeff());

    const Vector xrec = averaged_state(plant_, pwm_, actual.x, actual.u, sigma);
    const OutputPair truth = outputs(plant_, xrec, pwm_.epsilon);
    m_.yhat_a = std::max(m_.yhat_a, std::abs(actual.yhat_a - truth.y_a));
    m_.yhat_v = std::max(m_.yhat_v, std::abs(actual.yhat_v - truth.y_v));

    if (std::abs(ideal.u) <= m_.near_zero_input) {
      m_.ripple_near_zero_input =
          std::max(m_.ripple_near_zero_input, (actual.x - ideal.x).cwiseAbs().maxCoeff());
      ++m_.near_zero_samples;
    }
    ++m_.samples;
  }

  const DeviationMetrics& metrics() const { return m_; }

 private:
  const SisoPlant& plant_;
  PwmConfig pwm_;
  int n_;
  AnalysisWindow window_;
  DeviationMetrics m_;
};

inline DeviationMetrics deviation_metrics(const SimTrace& actual, const SimTrace& ideal, const SisoPlant& plant,
                                          const PwmConfig& pwm, const AnalysisWindow& window) {
  if (actual.size() != ideal.size() || actual.samples_per_period != ideal.samples_per_period ||
      actual.epsilon != ideal.epsilon) {
    throw std::invalid_argument("deviation metrics: traces are not on the same grid");
  }
  DeviationAccumulator acc(plant, pwm, actual.samples_per_period, window);
  for (std::size_t i = 0; i < actual.size(); ++i) {
    acc.add(static_cast<long long>(i), actual.at(i), ideal.at(i));
  }
  return acc.metrics();
}

/// Runs the switched and the averaged loop in lockstep and returns their
/// deviation metrics without storing either trace.
inline DeviationMetrics simulate_deviations(const SisoPlant& plant, const ControllerObserver& co,
                                            const PwmConfig& pwm, const SimConfig& sim, const Scenario& sc,
                                            const AnalysisWindow& window) {
  ActualLoop actual(plant, co, pwm, sim, sc);
  IdealLoop ideal(plant, co, pwm, sim, sc);
  DeviationAccumulator acc(plant, pwm, sim.substeps_per_period, window);
  acc.add(0, actual.sample(), ideal.sample());
  while (!actual.done()) {
    actual.step();
    ideal.step();
    acc.add(actual.index(), actual.sample(), ideal.sample());
  }
  return acc.metrics();
}

/// Least-squares slope of log(error) against log(epsilon).
inline double fit_order(std::span<const double> epsilons, std::span<const double> errors) {
  if (epsilons.size() != errors.size() || epsilons.size() < 2) {
    throw std::invalid_argument("fit_order: need matching sizes and at least two points");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const auto n = static_cast<double>(epsilons.size());
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(errors[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double lx = std::log(epsilons[i]);
    const double ly = std::log(errors[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct OrderChannel {
  std::string name;
  double expected_order = 2.0;
  std::vector<double> errors;
  double fitted_order = 0.0;
  /// |fitted - expected| > OrderReport::kOrderTolerance, or a non-positive error.
  bool flagged = false;
};

struct OrderReport {
  static constexpr double kOrderTolerance = 0.35;

  std::vector<double> epsilons;
  std::vector<OrderChannel> channels;

  const OrderChannel& channel(const std::string& name) const {
    for (const auto& c : channels) {
      if (c.name == name) return c;
    }
    throw std::out_of_range("no order channel named " + name);
  }
};

/// Channels of the order study, with the exponent the averaging theory
/// predicts: 2 for everything except raw state components that carry the
/// O(eps) ripple, which are expected at order 1.
inline std::vector<OrderChannel> order_channels(const DeviationMetrics& m) {
  std::vector<OrderChannel> out;
  const double ripple_floor = 1e-14;
  for (std::size_t i = 0; i < m.state.size(); ++i) {
    const std::string base = "x" + std::to_string(i + 1);
    out.push_back({base, m.ripple_term[i] > ripple_floor ? 1.0 : 2.0, {}, 0.0, false});
  }
  for (std::size_t i = 0; i < m.state.size(); ++i) {
    out.push_back({"x" + std::to_string(i + 1) + "_residual", 2.0, {}, 0.0, false});
  }
  out.push_back({"eta", 2.0, {}, 0.0, false});
  out.push_back({"yhat_a", 2.0, {}, 0.0, false});
  out.push_back({"yhat_v", 2.0, {}, 0.0, false});
  return out;
}

inline double channel_value(const DeviationMetrics& m, const std::string& name) {
  if (name == "eta") return m.eta;
  if (name == "yhat_a") return m.yhat_a;
  if (name == "yhat_v") return m.yhat_v;
  const bool residual = name.ends_with("_residual");
  const auto idx = static_cast<std::size_t>(std::stoi(name.substr(1)) - 1);
  return residual ? m.residual.at(idx) : m.state.at(idx);
}

/// Runs `run` at each epsilon (concurrently) and fits the convergence order of
/// every deviation channel.
inline OrderReport convergence_order(const std::function<DeviationMetrics(double)>& run,
                                     std::span<const double> epsilons) {
  if (epsilons.size() < 3) throw std::invalid_argument("convergence_order: need at least three epsilons");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw std::invalid_argument("convergence_order: epsilons must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
      throw std::invalid_argument("convergence_order: epsilons must be strictly decreasing");
    }
  }
  std::vector<std::future<DeviationMetrics>> jobs;
  for (double eps : epsilons) jobs.push_back(std::async(std::launch::async, run, eps));
  std::vector<DeviationMetrics> metrics;
  for (auto& j : jobs) metrics.push_back(j.get());

  OrderReport report;
  report.epsilons.assign(epsilons.begin(), epsilons.end());
  report.channels = order_channels(metrics.front());
  for (auto& ch : report.channels) {
    for (const auto& m : metrics) ch.errors.push_back(channel_value(m, ch.name));
    ch.fitted_order = fit_order(report.epsilons, ch.errors);
    ch.flagged = !std::isfinite(ch.fitted_order) ||
                 std::abs(ch.fitted_order - ch.expected_order) > OrderReport::kOrderTolerance;
  }
  return report;
}

}  // namespace pwmsi

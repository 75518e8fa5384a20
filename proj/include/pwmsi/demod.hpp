#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwmsi/pwm.hpp"
#include "pwmsi/types.hpp"

namespace pwmsi {

/// Trapezoidal moving average of uniformly spaced samples covering exactly one
/// PWM period: (1/eps) * integral over [t - eps, t]. Needs >= 2 samples.
inline double moving_average(std::span<const double> window) {
  if (window.size() < 2) throw std::invalid_argument("moving_average: window needs at least two samples");
  double sum = 0.0;
  for (double v : window) sum += v;
  sum -= 0.5 * (window.front() + window.back());
  return sum / static_cast<double>(window.size() - 1);
}

/// Fixed-capacity ring addressed oldest-first.
class SampleRing {
 public:
  explicit SampleRing(std::size_t capacity) : data_(capacity, 0.0) {}

  void push(double v) {
    data_[head_] = v;
    head_ = (head_ + 1) % data_.size();
    if (size_ < data_.size()) ++size_;
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return data_.size(); }
  bool full() const { return size_ == data_.size(); }

  double operator[](std::size_t i) const {
    const std::size_t start = (head_ + data_.size() - size_) % data_.size();
    return data_[(start + i) % data_.size()];
  }

  /// Trapezoidal mean of the `count` samples starting at logical index `first`.
  double trapezoid_mean(std::size_t first, std::size_t count) const {
    const std::size_t cap = data_.size();
    const std::size_t start = (head_ + cap - size_ + first) % cap;
    double sum = 0.0;
    const std::size_t run = std::min(count, cap - start);
    for (std::size_t i = 0; i < run; ++i) sum += data_[start + i];
    for (std::size_t i = 0; i < count - run; ++i) sum += data_[i];
    sum -= 0.5 * (data_[start] + data_[(start + count - 1) % cap]);
    return sum / static_cast<double>(count - 1);
  }

 private:
  std::vector<double> data_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

enum class Normalizer {
  /// Mean of s1^2 over the sampled phase grid, i.e. the same quadrature the
  /// correlation window uses.
  kGrid,
  /// Exact period mean s1_mean_square(u).
  kClosedForm,
};

struct DemodOptions {
  Normalizer normalizer = Normalizer::kGrid;
  /// Reject normalizers below guard_fraction * u_m^2.
  double guard_fraction = 1e-6;
};

/// Causal ripple demodulator. Fed one sample per simulator substep, it keeps
/// y over [t - 2 eps, t] and the correlation k_delta over [t - eps, t], and
/// produces
///   yhat_a = 3/2 M(y)(t) - 1/2 M(y)(t - eps)
///   yhat_v = M(k_delta)(t) / s1^2-mean(u(t)),  k_delta = (y - yhat_a) s1(u, t/eps).
/// yhat_a is available from t >= 2 eps, yhat_v from t >= 3 eps.
class DemodState {
 public:
  DemodState(const PwmConfig& cfg, int samples_per_period, DemodOptions opts = {})
      : cfg_(cfg),
        n_(samples_per_period),
        opts_(opts),
        y_(2 * static_cast<std::size_t>(samples_per_period) + 1),
        k_delta_(static_cast<std::size_t>(samples_per_period) + 1) {
    cfg_.validate();
    if (samples_per_period < 2) throw std::invalid_argument("DemodState: need >= 2 samples per period");
  }

  /// Append the sample (t, y(t)) together with the PWM input u(t).
  void push(double t, double y, double u) {
    y_.push(y);
    yhat_a_.reset();
    yhat_v_.reset();
    if (!y_.full()) return;

    const auto n = static_cast<std::size_t>(n_);
    const double now = y_.trapezoid_mean(n, n + 1);
    const double prev = y_.trapezoid_mean(0, n + 1);
    const double ya = 1.5 * now - 0.5 * prev;
    yhat_a_ = ya;

    k_delta_.push((y - ya) * s1(u, t / cfg_.epsilon, cfg_));
    if (!k_delta_.full()) return;

    yhat_v_ = k_delta_.trapezoid_mean(0, n + 1) / normalizer(u);
  }

  std::optional<double> yhat_a() const { return yhat_a_; }
  std::optional<double> yhat_v() const { return yhat_v_; }

  /// s1^2 mean used to normalize the correlation at input u.
  double normalizer(double u) const {
    const double exact = s1_mean_square(u, cfg_);
    if (exact < opts_.guard_fraction * cfg_.u_m * cfg_.u_m) {
      throw DegenerateModulationError("s1 mean square " + std::to_string(exact) + " at u=" + std::to_string(u) +
                                      " is below the guard floor; virtual output is unobservable");
    }
    return opts_.normalizer == Normalizer::kGrid ? s1_grid_mean_square(u, n_, cfg_) : exact;
  }

  int samples_per_period() const { return n_; }
  const PwmConfig& config() const { return cfg_; }

 private:
  PwmConfig cfg_;
  int n_;
  DemodOptions opts_;
  SampleRing y_;
  SampleRing k_delta_;
  std::optional<double> yhat_a_;
  std::optional<double> yhat_v_;
};

/// Richardson-combined moving average; empty while warming up.
inline std::optional<double> estimate_actual(const DemodState& ds) { return ds.yhat_a(); }

/// Demodulated virtual output; empty while warming up.
inline std::optional<double> estimate_virtual(const DemodState& ds) { return ds.yhat_v(); }

}  // namespace pwmsi

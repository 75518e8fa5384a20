#pragma once

#include <cmath>
#include <string>

#include "pwmsi/types.hpp"

namespace pwmsi {

/// Natural-sampling PWM with period `epsilon` and output levels +/- `u_m`.
struct PwmConfig {
  double epsilon = 1e-3;
  double u_m = 20.0;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw std::invalid_argument("epsilon must be finite and > 0");
    }
    if (!(u_m > 0.0) || !std::isfinite(u_m)) {
      throw std::invalid_argument("u_m must be finite and > 0");
    }
  }
};

namespace detail {

inline void require_in_range(double u, const PwmConfig& cfg) {
  if (!(std::abs(u) <= cfg.u_m)) {
    throw RangeError("PWM input " + std::to_string(u) + " outside [-" + std::to_string(cfg.u_m) + ", " +
                     std::to_string(cfg.u_m) + "]");
  }
}

}  // namespace detail

/// Sawtooth of the normalized time, 1-periodic, slope u_m, values in
/// [-u_m/2, u_m/2). Zero at integer sigma.
inline double wrap(double sigma, const PwmConfig& cfg) {
  const double shifted = sigma + 0.5;
  return cfg.u_m * (shifted - std::floor(shifted)) - 0.5 * cfg.u_m;
}

/// Triangle carrier of period epsilon: u_m at t/epsilon integer, -u_m half a
/// period later. Falling ramp on wrap >= 0, rising ramp on wrap < 0.
inline double carrier(double t, const PwmConfig& cfg) {
  const double w = wrap(t / cfg.epsilon, cfg);
  return w <= 0.0 ? cfg.u_m + 4.0 * w : cfg.u_m - 4.0 * w;
}

/// PWM output level M(u, sigma) in {-u_m, +u_m}. The middle region
/// u - u_m < 4 wrap <= u_m - u is where the carrier lies above u.
inline double modulate(double u, double sigma, const PwmConfig& cfg) {
  detail::require_in_range(u, cfg);
  const double w4 = 4.0 * wrap(sigma, cfg);
  if (w4 <= u - cfg.u_m) return cfg.u_m;
  if (w4 <= cfg.u_m - u) return -cfg.u_m;
  return cfg.u_m;
}

/// Zero-mean probing signal injected by the modulator.
inline double s0(double u, double sigma, const PwmConfig& cfg) { return modulate(u, sigma, cfg) - u; }

/// Zero-mean primitive of s0 in sigma. Continuous, piecewise linear, odd in
/// wrap(sigma), vanishing at integer sigma.
inline double s1(double u, double sigma, const PwmConfig& cfg) {
  detail::require_in_range(u, cfg);
  const double w = wrap(sigma, cfg);
  const double q = 0.25 * (u - cfg.u_m);
  return (1.0 - u / cfg.u_m) * w - std::abs(q - w) + std::abs(q + w);
}

/// Mean over one period of s1(u, .)^2.
///
/// With a = (u_m - u)/4 and m = u_m/2, s1 is (-(1 + u/u_m)) wrap on |wrap| < a
/// and returns linearly to zero at |wrap| = m, which integrates to
/// 4 a^2 (m - a)^2 / (3 m^2). Zero at |u| = u_m.
inline double s1_mean_square(double u, const PwmConfig& cfg) {
  detail::require_in_range(u, cfg);
  const double a = 0.25 * (cfg.u_m - u);
  const double m = 0.5 * cfg.u_m;
  const double r = a * (m - a) / m;
  return 4.0 * r * r / 3.0;
}

/// Peak of |s1(u, .)| over a period, reached at the two switching phases.
inline double s1_amplitude(double u, const PwmConfig& cfg) {
  detail::require_in_range(u, cfg);
  const double a = 0.25 * (cfg.u_m - u);
  const double m = 0.5 * cfg.u_m;
  return 2.0 * a * (m - a) / m;
}

/// Mean of s1(u, j/N)^2 over the N phases j = 0..N-1.
///
/// This is what the trapezoidal rule returns for one full period of s1^2
/// sampled N times per period; it differs from s1_mean_square by O(1/N^2).
/// Evaluated in O(1) by summing the two linear pieces of s1 over the positive
/// half of the (symmetric) phase grid.
inline double s1_grid_mean_square(double u, int samples_per_period, const PwmConfig& cfg) {
  detail::require_in_range(u, cfg);
  if (samples_per_period < 1) throw std::invalid_argument("samples_per_period must be >= 1");
  const long n = samples_per_period;
  const double c = cfg.u_m / static_cast<double>(n);
  const double m = 0.5 * cfg.u_m;
  const double a = 0.25 * (cfg.u_m - u);
  const double beta = 1.0 - u / cfg.u_m;
  // wrap(j/N) runs over c (i + delta) - m, i = 0..N-1.
  const double delta = (n % 2 == 0) ? 0.0 : 0.5;

  // sum_{i=lo}^{hi} (slope * (c (i + delta) - m) + offset)^2
  auto piece = [&](long lo, long hi, double slope, double offset) {
    if (hi < lo) return 0.0;
    const double count = static_cast<double>(hi - lo + 1);
    const double first = slope * (c * (static_cast<double>(lo) + delta) - m) + offset;
    const double step = slope * c;
    // sum_{j=0}^{count-1} (first + step j)^2
    const double s1j = count * (count - 1.0) / 2.0;
    const double s2j = (count - 1.0) * count * (2.0 * count - 1.0) / 6.0;
    return count * first * first + 2.0 * first * step * s1j + step * step * s2j;
  };

  const long i_min = static_cast<long>(std::floor(0.5 * static_cast<double>(n) - delta)) + 1;
  long i_split = static_cast<long>(std::floor((a + m) / c - delta));
  if (i_split < i_min - 1) i_split = i_min - 1;
  if (i_split > n - 1) i_split = n - 1;

  const double inner = piece(i_min, i_split, beta - 2.0, 0.0);
  const double outer = piece(i_split + 1, n - 1, beta, -2.0 * a);
  return 2.0 * (inner + outer) / static_cast<double>(n);
}

}  // namespace pwmsi

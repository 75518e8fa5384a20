#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "pwmsi/types.hpp"

namespace pwmsi {

/// Single-input single-output system  x' = f(x) + g(x) u + b_d d,  y = h(x),
/// where b_d is `disturbance_channel` and d an exogenous scalar.
struct SisoPlant {
  using Field = std::function<Vector(const Vector&)>;
  using Scalar = std::function<double(const Vector&)>;

  int dim = 0;
  Field f;
  Field g;
  Scalar h;
  /// Lie derivative h'(x) g(x). Optional; central differences are used when
  /// empty.
  Scalar dh_g;
  Vector disturbance_channel;

  /// h'(x) g(x), analytic when provided.
  double lie_derivative(const Vector& x) const {
    if (dh_g) return dh_g(x);
    return lie_derivative_fd(x);
  }

  /// Central difference of h along g, step 1e-6 (1 + |x|).
  double lie_derivative_fd(const Vector& x) const {
    const double step = 1e-6 * (1.0 + x.norm());
    const Vector dir = g(x);
    const Vector xp = x + step * dir;
    const Vector xm = x - step * dir;
    return (h(xp) - h(xm)) / (2.0 * step);
  }
};

/// Actual measurement h(x) and virtual measurement epsilon h'(x) g(x).
struct OutputPair {
  double y_a = 0.0;
  double y_v = 0.0;
};

inline OutputPair outputs(const SisoPlant& p, const Vector& x, double epsilon) {
  OutputPair out{p.h(x), epsilon * p.lie_derivative(x)};
  if (!std::isfinite(out.y_a) || !std::isfinite(out.y_v)) {
    throw NumericError("non-finite plant output");
  }
  return out;
}

/// x1' = x2, x2' = x3, x3' = u + d, y = x2 + x1 x3.
///
/// The actual output loses observability at the equilibria (c, 0, 0); the
/// virtual output epsilon x1 does not.
inline SisoPlant triple_integrator() {
  SisoPlant p;
  p.dim = 3;
  p.f = [](const Vector& x) {
    Vector dx(3);
    dx << x(1), x(2), 0.0;
    return dx;
  };
  p.g = [](const Vector&) {
    Vector gx(3);
    gx << 0.0, 0.0, 1.0;
    return gx;
  };
  p.h = [](const Vector& x) { return x(1) + x(0) * x(2); };
  p.dh_g = [](const Vector& x) { return x(0); };
  p.disturbance_channel = Vector::Zero(3);
  p.disturbance_channel(2) = 1.0;
  return p;
}

}  // namespace pwmsi

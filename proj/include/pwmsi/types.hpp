#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pwmsi {

/// Upper bound on plant + controller state dimension. Vectors and matrices
/// below are dynamically sized but stack allocated up to this bound, so the
/// integrator inner loops never touch the heap.
inline constexpr int kMaxDim = 16;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxDim>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Input outside the modulator range [-u_m, u_m].
class RangeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite value produced by a plant map or the integrator.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Controllability (or observability, for the dual) matrix is singular.
class RankDeficiencyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Closed-loop command left the PWM range during a simulation.
class SaturationError : public std::runtime_error {
 public:
  SaturationError(double t, double u, double u_m)
      : std::runtime_error("controller output u=" + std::to_string(u) + " at t=" + std::to_string(t) +
                           " exceeds PWM range [-" + std::to_string(u_m) + ", " + std::to_string(u_m) + "]"),
        time(t),
        input(u) {}

  double time;
  double input;
};

/// Mean square of s1 is too small to normalize the ripple correlation.
class DegenerateModulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pwmsi

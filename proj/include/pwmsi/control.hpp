#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwmsi/plant.hpp"
#include "pwmsi/types.hpp"

namespace pwmsi {

/// Monic polynomial with the given roots, coefficients in increasing degree:
/// prod (s - r_i) = c[0] + c[1] s + ... + s^n. The roots must be closed under
/// conjugation for the result to be real; the imaginary residue is dropped.
template <class Real = double>
std::vector<Real> monic_from_roots(std::span<const std::complex<double>> roots) {
  std::vector<std::complex<Real>> c{Real(1)};
  for (const auto& r : roots) {
    const std::complex<Real> rr(r.real(), r.imag());
    std::vector<std::complex<Real>> next(c.size() + 1, Real(0));
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i + 1] += c[i];
      next[i] -= rr * c[i];
    }
    c = std::move(next);
  }
  std::vector<Real> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

namespace detail {

inline void require_conjugate_closed(std::span<const std::complex<double>> poles) {
  std::vector<bool> used(poles.size(), false);
  for (std::size_t i = 0; i < poles.size(); ++i) {
    if (used[i]) continue;
    const auto& p = poles[i];
    if (!std::isfinite(p.real()) || !std::isfinite(p.imag())) {
      throw std::invalid_argument("non-finite pole");
    }
    const double tol = 1e-9 * (1.0 + std::abs(p));
    used[i] = true;
    if (std::abs(p.imag()) <= tol) continue;
    bool matched = false;
    for (std::size_t j = i + 1; j < poles.size(); ++j) {
      if (!used[j] && std::abs(poles[j] - std::conj(p)) <= tol) {
        used[j] = true;
        matched = true;
        break;
      }
    }
    if (!matched) {
      throw std::invalid_argument("pole set is not closed under conjugation");
    }
  }
}

}  // namespace detail

/// State-feedback row K such that eig(A - B K) equals `poles` (Ackermann).
///
/// Throws RankDeficiencyError when (A, B) is not controllable and
/// std::invalid_argument on a size mismatch or a pole set that is not closed
/// under conjugation. Observer gains come from the dual pair (A^T, C^T).
inline Eigen::RowVectorXd place_poles(const Eigen::MatrixXd& A, const Eigen::VectorXd& B,
                                      std::span<const std::complex<double>> poles) {
  const Eigen::Index n = A.rows();
  if (n == 0 || A.cols() != n || B.size() != n || static_cast<Eigen::Index>(poles.size()) != n) {
    throw std::invalid_argument("place_poles: A must be n x n, B of length n, and n poles given");
  }
  detail::require_conjugate_closed(poles);

  // Extended precision keeps K at the accuracy its double representation allows
  // even when the controllability matrix is poorly conditioned.
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const MatL a = A.cast<long double>();
  MatL ctrb(n, n);
  ctrb.col(0) = B.cast<long double>();
  for (Eigen::Index i = 1; i < n; ++i) ctrb.col(i) = a * ctrb.col(i - 1);
  Eigen::ColPivHouseholderQR<MatL> qr(ctrb);
  qr.setThreshold(1e-12L);
  if (qr.rank() < n) {
    throw RankDeficiencyError("place_poles: (A, B) is not controllable (rank " + std::to_string(qr.rank()) +
                              " < " + std::to_string(n) + ")");
  }

  const std::vector<long double> coeff = monic_from_roots<long double>(poles);
  MatL phi = MatL::Identity(n, n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    phi = phi * a;
    phi.diagonal().array() += coeff[static_cast<std::size_t>(i)];
  }

  // K = e_n^T ctrb^{-1} phi(A)
  VecL last = VecL::Zero(n);
  last(n - 1) = 1.0L;
  const VecL v = ctrb.transpose().colPivHouseholderQr().solve(last);
  return (v.transpose() * phi).cast<double>();
}

/// Linear dynamic output feedback
///   u    = -K eta + k r
///   eta' = A eta + B u + L (z - C eta)
/// where z is the (scaled) measurement fed to the observer. Equivalently
/// eta' = M eta + N r + L z with M = A - B K - L C and N = B k.
struct ControllerObserver {
  Matrix A;
  Vector B;
  RowVector C;
  RowVector K;
  double k = 0.0;
  Vector L;
  Matrix M;
  Vector N;
  /// Initial internal state.
  Vector eta0;

  int dim() const { return static_cast<int>(A.rows()); }

  void assemble() {
    M = A - B * K - L * C;
    N = B * k;
  }
};

inline double controller_output(const ControllerObserver& co, const Vector& eta, double x1ref) {
  return -co.K.dot(eta) + co.k * x1ref;
}

/// eta' given the PWM input command u and the observer measurement
/// (y_v / epsilon for the virtual-output loop).
inline Vector observer_rhs(const ControllerObserver& co, const Vector& eta, double u, double measurement) {
  const double innovation = measurement - co.C.dot(eta);
  return co.A * eta + co.B * u + co.L * innovation;
}

inline const std::vector<std::complex<double>>& paper_controller_poles() {
  static const std::vector<std::complex<double>> poles{{-6.59, 0.0}, {-3.30, 5.71}, {-3.30, -5.71}};
  return poles;
}

inline const std::vector<std::complex<double>>& paper_observer_poles() {
  static const std::vector<std::complex<double>> poles{{-1.19, 0.0}, {-0.73, 0.0}, {-0.49, 0.57}, {-0.49, -0.57}};
  return poles;
}

/// Controller-observer for the triple integrator driven by y_v / epsilon = x1,
/// with a disturbance estimate d_hat. eta = (x1_hat, x2_hat, x3_hat, d_hat).
///
/// (k1, k2, k3) places the controller spectrum on the triple integrator,
/// kd = 1 cancels d_hat in x3' = u + d, and k = k1 gives unit DC gain from
/// x1ref to x1. L places the observer spectrum on the 4-state model.
inline ControllerObserver build_paper_controller(std::span<const std::complex<double>> controller_poles,
                                                 std::span<const std::complex<double>> observer_poles) {
  Eigen::MatrixXd a3 = Eigen::MatrixXd::Zero(3, 3);
  a3(0, 1) = 1.0;
  a3(1, 2) = 1.0;
  Eigen::VectorXd b3 = Eigen::VectorXd::Zero(3);
  b3(2) = 1.0;
  const Eigen::RowVectorXd k3 = place_poles(a3, b3, controller_poles);

  Eigen::MatrixXd a4 = Eigen::MatrixXd::Zero(4, 4);
  a4(0, 1) = 1.0;
  a4(1, 2) = 1.0;
  a4(2, 3) = 1.0;
  Eigen::VectorXd c4 = Eigen::VectorXd::Zero(4);
  c4(0) = 1.0;
  const Eigen::RowVectorXd l4 = place_poles(a4.transpose(), c4, observer_poles);

  ControllerObserver co;
  co.A = a4;
  co.B = Vector::Zero(4);
  co.B(2) = 1.0;
  co.C = RowVector::Zero(4);
  co.C(0) = 1.0;
  co.K = RowVector(4);
  co.K << k3(0), k3(1), k3(2), 1.0;
  co.k = k3(0);
  co.L = l4.transpose();
  co.eta0 = Vector::Zero(4);
  co.assemble();
  return co;
}

inline ControllerObserver build_paper_controller() {
  return build_paper_controller(paper_controller_poles(), paper_observer_poles());
}

/// Linear plant x' = A x + B u + Bd d with measurement z = C x.
struct LinearPlant {
  Matrix A;
  Vector B;
  Vector Bd;
  RowVector C;
};

/// The triple integrator with the observer measurement y_v / epsilon = x1.
inline LinearPlant triple_integrator_linear() {
  LinearPlant p;
  p.A = Matrix::Zero(3, 3);
  p.A(0, 1) = 1.0;
  p.A(1, 2) = 1.0;
  p.B = Vector::Zero(3);
  p.B(2) = 1.0;
  p.Bd = p.B;
  p.C = RowVector::Zero(3);
  p.C(0) = 1.0;
  return p;
}

/// z' = A z + E_r r + E_d d for z = (x, eta) in the ideal (unmodulated) loop.
struct LinearClosedLoop {
  Eigen::MatrixXd A;
  Eigen::VectorXd E_r;
  Eigen::VectorXd E_d;

  /// Equilibrium for constant r and d.
  Eigen::VectorXd steady_state(double r, double d) const {
    return A.fullPivLu().solve(-(E_r * r + E_d * d));
  }
};

inline LinearClosedLoop assemble_closed_loop(const LinearPlant& p, const ControllerObserver& co) {
  const Eigen::Index n = p.A.rows();
  const Eigen::Index q = co.dim();
  LinearClosedLoop cl;
  cl.A = Eigen::MatrixXd::Zero(n + q, n + q);
  cl.A.topLeftCorner(n, n) = p.A;
  cl.A.topRightCorner(n, q) = -p.B * co.K;
  cl.A.bottomLeftCorner(q, n) = co.L * p.C;
  cl.A.bottomRightCorner(q, q) = co.M;
  cl.E_r = Eigen::VectorXd::Zero(n + q);
  cl.E_r.head(n) = p.B * co.k;
  cl.E_r.tail(q) = co.N;
  cl.E_d = Eigen::VectorXd::Zero(n + q);
  cl.E_d.head(n) = p.Bd;
  return cl;
}

/// Exogenous signals of the test scenario: a disturbance step and a filtered
/// reference step.
struct Scenario {
  double d_step_time = 2.0;
  double d_value = -0.25;
  double ref_step_time = 14.0;
  double ref_amplitude = 1.0;
  /// Time constant of the critically damped second-order reference filter.
  /// Zero gives an unfiltered step.
  double ref_filter_time_constant = 0.5;
  double t_end = 20.0;

  void validate() const {
    if (!(d_step_time >= 0.0)) throw std::invalid_argument("d_step_time must be >= 0");
    if (!(ref_step_time > d_step_time)) throw std::invalid_argument("ref_step_time must exceed d_step_time");
    if (!(t_end > ref_step_time) || !std::isfinite(t_end)) {
      throw std::invalid_argument("t_end must exceed ref_step_time");
    }
    if (!(ref_filter_time_constant >= 0.0)) throw std::invalid_argument("ref_filter_time_constant must be >= 0");
    if (!std::isfinite(d_value)) throw std::invalid_argument("d_value must be finite");
    if (!std::isfinite(ref_amplitude)) throw std::invalid_argument("ref_amplitude must be finite");
  }
};

struct ScenarioSignals {
  double d = 0.0;
  double x1ref = 0.0;
};

inline ScenarioSignals scenario_signals(const Scenario& s, double t) {
  ScenarioSignals out;
  if (t >= s.d_step_time) out.d = s.d_value;
  if (t >= s.ref_step_time) {
    const double tau = s.ref_filter_time_constant;
    if (tau == 0.0) {
      out.x1ref = s.ref_amplitude;
    } else {
      const double z = (t - s.ref_step_time) / tau;
      out.x1ref = s.ref_amplitude * (1.0 - (1.0 + z) * std::exp(-z));
    }
  }
  return out;
}

}  // namespace pwmsi

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pwmsi/control.hpp"

using namespace pwmsi;
using cd = std::complex<double>;

namespace {

// Smallest max-distance over all pairings of two equally sized root sets.
double spectrum_distance(std::vector<cd> got, const std::vector<cd>& want) {
  std::vector<int> perm(want.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double worst = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[perm[i]] - want[i]));
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// Eigenvalues of a double matrix, computed in extended precision so the
// measurement itself does not dominate the error.
std::vector<cd> eig(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<MatL> es(m.cast<long double>(), false);
  std::vector<cd> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.emplace_back(static_cast<double>(es.eigenvalues()(i).real()), static_cast<double>(es.eigenvalues()(i).imag()));
  }
  return out;
}

// Bass-Gura gain in extended precision: K = (alpha - a)^T (ctrb W)^{-1}, with a
// the open-loop characteristic polynomial (Faddeev-LeVerrier) and W the
// upper-triangular Toeplitz matrix of its coefficients.
Eigen::RowVectorXd bass_gura(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, const std::vector<cd>& poles) {
  const Eigen::Index n = A.rows();
  const MatL a = A.cast<long double>();
  std::vector<long double> c(n + 1, 0.0L);  // s^n + c[n-1] s^{n-1} + ... + c[0]
  c[n] = 1.0L;
  MatL mk = MatL::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    mk = a * mk + c[n - k + 1] * MatL::Identity(n, n);
    c[n - k] = -(a * mk).trace() / static_cast<long double>(k);
  }
  std::vector<long double> alpha{1.0L};
  for (const cd& p : poles) {
    if (p.imag() < 0.0) continue;
    std::vector<long double> f = p.imag() == 0.0
                                     ? std::vector<long double>{-(long double)p.real(), 1.0L}
                                     : std::vector<long double>{(long double)p.real() * p.real() +
                                                                    (long double)p.imag() * p.imag(),
                                                                -2.0L * p.real(), 1.0L};
    std::vector<long double> next(alpha.size() + f.size() - 1, 0.0L);
    for (std::size_t i = 0; i < alpha.size(); ++i)
      for (std::size_t j = 0; j < f.size(); ++j) next[i + j] += alpha[i] * f[j];
    alpha = next;
  }
  MatL ctrb(n, n);
  ctrb.col(0) = B.cast<long double>();
  for (Eigen::Index i = 1; i < n; ++i) ctrb.col(i) = a * ctrb.col(i - 1);
  MatL w = MatL::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) w(i, j) = c[n - (j - i)];
  // row vector ordered by descending power: (alpha_{n-1} - a_{n-1}, ..., alpha_0 - a_0)
  Eigen::Matrix<long double, 1, Eigen::Dynamic> d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = alpha[n - 1 - i] - c[n - 1 - i];
  const MatL t = ctrb * w;
  const Eigen::Matrix<long double, 1, Eigen::Dynamic> k = t.transpose().fullPivLu().solve(d.transpose()).transpose();
  return k.cast<double>();
}

// Real polynomial product, coefficients in increasing degree.
std::vector<double> polymul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// Characteristic polynomial of a spectrum built from real factors (s - r) and
// quadratic factors s^2 - 2 Re(p) s + |p|^2.
std::vector<double> charpoly(const std::vector<cd>& poles) {
  std::vector<double> out{1.0};
  for (const cd& p : poles) {
    if (p.imag() < 0.0) continue;
    if (p.imag() == 0.0) {
      out = polymul(out, {-p.real(), 1.0});
    } else {
      out = polymul(out, {std::norm(p), -2.0 * p.real(), 1.0});
    }
  }
  return out;
}

std::vector<cd> random_spectrum(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> re(-4.0, -0.3), im(0.2, 3.0);
  std::vector<cd> out;
  while (static_cast<int>(out.size()) < n) {
    if (n - static_cast<int>(out.size()) >= 2 && rng() % 2) {
      const cd p(re(rng), im(rng));
      out.push_back(p);
      out.push_back(std::conj(p));
    } else {
      out.emplace_back(re(rng), 0.0);
    }
  }
  return out;
}

}  // namespace

TEST(Control, MonicFromRoots) {
  const std::vector<cd> r{{-1, 0}, {-2, 0}};
  EXPECT_EQ(monic_from_roots(r), (std::vector<double>{2.0, 3.0, 1.0}));
}

TEST(Control, DoubleIntegratorExample) {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 0, 0;
  Eigen::VectorXd b(2);
  b << 0, 1;
  const std::vector<cd> poles{{-1, 0}, {-2, 0}};
  const Eigen::RowVectorXd k = place_poles(a, b, poles);
  EXPECT_NEAR(k(0), 2.0, 1e-12);
  EXPECT_NEAR(k(1), 3.0, 1e-12);
}

TEST(Control, PaperControllerGains) {
  const ControllerObserver co = build_paper_controller();
  // s^3 + k3 s^2 + k2 s + k1 for the chain of integrators
  const auto want = charpoly(paper_controller_poles());
  EXPECT_NEAR(co.K(0), want[0], 1e-9);
  EXPECT_NEAR(co.K(1), want[1], 1e-9);
  EXPECT_NEAR(co.K(2), want[2], 1e-9);
  EXPECT_NEAR(co.K(0), 286.626119, 1e-9);
  EXPECT_NEAR(co.K(1), 86.9881, 1e-9);
  EXPECT_NEAR(co.K(2), 13.19, 1e-9);
  EXPECT_EQ(co.K(3), 1.0);
  EXPECT_EQ(co.k, co.K(0));
}

TEST(Control, PaperObserverGains) {
  const ControllerObserver co = build_paper_controller();
  // s^4 + l1 s^3 + l2 s^2 + l3 s + l4 for output injection on the chain
  const auto want = charpoly(paper_observer_poles());
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(co.L(i), want[3 - i], 1e-9);
  EXPECT_NEAR(co.L(0), 2.90, 1e-12);
  EXPECT_NEAR(co.L(1), 3.3153, 1e-12);
  EXPECT_NEAR(co.L(2), 1.936126, 1e-12);
  EXPECT_NEAR(co.L(3), 0.4908155, 1e-12);
}

TEST(Control, SeparationPrincipleOnPaperLoop) {
  const ControllerObserver co = build_paper_controller();
  const LinearClosedLoop cl = assemble_closed_loop(triple_integrator_linear(), co);
  std::vector<cd> want(paper_controller_poles());
  want.insert(want.end(), paper_observer_poles().begin(), paper_observer_poles().end());
  EXPECT_LT(spectrum_distance(eig(cl.A), want), 1e-9);
}

TEST(Control, RandomSystemsRoundTrip) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 1.0);
  int within_1e9 = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + trial % 6;
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
      b(i) = nd(rng);
      for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
    }
    const auto poles = random_spectrum(rng, n);
    const Eigen::RowVectorXd k = place_poles(a, b, poles);
    const Eigen::RowVectorXd ref = bass_gura(a, b, poles);
    EXPECT_LT((k - ref).norm(), 1e-12 * (1.0 + ref.norm())) << "trial " << trial;
    // Rounding the reference gain to double already moves a sensitive
    // spectrum; the computed gain must do no worse than that floor.
    const double floor = spectrum_distance(eig(a - b * ref), poles);
    const double err = spectrum_distance(eig(a - b * k), poles);
    EXPECT_LT(err, std::max(1e-9, 2.0 * floor)) << "trial " << trial << " n=" << n;
    within_1e9 += err < 1e-9;
  }
  EXPECT_GE(within_1e9, 58);
}

TEST(Control, UncontrollableThrows) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = -1.0;
  a(1, 1) = -2.0;
  Eigen::VectorXd b(2);
  b << 1.0, 0.0;
  const std::vector<cd> poles{{-3, 0}, {-4, 0}};
  EXPECT_THROW(place_poles(a, b, poles), RankDeficiencyError);
}

TEST(Control, RejectsBadPoleSets) {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 0, 0;
  Eigen::VectorXd b(2);
  b << 0, 1;
  const std::vector<cd> unpaired{{-1, 1}, {-2, 0}};
  EXPECT_THROW(place_poles(a, b, unpaired), std::invalid_argument);
  const std::vector<cd> wrong_count{{-1, 0}};
  EXPECT_THROW(place_poles(a, b, wrong_count), std::invalid_argument);
}

TEST(Control, SteadyStates) {
  const ControllerObserver co = build_paper_controller();
  const LinearClosedLoop cl = assemble_closed_loop(triple_integrator_linear(), co);
  const Eigen::VectorXd rej = cl.steady_state(0.0, -0.25);
  EXPECT_NEAR(rej(0), 0.0, 1e-12);
  EXPECT_NEAR(rej(6), -0.25, 1e-12);
  const Eigen::VectorXd trk = cl.steady_state(1.0, 0.0);
  EXPECT_NEAR(trk(0), 1.0, 1e-12);
  EXPECT_NEAR(trk(3), 1.0, 1e-12);
  EXPECT_NEAR((cl.A * trk + cl.E_r).norm(), 0.0, 1e-12);
}

TEST(Control, ControllerAndObserverEquations) {
  const ControllerObserver co = build_paper_controller();
  Vector eta(4);
  eta << 0.1, -0.2, 0.3, -0.25;
  const double u = controller_output(co, eta, 1.0);
  EXPECT_NEAR(u, -(co.K(0) * 0.1 - co.K(1) * 0.2 + co.K(2) * 0.3 - 0.25) + co.K(0), 1e-12);
  const Vector rhs = observer_rhs(co, eta, u, 0.5);
  const double innov = 0.5 - 0.1;
  EXPECT_NEAR(rhs(0), -0.2 + co.L(0) * innov, 1e-12);
  EXPECT_NEAR(rhs(1), 0.3 + co.L(1) * innov, 1e-12);
  EXPECT_NEAR(rhs(2), -0.25 + u + co.L(2) * innov, 1e-12);
  EXPECT_NEAR(rhs(3), co.L(3) * innov, 1e-12);
  Vector via_m = co.M * eta + co.N * 1.0 + co.L * 0.5;
  EXPECT_LT((via_m - rhs).norm(), 1e-12);
}

TEST(Control, ScenarioSignals) {
  const Scenario s;
  EXPECT_EQ(scenario_signals(s, 1.999).d, 0.0);
  EXPECT_EQ(scenario_signals(s, 2.0).d, -0.25);
  EXPECT_EQ(scenario_signals(s, 13.9).x1ref, 0.0);
  EXPECT_EQ(scenario_signals(s, 14.0).x1ref, 0.0);
  EXPECT_NEAR(scenario_signals(s, 14.5).x1ref, 1.0 - 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(scenario_signals(s, 20.0).x1ref, 1.0, 1e-4);
  Scenario step = s;
  step.ref_filter_time_constant = 0.0;
  EXPECT_EQ(scenario_signals(step, 14.0).x1ref, 1.0);
  Scenario bad = s;
  bad.t_end = 10.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

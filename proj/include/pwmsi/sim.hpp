#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwmsi/control.hpp"
#include "pwmsi/demod.hpp"
#include "pwmsi/noise.hpp"
#include "pwmsi/plant.hpp"
#include "pwmsi/pwm.hpp"
#include "pwmsi/types.hpp"

namespace pwmsi {

struct SimConfig {
  /// Integration substeps (and trace samples) per PWM period.
  int substeps_per_period = 100;
  /// Switching instants are located to event_tolerance * epsilon.
  double event_tolerance = 1e-10;
  bool noise_enabled = false;
  double noise_power_density = 1e-9;
  double noise_sample_time = 1e-5;
  std::uint64_t rng_seed = 0;
  DemodOptions demod{};
  /// Initial plant state; empty means the origin.
  Vector x0;

  void validate(const PwmConfig& pwm) const {
    if (substeps_per_period < 8) throw std::invalid_argument("substeps_per_period must be >= 8");
    if (!(event_tolerance > 0.0 && event_tolerance < 1e-2)) {
      throw std::invalid_argument("event_tolerance must be in (0, 1e-2)");
    }
    if (noise_enabled) {
      if (!(noise_power_density >= 0.0)) throw std::invalid_argument("noise_power_density must be >= 0");
      if (!(noise_sample_time > 0.0)) throw std::invalid_argument("noise_sample_time must be > 0");
      if (noise_sample_time > pwm.epsilon / 10.0 * (1.0 + 1e-12)) {
        throw std::invalid_argument("noise_sample_time must be <= epsilon / 10");
      }
    }
  }
};

/// One record on the simulation grid t_k = k epsilon / substeps_per_period.
struct Sample {
  double t = 0.0;
  Vector x;
  Vector eta;
  double u = 0.0;
  double u_pwm = 0.0;
  double y = 0.0;
  double y_noisy = 0.0;
  double yhat_a = 0.0;
  double yhat_v = 0.0;
  double x1ref = 0.0;
  double d = 0.0;
};

/// Uniformly sampled record of one run. For the switched run yhat_* are the
/// demodulator outputs (yhat_a = y_noisy and yhat_v = 0 during warm-up); for
/// the averaged run they are the true h(x) and epsilon h'(x) g(x), and
/// u_pwm = u.
struct SimTrace {
  enum class Kind { kActual, kIdeal };

  Kind kind = Kind::kActual;
  double epsilon = 0.0;
  int samples_per_period = 0;

  std::vector<double> t;
  std::vector<Vector> x;
  std::vector<Vector> eta;
  std::vector<double> u;
  std::vector<double> u_pwm;
  std::vector<double> y;
  std::vector<double> y_noisy;
  std::vector<double> yhat_a;
  std::vector<double> yhat_v;
  std::vector<double> x1ref;
  std::vector<double> d;

  /// Carrier crossings counted in each completed PWM period (switched run).
  std::vector<int> switchings_per_period;
  /// More than two crossings in some period.
  bool chattering = false;

  std::size_t size() const { return t.size(); }
  double sample_interval() const { return epsilon / samples_per_period; }

  void reserve(std::size_t n) {
    for (auto* v : {&t, &u, &u_pwm, &y, &y_noisy, &yhat_a, &yhat_v, &x1ref, &d}) v->reserve(n);
    x.reserve(n);
    eta.reserve(n);
  }

  void append(const Sample& s) {
    t.push_back(s.t);
    x.push_back(s.x);
    eta.push_back(s.eta);
    u.push_back(s.u);
    u_pwm.push_back(s.u_pwm);
    y.push_back(s.y);
    y_noisy.push_back(s.y_noisy);
    yhat_a.push_back(s.yhat_a);
    yhat_v.push_back(s.yhat_v);
    x1ref.push_back(s.x1ref);
    d.push_back(s.d);
  }

  Sample at(std::size_t i) const {
    return Sample{t[i], x[i], eta[i], u[i], u_pwm[i], y[i], y_noisy[i], yhat_a[i], yhat_v[i], x1ref[i], d[i]};
  }
};

/// Carrier crossings of a continuous input over one PWM period.
struct Switchings {
  std::vector<double> times;
  /// Some ramp is crossed more than once.
  bool chattering = false;
};

/// Locates the crossings of u_fn with the carrier during period
/// [p eps, (p + 1) eps]: the falling ramp covers the first half period, the
/// rising ramp the second. Each ramp is scanned for sign changes and every
/// bracket is refined by bisection to tol * eps.
inline Switchings find_switchings(const std::function<double(double)>& u_fn, long period_index,
                                  const PwmConfig& pwm, double tol) {
  constexpr int kScan = 256;
  Switchings out;
  const double eps = pwm.epsilon;
  auto gap = [&](double t) { return u_fn(t) - carrier(t, pwm); };
  for (int ramp = 0; ramp < 2; ++ramp) {
    const double t0 = (static_cast<double>(period_index) + 0.5 * ramp) * eps;
    const double dt = 0.5 * eps / kScan;
    int found = 0;
    double ta = t0;
    double ga = gap(ta);
    for (int i = 1; i <= kScan; ++i) {
      const double tb = t0 + dt * i;
      const double gb = gap(tb);
      if ((ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0)) {
        double lo = ta;
        double hi = tb;
        double glo = ga;
        while (hi - lo > tol * eps) {
          const double mid = 0.5 * (lo + hi);
          const double gm = gap(mid);
          if ((gm < 0.0) == (glo < 0.0) && gm != 0.0) {
            lo = mid;
            glo = gm;
          } else {
            hi = mid;
          }
        }
        out.times.push_back(0.5 * (lo + hi));
        ++found;
      }
      ta = tb;
      ga = gb;
    }
    if (found > 1) out.chattering = true;
  }
  return out;
}

namespace detail {

template <class Rhs>
Vector rk4_step(const Rhs& rhs, double t, const Vector& z, double dt) {
  const Vector k1 = rhs(t, z);
  const Vector k2 = rhs(t + 0.5 * dt, z + 0.5 * dt * k1);
  const Vector k3 = rhs(t + 0.5 * dt, z + 0.5 * dt * k2);
  const Vector k4 = rhs(t + dt, z + dt * k3);
  return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void require_finite(const Vector& z, double t) {
  if (!z.allFinite()) throw NumericError("state became non-finite at t=" + std::to_string(t));
}

/// Scenario breakpoints strictly inside (t0, t1).
inline void scenario_breaks(const Scenario& sc, double t0, double t1, std::vector<double>& out) {
  const double margin = 1e-9 * (t1 - t0);
  for (double tb : {sc.d_step_time, sc.ref_step_time}) {
    if (tb > t0 + margin && tb < t1 - margin) out.push_back(tb);
  }
}

/// Shared bookkeeping of the two closed loops.
class LoopBase {
 public:
  LoopBase(const SisoPlant& plant, const ControllerObserver& co, const PwmConfig& pwm, const SimConfig& sim,
           const Scenario& sc)
      : plant_(plant), co_(co), pwm_(pwm), sim_(sim), sc_(sc) {
    pwm_.validate();
    sim_.validate(pwm_);
    sc_.validate();
    if (plant_.dim <= 0 || plant_.dim + co_.dim() > kMaxDim) {
      throw std::invalid_argument("plant + controller dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    }
    if (co_.eta0.size() != co_.dim()) throw std::invalid_argument("controller initial state has wrong size");
    n_ = plant_.dim;
    q_ = co_.dim();
    h_ = pwm_.epsilon / sim_.substeps_per_period;
    steps_ = std::llround(sc_.t_end / h_);
    x0_ = sim_.x0.size() == 0 ? Vector(Vector::Zero(n_)) : sim_.x0;
    if (x0_.size() != n_) throw std::invalid_argument("initial state has wrong size");
  }

  bool done() const { return k_ >= steps_; }
  long long index() const { return k_; }
  long long steps() const { return steps_; }
  double step_size() const { return h_; }
  const Sample& sample() const { return sample_; }

 protected:
  double time_at(long long k) const { return static_cast<double>(k) * h_; }
  double phase_at(long long k) const {
    return static_cast<double>(k) / static_cast<double>(sim_.substeps_per_period);
  }

  const SisoPlant& plant_;
  const ControllerObserver& co_;
  PwmConfig pwm_;
  SimConfig sim_;
  Scenario sc_;
  int n_ = 0;
  int q_ = 0;
  double h_ = 0.0;
  long long steps_ = 0;
  long long k_ = 0;
  Vector x0_;
  Vector z_;
  Sample sample_;
};

}  // namespace detail

/// Averaged closed loop: the plant sees u directly and the controller is fed
/// the true virtual output. Initial plant state is shifted by
/// -epsilon g(x0) s1(u(0), 0).
class IdealLoop : public detail::LoopBase {
 public:
  IdealLoop(const SisoPlant& plant, const ControllerObserver& co, const PwmConfig& pwm, const SimConfig& sim,
            const Scenario& sc)
      : LoopBase(plant, co, pwm, sim, sc) {
    const double r0 = scenario_signals(sc_, 0.0).x1ref;
    const double u0 = controller_output(co_, co_.eta0, r0);
    z_ = Vector(n_ + q_);
    z_.head(n_) = x0_ - pwm_.epsilon * plant_.g(x0_) * s1(u0, 0.0, pwm_);
    z_.tail(q_) = co_.eta0;
    record();
  }

  void step() {
    const double t0 = time_at(k_);
    const double t1 = time_at(k_ + 1);
    breaks_.clear();
    detail::scenario_breaks(sc_, t0, t1, breaks_);
    breaks_.push_back(t1);
    double ta = t0;
    for (double tb : breaks_) {
      const double d = scenario_signals(sc_, 0.5 * (ta + tb)).d;
      auto rhs = [&](double t, const Vector& z) { return this->rhs(t, z, d); };
      z_ = detail::rk4_step(rhs, ta, z_, tb - ta);
      ta = tb;
    }
    ++k_;
    detail::require_finite(z_, t1);
    record();
  }

 private:
  Vector rhs(double t, const Vector& z, double d) const {
    const Vector x = z.head(n_);
    const Vector eta = z.tail(q_);
    const double u = controller_output(co_, eta, scenario_signals(sc_, t).x1ref);
    Vector dz(n_ + q_);
    dz.head(n_) = plant_.f(x) + plant_.g(x) * u + plant_.disturbance_channel * d;
    dz.tail(q_) = observer_rhs(co_, eta, u, plant_.lie_derivative(x));
    return dz;
  }

  void record() {
    const double t = time_at(k_);
    const auto sig = scenario_signals(sc_, t);
    sample_.t = t;
    sample_.x = z_.head(n_);
    sample_.eta = z_.tail(q_);
    sample_.u = controller_output(co_, sample_.eta, sig.x1ref);
    sample_.u_pwm = sample_.u;
    const OutputPair out = outputs(plant_, sample_.x, pwm_.epsilon);
    sample_.y = out.y_a;
    sample_.y_noisy = out.y_a;
    sample_.yhat_a = out.y_a;
    sample_.yhat_v = out.y_v;
    sample_.x1ref = sig.x1ref;
    sample_.d = sig.d;
  }

  std::vector<double> breaks_;
};

/// PWM-switched closed loop with the demodulated virtual output in the
/// feedback path.
///
/// Between carrier crossings the PWM level is constant and the right-hand side
/// smooth, so each substep is split at carrier vertices, scenario breakpoints
/// and located crossings and integrated with classical RK4. The demodulator
/// output is refreshed once per substep and held in between; it reads zero
/// until the correlation window has filled.
class ActualLoop : public detail::LoopBase {
 public:
  ActualLoop(const SisoPlant& plant, const ControllerObserver& co, const PwmConfig& pwm, const SimConfig& sim,
             const Scenario& sc)
      : LoopBase(plant, co, pwm, sim, sc), demod_(pwm_, sim_.substeps_per_period, sim_.demod) {
    if (sim_.noise_enabled) {
      noise_.emplace(sim_.noise_power_density, sim_.noise_sample_time, sim_.rng_seed);
    }
    z_ = Vector(n_ + q_);
    z_.head(n_) = x0_;
    z_.tail(q_) = co_.eta0;
    record();
    level_ = level_from_gap(gap(0.0, z_), 0.5 * h_);
  }

  void step() {
    const double t0 = time_at(k_);
    const double t1 = time_at(k_ + 1);
    const double measurement = held_yhat_v_ / pwm_.epsilon;

    breaks_.clear();
    detail::scenario_breaks(sc_, t0, t1, breaks_);
    // Carrier vertices sit at multiples of eps / 2, i.e. at index multiples of N / 2.
    const double n = sim_.substeps_per_period;
    const auto j_lo = static_cast<long long>(std::floor(2.0 * static_cast<double>(k_) / n)) + 1;
    const auto j_hi = static_cast<long long>(std::ceil(2.0 * static_cast<double>(k_ + 1) / n)) - 1;
    for (long long j = j_lo; j <= j_hi; ++j) {
      const double pos = 0.5 * static_cast<double>(j) * n;  // in units of h
      if (pos > static_cast<double>(k_) + 1e-9 && pos < static_cast<double>(k_ + 1) - 1e-9) {
        breaks_.push_back(0.5 * static_cast<double>(j) * pwm_.epsilon);
      }
    }
    std::sort(breaks_.begin(), breaks_.end());
    breaks_.push_back(t1);

    double ta = t0;
    for (double tb : breaks_) {
      integrate_segment(ta, tb, measurement);
      ta = tb;
    }
    ++k_;
    detail::require_finite(z_, t1);

    if (k_ % sim_.substeps_per_period == 0) {
      trace_switch_counts_.push_back(switches_in_period_);
      if (switches_in_period_ > 2) chattering_ = true;
      switches_in_period_ = 0;
    }
    record();
  }

  const std::vector<int>& switchings_per_period() const { return trace_switch_counts_; }
  bool chattering() const { return chattering_; }

 private:
  double level_from_gap(double gap, double t_mid) const {
    if (gap > 0.0) return pwm_.u_m;
    if (gap < 0.0) return -pwm_.u_m;
    // On a tie the carrier moves away from u: upward on the rising ramp.
    return wrap(t_mid / pwm_.epsilon, pwm_) < 0.0 ? -pwm_.u_m : pwm_.u_m;
  }

  double gap(double t, const Vector& z) const {
    const double u = controller_output(co_, z.tail(q_), scenario_signals(sc_, t).x1ref);
    return u - carrier(t, pwm_);
  }

  Vector rhs(double t, const Vector& z, double level, double d, double measurement) const {
    const Vector x = z.head(n_);
    const Vector eta = z.tail(q_);
    const double u = controller_output(co_, eta, scenario_signals(sc_, t).x1ref);
    Vector dz(n_ + q_);
    dz.head(n_) = plant_.f(x) + plant_.g(x) * level + plant_.disturbance_channel * d;
    dz.tail(q_) = observer_rhs(co_, eta, u, measurement);
    return dz;
  }

  /// Integrates over [ta, tb], on which the carrier is monotone and d constant.
  void integrate_segment(double ta, double tb, double measurement) {
    const double t_mid = 0.5 * (ta + tb);
    const double d = scenario_signals(sc_, t_mid).d;
    double level = level_from_gap(gap(ta, z_), t_mid);
    if (level != level_) {
      // Crossing exactly on the segment boundary.
      ++switches_in_period_;
      level_ = level;
    }
    const double tol = sim_.event_tolerance * pwm_.epsilon;

    int crossings = 0;
    while (true) {
      auto rhs = [&](double t, const Vector& z) { return this->rhs(t, z, level, d, measurement); };
      const Vector zb = detail::rk4_step(rhs, ta, z_, tb - ta);
      const double gb = gap(tb, zb);
      const bool flips = (level > 0.0 && gb < 0.0) || (level < 0.0 && gb > 0.0);
      if (!flips) {
        z_ = zb;
        return;
      }
      // The level changes somewhere in (ta, tb]: bisect on the step length.
      double lo = 0.0;
      double hi = tb - ta;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double gm = gap(ta + mid, detail::rk4_step(rhs, ta, z_, mid));
        const bool flipped = (level > 0.0 && gm < 0.0) || (level < 0.0 && gm > 0.0);
        (flipped ? hi : lo) = mid;
      }
      z_ = detail::rk4_step(rhs, ta, z_, hi);
      ta += hi;
      level = -level;
      level_ = level;
      ++switches_in_period_;
      if (tb - ta <= 0.0) return;
      if (++crossings > 8) {
        // Input is chattering across the carrier; finish the segment as is.
        chattering_ = true;
        z_ = detail::rk4_step(rhs, ta, z_, tb - ta);
        return;
      }
    }
  }

  void record() {
    const double t = time_at(k_);
    const auto sig = scenario_signals(sc_, t);
    sample_.t = t;
    sample_.x = z_.head(n_);
    sample_.eta = z_.tail(q_);
    sample_.u = controller_output(co_, sample_.eta, sig.x1ref);
    if (!(std::abs(sample_.u) <= pwm_.u_m)) throw SaturationError(t, sample_.u, pwm_.u_m);
    sample_.u_pwm = modulate(sample_.u, phase_at(k_), pwm_);
    sample_.y = plant_.h(sample_.x);
    if (!std::isfinite(sample_.y)) throw NumericError("non-finite output at t=" + std::to_string(t));
    sample_.y_noisy = noise_ ? sample_.y + noise_->at(t) : sample_.y;
    demod_.push(t, sample_.y_noisy, sample_.u);
    sample_.yhat_a = demod_.yhat_a().value_or(sample_.y_noisy);
    sample_.yhat_v = demod_.yhat_v().value_or(0.0);
    held_yhat_v_ = sample_.yhat_v;
    sample_.x1ref = sig.x1ref;
    sample_.d = sig.d;
  }

  DemodState demod_;
  std::optional<BandLimitedNoise> noise_;
  double held_yhat_v_ = 0.0;
  /// PWM level currently applied.
  double level_ = 0.0;
  int switches_in_period_ = 0;
  std::vector<int> trace_switch_counts_;
  bool chattering_ = false;
  std::vector<double> breaks_;
};

/// Runs the PWM-switched closed loop over [0, t_end] and records every substep.
inline SimTrace simulate_actual(const SisoPlant& plant, const ControllerObserver& co, const PwmConfig& pwm,
                                const SimConfig& sim, const Scenario& sc) {
  ActualLoop loop(plant, co, pwm, sim, sc);
  SimTrace trace;
  trace.kind = SimTrace::Kind::kActual;
  trace.epsilon = pwm.epsilon;
  trace.samples_per_period = sim.substeps_per_period;
  trace.reserve(static_cast<std::size_t>(loop.steps() + 1));
  trace.append(loop.sample());
  while (!loop.done()) {
    loop.step();
    trace.append(loop.sample());
  }
  trace.switchings_per_period = loop.switchings_per_period();
  trace.chattering = loop.chattering();
  return trace;
}

/// Runs the averaged closed loop on the same grid as simulate_actual.
inline SimTrace simulate_ideal(const SisoPlant& plant, const ControllerObserver& co, const PwmConfig& pwm,
                               const SimConfig& sim, const Scenario& sc) {
  IdealLoop loop(plant, co, pwm, sim, sc);
  SimTrace trace;
  trace.kind = SimTrace::Kind::kIdeal;
  trace.epsilon = pwm.epsilon;
  trace.samples_per_period = sim.substeps_per_period;
  trace.reserve(static_cast<std::size_t>(loop.steps() + 1));
  trace.append(loop.sample());
  while (!loop.done()) {
    loop.step();
    trace.append(loop.sample());
  }
  return trace;
}

}  // namespace pwmsi

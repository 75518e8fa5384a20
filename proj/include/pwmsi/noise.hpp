#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace pwmsi {

/// Zero-mean Gaussian noise held constant over each `sample_time` interval,
/// with variance power_density / sample_time. Queries must be made at
/// non-decreasing times; the stream depends only on the seed.
class BandLimitedNoise {
 public:
  BandLimitedNoise(double power_density, double sample_time, std::uint64_t seed)
      : sample_time_(sample_time), sigma_(std::sqrt(power_density / sample_time)), rng_(seed) {
    if (!(power_density >= 0.0) || !(sample_time > 0.0)) {
      throw std::invalid_argument("noise: power density must be >= 0 and sample time > 0");
    }
  }

  double std_dev() const { return sigma_; }

  double at(double t) {
    // The small offset keeps t = k * sample_time inside interval k despite rounding.
    const auto index = static_cast<long long>(std::floor(t / sample_time_ + 1e-9));
    if (index < index_) throw std::invalid_argument("noise: time went backwards");
    while (index_ < index) {
      value_ = sigma_ * dist_(rng_);
      ++index_;
    }
    return value_;
  }

 private:
  double sample_time_;
  double sigma_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> dist_;
  long long index_ = -1;
  double value_ = 0.0;
};

/// y + band-limited noise sampled at the times `t` (non-decreasing).
inline std::vector<double> add_noise(std::span<const double> t, std::span<const double> y, double power_density,
                                     double sample_time, std::uint64_t seed) {
  if (t.size() != y.size()) throw std::invalid_argument("add_noise: size mismatch");
  BandLimitedNoise noise(power_density, sample_time, seed);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + noise.at(t[i]);
  return out;
}

}  // namespace pwmsi

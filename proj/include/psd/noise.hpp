#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "psd/error.hpp"

namespace psd {

// Seeded random stream (SplitMix64). Equal seeds give identical draws on every
// platform; no std:: distribution is involved. The state is one word, so a
// stream per tree node stays cheap.
//
// derive(tag) spawns an independent child stream whose seed is
//   splitmix64(seed ^ splitmix64(tag + 0x9e3779b97f4a7c15))
// so a child depends only on its parent's seed and its tag, never on how many
// draws the parent or any sibling has made.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), state_(seed) {}

  // Test hook: every Laplace draw from this stream (and streams derived from
  // it) is exactly zero, emulating the epsilon -> infinity limit.
  static RandomSource noiseless(std::uint64_t seed = 0) {
    RandomSource s(seed);
    s.noiseless_ = true;
    return s;
  }

  std::uint64_t seed() const { return seed_; }
  bool is_noiseless() const { return noiseless_; }

  RandomSource derive(std::uint64_t tag) const {
    RandomSource child(splitmix64(seed_ ^ splitmix64(tag + 0x9e3779b97f4a7c15ULL)));
    child.noiseless_ = noiseless_;
    return child;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    const double v = lo + (hi - lo) * uniform();
    return v < hi ? v : std::nextafter(hi, lo);
  }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw InvalidParameter("RandomSource::below: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  static std::uint64_t splitmix64(std::uint64_t z) { return mix(z + 0x9e3779b97f4a7c15ULL); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t state_;
  bool noiseless_ = false;
};

struct LaplaceParams {
  double sensitivity = 1.0;
  double epsilon = 1.0;

  double scale() const { return sensitivity / epsilon; }

  void validate() const {
    if (!(epsilon > 0.0)) throw InvalidParameter("Laplace: epsilon must be > 0");
    if (!(sensitivity >= 0.0) || !std::isfinite(sensitivity)) {
      throw InvalidParameter("Laplace: sensitivity must be finite and >= 0");
    }
  }
};

// Laplace(0, b) via inverse CDF on one uniform draw.
inline double laplace_scaled(RandomSource& src, double b) {
  const double u = src.uniform();
  if (src.is_noiseless() || b == 0.0) return 0.0;
  return u < 0.5 ? b * std::log(2.0 * u) : -b * std::log(2.0 * (1.0 - u));
}

inline double laplace_sample(RandomSource& src, const LaplaceParams& params) {
  params.validate();
  return laplace_scaled(src, params.scale());
}

// Count query (sensitivity 1) plus Laplace(1/epsilon). Neither clamped nor rounded.
inline double noisy_count(RandomSource& src, double true_count, double epsilon) {
  return true_count + laplace_sample(src, {1.0, epsilon});
}

}  // namespace psd

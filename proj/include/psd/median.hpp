#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "psd/error.hpp"
#include "psd/noise.hpp"

namespace psd {

// Sorted multiset x_1 <= ... <= x_n inside a public range [lo, hi].
//
// Indexing is 1-based to match the usual median notation: x(0) and below read
// as lo, x(n+1) and above read as hi. The median index is m = ceil(n/2) and
// rank(v) counts the values <= v.
class ValueSet {
 public:
  ValueSet(std::vector<double> values, double lo, double hi)
      : values_(std::move(values)), lo_(lo), hi_(hi) {
    std::sort(values_.begin(), values_.end());
    check();
  }

  static ValueSet from_sorted(std::vector<double> sorted, double lo, double hi) {
    ValueSet v;
    v.values_ = std::move(sorted);
    v.lo_ = lo;
    v.hi_ = hi;
    if (!std::is_sorted(v.values_.begin(), v.values_.end())) {
      throw InvalidParameter("ValueSet: values are not sorted");
    }
    v.check();
    return v;
  }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double range() const { return hi_ - lo_; }
  const std::vector<double>& values() const { return values_; }

  double x(std::int64_t i) const {
    if (i <= 0) return lo_;
    if (i > static_cast<std::int64_t>(values_.size())) return hi_;
    return values_[static_cast<std::size_t>(i - 1)];
  }

  std::int64_t median_index() const { return (static_cast<std::int64_t>(values_.size()) + 1) / 2; }
  double median() const { return x(median_index()); }

  std::int64_t rank(double v) const {
    return std::upper_bound(values_.begin(), values_.end(), v) - values_.begin();
  }

 private:
  ValueSet() = default;

  void check() const {
    if (!(lo_ < hi_)) throw InvalidParameter("ValueSet: need lo < hi");
    if (!values_.empty() && (values_.front() < lo_ || values_.back() > hi_)) {
      throw InvalidParameter("ValueSet: value outside [lo, hi]");
    }
  }

  std::vector<double> values_;
  double lo_ = 0.0;
  double hi_ = 1.0;
};

enum class MedianKind { Exponential, SmoothSensitivity, CellBased, NoisyMean, Laplace };

inline const char* to_string(MedianKind k) {
  switch (k) {
    case MedianKind::Exponential: return "em";
    case MedianKind::SmoothSensitivity: return "ss";
    case MedianKind::CellBased: return "cell";
    case MedianKind::NoisyMean: return "nm";
    case MedianKind::Laplace: return "laplace";
  }
  return "?";
}

inline MedianKind parse_median_kind(const std::string& s) {
  if (s == "em") return MedianKind::Exponential;
  if (s == "ss") return MedianKind::SmoothSensitivity;
  if (s == "cell") return MedianKind::CellBased;
  if (s == "nm") return MedianKind::NoisyMean;
  if (s == "laplace") return MedianKind::Laplace;
  throw InvalidParameter("unknown median mechanism '" + s + "' (em|ss|cell|nm|laplace)");
}

struct MedianMechanism {
  MedianKind kind = MedianKind::Exponential;
  double delta = 1e-4;        // smooth sensitivity only
  double cell_length = 0.01;  // cell-based only, data units
  double sample_rate = 1.0;   // 1 disables sampling

  void validate() const {
    if (kind == MedianKind::SmoothSensitivity && !(delta > 0.0 && delta < 1.0)) {
      throw InvalidParameter("median: delta must lie in (0,1)");
    }
    if (kind == MedianKind::CellBased && !(cell_length > 0.0)) {
      throw InvalidParameter("median: cell_length must be > 0");
    }
    if (!(sample_rate > 0.0 && sample_rate <= 1.0)) {
      throw InvalidParameter("median: sample_rate must lie in (0,1]");
    }
    if (kind == MedianKind::CellBased && sample_rate < 1.0) {
      throw InvalidParameter("median: the cell-based method does not support sampling");
    }
  }
};

inline double clamp_to_range(double v, double lo, double hi) {
  if (std::isnan(v)) return 0.5 * (lo + hi);
  return std::clamp(v, lo, hi);
}

// Exponential mechanism with quality -|rank(x) - rank(x_m)|. Interval
// I_k = [x_k, x_{k+1}), k = 0..n, is drawn with weight |I_k| e^{-(eps/2)|k-m|},
// then the output is uniform inside I_k.
inline double em_median(RandomSource& src, const ValueSet& c, double eps) {
  if (!(eps >= 0.0)) throw InvalidParameter("em_median: epsilon must be >= 0");
  if (c.empty()) return src.uniform(c.lo(), c.hi());
  const auto n = static_cast<std::int64_t>(c.size());
  const std::int64_t m = c.median_index();
  const bool sharp = src.is_noiseless() || std::isinf(eps);

  std::vector<double> logw(static_cast<std::size_t>(n) + 1);
  double max_logw = -std::numeric_limits<double>::infinity();
  for (std::int64_t k = 0; k <= n; ++k) {
    const double len = c.x(k + 1) - c.x(k);
    const auto dist = static_cast<double>(k > m ? k - m : m - k);
    double lw = -std::numeric_limits<double>::infinity();
    if (len > 0.0) {
      if (dist == 0.0) {
        lw = std::log(len);
      } else if (!sharp) {
        lw = std::log(len) - 0.5 * eps * dist;
      }
    }
    logw[static_cast<std::size_t>(k)] = lw;
    max_logw = std::max(max_logw, lw);
  }
  if (std::isinf(max_logw)) {
    // Median interval has zero length and the others are excluded: the
    // limiting distribution is a point mass at x_m.
    return c.median();
  }
  double total = 0.0;
  for (double& w : logw) {
    w = std::exp(w - max_logw);
    total += w;
  }
  double target = src.uniform() * total;
  std::size_t k = 0;
  for (; k + 1 < logw.size(); ++k) {
    if (target < logw[k]) break;
    target -= logw[k];
  }
  while (logw[k] == 0.0 && k > 0) --k;  // rounding fell off the end
  const auto ki = static_cast<std::int64_t>(k);
  return clamp_to_range(src.uniform(c.x(ki), c.x(ki + 1)), c.lo(), c.hi());
}

inline double smooth_sensitivity_xi(double eps, double delta) {
  return eps / (4.0 * (1.0 + std::log(2.0 / delta)));
}

// Smooth sensitivity of the median,
//   max_{0<=k<=n} e^{-k xi} max_{0<=t<=k+1} (x_{m+t} - x_{m+t-k-1}).
// Every term is a pair (i, j) = (m+t-k-1, m+t) with i <= m <= j and
// k = j - i - 1, and only 0 <= i, j <= n+1 matter. For fixed i the best j is
// non-decreasing in i, so a divide-and-conquer over i finds all row maxima
// with O(n log n) evaluations.
inline double smooth_sensitivity(const ValueSet& c, double eps, double delta) {
  const auto n = static_cast<std::int64_t>(c.size());
  const double xi = smooth_sensitivity_xi(eps, delta);
  const std::int64_t m = c.median_index();
  std::vector<double> decay(static_cast<std::size_t>(n) + 1);
  for (std::int64_t k = 0; k <= n; ++k) {
    decay[static_cast<std::size_t>(k)] = std::exp(-static_cast<double>(k) * xi);
  }
  auto term = [&](std::int64_t i, std::int64_t j) {
    const std::int64_t k = j - i - 1;
    if (k < 0) return 0.0;
    return decay[static_cast<std::size_t>(k)] * (c.x(j) - c.x(i));
  };

  double best = 0.0;
  struct Frame {
    std::int64_t ilo, ihi, jlo, jhi;
  };
  std::vector<Frame> stack{{0, m, m, n + 1}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.ilo > f.ihi) continue;
    const std::int64_t i = f.ilo + (f.ihi - f.ilo) / 2;
    std::int64_t arg = f.jlo;
    double row = -1.0;
    for (std::int64_t j = f.jlo; j <= f.jhi; ++j) {
      const double v = term(i, j);
      if (v >= row) {
        row = v;
        arg = j;
      }
    }
    best = std::max(best, row);
    stack.push_back({f.ilo, i - 1, f.jlo, arg});
    stack.push_back({i + 1, f.ihi, arg, f.jhi});
  }
  return best;
}

// x_m + (2 sigma_s / eps) * Lap(1), clamped to [lo, hi]. (eps, delta)-DP.
inline double ss_median(RandomSource& src, const ValueSet& c, double eps, double delta) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidParameter("ss_median: epsilon must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidParameter("ss_median: delta must lie in (0,1)");
  if (c.empty()) return src.uniform(c.lo(), c.hi());
  const double sigma = smooth_sensitivity(c, eps, delta);
  return clamp_to_range(c.median() + laplace_scaled(src, 2.0 * sigma / eps), c.lo(), c.hi());
}

// Noisy mean: half the budget on the sum of (x - lo) (sensitivity M), half on
// the count (sensitivity 1).
inline double nm_median(RandomSource& src, const ValueSet& c, double eps) {
  if (!(eps > 0.0)) throw InvalidParameter("nm_median: epsilon must be > 0");
  double shifted_sum = 0.0;
  for (double v : c.values()) shifted_sum += v - c.lo();
  const double noisy_sum = shifted_sum + laplace_sample(src, {c.range(), eps / 2.0});
  const double noisy_n = static_cast<double>(c.size()) + laplace_sample(src, {1.0, eps / 2.0});
  return clamp_to_range(c.lo() + noisy_sum / std::max(1.0, noisy_n), c.lo(), c.hi());
}

// Laplace noise on the exact median with global sensitivity M. Kept only as a
// baseline: the noise is of the order of the whole range.
inline double laplace_median(RandomSource& src, const ValueSet& c, double eps) {
  if (!(eps > 0.0)) throw InvalidParameter("laplace_median: epsilon must be > 0");
  const double centre = c.empty() ? 0.5 * (c.lo() + c.hi()) : c.median();
  return clamp_to_range(centre + laplace_sample(src, {c.range(), eps}), c.lo(), c.hi());
}

// Coordinate at which the running sum of noisy cell counts first reaches half
// the noisy total, interpolated linearly inside the crossing cell.
// boundaries has counts.size() + 1 increasing entries.
inline double cell_median(std::span<const double> counts, std::span<const double> boundaries) {
  if (counts.empty() || boundaries.size() != counts.size() + 1) {
    throw InvalidParameter("cell_median: need n counts and n+1 boundaries");
  }
  double total = 0.0;
  for (double v : counts) total += v;
  const double lo = boundaries.front();
  const double hi = boundaries.back();
  if (!(total > 0.0)) return 0.5 * (lo + hi);
  const double half = 0.5 * total;
  double running = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double next = running + counts[i];
    if (next >= half && counts[i] > 0.0) {
      const double frac = (half - running) / counts[i];
      return clamp_to_range(boundaries[i] + frac * (boundaries[i + 1] - boundaries[i]), lo, hi);
    }
    running = next;
  }
  return hi;
}

// Privacy cost of running an eps_inner-DP mechanism on a Bernoulli(p) sample.
inline double sampling_cost(double p, double eps_inner) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidParameter("sampling: p must lie in (0,1]");
  return p < 1.0 ? 2.0 * p * std::exp(eps_inner) : eps_inner;
}

// Largest inner epsilon whose sampled cost equals eps_target.
inline double sampling_inner_epsilon(double p, double eps_target) {
  if (p >= 1.0) return eps_target;
  const double inner = std::log(eps_target / (2.0 * p));
  if (!(inner > 0.0)) {
    throw InvalidParameter("sampling: budget " + std::to_string(eps_target) +
                           " is below the sampling floor 2p = " + std::to_string(2.0 * p));
  }
  return inner;
}

inline ValueSet bernoulli_sample(RandomSource& src, const ValueSet& c, double p) {
  if (p >= 1.0) return c;
  std::vector<double> kept;
  kept.reserve(static_cast<std::size_t>(static_cast<double>(c.size()) * p * 1.2) + 8);
  for (double v : c.values()) {
    if (src.bernoulli(p)) kept.push_back(v);
  }
  return ValueSet::from_sorted(std::move(kept), c.lo(), c.hi());
}

namespace detail {

inline double run_median(const MedianMechanism& mech, RandomSource& src, const ValueSet& c,
                         double eps) {
  switch (mech.kind) {
    case MedianKind::Exponential: return em_median(src, c, eps);
    case MedianKind::SmoothSensitivity: return ss_median(src, c, eps, mech.delta);
    case MedianKind::NoisyMean: return nm_median(src, c, eps);
    case MedianKind::Laplace: return laplace_median(src, c, eps);
    case MedianKind::CellBased:
      throw InvalidParameter("cell-based medians are computed from a noisy grid, not a value set");
  }
  return 0.0;
}

}  // namespace detail

// Runs the wrapped mechanism on a Bernoulli(p) subsample with budget eps_inner.
inline double sampled(const MedianMechanism& mech, double p, RandomSource& src, const ValueSet& c,
                      double eps_inner) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidParameter("sampling: p must lie in (0,1]");
  const ValueSet sample = bernoulli_sample(src, c, p);
  return detail::run_median(mech, src, sample, eps_inner);
}

// Private median whose total privacy cost is eps (sampling included).
inline double private_median(const MedianMechanism& mech, RandomSource& src, const ValueSet& c,
                             double eps) {
  if (mech.sample_rate < 1.0) {
    return sampled(mech, mech.sample_rate, src, c,
                   sampling_inner_epsilon(mech.sample_rate, eps));
  }
  return detail::run_median(mech, src, c, eps);
}

}  // namespace psd

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psd/error.hpp"
#include "psd/geometry.hpp"
#include "psd/median.hpp"
#include "psd/noise.hpp"

namespace psd {

// Fixed-resolution grid of noisy cell counts over the whole domain. Cells are
// disjoint so the whole grid costs eps once; every node of a tree then reads
// its medians from the same released grid.
class NoisyGrid {
 public:
  static constexpr std::size_t kMaxCells = std::size_t{1} << 22;

  static NoisyGrid build(std::span<const Point> points, const Rect& domain, double cell_length,
                         double eps, RandomSource& src) {
    if (domain.empty()) throw DegenerateRegion("NoisyGrid: empty domain");
    if (!(cell_length > 0.0)) throw InvalidParameter("NoisyGrid: cell_length must be > 0");
    if (!(eps > 0.0)) throw InvalidParameter("NoisyGrid: epsilon must be > 0");
    NoisyGrid g;
    g.domain_ = domain;
    g.cell_ = cell_length;
    const double nx = std::ceil(domain.width() / cell_length);
    const double ny = std::ceil(domain.height() / cell_length);
    if (nx * ny > static_cast<double>(kMaxCells)) {
      throw InvalidParameter("NoisyGrid: " + std::to_string(nx) + " x " + std::to_string(ny) +
                             " cells exceed the limit; increase cell_length");
    }
    g.nx_ = static_cast<std::size_t>(nx);
    g.ny_ = static_cast<std::size_t>(ny);
    g.counts_.assign(g.nx_ * g.ny_, 0.0);
    for (const Point& p : points) {
      if (!contains(domain, p)) continue;
      g.counts_[g.row_of(p.y) * g.nx_ + g.col_of(p.x)] += 1.0;
    }
    for (double& c : g.counts_) c = noisy_count(src, c, eps);
    return g;
  }

  std::size_t columns() const { return nx_; }
  std::size_t rows() const { return ny_; }
  double cell_length() const { return cell_; }
  const Rect& domain() const { return domain_; }
  double count(std::size_t col, std::size_t row) const { return counts_[row * nx_ + col]; }

  // Noisy counts inside `region` aggregated along `axis`, together with the
  // cell boundaries clipped to the region. Cells cut by the region contribute
  // their overlapped area fraction.
  void marginal(const Rect& region, Axis axis, std::vector<double>& counts,
                std::vector<double>& boundaries) const {
    counts.clear();
    boundaries.clear();
    const Rect r = intersect(region, domain_);
    if (r.empty()) return;
    const auto [c0, c1] = span_of(r.x_lo, r.x_hi, domain_.x_lo, domain_.x_hi, nx_);
    const auto [r0, r1] = span_of(r.y_lo, r.y_hi, domain_.y_lo, domain_.y_hi, ny_);
    std::vector<double> wx(c1 - c0), wy(r1 - r0);
    for (std::size_t c = c0; c < c1; ++c) {
      wx[c - c0] = weight(c, r.x_lo, r.x_hi, domain_.x_lo, domain_.x_hi);
    }
    for (std::size_t q = r0; q < r1; ++q) {
      wy[q - r0] = weight(q, r.y_lo, r.y_hi, domain_.y_lo, domain_.y_hi);
    }
    const bool by_x = axis == Axis::X;
    const std::size_t outer_lo = by_x ? c0 : r0;
    const std::size_t outer_hi = by_x ? c1 : r1;
    const double lo = by_x ? r.x_lo : r.y_lo;
    const double hi = by_x ? r.x_hi : r.y_hi;
    const double origin = by_x ? domain_.x_lo : domain_.y_lo;
    counts.assign(outer_hi - outer_lo, 0.0);
    for (std::size_t q = r0; q < r1; ++q) {
      for (std::size_t c = c0; c < c1; ++c) {
        const double v = counts_[q * nx_ + c] * wx[c - c0] * wy[q - r0];
        counts[(by_x ? c : q) - outer_lo] += v;
      }
    }
    boundaries.reserve(counts.size() + 1);
    boundaries.push_back(lo);
    for (std::size_t k = outer_lo + 1; k < outer_hi; ++k) {
      boundaries.push_back(origin + static_cast<double>(k) * cell_);
    }
    boundaries.push_back(hi);
  }

  // Cell-based private median of the points inside `region` along `axis`.
  double median(const Rect& region, Axis axis) const {
    std::vector<double> counts, boundaries;
    marginal(region, axis, counts, boundaries);
    if (counts.empty()) return 0.5 * (region.lo(axis) + region.hi(axis));
    return cell_median(counts, boundaries);
  }

 private:
  std::size_t col_of(double x) const { return index_of(x, domain_.x_lo, nx_); }
  std::size_t row_of(double y) const { return index_of(y, domain_.y_lo, ny_); }

  std::size_t index_of(double v, double origin, std::size_t n) const {
    const double k = std::floor((v - origin) / cell_);
    if (k < 0.0) return 0;
    return std::min(static_cast<std::size_t>(k), n - 1);
  }

  std::pair<std::size_t, std::size_t> span_of(double lo, double hi, double origin, double end,
                                              std::size_t n) const {
    const std::size_t first = index_of(lo, origin, n);
    std::size_t last = hi >= end ? n - 1 : index_of(std::nextafter(hi, lo), origin, n);
    return {first, std::max(first, last) + 1};
  }

  double weight(std::size_t k, double lo, double hi, double origin, double end) const {
    const double a = origin + static_cast<double>(k) * cell_;
    const double b = std::min(end, a + cell_);
    if (!(b > a)) return 0.0;
    const double overlap = std::min(b, hi) - std::max(a, lo);
    return overlap > 0.0 ? overlap / (b - a) : 0.0;
  }

  Rect domain_;
  double cell_ = 1.0;
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> counts_;
};

}  // namespace psd

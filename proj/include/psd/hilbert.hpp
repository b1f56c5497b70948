#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "psd/error.hpp"
#include "psd/geometry.hpp"

namespace psd {

// Hilbert curve of order k over a rectangular domain split into a 2^k x 2^k
// grid. Orientation: the curve starts in the lower-left cell, visits the
// lower-left, upper-left, upper-right and lower-right quadrants in that order
// and ends in the lower-right cell (the classic xy2d/d2xy formulation).
class HilbertCurve {
 public:
  HilbertCurve(int order, const Rect& domain) : order_(order), domain_(domain) {
    if (order < 1 || order > 31) throw InvalidParameter("hilbert: order must lie in [1,31]");
    if (domain.empty()) throw DegenerateRegion("hilbert: empty domain");
    side_ = std::uint64_t{1} << order;
  }

  int order() const { return order_; }
  const Rect& domain() const { return domain_; }
  std::uint64_t side() const { return side_; }
  std::uint64_t cells() const { return side_ * side_; }

  std::uint64_t encode(const Point& p) const {
    if (!contains(domain_, p)) throw InvalidParameter("hilbert: point outside the domain");
    return index_of_cell(grid_coord(p.x, domain_.x_lo, domain_.width()),
                         grid_coord(p.y, domain_.y_lo, domain_.height()));
  }

  std::uint64_t index_of_cell(std::uint64_t cx, std::uint64_t cy) const {
    std::uint64_t d = 0;
    for (std::uint64_t s = side_ / 2; s > 0; s /= 2) {
      const std::uint64_t rx = (cx & s) ? 1 : 0;
      const std::uint64_t ry = (cy & s) ? 1 : 0;
      d += s * s * ((3 * rx) ^ ry);
      rotate(side_, cx, cy, rx, ry);
    }
    return d;
  }

  std::pair<std::uint64_t, std::uint64_t> cell_of_index(std::uint64_t idx) const {
    if (idx >= cells()) throw InvalidParameter("hilbert: index out of range");
    std::uint64_t x = 0, y = 0, t = idx;
    for (std::uint64_t s = 1; s < side_; s *= 2) {
      const std::uint64_t rx = 1 & (t / 2);
      const std::uint64_t ry = 1 & (t ^ rx);
      rotate(s, x, y, rx, ry);
      x += s * rx;
      y += s * ry;
      t /= 4;
    }
    return {x, y};
  }

  Rect decode(std::uint64_t idx) const {
    const auto [cx, cy] = cell_of_index(idx);
    return block(cx, cy, 1);
  }

  // Smallest rectangle covering the cells of the inclusive index range
  // [idx_lo, idx_hi]. The range is cut into aligned runs of 4^j indices, each
  // of which fills a 2^j x 2^j square.
  Rect bounding_box(std::uint64_t idx_lo, std::uint64_t idx_hi) const {
    if (idx_lo > idx_hi) throw InvalidParameter("hilbert: empty index range");
    if (idx_hi >= cells()) throw InvalidParameter("hilbert: index out of range");
    Rect box;
    bool first = true;
    std::uint64_t a = idx_lo;
    while (true) {
      int j = 0;
      while (j < order_) {
        const std::uint64_t size = std::uint64_t{1} << (2 * (j + 1));
        if (a % size != 0 || a + (size - 1) > idx_hi) break;
        ++j;
      }
      const auto [cx, cy] = cell_of_index(a);
      const std::uint64_t mask = ~((std::uint64_t{1} << j) - 1);
      const Rect sq = block(cx & mask, cy & mask, std::uint64_t{1} << j);
      box = first ? sq : hull(box, sq);
      first = false;
      const std::uint64_t step = std::uint64_t{1} << (2 * j);
      if (idx_hi - a < step) break;
      a += step;
      if (a > idx_hi) break;
    }
    return box;
  }

 private:
  static void rotate(std::uint64_t n, std::uint64_t& x, std::uint64_t& y, std::uint64_t rx,
                     std::uint64_t ry) {
    if (ry == 0) {
      if (rx == 1) {
        x = n - 1 - x;
        y = n - 1 - y;
      }
      std::swap(x, y);
    }
  }

  std::uint64_t grid_coord(double v, double lo, double extent) const {
    const double k = std::floor((v - lo) / extent * static_cast<double>(side_));
    if (k < 0.0) return 0;
    const auto c = static_cast<std::uint64_t>(k);
    return c >= side_ ? side_ - 1 : c;
  }

  double edge(double lo, double hi, std::uint64_t k) const {
    if (k >= side_) return hi;
    return lo + (hi - lo) * (static_cast<double>(k) / static_cast<double>(side_));
  }

  Rect block(std::uint64_t cx, std::uint64_t cy, std::uint64_t size) const {
    return {edge(domain_.x_lo, domain_.x_hi, cx), edge(domain_.y_lo, domain_.y_hi, cy),
            edge(domain_.x_lo, domain_.x_hi, cx + size), edge(domain_.y_lo, domain_.y_hi, cy + size)};
  }

  int order_;
  Rect domain_;
  std::uint64_t side_;
};

}  // namespace psd

#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>

#include "psd/error.hpp"

namespace psd {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline bool is_finite(const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); }

enum class Axis { X, Y };

// Axis-aligned rectangle with half-open semantics [x_lo, x_hi) x [y_lo, y_hi).
struct Rect {
  double x_lo = 0.0;
  double y_lo = 0.0;
  double x_hi = 0.0;
  double y_hi = 0.0;

  double width() const { return x_hi - x_lo; }
  double height() const { return y_hi - y_lo; }
  double area() const { return width() * height(); }
  bool empty() const { return !(x_lo < x_hi && y_lo < y_hi); }
  bool valid() const { return x_lo <= x_hi && y_lo <= y_hi; }

  double lo(Axis a) const { return a == Axis::X ? x_lo : y_lo; }
  double hi(Axis a) const { return a == Axis::X ? x_hi : y_hi; }

  // Splits at `at` along `axis`; `at` belongs to the upper half.
  Rect lower(Axis axis, double at) const {
    Rect r = *this;
    (axis == Axis::X ? r.x_hi : r.y_hi) = at;
    return r;
  }
  Rect upper(Axis axis, double at) const {
    Rect r = *this;
    (axis == Axis::X ? r.x_lo : r.y_lo) = at;
    return r;
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Rect& r) {
  return os << "[" << r.x_lo << "," << r.x_hi << ")x[" << r.y_lo << "," << r.y_hi << ")";
}

inline double coord(const Point& p, Axis a) { return a == Axis::X ? p.x : p.y; }

inline bool contains(const Rect& r, const Point& p) {
  return r.x_lo <= p.x && p.x < r.x_hi && r.y_lo <= p.y && p.y < r.y_hi;
}

// Intersection of two rectangles. May be degenerate (zero width or height).
inline Rect intersect(const Rect& a, const Rect& b) {
  Rect r{std::max(a.x_lo, b.x_lo), std::max(a.y_lo, b.y_lo), std::min(a.x_hi, b.x_hi),
         std::min(a.y_hi, b.y_hi)};
  if (r.x_hi < r.x_lo) r.x_hi = r.x_lo;
  if (r.y_hi < r.y_lo) r.y_hi = r.y_lo;
  return r;
}

// Smallest rectangle covering both.
inline Rect hull(const Rect& a, const Rect& b) {
  return {std::min(a.x_lo, b.x_lo), std::min(a.y_lo, b.y_lo), std::max(a.x_hi, b.x_hi),
          std::max(a.y_hi, b.y_hi)};
}

enum class Relation { Disjoint, AContainsB, PartialOverlap };

// Classifies b relative to a. Two half-open rectangles that only share an edge
// are disjoint. An empty b is never contained (it holds no points).
inline Relation relation(const Rect& a, const Rect& b) {
  if (a.empty() || b.empty()) return Relation::Disjoint;
  if (b.x_lo >= a.x_hi || a.x_lo >= b.x_hi || b.y_lo >= a.y_hi || a.y_lo >= b.y_hi) {
    return Relation::Disjoint;
  }
  if (a.x_lo <= b.x_lo && b.x_hi <= a.x_hi && a.y_lo <= b.y_lo && b.y_hi <= a.y_hi) {
    return Relation::AContainsB;
  }
  return Relation::PartialOverlap;
}

// area(leaf ∩ q) / area(leaf).
inline double overlap_fraction(const Rect& leaf, const Rect& q) {
  const double a = leaf.area();
  if (!(a > 0.0)) throw DegenerateRegion("overlap_fraction: leaf region has zero area");
  const double f = intersect(leaf, q).area() / a;
  return std::clamp(f, 0.0, 1.0);
}

}  // namespace psd

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "psd/budget.hpp"
#include "psd/cell_grid.hpp"
#include "psd/error.hpp"
#include "psd/geometry.hpp"
#include "psd/hilbert.hpp"
#include "psd/median.hpp"
#include "psd/noise.hpp"
#include "psd/tree.hpp"

namespace psd {

struct BuildOptions {
  TreeKind kind = TreeKind::Quadtree;
  int height = 8;
  int switch_level = 0;  // hybrid only: number of data-dependent levels
  BudgetPlan plan;
  MedianMechanism mechanism;
  int hilbert_order = 18;
};

// Stream tags. A node's stream is derived from its parent's stream with tag
// (child index + 1); the root uses tag 0 of the build stream. Counts, medians
// and the cell grid draw from further derived streams so that changing the
// tree shape never reorders the noise of unrelated nodes.
inline constexpr std::uint64_t kCountStream = 0xC0C0;
inline constexpr std::uint64_t kMedianStream = 0x3ED1;
inline constexpr std::uint64_t kGridStream = 0x6121D;

namespace detail {

// Clamps a released split to [lo, hi]. A split on the boundary leaves one child
// with an empty region; such a child holds no points.
inline double interior_split(double s, double lo, double hi) {
  if (std::isnan(s)) return 0.5 * (lo + hi);
  return std::clamp(s, lo, hi);
}

struct Pending {
  std::size_t node;
  std::size_t begin;  // point range in the working array
  std::size_t end;
  RandomSource stream;
};

class Builder {
 public:
  Builder(std::span<const Point> points, const Rect& domain, const BuildOptions& opt,
          const RandomSource& src)
      : opt_(opt), domain_(domain), src_(src) {
    if (domain.empty()) throw DegenerateRegion("build: empty domain");
    if (opt.height < 0) throw InvalidParameter("build: height must be >= 0");
    opt.plan.validate();
    opt.mechanism.validate();
    if (opt.plan.height != opt.height) throw InvalidParameter("build: plan height mismatch");
    for (const Point& p : points) {
      if (!is_finite(p)) throw InvalidParameter("build: non-finite point");
      if (!contains(domain, p)) throw InvalidParameter("build: point outside the domain");
    }
    work_.assign(points.begin(), points.end());
  }

  PsdTree run() {
    PsdTree t;
    t.kind = opt_.kind;
    t.fanout = 4;
    t.height = opt_.height;
    t.switch_level = opt_.kind == TreeKind::Hybrid ? opt_.switch_level : 0;
    t.plan = opt_.plan;
    t.mechanism = opt_.mechanism;
    t.domain = domain_;
    check_plan_shape();

    if (opt_.kind == TreeKind::HilbertR) {
      curve_.emplace(opt_.hilbert_order, domain_);
      t.hilbert_order = opt_.hilbert_order;
      keys_.resize(work_.size());
      std::vector<std::pair<std::uint64_t, Point>> keyed(work_.size());
      for (std::size_t i = 0; i < work_.size(); ++i) keyed[i] = {curve_->encode(work_[i]), work_[i]};
      std::sort(keyed.begin(), keyed.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (std::size_t i = 0; i < keyed.size(); ++i) {
        keys_[i] = keyed[i].first;
        work_[i] = keyed[i].second;
      }
    }
    if (opt_.mechanism.kind == MedianKind::CellBased && !opt_.plan.data_independent()) {
      if (opt_.kind == TreeKind::HilbertR) {
        throw InvalidParameter("build: the cell-based median is not defined on Hilbert indices");
      }
      RandomSource gs = src_.derive(kGridStream);
      grid_.emplace(NoisyGrid::build(work_, domain_, opt_.mechanism.cell_length,
                                     opt_.plan.median_total(), gs));
    }

    Node root;
    root.region = domain_;
    root.level = opt_.height;
    if (curve_) {
      root.hilbert_lo = 0;
      root.hilbert_hi = curve_->cells();
    }
    t.nodes.push_back(root);
    std::vector<Pending> queue{{0, 0, work_.size(), src_.derive(0)}};
    std::vector<Pending> next;
    while (!queue.empty()) {
      next.clear();
      for (Pending& p : queue) expand(t, p, next);
      std::swap(queue, next);
    }
    return t;
  }

 private:
  void check_plan_shape() const {
    const auto& med = opt_.plan.median_eps;
    for (int i = 1; i <= opt_.height; ++i) {
      const bool private_level = is_private_level(i);
      if (!private_level && med[i] != 0.0) {
        throw InvalidParameter("build: median budget on a data-independent level " +
                               std::to_string(i));
      }
      if (private_level && !(med[i] > 0.0)) {
        throw InvalidParameter("build: data-dependent level " + std::to_string(i) +
                               " has no median budget");
      }
    }
  }

  bool is_private_level(int level) const {
    if (level == 0) return false;
    switch (opt_.kind) {
      case TreeKind::Quadtree:
      case TreeKind::Generic: return false;
      case TreeKind::KdFlattened:
      case TreeKind::HilbertR: return true;
      case TreeKind::Hybrid: return level > opt_.height - opt_.switch_level;
    }
    return false;
  }

  void expand(PsdTree& t, Pending& p, std::vector<Pending>& next) {
    Node& node = t.nodes[p.node];
    const int level = node.level;
    const double ceps = opt_.plan.count_eps[static_cast<std::size_t>(level)];
    if (ceps > 0.0) {
      RandomSource cs = p.stream.derive(kCountStream);
      node.noisy = noisy_count(cs, static_cast<double>(p.end - p.begin), ceps);
    }
    if (level == 0) return;

    std::array<std::size_t, 5> cut{};
    std::array<Rect, 4> regions{};
    std::array<std::pair<std::uint64_t, std::uint64_t>, 4> ranges{};
    if (opt_.kind == TreeKind::HilbertR) {
      split_hilbert(t.nodes[p.node], p, cut, regions, ranges);
    } else if (is_private_level(level)) {
      split_kd(t.nodes[p.node], p, cut, regions);
    } else {
      split_midpoint(t.nodes[p.node], p, cut, regions);
    }

    Node& parent = t.nodes[p.node];
    parent.first_child = static_cast<std::int64_t>(t.nodes.size());
    parent.child_count = 4;
    for (int c = 0; c < 4; ++c) {
      Node child;
      child.region = regions[c];
      child.level = level - 1;
      child.parent = static_cast<std::int64_t>(p.node);
      child.hilbert_lo = ranges[c].first;
      child.hilbert_hi = ranges[c].second;
      next.push_back({t.nodes.size(), cut[c], cut[c + 1],
                      p.stream.derive(static_cast<std::uint64_t>(c) + 1)});
      t.nodes.push_back(child);
    }
  }

  // Children order: (x low, y low), (x low, y high), (x high, y low), (x high, y high).
  void split_midpoint(Node& node, const Pending& p, std::array<std::size_t, 5>& cut,
                      std::array<Rect, 4>& regions) {
    const Rect r = node.region;
    const double mx = 0.5 * (r.x_lo + r.x_hi);
    const double my = 0.5 * (r.y_lo + r.y_hi);
    node.split = SplitKind::Midpoint;
    node.split_values = {mx, my, my};
    divide(r, p.begin, p.end, mx, my, my, cut, regions);
  }

  void split_kd(Node& node, Pending& p, std::array<std::size_t, 5>& cut,
                std::array<Rect, 4>& regions) {
    const Rect r = node.region;
    const double eps = 0.5 * opt_.plan.median_eps[static_cast<std::size_t>(node.level)];
    RandomSource ms = p.stream.derive(kMedianStream);
    const double sx =
        interior_split(median_of(p.begin, p.end, r, Axis::X, eps, ms), r.x_lo, r.x_hi);
    const auto mid = partition(p.begin, p.end, Axis::X, sx);
    const Rect left = r.lower(Axis::X, sx);
    const Rect right = r.upper(Axis::X, sx);
    // Both halves hold disjoint data, so their y splits share the same budget.
    const double sy_lo =
        interior_split(median_of(p.begin, mid, left, Axis::Y, eps, ms), r.y_lo, r.y_hi);
    const double sy_hi =
        interior_split(median_of(mid, p.end, right, Axis::Y, eps, ms), r.y_lo, r.y_hi);
    node.split = SplitKind::Kd;
    node.split_values = {sx, sy_lo, sy_hi};
    divide(r, p.begin, p.end, sx, sy_lo, sy_hi, cut, regions);
  }

  void split_hilbert(Node& node, Pending& p, std::array<std::size_t, 5>& cut,
                     std::array<Rect, 4>& regions,
                     std::array<std::pair<std::uint64_t, std::uint64_t>, 4>& ranges) {
    const double eps = 0.5 * opt_.plan.median_eps[static_cast<std::size_t>(node.level)];
    RandomSource ms = p.stream.derive(kMedianStream);
    const std::uint64_t lo = node.hilbert_lo;
    const std::uint64_t hi = node.hilbert_hi;
    const std::uint64_t s = index_split(p.begin, p.end, lo, hi, eps, ms);
    const std::size_t mid = key_bound(p.begin, p.end, s);
    const std::uint64_t s_lo = index_split(p.begin, mid, lo, s, eps, ms);
    const std::uint64_t s_hi = index_split(mid, p.end, s, hi, eps, ms);
    node.split = SplitKind::Hilbert;
    node.split_values = {static_cast<double>(s), static_cast<double>(s_lo),
                         static_cast<double>(s_hi)};
    ranges = {{{lo, s_lo}, {s_lo, s}, {s, s_hi}, {s_hi, hi}}};
    cut = {p.begin, key_bound(p.begin, mid, s_lo), mid, key_bound(mid, p.end, s_hi), p.end};
    for (int c = 0; c < 4; ++c) regions[c] = hilbert_region(ranges[c].first, ranges[c].second);
  }

  Rect hilbert_region(std::uint64_t lo, std::uint64_t hi) const {
    if (lo >= hi) return Rect{domain_.x_lo, domain_.y_lo, domain_.x_lo, domain_.y_lo};
    return curve_->bounding_box(lo, hi - 1);
  }

  // Private split of the index range [lo, hi): values below the returned
  // index go to the lower child. Stays inside (lo, hi) whenever hi - lo >= 2.
  std::uint64_t index_split(std::size_t begin, std::size_t end, std::uint64_t lo, std::uint64_t hi,
                            double eps, RandomSource& ms) {
    if (hi - lo < 2) return hi;
    std::vector<double> values(end - begin);
    for (std::size_t i = begin; i < end; ++i) values[i - begin] = static_cast<double>(keys_[i]);
    const ValueSet vs = ValueSet::from_sorted(std::move(values), static_cast<double>(lo),
                                              static_cast<double>(hi));
    const double s = private_median(opt_.mechanism, ms, vs, eps);
    double k = std::floor(s) + 1.0;
    k = std::clamp(k, static_cast<double>(lo + 1), static_cast<double>(hi - 1));
    return static_cast<std::uint64_t>(k);
  }

  std::size_t key_bound(std::size_t begin, std::size_t end, std::uint64_t s) const {
    return static_cast<std::size_t>(
        std::lower_bound(keys_.begin() + static_cast<std::ptrdiff_t>(begin),
                         keys_.begin() + static_cast<std::ptrdiff_t>(end), s) -
        keys_.begin());
  }

  double median_of(std::size_t begin, std::size_t end, const Rect& region, Axis axis, double eps,
                   RandomSource& ms) {
    // A region without extent on the axis is public knowledge and holds no
    // points, so no private median is needed.
    if (!(region.lo(axis) < region.hi(axis))) return region.lo(axis);
    if (grid_) return grid_->median(region, axis);
    std::vector<double> values(end - begin);
    for (std::size_t i = begin; i < end; ++i) values[i - begin] = coord(work_[i], axis);
    const ValueSet vs(std::move(values), region.lo(axis), region.hi(axis));
    return private_median(opt_.mechanism, ms, vs, eps);
  }

  std::size_t partition(std::size_t begin, std::size_t end, Axis axis, double at) {
    auto it = std::partition(work_.begin() + static_cast<std::ptrdiff_t>(begin),
                             work_.begin() + static_cast<std::ptrdiff_t>(end),
                             [&](const Point& q) { return coord(q, axis) < at; });
    return static_cast<std::size_t>(it - work_.begin());
  }

  void divide(const Rect& r, std::size_t begin, std::size_t end, double sx, double sy_lo,
              double sy_hi, std::array<std::size_t, 5>& cut, std::array<Rect, 4>& regions) {
    const std::size_t mid = partition(begin, end, Axis::X, sx);
    cut = {begin, partition(begin, mid, Axis::Y, sy_lo), mid, partition(mid, end, Axis::Y, sy_hi),
           end};
    const Rect left = r.lower(Axis::X, sx);
    const Rect right = r.upper(Axis::X, sx);
    regions = {left.lower(Axis::Y, sy_lo), left.upper(Axis::Y, sy_lo), right.lower(Axis::Y, sy_hi),
               right.upper(Axis::Y, sy_hi)};
  }

  const BuildOptions& opt_;
  Rect domain_;
  RandomSource src_;
  std::vector<Point> work_;
  std::vector<std::uint64_t> keys_;
  std::optional<HilbertCurve> curve_;
  std::optional<NoisyGrid> grid_;
};

}  // namespace detail

inline PsdTree build_tree(std::span<const Point> points, const Rect& domain,
                          const BuildOptions& opt, const RandomSource& src) {
  return detail::Builder(points, domain, opt, src).run();
}

// Complete 4-ary tree of midpoint splits; noisy counts on every level with a
// positive count budget.
inline PsdTree build_quadtree(std::span<const Point> points, const Rect& domain, int h,
                              const BudgetPlan& plan, const RandomSource& src) {
  if (!plan.data_independent()) {
    throw InvalidParameter("build_quadtree: a quadtree spends no median budget");
  }
  BuildOptions opt;
  opt.kind = TreeKind::Quadtree;
  opt.height = h;
  opt.plan = plan;
  return build_tree(points, domain, opt, src);
}

// kd-tree flattened to fanout 4: each level makes a private x split and then
// private y splits of both halves, each with half the level's median budget.
inline PsdTree build_kd_flattened(std::span<const Point> points, const Rect& domain, int h,
                                  const BudgetPlan& plan, const MedianMechanism& mech,
                                  const RandomSource& src) {
  if (h < 1) throw InvalidParameter("build_kd_flattened: height must be >= 1");
  BuildOptions opt;
  opt.kind = TreeKind::KdFlattened;
  opt.height = h;
  opt.plan = plan;
  opt.mechanism = mech;
  return build_tree(points, domain, opt, src);
}

// Private kd splits on the top `switch_level` levels, midpoint splits below.
inline PsdTree build_hybrid(std::span<const Point> points, const Rect& domain, int h,
                            int switch_level, const BudgetPlan& plan, const MedianMechanism& mech,
                            const RandomSource& src) {
  if (switch_level < 0 || switch_level > h) {
    throw InvalidParameter("build_hybrid: switch level must lie in [0, h]");
  }
  BuildOptions opt;
  opt.kind = TreeKind::Hybrid;
  opt.height = h;
  opt.switch_level = switch_level;
  opt.plan = plan;
  opt.mechanism = mech;
  return build_tree(points, domain, opt, src);
}

// Flattened one-dimensional kd-tree over Hilbert indices. Each node owns a
// contiguous index range; its region is the bounding box of that range.
inline PsdTree build_hilbert_rtree(std::span<const Point> points, const Rect& domain, int h,
                                   const BudgetPlan& plan, const MedianMechanism& mech,
                                   int hilbert_order, const RandomSource& src) {
  if (h < 1) throw InvalidParameter("build_hilbert_rtree: height must be >= 1");
  if (2 * h > 2 * hilbert_order) {
    throw InvalidParameter("build_hilbert_rtree: curve order too small for the tree height");
  }
  BuildOptions opt;
  opt.kind = TreeKind::HilbertR;
  opt.height = h;
  opt.plan = plan;
  opt.mechanism = mech;
  opt.hilbert_order = hilbert_order;
  return build_tree(points, domain, opt, src);
}

}  // namespace psd

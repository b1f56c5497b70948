#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "psd/budget.hpp"
#include "psd/error.hpp"
#include "psd/geometry.hpp"
#include "psd/tree.hpp"

namespace psd {

enum class CountSource { Raw, Ols };

struct QueryAnswer {
  double estimate = 0.0;
  std::vector<std::int64_t> nodes_per_level;  // n_i: maximally contained nodes at level i
  double partial = 0.0;                       // contribution of partially covered leaves
  std::int64_t partial_leaves = 0;

  std::int64_t nodes_used() const {
    std::int64_t s = 0;
    for (auto v : nodes_per_level) s += v;
    return s;
  }
};

namespace detail {

inline const std::optional<double>& count_of(const Node& n, CountSource src) {
  return src == CountSource::Raw ? n.noisy : n.estimate;
}

// Value used for a leaf. A leaf on a level without released counts (only
// possible after pruning) falls back to its post-processed estimate.
inline double leaf_value(const Node& n, CountSource src) {
  if (const auto& c = count_of(n, src)) return *c;
  if (n.estimate) return *n.estimate;
  throw InvalidParameter("query: leaf without any released count");
}

}  // namespace detail

// Canonical range answering: starting at the root, a node fully inside q adds
// its count once and is not descended; a partially covered internal node is
// descended; a partially covered leaf adds its count times the covered area
// fraction. Fully covered nodes without a count (unobserved levels) are
// descended as well.
inline QueryAnswer answer(const PsdTree& tree, const Rect& q, CountSource counts) {
  if (tree.nodes.empty()) throw InvalidParameter("query: empty tree");
  if (counts == CountSource::Ols && !tree.root().estimate) {
    throw InvalidParameter("query: post-processed counts requested but not computed");
  }
  QueryAnswer out;
  out.nodes_per_level.assign(static_cast<std::size_t>(tree.height) + 1, 0);
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const Node& n = tree.nodes[stack.back()];
    stack.pop_back();
    const Relation rel = relation(q, n.region);
    if (rel == Relation::Disjoint) continue;
    const auto& c = detail::count_of(n, counts);
    if (rel == Relation::AContainsB && (c || n.is_leaf())) {
      out.estimate += c ? *c : detail::leaf_value(n, counts);
      ++out.nodes_per_level[static_cast<std::size_t>(n.level)];
      continue;
    }
    if (n.is_leaf()) {
      const double part = detail::leaf_value(n, counts) * overlap_fraction(n.region, q);
      out.estimate += part;
      out.partial += part;
      ++out.partial_leaves;
      continue;
    }
    for (std::int64_t i = n.child_count; i-- > 0;) {
      stack.push_back(static_cast<std::size_t>(n.first_child + i));
    }
  }
  return out;
}

inline std::int64_t true_answer(std::span<const Point> points, const Rect& q) {
  std::int64_t n = 0;
  for (const Point& p : points) n += contains(q, p) ? 1 : 0;
  return n;
}

// |estimate - truth| / max(1, truth).
inline double relative_error(double estimate, double truth) {
  return std::abs(estimate - truth) / std::max(1.0, truth);
}

// Upper bound on the variance of a canonical answer: sum_i 2 n_i / eps_i^2
// with n_i from the containment bound. Levels without counts are skipped.
inline double predicted_error(BoundKind kind, const BudgetPlan& plan, int h) {
  if (plan.count_eps.size() != static_cast<std::size_t>(h) + 1) {
    throw InvalidParameter("predicted_error: plan does not match height");
  }
  double err = 0.0;
  for (int i = 0; i <= h; ++i) {
    const double e = plan.count_eps[static_cast<std::size_t>(i)];
    if (e == 0.0) continue;
    err += 2.0 * static_cast<double>(max_contained_nodes(kind, h, i)) / (e * e);
  }
  return err;
}

}  // namespace psd

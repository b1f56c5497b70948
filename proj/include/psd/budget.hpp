#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "psd/error.hpp"

namespace psd {

// Per-level privacy budget of a tree of height h (leaves at level 0, root at h).
//
// count_eps[i] is the Laplace parameter of every count released at level i;
// zero means level i releases no counts. median_eps[i] is the budget of the
// private split(s) performed at an internal node of level i; median_eps[0] is
// always zero because leaves are not split. Sequential composition along any
// root-to-leaf path gives total = sum(count_eps) + sum(median_eps).
struct BudgetPlan {
  int height = 0;
  std::vector<double> count_eps;
  std::vector<double> median_eps;
  double total = 0.0;

  double count_total() const { return std::accumulate(count_eps.begin(), count_eps.end(), 0.0); }
  double median_total() const {
    return std::accumulate(median_eps.begin(), median_eps.end(), 0.0);
  }
  bool data_independent() const {
    for (double e : median_eps) {
      if (e != 0.0) return false;
    }
    return true;
  }

  void validate() const {
    if (height < 0) throw InvalidParameter("budget: height must be >= 0");
    const auto n = static_cast<std::size_t>(height) + 1;
    if (count_eps.size() != n || median_eps.size() != n) {
      throw InvalidParameter("budget: per-level vectors must have h+1 entries");
    }
    for (double e : count_eps) {
      if (!(e >= 0.0) || !std::isfinite(e)) throw InvalidParameter("budget: negative count epsilon");
    }
    for (double e : median_eps) {
      if (!(e >= 0.0) || !std::isfinite(e)) {
        throw InvalidParameter("budget: negative median epsilon");
      }
    }
    if (median_eps[0] != 0.0) throw InvalidParameter("budget: leaves carry no median budget");
    if (!(total > 0.0)) throw InvalidParameter("budget: total epsilon must be > 0");
  }
};

// Count-share strategies.
struct UniformCounts {};
struct GeometricCounts {};
struct LeafOnlyCounts {};
// Levels in the set release nothing; the rest share the count budget evenly.
struct SkipLevels {
  std::set<int> levels;
};
// Relative weights per level (index = level), normalised to the count budget.
struct CustomCounts {
  std::vector<double> weights;
};
using CountStrategy =
    std::variant<UniformCounts, GeometricCounts, LeafOnlyCounts, SkipLevels, CustomCounts>;

// Median-share strategies.
struct UniformInternal {};
// Private splits only on the top `levels` levels (hybrid trees).
struct HybridTopLevels {
  int levels = 0;
};
using MedianStrategy = std::variant<UniformInternal, HybridTopLevels>;

inline std::vector<double> uniform_count_budget(int h, double eps_cnt) {
  if (h < 0) throw InvalidParameter("uniform_count_budget: h must be >= 0");
  return std::vector<double>(static_cast<std::size_t>(h) + 1, eps_cnt / (h + 1));
}

// eps_i = 2^((h-i)/3) * eps * (2^(1/3) - 1) / (2^((h+1)/3) - 1); grows leafward by 2^(1/3).
inline std::vector<double> geometric_count_budget(int h, double eps_cnt) {
  if (h < 0) throw InvalidParameter("geometric_count_budget: h must be >= 0");
  const double cbrt2 = std::cbrt(2.0);
  const double norm = eps_cnt * (cbrt2 - 1.0) / (std::exp2((h + 1) / 3.0) - 1.0);
  std::vector<double> out(static_cast<std::size_t>(h) + 1);
  for (int i = 0; i <= h; ++i) out[i] = std::exp2((h - i) / 3.0) * norm;
  return out;
}

enum class BudgetKind { Uniform, Geometric };

// Epsilon-free worst-case error shapes of the uniform and geometric budgets.
inline double worst_case_error(BudgetKind kind, int h) {
  if (h < 0) throw InvalidParameter("worst_case_error: h must be >= 0");
  if (kind == BudgetKind::Uniform) {
    return static_cast<double>(h + 1) * (h + 1) * (std::exp2(h + 1) - 1.0);
  }
  const double num = std::exp2((h + 1) / 3.0) - 1.0;
  const double den = std::cbrt(2.0) - 1.0;
  return (num * num * num) / (den * den * den);
}

enum class BoundKind { Quadtree, Kdtree };

// Upper bound on the number of level-i nodes maximally contained in any range
// query. The tighter min{8*2^(h-i), 4^(h-i)} is not used.
inline std::uint64_t max_contained_nodes(BoundKind kind, int h, int i) {
  if (i < 0 || i > h) throw InvalidParameter("max_contained_nodes: need 0 <= i <= h");
  const int exponent = kind == BoundKind::Quadtree ? h - i : (h - i + 1) / 2;
  return std::uint64_t{8} << exponent;
}

// (eps_cnt, eps_median).
inline std::pair<double, double> split_budget(double eps, double count_share) {
  if (!(count_share >= 0.0 && count_share <= 1.0)) {
    throw InvalidParameter("split_budget: count_share must lie in [0,1]");
  }
  const double cnt = count_share * eps;
  return {cnt, eps - cnt};
}

namespace detail {

inline std::vector<double> count_levels(const CountStrategy& s, int h, double eps_cnt) {
  const auto n = static_cast<std::size_t>(h) + 1;
  if (const auto* skip = std::get_if<SkipLevels>(&s)) {
    std::vector<double> out(n, 0.0);
    int kept = 0;
    for (int i = 0; i <= h; ++i) kept += skip->levels.count(i) ? 0 : 1;
    if (kept == 0) throw InvalidParameter("SkipLevels: every level skipped");
    for (int i = 0; i <= h; ++i) {
      if (!skip->levels.count(i)) out[i] = eps_cnt / kept;
    }
    return out;
  }
  if (const auto* custom = std::get_if<CustomCounts>(&s)) {
    if (custom->weights.size() != n) {
      throw InvalidParameter("CustomCounts: need exactly h+1 weights");
    }
    double sum = 0.0;
    for (double w : custom->weights) {
      if (!(w >= 0.0)) throw InvalidParameter("CustomCounts: negative weight");
      sum += w;
    }
    if (!(sum > 0.0)) throw InvalidParameter("CustomCounts: weights sum to zero");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = eps_cnt * custom->weights[i] / sum;
    return out;
  }
  if (std::holds_alternative<LeafOnlyCounts>(s)) {
    std::vector<double> out(n, 0.0);
    out[0] = eps_cnt;
    return out;
  }
  if (std::holds_alternative<GeometricCounts>(s)) return geometric_count_budget(h, eps_cnt);
  return uniform_count_budget(h, eps_cnt);
}

inline std::vector<double> median_levels(const MedianStrategy& s, int h, double eps_median) {
  std::vector<double> out(static_cast<std::size_t>(h) + 1, 0.0);
  if (eps_median == 0.0) return out;
  int top = h;
  if (const auto* hybrid = std::get_if<HybridTopLevels>(&s)) top = hybrid->levels;
  if (top < 0 || top > h) throw InvalidParameter("median budget: switch level out of [0,h]");
  if (top == 0) {
    throw InvalidParameter("median budget: positive median share but no data-dependent levels");
  }
  for (int i = h - top + 1; i <= h; ++i) out[i] = eps_median / top;
  return out;
}

}  // namespace detail

inline BudgetPlan make_plan(int h, double eps, double count_share, const CountStrategy& counts,
                            const MedianStrategy& medians = UniformInternal{}) {
  if (h < 0) throw InvalidParameter("make_plan: h must be >= 0");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidParameter("make_plan: epsilon must be > 0");
  const auto [eps_cnt, eps_median] = split_budget(eps, count_share);
  if (!(eps_cnt > 0.0)) throw InvalidParameter("make_plan: count share must be positive");
  BudgetPlan plan;
  plan.height = h;
  plan.total = eps;
  plan.count_eps = detail::count_levels(counts, h, eps_cnt);
  plan.median_eps = detail::median_levels(medians, h, eps_median);
  plan.validate();
  return plan;
}

inline constexpr double kAuditTolerance = 1e-9;

// Sequential composition over one root-to-leaf path. Throws AuditFailure if the
// entries do not add up to plan.total.
inline double audit_path_sum(const BudgetPlan& plan) {
  const double sum = plan.count_total() + plan.median_total();
  if (!(std::abs(sum - plan.total) <= kAuditTolerance * std::max(1.0, std::abs(plan.total)))) {
    throw AuditFailure("budget audit: path sum " + std::to_string(sum) +
                       " differs from advertised epsilon " + std::to_string(plan.total));
  }
  return sum;
}

}  // namespace psd

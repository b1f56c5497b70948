#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psd/budget.hpp"
#include "psd/error.hpp"
#include "psd/geometry.hpp"
#include "psd/median.hpp"

namespace psd {

enum class TreeKind { Quadtree, KdFlattened, Hybrid, HilbertR, Generic };

inline const char* to_string(TreeKind k) {
  switch (k) {
    case TreeKind::Quadtree: return "quadtree";
    case TreeKind::KdFlattened: return "kd";
    case TreeKind::Hybrid: return "hybrid";
    case TreeKind::HilbertR: return "hilbert";
    case TreeKind::Generic: return "generic";
  }
  return "?";
}

inline TreeKind parse_tree_kind(const std::string& s) {
  if (s == "quadtree" || s == "quad") return TreeKind::Quadtree;
  if (s == "kd" || s == "kdtree") return TreeKind::KdFlattened;
  if (s == "hybrid") return TreeKind::Hybrid;
  if (s == "hilbert" || s == "hilbert-r") return TreeKind::HilbertR;
  if (s == "generic") return TreeKind::Generic;
  throw InvalidParameter("unknown tree kind '" + s + "' (quadtree|kd|hybrid|hilbert)");
}

// How an internal node was divided.
//   Midpoint: public midpoint split on both axes.
//   Kd:       private x split (value 0), then private y splits of the lower
//             and upper halves (values 1, 2).
//   Hilbert:  private split of the Hilbert index range (value 0), then of the
//             two halves (values 1, 2); values are integer indices.
enum class SplitKind { None, Midpoint, Kd, Hilbert };

inline const char* to_string(SplitKind k) {
  switch (k) {
    case SplitKind::None: return "none";
    case SplitKind::Midpoint: return "mid";
    case SplitKind::Kd: return "kd";
    case SplitKind::Hilbert: return "hilbert";
  }
  return "?";
}

struct Node {
  Rect region;
  int level = 0;
  std::int64_t parent = -1;
  std::int64_t first_child = -1;
  int child_count = 0;
  std::optional<double> noisy;     // released count Y_v
  std::optional<double> estimate;  // post-processed count beta_v
  SplitKind split = SplitKind::None;
  std::array<double, 3> split_values{};
  // Hilbert R-trees: the node owns the index range [hilbert_lo, hilbert_hi).
  std::uint64_t hilbert_lo = 0;
  std::uint64_t hilbert_hi = 0;

  bool is_leaf() const { return child_count == 0; }
  bool private_split() const { return split == SplitKind::Kd || split == SplitKind::Hilbert; }
};

// Privacy actually consumed by a built tree, read off its nodes.
struct PrivacyReport {
  double epsilon = 0.0;      // largest root-to-leaf sum
  double min_epsilon = 0.0;  // smallest root-to-leaf sum
  double delta = 0.0;        // summed delta of smooth-sensitivity splits, 0 for pure DP
  std::size_t paths = 0;
};

// A private spatial decomposition. Nodes are stored breadth first; the
// children of a node are contiguous and node 0 is the root.
class PsdTree {
 public:
  TreeKind kind = TreeKind::Quadtree;
  int fanout = 4;
  int height = 0;
  int switch_level = 0;  // data-dependent levels of a hybrid tree
  BudgetPlan plan;
  MedianMechanism mechanism;
  Rect domain;
  int hilbert_order = 0;
  std::vector<Node> nodes;

  const Node& root() const { return nodes.front(); }
  std::size_t size() const { return nodes.size(); }

  std::span<const Node> children(const Node& n) const {
    if (n.is_leaf()) return {};
    return {nodes.data() + n.first_child, static_cast<std::size_t>(n.child_count)};
  }
  std::span<Node> children(const Node& n) {
    if (n.is_leaf()) return {};
    return {nodes.data() + n.first_child, static_cast<std::size_t>(n.child_count)};
  }

  double level_epsilon(int level) const { return plan.count_eps.at(static_cast<std::size_t>(level)); }

  bool has_estimates() const {
    return !nodes.empty() &&
           std::all_of(nodes.begin(), nodes.end(), [](const Node& n) { return n.estimate.has_value(); });
  }

  // Every internal node has `fanout` children and every leaf sits at level 0.
  bool is_complete() const {
    if (nodes.empty() || nodes.front().level != height) return false;
    for (const Node& n : nodes) {
      if (n.is_leaf()) {
        if (n.level != 0) return false;
      } else {
        if (n.child_count != fanout) return false;
        for (const Node& c : children(n)) {
          if (c.level != n.level - 1) return false;
        }
      }
    }
    return true;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_leaf(); }));
  }

  // Complete tree of the given fanout and height with no counts, whose leaves
  // cut the domain into vertical strips. Used to post-process count vectors
  // that did not come from a spatial builder.
  static PsdTree complete(int fanout, int height, const BudgetPlan& plan,
                          const Rect& domain = {0.0, 0.0, 1.0, 1.0}) {
    if (fanout < 2) throw InvalidParameter("complete tree: fanout must be >= 2");
    if (height < 0) throw InvalidParameter("complete tree: height must be >= 0");
    PsdTree t;
    t.kind = TreeKind::Generic;
    t.fanout = fanout;
    t.height = height;
    t.plan = plan;
    t.domain = domain;
    Node root;
    root.region = domain;
    root.level = height;
    t.nodes.push_back(root);
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      if (t.nodes[i].level == 0) continue;
      const Rect r = t.nodes[i].region;
      t.nodes[i].first_child = static_cast<std::int64_t>(t.nodes.size());
      t.nodes[i].child_count = fanout;
      t.nodes[i].split = SplitKind::Midpoint;
      for (int c = 0; c < fanout; ++c) {
        Node child;
        child.region = {r.x_lo + r.width() * c / fanout, r.y_lo,
                        c + 1 == fanout ? r.x_hi : r.x_lo + r.width() * (c + 1) / fanout, r.y_hi};
        child.level = t.nodes[i].level - 1;
        child.parent = static_cast<std::int64_t>(i);
        t.nodes.push_back(child);
      }
    }
    return t;
  }
};

// Walks every root-to-leaf path and sums the count budget of each released
// count plus the median budget of each private split.
inline PrivacyReport audit_tree(const PsdTree& tree) {
  if (tree.nodes.empty()) throw InvalidParameter("audit: empty tree");
  const bool approximate = tree.mechanism.kind == MedianKind::SmoothSensitivity;
  PrivacyReport report;
  report.min_epsilon = std::numeric_limits<double>::infinity();
  struct Item {
    std::size_t node;
    double eps;
    int ss_splits;
  };
  std::vector<Item> stack{{0, 0.0, 0}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const Node& n = tree.nodes[it.node];
    double eps = it.eps;
    int splits = it.ss_splits;
    if (n.noisy) eps += tree.level_epsilon(n.level);
    if (n.private_split() && !n.is_leaf()) {
      eps += tree.plan.median_eps.at(static_cast<std::size_t>(n.level));
      if (approximate) splits += 2;
    }
    if (n.is_leaf()) {
      report.epsilon = std::max(report.epsilon, eps);
      report.min_epsilon = std::min(report.min_epsilon, eps);
      report.delta = std::max(report.delta, splits * tree.mechanism.delta);
      ++report.paths;
      continue;
    }
    for (std::int64_t c = 0; c < n.child_count; ++c) {
      stack.push_back({static_cast<std::size_t>(n.first_child + c), eps, splits});
    }
  }
  return report;
}

// Like audit_tree but throws AuditFailure unless every path sums to the
// advertised epsilon.
inline PrivacyReport verify_privacy(const PsdTree& tree) {
  const PrivacyReport r = audit_tree(tree);
  const double tol = kAuditTolerance * std::max(1.0, tree.plan.total);
  if (std::abs(r.epsilon - tree.plan.total) > tol || std::abs(r.min_epsilon - tree.plan.total) > tol) {
    throw AuditFailure("tree audit: path sums in [" + std::to_string(r.min_epsilon) + ", " +
                       std::to_string(r.epsilon) + "] but epsilon is " +
                       std::to_string(tree.plan.total));
  }
  return r;
}

// Drops every descendant of a node whose post-processed count is below m.
// Counts are kept as they are.
inline PsdTree prune(const PsdTree& tree, double m) {
  if (!tree.has_estimates()) {
    throw InvalidParameter("prune: run post-processing first (estimates missing)");
  }
  PsdTree out = tree;
  out.nodes.clear();
  out.nodes.reserve(tree.nodes.size());
  std::deque<std::pair<std::size_t, std::int64_t>> queue{{0, -1}};  // (old index, new parent)
  while (!queue.empty()) {
    const auto [old, parent] = queue.front();
    queue.pop_front();
    Node n = tree.nodes[old];
    const auto self = static_cast<std::int64_t>(out.nodes.size());
    n.parent = parent;
    if (parent >= 0) {
      Node& p = out.nodes[static_cast<std::size_t>(parent)];
      if (p.first_child < 0) p.first_child = self;
    }
    const bool keep_children = !n.is_leaf() && !(*n.estimate < m);
    if (keep_children) {
      for (std::int64_t c = 0; c < n.child_count; ++c) {
        queue.emplace_back(static_cast<std::size_t>(n.first_child + c), self);
      }
    }
    n.first_child = -1;
    if (!keep_children) {
      n.child_count = 0;
      n.split = SplitKind::None;
      n.split_values = {};
    }
    out.nodes.push_back(n);
  }
  return out;
}

}  // namespace psd

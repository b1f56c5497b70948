#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "psd/error.hpp"
#include "psd/tree.hpp"

namespace psd {

// Scratch space of the linear-time least-squares pass.
struct OlsScratch {
  std::vector<double> E;      // E[l] = sum_{j<=l} f^j eps_j^2
  std::vector<double> Z;      // Z_v = sum over leaves u below v of sum_{w in anc(u)} eps_w^2 Y_w
  std::vector<double> alpha;  // running ancestor sums, top-down
  std::vector<double> F;      // F_v = sum over strict ancestors w of beta_w eps_w^2
};

// Closed-form variance of the root estimate of a two-level tree with fanout f:
// beta = (f e1^2 Y_root + e0^2 sum Y_child) / (f e1^2 + e0^2), Var = 2f / (f e1^2 + e0^2).
inline double ols_variance_root(int f, double eps_root, double eps_leaf) {
  if (f < 1) throw InvalidParameter("ols_variance_root: fanout must be >= 1");
  if (!(eps_root > 0.0) || !(eps_leaf >= 0.0)) {
    throw InvalidParameter("ols_variance_root: epsilons must be positive");
  }
  return 2.0 * f / (f * eps_root * eps_root + eps_leaf * eps_leaf);
}

// Replaces the estimates of `tree` by the ordinary least squares estimator of
// its noisy counts: the consistent vector (beta_v = sum of the children's
// beta) minimising sum_v eps_v^2 (Y_v - beta_v)^2.
//
// Three traversals: top-down ancestor sums give Z at the leaves, bottom-up
// sums give Z everywhere, then top-down
//   beta_root = Z_root / E_h,   beta_v = (Z_v - f^{h(v)} F_v) / E_{h(v)}.
// Levels with eps = 0 are unobserved and carry zero weight. When no level at
// or below v is observed (E_{h(v)} = 0) the objective does not pin down how
// the parent's estimate is shared among its children; the minimum-norm
// solution splits it evenly.
inline void ols(PsdTree& tree, OlsScratch& s) {
  if (!tree.is_complete()) throw InvalidParameter("ols: tree is not complete");
  const int h = tree.height;
  const auto f = static_cast<double>(tree.fanout);
  const auto& eps = tree.plan.count_eps;
  if (eps.size() != static_cast<std::size_t>(h) + 1) {
    throw InvalidParameter("ols: budget plan does not match tree height");
  }

  s.E.assign(static_cast<std::size_t>(h) + 1, 0.0);
  std::vector<double> fpow(static_cast<std::size_t>(h) + 1, 1.0);
  for (int l = 0; l <= h; ++l) {
    if (l > 0) fpow[l] = fpow[l - 1] * f;
    s.E[l] = (l > 0 ? s.E[l - 1] : 0.0) + fpow[l] * eps[l] * eps[l];
  }
  if (!(s.E[h] > 0.0)) throw InvalidParameter("ols: no level releases counts");

  const std::size_t n = tree.nodes.size();
  auto weighted = [&](const Node& v) {
    const double e = eps[static_cast<std::size_t>(v.level)];
    if (e == 0.0) return 0.0;
    if (!v.noisy) throw InvalidParameter("ols: node on an observed level has no noisy count");
    return e * e * *v.noisy;
  };

  // Phase I: top-down; nodes are breadth first so parents come first.
  s.alpha.assign(n, 0.0);
  s.Z.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& v = tree.nodes[i];
    s.alpha[i] = (v.parent >= 0 ? s.alpha[static_cast<std::size_t>(v.parent)] : 0.0) + weighted(v);
    if (v.is_leaf()) s.Z[i] = s.alpha[i];
  }
  // Phase II: bottom-up.
  for (std::size_t i = n; i-- > 0;) {
    const Node& v = tree.nodes[i];
    if (v.is_leaf()) continue;
    double z = 0.0;
    for (std::int64_t c = 0; c < v.child_count; ++c) {
      z += s.Z[static_cast<std::size_t>(v.first_child + c)];
    }
    s.Z[i] = z;
  }
  // Phase III: top-down.
  s.F.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Node& v = tree.nodes[i];
    const auto l = static_cast<std::size_t>(v.level);
    if (v.parent < 0) {
      v.estimate = s.Z[i] / s.E[l];
      continue;
    }
    const auto p = static_cast<std::size_t>(v.parent);
    const double parent_beta = *tree.nodes[p].estimate;
    s.F[i] = s.F[p] + parent_beta * eps[l + 1] * eps[l + 1];
    if (s.E[l] > 0.0) {
      v.estimate = (s.Z[i] - fpow[l] * s.F[i]) / s.E[l];
    } else {
      v.estimate = parent_beta / f;
    }
  }
}

inline void ols(PsdTree& tree) {
  OlsScratch s;
  ols(tree, s);
}

}  // namespace psd

#pragma once

// Dense least-squares oracle for post-processing: unknowns are the leaf
// counts, every node contributes the row (sum of its leaves) with weight
// eps_level. Solved as a minimum-norm weighted least-squares problem so
// unobserved levels are handled the same way as in the linear-time pass.

#include <Eigen/Dense>
#include <vector>

#include "oracles.hpp"
#include "psd/tree.hpp"

namespace oracle {

inline std::vector<double> dense_ols(const psd::PsdTree& t) {
  const auto leaf_ids = leaves(t);
  std::vector<long> column(t.nodes.size(), -1);
  for (std::size_t k = 0; k < leaf_ids.size(); ++k) column[leaf_ids[k]] = static_cast<long>(k);

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    if (t.level_epsilon(t.nodes[i].level) > 0.0) rows.push_back(i);
  }
  const long L = static_cast<long>(leaf_ids.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<long>(rows.size()), L);
  Eigen::VectorXd b(static_cast<long>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& v = t.nodes[rows[r]];
    const double w = t.level_epsilon(v.level);
    b(static_cast<long>(r)) = w * *v.noisy;
    for (std::size_t leaf : leaf_ids) {
      for (auto a = static_cast<std::int64_t>(leaf); a >= 0;
           a = t.nodes[static_cast<std::size_t>(a)].parent) {
        if (static_cast<std::size_t>(a) == rows[r]) {
          A(static_cast<long>(r), column[leaf]) = w;
          break;
        }
      }
    }
  }
  const Eigen::VectorXd x = A.completeOrthogonalDecomposition().solve(b);

  // Node estimates are sums of their leaves; children follow their parent in
  // storage, so accumulate bottom-up.
  std::vector<double> beta(t.nodes.size(), 0.0);
  for (std::size_t i = t.nodes.size(); i-- > 0;) {
    const auto& v = t.nodes[i];
    if (v.is_leaf()) {
      beta[i] = x(column[i]);
    } else {
      double s = 0.0;
      for (std::int64_t c = 0; c < v.child_count; ++c) {
        s += beta[static_cast<std::size_t>(v.first_child + c)];
      }
      beta[i] = s;
    }
  }
  return beta;
}

}  // namespace oracle

#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance run.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/LU>

#include "ultratree/geometry.hpp"
#include "ultratree/model.hpp"
#include "ultratree/treespace.hpp"

namespace ultratree::oracle {

// Resolved tree, sometimes with a random number of internal splits dropped;
// `equidistant_share` of draws are coalescent trees.
inline Tree random_any(RngStream& rng, int p, double drop_share = 0.5, double equidistant_share = 0.0) {
  auto mode = RandomTreeMode::uniform_binary;
  if (equidistant_share > 0.0 && rng.uniform() < equidistant_share) mode = RandomTreeMode::equidistant;
  Tree t = random_tree(p, mode, 1.0, rng);
  if (rng.uniform() < drop_share && !t.internal_edges().empty()) {
    const int drop = 1 + static_cast<int>(rng.uniform_index(t.internal_edges().size()));
    t = drop_internal_splits(t, drop, false, rng);
  }
  return t;
}

// Shortest path over every ordered support sequence: each non-shared split
// gets a leg index, legs must keep the tree compatible at every stage and
// appear in non-decreasing order of |A|/(|A|+|B|). Legs may have an empty
// side, which covers splits compatible with the whole other tree.
inline double brute_force_bhv(const Tree& t1, const Tree& t2) {
  std::vector<Edge> a, b;
  double common = 0.0;
  for (const auto& e : t1.internal_edges()) {
    if (auto l = t2.internal_length(e.split)) {
      common += (e.length - *l) * (e.length - *l);
    } else {
      a.push_back(e);
    }
  }
  for (const auto& e : t2.internal_edges()) {
    if (!t1.internal_length(e.split)) b.push_back(e);
  }
  const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
  const int n = na + nb;
  if (n == 0) return std::sqrt(common);
  double best = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= n; ++m) {
    std::vector<int> label(static_cast<std::size_t>(n), 0);
    for (;;) {
      std::vector<double> sa(static_cast<std::size_t>(m), 0.0), sb(static_cast<std::size_t>(m), 0.0);
      std::vector<int> used(static_cast<std::size_t>(m), 0);
      for (int i = 0; i < na; ++i) {
        sa[static_cast<std::size_t>(label[i])] += a[i].length * a[i].length;
        ++used[static_cast<std::size_t>(label[i])];
      }
      for (int j = 0; j < nb; ++j) {
        sb[static_cast<std::size_t>(label[na + j])] += b[j].length * b[j].length;
        ++used[static_cast<std::size_t>(label[na + j])];
      }
      bool ok = std::all_of(used.begin(), used.end(), [](int u) { return u > 0; });
      for (int i = 0; ok && i < na; ++i) {
        for (int j = 0; ok && j < nb; ++j) {
          if (label[na + j] < label[i] && !split_compatible(a[i].split, b[j].split)) ok = false;
          // Swapped in the same leg is fine; b before a must be compatible.
        }
      }
      double len = common;
      double prev = -1.0;
      for (int k = 0; ok && k < m; ++k) {
        const double x = std::sqrt(sa[static_cast<std::size_t>(k)]);
        const double y = std::sqrt(sb[static_cast<std::size_t>(k)]);
        const double r = x / (x + y);
        if (r < prev) ok = false;
        prev = r;
        len += (x + y) * (x + y);
      }
      if (ok) best = std::min(best, std::sqrt(len));
      int pos = 0;
      while (pos < n && ++label[static_cast<std::size_t>(pos)] == m) label[static_cast<std::size_t>(pos++)] = 0;
      if (pos == n) break;
    }
  }
  return best;
}

// Gradient of the log-likelihood in the form with the j-th edge removed:
// Sigma = Sigma_{-j} + d v v^T, inverse of Sigma_{-j} recovered by
// Sherman-Morrison from an LU inverse of Sigma.
inline double woodbury_gradient(const SufficientStats& st, const Eigen::MatrixXd& sigma, const Split& s,
                         double d, double* denom_out) {
  const int p = static_cast<int>(sigma.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
  for (int leaf : s.leaves()) v(leaf - 1) = 1.0;
  const Eigen::MatrixXd inv = sigma.fullPivLu().inverse();
  const double q = v.dot(inv * v);
  const double denom = 1.0 - d * q;
  *denom_out = denom;
  const double beta = q / denom;
  const Eigen::VectorXd u = inv * v / denom;
  const double uSu = u.dot(st.s * u);
  const double c = 1.0 + d * beta;
  return -0.5 * (st.n * beta / c - uSu / (c * c));
}

inline double rising(double x, int m) {
  double r = 1.0;
  for (int i = 0; i < m; ++i) r *= x + i;
  return r;
}

// Unconditioned EPPF of a partition with the given block sizes, then
// conditioned on at least two blocks.
inline double eppf_conditioned(const std::vector<int>& sizes, double theta, double alpha) {
  int n = 0;
  for (int s : sizes) n += s;
  const int k = static_cast<int>(sizes.size());
  double num = 1.0;
  for (int i = 1; i <= k - 1; ++i) num *= theta + i * alpha;
  for (int s : sizes) num *= rising(1.0 - alpha, s - 1);
  const double eppf = num / rising(theta + 1.0, n - 1);
  const double single = rising(1.0 - alpha, n - 1) / rising(theta + 1.0, n - 1);
  return eppf / (1.0 - single);
}

// All set partitions of {0..n-1}, as block-size vectors.
inline void partitions(int n, std::vector<int>& label, int next, int used,
                const std::function<void(const std::vector<int>&)>& f) {
  if (next == n) {
    std::vector<int> sizes(static_cast<std::size_t>(used), 0);
    for (int l : label) ++sizes[static_cast<std::size_t>(l)];
    f(sizes);
    return;
  }
  for (int b = 0; b <= used; ++b) {
    label[static_cast<std::size_t>(next)] = b;
    partitions(n, label, next + 1, std::max(used, b + 1), f);
  }
}

}  // namespace ultratree::oracle

#pragma once

// Geodesics in treespace.
//
// Internal-edge coordinates live in BHV space, where the geodesic is found by
// the geodesic treepath scheme: start from the cone path through the origin
// and keep splitting support pairs while a min-weight vertex cover of the
// incompatibility graph certifies a shorter path. Leaf and root coordinates
// form a Euclidean factor.

#include <cmath>
#include <optional>
#include <vector>

#include "max_flow.hpp"
#include "rng.hpp"
#include "tree.hpp"
#include "ultrametric.hpp"

namespace ultratree {

struct CommonEdge {
  Split split;
  double source = 0.0;  // 0 when the split is absent from the source tree
  double target = 0.0;
};

struct SupportPair {
  std::vector<Edge> a;  // leaves the tree in this leg
  std::vector<Edge> b;  // enters the tree in this leg
  double norm_a = 0.0;
  double norm_b = 0.0;

  // Fraction of the path at which the a-edges reach zero.
  double switch_point() const { return norm_a / (norm_a + norm_b); }
};

struct GeodesicSupport {
  std::vector<CommonEdge> common;
  std::vector<SupportPair> pairs;
};

struct BhvResult {
  double distance = 0.0;
  GeodesicSupport support;
};

namespace detail {

inline double norm(const std::vector<Edge>& edges) {
  double s = 0.0;
  for (const auto& e : edges) s += e.length * e.length;
  return std::sqrt(s);
}

inline constexpr double kCoverScale = 1e12;

// Split a support pair if some partition gives a strictly shorter path.
inline std::optional<std::pair<SupportPair, SupportPair>> refine(const SupportPair& pair) {
  const double na2 = pair.norm_a * pair.norm_a;
  const double nb2 = pair.norm_b * pair.norm_b;
  std::vector<MaxFlow::cap_t> wa, wb;
  for (const auto& e : pair.a) {
    wa.push_back(std::max<MaxFlow::cap_t>(1, std::llround(e.length * e.length / na2 * kCoverScale)));
  }
  for (const auto& e : pair.b) {
    wb.push_back(std::max<MaxFlow::cap_t>(1, std::llround(e.length * e.length / nb2 * kCoverScale)));
  }
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < pair.a.size(); ++i) {
    for (std::size_t j = 0; j < pair.b.size(); ++j) {
      if (!split_compatible(pair.a[i].split, pair.b[j].split)) {
        edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  const auto cover = min_weight_vertex_cover(wa, wb, edges);
  if (cover.weight >= static_cast<MaxFlow::cap_t>(kCoverScale)) return std::nullopt;

  SupportPair first, second;
  for (std::size_t i = 0; i < pair.a.size(); ++i) {
    (cover.left[i] ? first.a : second.a).push_back(pair.a[i]);
  }
  for (std::size_t j = 0; j < pair.b.size(); ++j) {
    (cover.right[j] ? second.b : first.b).push_back(pair.b[j]);
  }
  if (first.a.empty() || first.b.empty() || second.a.empty() || second.b.empty()) return std::nullopt;
  first.norm_a = norm(first.a);
  first.norm_b = norm(first.b);
  second.norm_a = norm(second.a);
  second.norm_b = norm(second.b);
  return std::make_pair(std::move(first), std::move(second));
}

inline bool compatible_with_all(const Split& s, const std::vector<Edge>& edges) {
  for (const auto& e : edges) {
    if (!split_compatible(s, e.split)) return false;
  }
  return true;
}

}  // namespace detail

// Geodesic support and BHV distance over internal edges.
inline BhvResult bhv_distance(const Tree& t1, const Tree& t2) {
  if (t1.p() != t2.p()) throw DimensionError("bhv_distance: leaf counts differ");
  const auto& e1 = t1.internal_edges();
  const auto& e2 = t2.internal_edges();
  BhvResult out;
  std::vector<Edge> only1, only2;
  // Both lists are sorted by split.
  std::size_t i = 0, j = 0;
  while (i < e1.size() || j < e2.size()) {
    if (j == e2.size() || (i < e1.size() && e1[i].split < e2[j].split)) {
      only1.push_back(e1[i++]);
    } else if (i == e1.size() || e2[j].split < e1[i].split) {
      only2.push_back(e2[j++]);
    } else {
      out.support.common.push_back({e1[i].split, e1[i].length, e2[j].length});
      ++i;
      ++j;
    }
  }
  SupportPair cone;
  for (const auto& e : only1) {
    if (detail::compatible_with_all(e.split, e2)) {
      out.support.common.push_back({e.split, e.length, 0.0});
    } else {
      cone.a.push_back(e);
    }
  }
  for (const auto& e : only2) {
    if (detail::compatible_with_all(e.split, e1)) {
      out.support.common.push_back({e.split, 0.0, e.length});
    } else {
      cone.b.push_back(e);
    }
  }
  std::sort(out.support.common.begin(), out.support.common.end(),
            [](const CommonEdge& a, const CommonEdge& b) { return a.split < b.split; });

  if (!cone.a.empty()) {
    cone.norm_a = detail::norm(cone.a);
    cone.norm_b = detail::norm(cone.b);
    std::vector<SupportPair> pairs{std::move(cone)};
    for (std::size_t k = 0; k < pairs.size();) {
      if (auto split = detail::refine(pairs[k])) {
        pairs[k] = std::move(split->first);
        pairs.insert(pairs.begin() + static_cast<std::ptrdiff_t>(k) + 1, std::move(split->second));
      } else {
        ++k;
      }
    }
    out.support.pairs = std::move(pairs);
  }

  // Summed in sorted order so that swapping the trees gives the same bits.
  std::vector<double> terms;
  for (const auto& c : out.support.common) terms.push_back((c.source - c.target) * (c.source - c.target));
  for (const auto& pr : out.support.pairs) terms.push_back((pr.norm_a + pr.norm_b) * (pr.norm_a + pr.norm_b));
  std::sort(terms.begin(), terms.end());
  double sq = 0.0;
  for (double x : terms) sq += x;
  out.distance = std::sqrt(sq);
  return out;
}

// Euclidean norm of the difference in (root, leaf) coordinates.
inline double leaf_root_distance(const Tree& t1, const Tree& t2) {
  if (t1.p() != t2.p()) throw DimensionError("leaf_root_distance: leaf counts differ");
  double sq = (t1.root_length() - t2.root_length()) * (t1.root_length() - t2.root_length());
  for (int i = 1; i <= t1.p(); ++i) {
    const double d = t1.leaf_length(i) - t2.leaf_length(i);
    sq += d * d;
  }
  return std::sqrt(sq);
}

enum class Combine { sum, l2 };

inline double tree_distance(const Tree& t1, const Tree& t2, Combine how = Combine::sum) {
  const double b = bhv_distance(t1, t2).distance;
  const double l = leaf_root_distance(t1, t2);
  return how == Combine::sum ? b + l : std::hypot(b, l);
}

inline double matrix_distance(const UltrametricMatrix& m1, const UltrametricMatrix& m2,
                              double tol = kDefaultTol, Combine how = Combine::sum) {
  if (m1.dim() != m2.dim()) throw DimensionError("matrix_distance: dimensions differ");
  return tree_distance(matrix_to_tree(m1, tol), matrix_to_tree(m2, tol), how);
}

inline double matrix_distance(const Eigen::MatrixXd& m1, const Eigen::MatrixXd& m2,
                              double tol = kDefaultTol, Combine how = Combine::sum) {
  return matrix_distance(UltrametricMatrix::from_matrix(m1, tol),
                         UltrametricMatrix::from_matrix(m2, tol), tol, how);
}

// Point at fraction s along the geodesic, given its support.
inline Tree geodesic_point(const Tree& t1, const Tree& t2, const GeodesicSupport& support, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("geodesic_point: s must lie in [0, 1]");
  if (s == 0.0) return t1;
  if (s == 1.0) return t2;
  const int p = t1.p();
  std::vector<Edge> internal;
  for (const auto& c : support.common) {
    const double len = (1.0 - s) * c.source + s * c.target;
    if (len > 0.0) internal.push_back({c.split, len, EdgeKind::internal});
  }
  for (const auto& pr : support.pairs) {
    const double total = pr.norm_a + pr.norm_b;
    if (s < pr.switch_point()) {
      const double scale = (pr.norm_a - s * total) / pr.norm_a;
      for (const auto& e : pr.a) {
        if (e.length * scale > 0.0) internal.push_back({e.split, e.length * scale, EdgeKind::internal});
      }
    } else {
      const double scale = (s * total - pr.norm_a) / pr.norm_b;
      for (const auto& e : pr.b) {
        if (e.length * scale > 0.0) internal.push_back({e.split, e.length * scale, EdgeKind::internal});
      }
    }
  }
  std::vector<double> leaves(static_cast<std::size_t>(p));
  for (int i = 1; i <= p; ++i) {
    leaves[static_cast<std::size_t>(i - 1)] = (1.0 - s) * t1.leaf_length(i) + s * t2.leaf_length(i);
  }
  const double root = std::max(0.0, (1.0 - s) * t1.root_length() + s * t2.root_length());
  return Tree(p, std::move(internal), std::move(leaves), root);
}

inline Tree geodesic_point(const Tree& t1, const Tree& t2, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("geodesic_point: s must lie in [0, 1]");
  return geodesic_point(t1, t2, bhv_distance(t1, t2).support, s);
}

enum class PassOrder { cyclic, random };

struct MeanConfig {
  long max_iterations = 0;  // 0 means 5000 per input tree
  PassOrder pass_order = PassOrder::cyclic;
  double tolerance = 1e-8;
  std::uint64_t seed = 0;
  Combine combine = Combine::sum;
};

// Sturm's iteration: x_1 = first tree, x_{k+1} = geodesic_point(x_k, next, 1/(k+1)).
// The stopping test compares the iterates at the end of consecutive passes.
inline Tree frechet_mean(const std::vector<Tree>& trees, const MeanConfig& cfg = {}) {
  if (trees.empty()) throw std::invalid_argument("frechet_mean: no trees");
  const int p = trees.front().p();
  for (const auto& t : trees) {
    if (t.p() != p) throw DimensionError("frechet_mean: leaf counts differ");
  }
  const long n = static_cast<long>(trees.size());
  const long max_it = cfg.max_iterations > 0 ? cfg.max_iterations : 5000 * n;
  if (cfg.max_iterations < 0) throw std::invalid_argument("frechet_mean: max_iterations must be positive");
  RngStream rng(cfg.seed, 0x6d65616eULL);
  Tree x = trees.front();
  Tree pass_start = x;
  for (long k = 1; k < max_it; ++k) {
    const std::size_t next = cfg.pass_order == PassOrder::cyclic
                                 ? static_cast<std::size_t>(k % n)
                                 : rng.uniform_index(trees.size());
    x = geodesic_point(x, trees[next], 1.0 / static_cast<double>(k + 1));
    if ((k + 1) % n == 0) {
      if (k + 1 > n && tree_distance(pass_start, x, cfg.combine) < cfg.tolerance) break;
      pass_start = x;
    }
  }
  return x;
}

}  // namespace ultratree

#pragma once

// A point of the extended treespace: internal splits with positive lengths,
// p positive leaf-edge lengths and a non-negative root-edge length.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "split.hpp"

namespace ultratree {

enum class EdgeKind { leaf, internal, root };

struct Edge {
  Split split;
  double length = 0.0;
  EdgeKind kind = EdgeKind::internal;
};

class Tree {
 public:
  Tree() = default;

  // `internal` may be in any order; it is sorted canonically.
  Tree(int p, std::vector<Edge> internal, std::vector<double> leaf_lengths,
       double root_length)
      : p_(p), leaf_lengths_(std::move(leaf_lengths)), root_length_(root_length) {
    check_leaf_count(p);
    std::vector<Split> splits;
    splits.reserve(internal.size());
    for (auto& e : internal) {
      e.kind = EdgeKind::internal;
      if (!(e.length > 0.0) || !std::isfinite(e.length)) {
        throw std::invalid_argument("Tree: internal edge {" + e.split.key() +
                                    "} must have positive finite length");
      }
      splits.push_back(e.split);
    }
    topology_ = Topology(p, std::move(splits));  // validates compatibility
    if (topology_.size() != internal.size()) {
      throw std::invalid_argument("Tree: duplicate internal split");
    }
    std::sort(internal.begin(), internal.end(),
              [](const Edge& a, const Edge& b) { return a.split < b.split; });
    internal_ = std::move(internal);
    if (static_cast<int>(leaf_lengths_.size()) != p) {
      throw DimensionError("Tree: expected " + std::to_string(p) +
                           " leaf lengths");
    }
    for (double x : leaf_lengths_) {
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw std::invalid_argument("Tree: leaf lengths must be positive");
      }
    }
    if (!(root_length_ >= 0.0) || !std::isfinite(root_length_)) {
      throw std::invalid_argument("Tree: root length must be non-negative");
    }
  }

  Tree(const Topology& topology, const std::vector<double>& internal_lengths,
       std::vector<double> leaf_lengths, double root_length)
      : Tree(topology.p(), zip(topology, internal_lengths),
             std::move(leaf_lengths), root_length) {}

  int p() const { return p_; }
  const Topology& topology() const { return topology_; }
  const std::vector<Edge>& internal_edges() const { return internal_; }
  const std::vector<double>& leaf_lengths() const { return leaf_lengths_; }
  double leaf_length(int leaf) const { return leaf_lengths_.at(leaf - 1); }
  double root_length() const { return root_length_; }

  std::optional<double> internal_length(const Split& s) const {
    auto it = std::lower_bound(
        internal_.begin(), internal_.end(), s,
        [](const Edge& e, const Split& key) { return e.split < key; });
    if (it != internal_.end() && it->split == s) return it->length;
    return std::nullopt;
  }

  // Every stored coordinate in canonical order: ascending split bitmask, so
  // leaf edges and internal edges interleave and the root edge comes last.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(internal_.size() + static_cast<std::size_t>(p_) + 1);
    for (int i = 1; i <= p_; ++i) {
      out.push_back({Split::leaf(i, p_), leaf_lengths_[i - 1], EdgeKind::leaf});
    }
    out.insert(out.end(), internal_.begin(), internal_.end());
    std::stable_sort(out.begin(), out.end(), [](const Edge& a, const Edge& b) {
      return a.split < b.split;
    });
    out.push_back({Split::full(p_), root_length_, EdgeKind::root});
    return out;
  }

  std::size_t coordinate_count() const {
    return internal_.size() + static_cast<std::size_t>(p_) + 1;
  }

  // Rebuild from edges() output (possibly with modified lengths). Internal
  // edges of length zero are dropped, which collapses them into a
  // multifurcation.
  static Tree from_edges(int p, const std::vector<Edge>& edges) {
    std::vector<Edge> internal;
    std::vector<double> leaves(static_cast<std::size_t>(p), 0.0);
    double root = 0.0;
    for (const auto& e : edges) {
      switch (e.kind) {
        case EdgeKind::leaf:
          leaves[static_cast<std::size_t>(e.split.min_leaf() - 1)] = e.length;
          break;
        case EdgeKind::root:
          root = e.length;
          break;
        case EdgeKind::internal:
          if (e.length != 0.0) internal.push_back(e);
          break;
      }
    }
    return Tree(p, std::move(internal), std::move(leaves), root);
  }

  Tree with_root_length(double root) const {
    return Tree(p_, internal_, leaf_lengths_, root);
  }

  friend bool operator==(const Tree& a, const Tree& b) {
    if (a.p_ != b.p_ || a.root_length_ != b.root_length_ ||
        a.leaf_lengths_ != b.leaf_lengths_ ||
        a.internal_.size() != b.internal_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.internal_.size(); ++i) {
      if (a.internal_[i].split != b.internal_[i].split ||
          a.internal_[i].length != b.internal_[i].length) {
        return false;
      }
    }
    return true;
  }

 private:
  static std::vector<Edge> zip(const Topology& t, const std::vector<double>& lengths) {
    if (lengths.size() != t.size()) {
      throw DimensionError("Tree: internal length count differs from topology");
    }
    std::vector<Edge> out;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      out.push_back({t.splits()[i], lengths[i], EdgeKind::internal});
    }
    return out;
  }

  int p_ = 0;
  Topology topology_;
  std::vector<Edge> internal_;
  std::vector<double> leaf_lengths_;
  double root_length_ = 0.0;
};

// Largest absolute length difference between two trees with identical
// split sets; nullopt when the split sets differ.
inline std::optional<double> max_length_difference(const Tree& a, const Tree& b) {
  if (a.p() != b.p() || a.topology() != b.topology()) return std::nullopt;
  double worst = std::abs(a.root_length() - b.root_length());
  for (int i = 1; i <= a.p(); ++i) {
    worst = std::max(worst, std::abs(a.leaf_length(i) - b.leaf_length(i)));
  }
  for (std::size_t k = 0; k < a.internal_edges().size(); ++k) {
    worst = std::max(worst, std::abs(a.internal_edges()[k].length -
                                     b.internal_edges()[k].length));
  }
  return worst;
}

}  // namespace ultratree

#pragma once

// Splits, compatibility and topologies over leaves {1..p}.
//
// Leaf 0 is the root leaf of the extended treespace. It never appears in a
// split bitmask; leaf i (1 <= i <= p) is bit i-1. Every split therefore names
// the side of an edge that does not contain the root.

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace ultratree {

inline constexpr int kMaxLeaves = 64;

inline std::uint64_t leaf_mask(int p) {
  return p >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << p) - 1);
}

inline void check_leaf_count(int p) {
  if (p < 1 || p > kMaxLeaves) {
    throw std::invalid_argument("leaf count must lie in [1, 64], got " +
                                std::to_string(p));
  }
}

class Split {
 public:
  Split() = default;

  Split(std::uint64_t bits, int p) : bits_(bits), p_(p) {
    check_leaf_count(p);
    if (bits == 0 || (bits & ~leaf_mask(p)) != 0) {
      throw std::invalid_argument("split must be a nonempty subset of {1..p}");
    }
  }

  static Split from_leaves(std::span<const int> leaves, int p) {
    check_leaf_count(p);
    std::uint64_t bits = 0;
    for (int leaf : leaves) {
      if (leaf < 1 || leaf > p) {
        throw std::invalid_argument("leaf label " + std::to_string(leaf) +
                                    " outside 1.." + std::to_string(p));
      }
      bits |= std::uint64_t{1} << (leaf - 1);
    }
    return Split(bits, p);
  }
  static Split from_leaves(std::initializer_list<int> leaves, int p) {
    return from_leaves(std::span<const int>(leaves.begin(), leaves.size()), p);
  }

  static Split leaf(int i, int p) { return Split(std::uint64_t{1} << (i - 1), p); }
  static Split full(int p) { return Split(leaf_mask(p), p); }

  std::uint64_t bits() const { return bits_; }
  int p() const { return p_; }
  int size() const { return std::popcount(bits_); }

  bool contains(int leaf) const { return (bits_ >> (leaf - 1)) & 1U; }
  bool contains(const Split& other) const {
    return (other.bits_ & ~bits_) == 0;
  }

  bool is_leaf() const { return size() == 1; }
  bool is_root() const { return bits_ == leaf_mask(p_); }
  bool is_internal() const { return size() >= 2 && !is_root(); }

  std::vector<int> leaves() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
      out.push_back(std::countr_zero(b) + 1);
    }
    return out;
  }

  // Smallest leaf label in the split.
  int min_leaf() const { return std::countr_zero(bits_) + 1; }

  // Comma-joined sorted leaf labels, e.g. "1,2,4".
  std::string key() const {
    std::string s;
    for (int leaf : leaves()) {
      if (!s.empty()) s += ',';
      s += std::to_string(leaf);
    }
    return s;
  }

  friend bool operator==(const Split&, const Split&) = default;
  // Canonical order: ascending unsigned bitmask.
  friend std::strong_ordering operator<=>(const Split& a, const Split& b) {
    if (auto c = a.bits_ <=> b.bits_; c != 0) return c;
    return a.p_ <=> b.p_;
  }

 private:
  std::uint64_t bits_ = 0;
  int p_ = 0;
};

// Two splits can coexist in one rooted tree iff they are nested or disjoint.
// The intersection of both complements always holds the root leaf, so it is
// never the empty one.
inline bool split_compatible(const Split& a, const Split& b) {
  if (a.p() != b.p()) {
    throw DimensionError("split_compatible: leaf counts differ");
  }
  const std::uint64_t x = a.bits();
  const std::uint64_t y = b.bits();
  return (x & y) == 0 || (x & ~y) == 0 || (y & ~x) == 0;
}

inline bool set_compatible(std::span<const Split> splits) {
  for (std::size_t i = 0; i < splits.size(); ++i) {
    for (std::size_t j = i + 1; j < splits.size(); ++j) {
      if (!split_compatible(splits[i], splits[j])) return false;
    }
  }
  return true;
}

// The internal split set of a rooted tree on leaves {1..p}.
class Topology {
 public:
  Topology() = default;

  explicit Topology(int p, std::vector<Split> splits = {}) : p_(p) {
    check_leaf_count(p);
    std::sort(splits.begin(), splits.end());
    splits.erase(std::unique(splits.begin(), splits.end()), splits.end());
    for (const auto& s : splits) {
      if (s.p() != p) throw DimensionError("Topology: split leaf count differs");
      if (!s.is_internal()) {
        throw std::invalid_argument("Topology: split {" + s.key() +
                                    "} is not internal");
      }
    }
    if (!set_compatible(splits)) {
      throw std::invalid_argument("Topology: splits are not pairwise compatible");
    }
    splits_ = std::move(splits);
  }

  int p() const { return p_; }
  const std::vector<Split>& splits() const { return splits_; }
  std::size_t size() const { return splits_.size(); }
  bool empty() const { return splits_.empty(); }

  bool contains(const Split& s) const {
    return std::binary_search(splits_.begin(), splits_.end(), s);
  }

  bool is_resolved() const {
    return static_cast<int>(splits_.size()) == std::max(p_ - 2, 0);
  }

  friend bool operator==(const Topology&, const Topology&) = default;
  friend auto operator<=>(const Topology& a, const Topology& b) {
    if (auto c = a.p_ <=> b.p_; c != 0) return c;
    return std::lexicographical_compare_three_way(
        a.splits_.begin(), a.splits_.end(), b.splits_.begin(), b.splits_.end());
  }

 private:
  int p_ = 0;
  std::vector<Split> splits_;
};

// One internal node of the rooted tree: the cluster below it and the clusters
// of its children (internal splits or singletons), ordered by smallest leaf.
struct Node {
  Split cluster;
  std::vector<Split> children;
};

// Nodes of the tree described by `splits`, root node (cluster {1..p}) first,
// then internal splits in canonical order. `splits` must be compatible and
// contain only internal splits.
inline std::vector<Node> build_nodes(int p, std::span<const Split> splits) {
  std::vector<Node> nodes;
  nodes.reserve(splits.size() + 1);
  nodes.push_back({Split::full(p), {}});
  for (const auto& s : splits) nodes.push_back({s, {}});

  // Parent of a cluster is the smallest node cluster strictly containing it.
  auto parent_of = [&](const Split& c) {
    std::size_t best = 0;
    int best_size = p + 1;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const Split& n = nodes[k].cluster;
      if (n != c && n.contains(c) && n.size() < best_size) {
        best = k;
        best_size = n.size();
      }
    }
    return best;
  };
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    nodes[parent_of(nodes[k].cluster)].children.push_back(nodes[k].cluster);
  }
  for (int i = 1; i <= p; ++i) {
    Split leaf = Split::leaf(i, p);
    nodes[parent_of(leaf)].children.push_back(leaf);
  }
  for (auto& n : nodes) {
    std::sort(n.children.begin(), n.children.end(),
              [](const Split& a, const Split& b) {
                return a.min_leaf() < b.min_leaf();
              });
  }
  return nodes;
}

inline std::vector<Node> build_nodes(const Topology& t) {
  return build_nodes(t.p(), t.splits());
}

}  // namespace ultratree

#pragma once

// Neighbourhoods of topologies, exhaustive enumeration for small p and random
// tree generation.

#include <algorithm>
#include <set>
#include <vector>

#include "priors.hpp"
#include "rng.hpp"
#include "split.hpp"
#include "tree.hpp"

namespace ultratree {

// Nodes with three or more children are the only places a new compatible
// split can be inserted: any split compatible with the current set is a union
// of between 2 and k-1 children of one node with k children.
namespace detail {

inline std::uint64_t additions_at(int k) {
  // 2^k - k - 2 subsets of size 2..k-1.
  if (k < 3) return 0;
  return (std::uint64_t{1} << k) - static_cast<std::uint64_t>(k) - 2;
}

inline constexpr int kMaxEnumeratedChildren = 24;

}  // namespace detail

// Every internal split not in `splits` that is compatible with all of them,
// in canonical order.
inline std::vector<Split> compatible_additions(int p, std::span<const Split> splits) {
  std::vector<Split> out;
  for (const auto& node : build_nodes(p, splits)) {
    const int k = static_cast<int>(node.children.size());
    if (k < 3) continue;
    if (k > detail::kMaxEnumeratedChildren) {
      throw std::invalid_argument("compatible_additions: node too wide to enumerate");
    }
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << k); ++mask) {
      const int c = std::popcount(mask);
      if (c < 2 || c > k - 1) continue;
      std::uint64_t bits = 0;
      for (int j = 0; j < k; ++j) {
        if ((mask >> j) & 1U) bits |= node.children[static_cast<std::size_t>(j)].bits();
      }
      out.emplace_back(bits, p);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Size of compatible_additions without enumerating it.
inline std::uint64_t count_compatible_additions(int p, std::span<const Split> splits) {
  std::uint64_t total = 0;
  for (const auto& node : build_nodes(p, splits)) {
    total += detail::additions_at(static_cast<int>(node.children.size()));
  }
  return total;
}

// Uniform draw from compatible_additions; nullopt when there is none.
inline std::optional<Split> sample_compatible_addition(int p, std::span<const Split> splits,
                                                       RngStream& rng) {
  const auto nodes = build_nodes(p, splits);
  std::uint64_t total = 0;
  for (const auto& n : nodes) total += detail::additions_at(static_cast<int>(n.children.size()));
  if (total == 0) return std::nullopt;
  std::uint64_t pick = static_cast<std::uint64_t>(rng.uniform() * static_cast<double>(total));
  if (pick >= total) pick = total - 1;
  for (const auto& n : nodes) {
    const int k = static_cast<int>(n.children.size());
    const std::uint64_t here = detail::additions_at(k);
    if (pick >= here) {
      pick -= here;
      continue;
    }
    // Uniform subset of the children with size in [2, k-1], by rejection.
    for (;;) {
      std::uint64_t bits = 0;
      int c = 0;
      for (int j = 0; j < k; ++j) {
        if (rng.uniform() < 0.5) {
          bits |= n.children[static_cast<std::size_t>(j)].bits();
          ++c;
        }
      }
      if (c >= 2 && c <= k - 1) return Split(bits, p);
    }
  }
  return std::nullopt;
}

// Internal splits s such that (splits \ {removed}) + {s} is compatible and s
// is not already among the remaining splits. `removed` itself is always in
// the result; for a resolved topology the result has exactly three entries.
inline std::vector<Split> resolution_candidates(const Topology& topology, const Split& removed) {
  if (!topology.contains(removed)) {
    throw std::invalid_argument("resolution_candidates: split {" + removed.key() +
                                "} is not in the topology");
  }
  std::vector<Split> rest;
  rest.reserve(topology.size() - 1);
  for (const auto& s : topology.splits()) {
    if (s != removed) rest.push_back(s);
  }
  return compatible_additions(topology.p(), rest);
}

// All resolved topologies on p leaves, canonically ordered. Built by inserting
// leaves one at a time onto every edge of every smaller tree.
inline std::vector<Topology> enumerate_topologies(int p) {
  if (p < 2 || p > 7) {
    throw std::invalid_argument("enumerate_topologies: p must lie in [2, 7]");
  }
  // Each tree is held as the bitmasks of all its clusters (leaves, internal
  // splits and the full set) over the leaves inserted so far.
  std::vector<std::vector<std::uint64_t>> trees{{0b01, 0b10, 0b11}};
  for (int leaf = 3; leaf <= p; ++leaf) {
    const std::uint64_t bit = std::uint64_t{1} << (leaf - 1);
    std::vector<std::vector<std::uint64_t>> next;
    for (const auto& clusters : trees) {
      for (std::uint64_t target : clusters) {
        std::vector<std::uint64_t> grown;
        for (std::uint64_t c : clusters) {
          grown.push_back((c & target) == target ? (c | bit) : c);
        }
        grown.push_back(target);  // the edge below the attachment point
        grown.push_back(bit);
        next.push_back(std::move(grown));
      }
    }
    trees = std::move(next);
  }
  std::set<Topology> unique;
  for (const auto& clusters : trees) {
    std::vector<Split> splits;
    for (std::uint64_t c : clusters) {
      const int size = std::popcount(c);
      if (size >= 2 && size <= p - 1) splits.emplace_back(c, p);
    }
    unique.insert(Topology(p, std::move(splits)));
  }
  return {unique.begin(), unique.end()};
}

// Every topology, resolved or not, on p leaves: all subsets of the split sets
// of resolved topologies.
inline std::vector<Topology> enumerate_all_topologies(int p) {
  std::set<Topology> unique;
  for (const auto& t : enumerate_topologies(p)) {
    const auto& s = t.splits();
    const std::size_t m = s.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
      std::vector<Split> subset;
      for (std::size_t j = 0; j < m; ++j) {
        if ((mask >> j) & 1U) subset.push_back(s[j]);
      }
      unique.insert(Topology(p, std::move(subset)));
    }
  }
  return {unique.begin(), unique.end()};
}

inline std::uint64_t double_factorial(int n) {
  std::uint64_t r = 1;
  for (int k = n; k > 1; k -= 2) r *= static_cast<std::uint64_t>(k);
  return r;
}

enum class RandomTreeMode { uniform_binary, equidistant };

namespace detail {

// Coalescent: repeatedly merge two uniformly chosen lineages; waiting time
// with j lineages is exponential with rate j(j-1)/2 scaled by length_mean.
inline Tree coalescent_tree(int p, double length_mean, RngStream& rng) {
  struct Lineage {
    std::uint64_t cluster;
    double height;
  };
  std::vector<Lineage> lineages;
  for (int i = 1; i <= p; ++i) lineages.push_back({std::uint64_t{1} << (i - 1), 0.0});
  std::vector<Edge> internal;
  std::vector<double> leaves(static_cast<std::size_t>(p), 0.0);
  double now = 0.0;
  auto close = [&](const Lineage& l, double parent_height) {
    const double len = parent_height - l.height;
    if (std::popcount(l.cluster) == 1) {
      leaves[static_cast<std::size_t>(std::countr_zero(l.cluster))] = len;
    } else {
      internal.push_back({Split(l.cluster, p), len, EdgeKind::internal});
    }
  };
  while (lineages.size() > 1) {
    const double j = static_cast<double>(lineages.size());
    now += rng.exponential(length_mean / (0.5 * j * (j - 1.0)));
    const std::size_t a = rng.uniform_index(lineages.size());
    std::size_t b = rng.uniform_index(lineages.size() - 1);
    if (b >= a) ++b;
    close(lineages[a], now);
    close(lineages[b], now);
    const Lineage merged{lineages[a].cluster | lineages[b].cluster, now};
    lineages.erase(lineages.begin() + static_cast<std::ptrdiff_t>(std::max(a, b)));
    lineages.erase(lineages.begin() + static_cast<std::ptrdiff_t>(std::min(a, b)));
    lineages.push_back(merged);
  }
  // The last merge produces the full cluster; it is the root edge, not an
  // internal split.
  return Tree(p, std::move(internal), std::move(leaves), rng.exponential(length_mean));
}

}  // namespace detail

inline Tree random_tree(int p, RandomTreeMode mode, double length_mean, RngStream& rng) {
  if (p < 2) throw std::invalid_argument("random_tree: p must be at least 2");
  if (!(length_mean > 0.0)) throw std::invalid_argument("random_tree: length_mean must be positive");
  if (mode == RandomTreeMode::equidistant) return detail::coalescent_tree(p, length_mean, rng);

  // beta = -1.5 gives the uniform law over the (2p-3)!! resolved topologies.
  const Topology topology = TopologyPrior(PriorSpec{}).sample(p, rng);
  std::vector<double> internal;
  for (std::size_t i = 0; i < topology.size(); ++i) internal.push_back(rng.exponential(length_mean));
  std::vector<double> leaves;
  for (int i = 0; i < p; ++i) leaves.push_back(rng.exponential(length_mean));
  return Tree(topology, internal, std::move(leaves), rng.exponential(length_mean));
}

// Drop `count` internal splits from a tree, chosen uniformly or the shortest.
inline Tree drop_internal_splits(const Tree& t, int count, bool shortest, RngStream& rng) {
  std::vector<Edge> internal = t.internal_edges();
  if (count < 0 || count > static_cast<int>(internal.size())) {
    throw std::invalid_argument("drop_internal_splits: count out of range");
  }
  for (int k = 0; k < count; ++k) {
    std::size_t victim = 0;
    if (shortest) {
      for (std::size_t i = 1; i < internal.size(); ++i) {
        if (internal[i].length < internal[victim].length) victim = i;
      }
    } else {
      victim = rng.uniform_index(internal.size());
    }
    internal.erase(internal.begin() + static_cast<std::ptrdiff_t>(victim));
  }
  return Tree(t.p(), std::move(internal), t.leaf_lengths(), t.root_length());
}

}  // namespace ultratree

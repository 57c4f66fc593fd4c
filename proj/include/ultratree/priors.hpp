#pragma once

// Fragmentation priors on topologies and the exponential edge-length prior.
//
// A topology is read as a sequence of fragmentation events: each node with
// cluster B splits B into the clusters of its children. The log prior is the
// sum over events of the log splitting probability, which depends only on
// block sizes (exchangeability).

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rng.hpp"
#include "split.hpp"
#include "tree.hpp"

namespace ultratree {

enum class PriorKind { beta_splitting, poisson_dirichlet };

struct PriorSpec {
  PriorKind kind = PriorKind::beta_splitting;
  double beta = -1.5;
  double theta = 1.0;
  double alpha_pd = 0.0;
  double edge_mean = 1.0;

  void validate() const {
    if (kind == PriorKind::beta_splitting) {
      if (!std::isfinite(beta)) {
        throw std::invalid_argument("beta-splitting: beta must be finite");
      }
      if (!(beta > -2.0)) {
        throw std::invalid_argument("beta-splitting: beta must exceed -2");
      }
    } else {
      if (!(alpha_pd >= 0.0 && alpha_pd < 1.0)) {
        throw std::invalid_argument("Poisson-Dirichlet: alpha must lie in [0,1)");
      }
      if (!(theta > -2.0 * alpha_pd) || !std::isfinite(theta)) {
        throw std::invalid_argument("Poisson-Dirichlet: theta must exceed -2*alpha");
      }
      if (alpha_pd == 0.0 && !(theta > 0.0)) {
        throw std::invalid_argument("Poisson-Dirichlet: theta must be positive when alpha is 0");
      }
    }
    if (!(edge_mean > 0.0) || !std::isfinite(edge_mean)) {
      throw std::invalid_argument("edge_mean must be positive");
    }
  }
};

namespace detail {

inline double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log of the rising factorial (x)_m for x > 0.
inline double log_rising(double x, int m) {
  return std::lgamma(x + m) - std::lgamma(x);
}

}  // namespace detail

// Beta-splitting model: an n-block splits into an unordered pair of sizes
// (a, n-a) with weight G(a+b+1)G(n-a+b+1)/G(n+2b+2), normalized over all
// 2^(n-1)-1 unordered binary splits of the block.
class BetaSplitting {
 public:
  explicit BetaSplitting(double beta) : beta_(beta) {
    PriorSpec{PriorKind::beta_splitting, beta}.validate();
  }

  double beta() const { return beta_; }

  double log_weight(int a, int b) const {
    return std::lgamma(a + beta_ + 1.0) + std::lgamma(b + beta_ + 1.0) -
           std::lgamma(a + b + 2.0 * beta_ + 2.0);
  }

  // log of the normalizer over unordered binary splits of an n-block.
  double log_normalizer(int n) const {
    if (n < static_cast<int>(log_z_.size()) && !std::isnan(log_z_[n])) {
      return log_z_[n];
    }
    double acc = -std::numeric_limits<double>::infinity();
    for (int a = 1; a < n; ++a) {
      acc = detail::log_sum_exp(acc, detail::log_choose(n, a) + log_weight(a, n - a));
    }
    acc -= std::log(2.0);
    if (n >= static_cast<int>(log_z_.size())) {
      log_z_.resize(static_cast<std::size_t>(n) + 1,
                    std::numeric_limits<double>::quiet_NaN());
    }
    log_z_[n] = acc;
    return acc;
  }

  // log probability of one specific unordered split of an (a+b)-block.
  double log_split(int a, int b) const { return log_weight(a, b) - log_normalizer(a + b); }

  double log_prior(const Topology& t) const {
    if (!t.is_resolved()) {
      throw std::invalid_argument("beta-splitting prior is defined on resolved topologies only");
    }
    double total = 0.0;
    for (const auto& node : build_nodes(t)) {
      if (node.children.size() < 2) continue;  // p == 1
      total += log_split(node.children[0].size(), node.children[1].size());
    }
    return total;
  }

  // Draw a split of `block`, returned as the side holding the first chosen
  // subset (the other side is the complement within block).
  std::uint64_t sample_split(std::uint64_t block, RngStream& rng) const {
    const int n = std::popcount(block);
    // Ordered-size law: P(a) = C(n,a) w(a,n-a) / (2 Z_n).
    const double log_z2 = log_normalizer(n) + std::log(2.0);
    double u = rng.uniform();
    int a = n - 1;
    for (int k = 1; k < n; ++k) {
      const double pk = std::exp(detail::log_choose(n, k) + log_weight(k, n - k) - log_z2);
      if (u < pk) {
        a = k;
        break;
      }
      u -= pk;
    }
    return random_subset(block, a, rng);
  }

  static std::uint64_t random_subset(std::uint64_t block, int size, RngStream& rng) {
    std::vector<std::uint64_t> bits;
    for (std::uint64_t b = block; b != 0; b &= b - 1) bits.push_back(b & (~b + 1));
    // Partial Fisher-Yates.
    std::uint64_t out = 0;
    for (int i = 0; i < size; ++i) {
      const std::size_t j = static_cast<std::size_t>(i) +
                            rng.uniform_index(bits.size() - static_cast<std::size_t>(i));
      std::swap(bits[static_cast<std::size_t>(i)], bits[j]);
      out |= bits[static_cast<std::size_t>(i)];
    }
    return out;
  }

 private:
  double beta_;
  mutable std::vector<double> log_z_;
};

// Poisson-Dirichlet(alpha, theta) multifurcating fragmentation. An n-block
// fragments into an unordered set partition with block sizes n_1..n_k,
// k >= 2, with probability proportional to
//   prod_{i=2}^{k-1} (theta + i alpha) * prod_j (1 - alpha)_{n_j - 1}.
// This is the exchangeable partition probability conditioned on k >= 2; the
// factor (theta + alpha) shared by every k >= 2 partition cancels.
class PoissonDirichlet {
 public:
  PoissonDirichlet(double theta, double alpha) : theta_(theta), alpha_(alpha) {
    PriorSpec s;
    s.kind = PriorKind::poisson_dirichlet;
    s.theta = theta;
    s.alpha_pd = alpha;
    s.validate();
  }

  double theta() const { return theta_; }
  double alpha() const { return alpha_; }

  double log_numerator(const std::vector<int>& sizes) const {
    const int k = static_cast<int>(sizes.size());
    double acc = 0.0;
    for (int i = 2; i <= k - 1; ++i) acc += std::log(theta_ + i * alpha_);
    for (int nj : sizes) acc += detail::log_rising(1.0 - alpha_, nj - 1);
    return acc;
  }

  // Generalized Stirling numbers: W(n, k) = sum over set partitions of [n]
  // into k blocks of prod_j (1-alpha)_{n_j-1}.
  double stirling(int n, int k) const {
    ensure_table(n);
    return table_[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
  }

  // Weight of partitions with k blocks, excluding the per-partition factor.
  double block_count_weight(int k) const {
    double acc = 1.0;
    for (int i = 2; i <= k - 1; ++i) acc *= theta_ + i * alpha_;
    return acc;
  }

  double log_normalizer(int n) const {
    double z = 0.0;
    for (int k = 2; k <= n; ++k) z += block_count_weight(k) * stirling(n, k);
    return std::log(z);
  }

  double log_fragment(const std::vector<int>& sizes) const {
    int n = 0;
    for (int s : sizes) n += s;
    return log_numerator(sizes) - log_normalizer(n);
  }

  double log_prior(const Topology& t) const {
    double total = 0.0;
    for (const auto& node : build_nodes(t)) {
      if (node.children.size() < 2) continue;  // p == 1
      std::vector<int> sizes;
      sizes.reserve(node.children.size());
      for (const auto& c : node.children) sizes.push_back(c.size());
      total += log_fragment(sizes);
    }
    return total;
  }

  // Draw a partition of `block` (k >= 2 blocks) and return the blocks.
  std::vector<std::uint64_t> sample_fragment(std::uint64_t block, RngStream& rng) const {
    std::vector<std::uint64_t> members;
    for (std::uint64_t b = block; b != 0; b &= b - 1) members.push_back(b & (~b + 1));
    const int n = static_cast<int>(members.size());

    // Number of blocks.
    const double z = std::exp(log_normalizer(n));
    double u = rng.uniform() * z;
    int k = n;
    for (int kk = 2; kk <= n; ++kk) {
      const double w = block_count_weight(kk) * stirling(n, kk);
      if (u < w) {
        k = kk;
        break;
      }
      u -= w;
    }

    // Top-down: element m opens a new block with probability
    // W(m-1, k-1) / W(m, k), otherwise it joins one of the k blocks.
    std::vector<bool> opens(static_cast<std::size_t>(n) + 1, false);
    int kk = k;
    for (int m = n; m >= 1; --m) {
      const double total = stirling(m, kk);
      const double p_new = kk >= 1 ? stirling(m - 1, kk - 1) / total : 0.0;
      if (rng.uniform() < p_new) {
        opens[static_cast<std::size_t>(m)] = true;
        --kk;
      }
    }

    // Bottom-up: a joining element picks block j with weight size_j - alpha.
    std::vector<std::uint64_t> out;
    std::vector<int> sizes;
    for (int m = 1; m <= n; ++m) {
      const std::uint64_t bit = members[static_cast<std::size_t>(m - 1)];
      if (opens[static_cast<std::size_t>(m)]) {
        out.push_back(bit);
        sizes.push_back(1);
        continue;
      }
      double total = 0.0;
      for (int s : sizes) total += s - alpha_;
      double v = rng.uniform() * total;
      std::size_t pick = sizes.size() - 1;
      for (std::size_t j = 0; j < sizes.size(); ++j) {
        const double w = sizes[j] - alpha_;
        if (v < w) {
          pick = j;
          break;
        }
        v -= w;
      }
      out[pick] |= bit;
      ++sizes[pick];
    }
    return out;
  }

 private:
  void ensure_table(int n) const {
    if (static_cast<int>(table_.size()) > n) return;
    table_.assign(static_cast<std::size_t>(n) + 1,
                  std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0));
    table_[0][0] = 1.0;
    for (int m = 1; m <= n; ++m) {
      for (int k = 1; k <= m; ++k) {
        table_[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] =
            table_[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(k - 1)] +
            (m - 1 - k * alpha_) *
                table_[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(k)];
      }
    }
  }

  double theta_;
  double alpha_;
  mutable std::vector<std::vector<double>> table_;
};

inline double beta_split_log_prior(const Topology& t, double beta) {
  return BetaSplitting(beta).log_prior(t);
}

inline double pd_log_prior(const Topology& t, double theta, double alpha_pd) {
  return PoissonDirichlet(theta, alpha_pd).log_prior(t);
}

// Sum of Exp(mean a) log densities over every stored coordinate: leaf edges,
// internal edges and the root edge.
inline double edge_length_log_prior(const Tree& t, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("edge_length_log_prior: mean must be positive");
  double sum = t.root_length();
  for (double x : t.leaf_lengths()) sum += x;
  for (const auto& e : t.internal_edges()) sum += e.length;
  const double q = static_cast<double>(t.coordinate_count());
  return -q * std::log(a) - sum / a;
}

// The topology prior selected by a PriorSpec, with memoized normalizers.
class TopologyPrior {
 public:
  explicit TopologyPrior(const PriorSpec& spec)
      : spec_(spec),
        beta_(spec.kind == PriorKind::beta_splitting ? spec.beta : -1.5),
        pd_(spec.kind == PriorKind::poisson_dirichlet ? spec.theta : 1.0,
            spec.kind == PriorKind::poisson_dirichlet ? spec.alpha_pd : 0.0) {
    spec.validate();
  }

  const PriorSpec& spec() const { return spec_; }

  double log_prior(const Topology& t) const {
    return spec_.kind == PriorKind::beta_splitting ? beta_.log_prior(t) : pd_.log_prior(t);
  }

  double log_prior(const Tree& t) const {
    return log_prior(t.topology()) + edge_length_log_prior(t, spec_.edge_mean);
  }

  Topology sample(int p, RngStream& rng) const {
    check_leaf_count(p);
    std::vector<Split> splits;
    std::vector<std::uint64_t> pending{leaf_mask(p)};
    while (!pending.empty()) {
      const std::uint64_t block = pending.back();
      pending.pop_back();
      if (std::popcount(block) < 2) continue;
      std::vector<std::uint64_t> parts;
      if (spec_.kind == PriorKind::beta_splitting) {
        const std::uint64_t side = beta_.sample_split(block, rng);
        parts = {side, block & ~side};
      } else {
        parts = pd_.sample_fragment(block, rng);
      }
      for (std::uint64_t part : parts) {
        if (std::popcount(part) >= 2) {
          splits.emplace_back(part, p);
          pending.push_back(part);
        }
      }
    }
    return Topology(p, std::move(splits));
  }

 private:
  PriorSpec spec_;
  BetaSplitting beta_;
  PoissonDirichlet pd_;
};

inline Topology sample_topology_prior(int p, const PriorSpec& spec, RngStream& rng) {
  if (p < 2) throw std::invalid_argument("sample_topology_prior: p must be at least 2");
  return TopologyPrior(spec).sample(p, rng);
}

}  // namespace ultratree

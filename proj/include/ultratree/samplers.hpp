#pragma once

// Posterior samplers over ultrametric trees.
//
// MH: a topology move (nearest-neighbour interchange, or collapse/grow in
// multifurcating mode) followed by a single-site truncated-normal sweep over
// every stored length. HMC: leapfrog on all lengths with a smoothed
// potential; a length that would go negative crosses into a neighbouring
// orthant (internal) or reflects (leaf and root).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "archive.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "priors.hpp"
#include "rng.hpp"
#include "treespace.hpp"
#include "ultrametric.hpp"

namespace ultratree {

enum class MhMode { binary, multifurcating };

struct MhConfig {
  long iterations = 10000;
  long burn_in = 9000;
  double sigma_l = 0.1;
  MhMode mode = MhMode::binary;
  PriorSpec prior;
  std::uint64_t seed = 0;
  long thin = 1;

  void validate() const {
    if (iterations < 1) throw ConfigError("iterations", "iterations must be positive");
    if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn_in", "burn_in must lie in [0, iterations)");
    if (!(sigma_l > 0.0) || !std::isfinite(sigma_l)) throw ConfigError("sigma_L", "sigma_L must be positive");
    if (thin < 1) throw ConfigError("thin", "thin must be positive");
    try {
      prior.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("prior", e.what());
    }
    if (mode == MhMode::multifurcating && prior.kind == PriorKind::beta_splitting) {
      throw ConfigError("mode", "the beta-splitting prior has no mass on multifurcating trees");
    }
  }
};

struct HmcConfig {
  long iterations = 300;
  long burn_in = 225;
  double step_size = 0.0015;
  int leapfrog_steps = 200;
  double delta = 0.003;
  double mass = 1.0;  // shared by every coordinate
  PriorSpec prior;     // edge rate lambda = 1 / prior.edge_mean
  std::uint64_t seed = 0;
  long thin = 1;

  void validate() const {
    if (iterations < 1) throw ConfigError("iterations", "iterations must be positive");
    if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn_in", "burn_in must lie in [0, iterations)");
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError("epsilon", "epsilon must be positive");
    if (leapfrog_steps < 1) throw ConfigError("leapfrog_steps", "leapfrog_steps must be at least 1");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("delta", "delta must be non-negative");
    if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("mass", "mass must be positive");
    if (thin < 1) throw ConfigError("thin", "thin must be positive");
    try {
      prior.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("prior", e.what());
    }
  }
};

// Unnormalized log posterior for fixed data and prior.
class PosteriorTarget {
 public:
  PosteriorTarget(SufficientStats stats, const PriorSpec& prior)
      : stats_(std::move(stats)), topo_(prior), edge_mean_(prior.edge_mean) {}

  const SufficientStats& stats() const { return stats_; }
  int p() const { return stats_.p; }
  double edge_mean() const { return edge_mean_; }

  double log_lik(const Eigen::MatrixXd& sigma) const { return gaussian_loglik(stats_, sigma); }
  double log_lik(const Tree& t) const { return gaussian_loglik(stats_, tree_to_dense(t)); }
  double topology_log_prior(const Topology& t) const { return topo_.log_prior(t); }
  double log_prior(const Tree& t) const { return topo_.log_prior(t); }

  // -log posterior at a tree given as an edge list; +inf when the edge
  // list is not a valid tree or the covariance is singular.
  double potential(int p, const std::vector<Edge>& edges) const {
    try {
      const Tree t = Tree::from_edges(p, edges);
      return -(log_prior(t) + log_lik(tree_to_dense(t)));
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  // Gradient of U(g(d)) in the lengths d, with g the delta-smoothing map.
  std::vector<double> surrogate_gradient(int p, const std::vector<Edge>& edges, double delta) const {
    std::vector<Edge> mapped = edges;
    for (auto& e : mapped) e.length = smooth(e.length, delta);
    std::vector<double> g;
    try {
      g = loglik_gradient(stats_, p, mapped);
    } catch (const NotPositiveDefinite&) {
      return std::vector<double>(edges.size(), std::numeric_limits<double>::quiet_NaN());
    }
    for (std::size_t k = 0; k < edges.size(); ++k) {
      g[k] = (-g[k] + 1.0 / edge_mean_) * smooth_slope(edges[k].length, delta);
    }
    return g;
  }

  static double smooth(double d, double delta) {
    return d >= delta ? d : (d * d + delta * delta) / (2.0 * delta);
  }
  static double smooth_slope(double d, double delta) { return d >= delta ? 1.0 : d / delta; }

 private:
  SufficientStats stats_;
  TopologyPrior topo_;
  double edge_mean_;
};

// Zero potential: lengths drift freely. Used to exercise crossing mechanics.
struct FlatTarget {
  double potential(int, const std::vector<Edge>&) const { return 0.0; }
  std::vector<double> surrogate_gradient(int, const std::vector<Edge>& edges, double) const {
    return std::vector<double>(edges.size(), 0.0);
  }
};

struct ChainState {
  Tree tree;
  double log_prior = 0.0;
  double log_lik = 0.0;
  long iteration = 0;
  long topology_accepted = 0;
  long topology_proposed = 0;
  long length_accepted = 0;
  long length_proposed = 0;

  double log_posterior() const { return log_prior + log_lik; }

  static ChainState start(const Tree& t, const PosteriorTarget& target) {
    ChainState s;
    s.tree = t;
    s.log_prior = target.log_prior(t);
    s.log_lik = target.log_lik(t);
    return s;
  }
};

namespace detail {

inline void check_cached(const ChainState& s, const PosteriorTarget& target) {
#ifndef NDEBUG
  const double lp = target.log_prior(s.tree);
  const double ll = target.log_lik(s.tree);
  if (std::abs(lp - s.log_prior) > 1e-9 * std::max(1.0, std::abs(lp)) ||
      std::abs(ll - s.log_lik) > 1e-9 * std::max(1.0, std::abs(ll))) {
    throw std::logic_error("chain state cache is stale");
  }
#else
  (void)s;
  (void)target;
#endif
}

inline std::vector<Edge> replace_split(const std::vector<Edge>& internal, const Split& from, const Split& to,
                                       double length) {
  std::vector<Edge> out;
  out.reserve(internal.size() + 1);
  for (const auto& e : internal) {
    if (e.split != from) out.push_back(e);
  }
  if (length > 0.0) out.push_back({to, length, EdgeKind::internal});
  return out;
}

inline bool metropolis(double log_alpha, RngStream& rng) {
  return std::log(rng.uniform_open()) < log_alpha;
}

inline double log_std_normal_cdf(double z) { return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2)); }

// Draw from N(mean, sd^2) restricted to (0, inf).
inline double truncated_normal(double mean, double sd, RngStream& rng) {
  for (;;) {
    const double y = mean + sd * rng.normal();
    if (y > 0.0) return y;
  }
}

}  // namespace detail

// log of TN(x; y, sd) / TN(y; x, sd): the correction for a truncated-normal
// proposal from x to y on (0, inf).
inline double truncated_normal_log_ratio(double x, double y, double sd) {
  return detail::log_std_normal_cdf(x / sd) - detail::log_std_normal_cdf(y / sd);
}

// log acceptance ratio for changing one length from x to y.
inline double length_log_alpha(double x, double y, double delta_loglik, double edge_mean, double sd) {
  return delta_loglik - (y - x) / edge_mean + truncated_normal_log_ratio(x, y, sd);
}

// Proposal-density corrections for the multifurcating moves. Collapsing
// one of m splits and growing a split onto a tree with m - 1 splits are
// mutual reverses.
inline double collapse_log_correction(std::size_t m) { return std::log(static_cast<double>(m)); }
inline double grow_log_correction(std::size_t m) { return -std::log(static_cast<double>(m + 1)); }

inline ChainState mh_topology_update(ChainState state, const PosteriorTarget& target, const MhConfig& cfg,
                                     RngStream& rng) {
  const Tree& t = state.tree;
  const int p = t.p();
  const auto& internal = t.internal_edges();
  const std::size_t m = internal.size();
  auto try_move = [&](std::vector<Edge> new_internal, double log_q) {
    ++state.topology_proposed;
    Tree proposal(p, std::move(new_internal), t.leaf_lengths(), t.root_length());
    const double lp = target.log_prior(proposal);
    const double ll = target.log_lik(proposal);
    // the edge-length prior of a moved or collapsed edge cancels against the
    // proposal density, leaving only the topology prior ratio
    const double log_alpha = (target.topology_log_prior(proposal.topology()) -
                              target.topology_log_prior(t.topology())) +
                             (ll - state.log_lik) + log_q;
    if (detail::metropolis(log_alpha, rng)) {
      state.tree = std::move(proposal);
      state.log_prior = lp;
      state.log_lik = ll;
      ++state.topology_accepted;
    }
  };

  if (cfg.mode == MhMode::binary) {
    if (m == 0) return state;
    if (!t.topology().is_resolved()) throw std::invalid_argument("binary MH needs a resolved tree");
    const Edge a = internal[rng.uniform_index(m)];
    std::vector<Split> cands = resolution_candidates(t.topology(), a.split);
    std::erase(cands, a.split);
    const Split b = cands[rng.uniform_index(cands.size())];
    try_move(detail::replace_split(internal, a.split, b, a.length), 0.0);
    return state;
  }

  if (rng.uniform() < 0.5) {
    // interchange, or stay at the boundary (collapse)
    if (m == 0) return state;
    const Edge a = internal[rng.uniform_index(m)];
    const std::vector<Split> cands = resolution_candidates(t.topology(), a.split);
    const Split s = cands[rng.uniform_index(cands.size())];
    if (s != a.split) {
      try_move(detail::replace_split(internal, a.split, s, a.length), 0.0);
    } else {
      try_move(detail::replace_split(internal, a.split, s, 0.0), collapse_log_correction(m));
    }
    return state;
  }
  // grow: reverse of the collapse
  std::vector<Split> splits = t.topology().splits();
  const auto b = sample_compatible_addition(p, splits, rng);
  if (!b) return state;
  const double len = rng.exponential(target.edge_mean());
  std::vector<Edge> grown = internal;
  grown.push_back({*b, len, EdgeKind::internal});
  try_move(std::move(grown), grow_log_correction(m));
  return state;
}

// Single-site sweep over every stored coordinate in canonical order.
inline ChainState mh_length_update(ChainState state, const PosteriorTarget& target, const MhConfig& cfg,
                                   RngStream& rng) {
  const int p = state.tree.p();
  std::vector<Edge> edges = state.tree.edges();
  const double a = target.edge_mean();
  double ll = state.log_lik;
  bool changed = false;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const double x = edges[k].length;
    const double y = detail::truncated_normal(x, cfg.sigma_l, rng);
    ++state.length_proposed;
    edges[k].length = y;
    double ll_new;
    try {
      ll_new = target.log_lik(dense_from_edges(p, edges));
    } catch (const NotPositiveDefinite&) {
      edges[k].length = x;
      continue;
    }
    if (detail::metropolis(length_log_alpha(x, y, ll_new - ll, a, cfg.sigma_l), rng)) {
      ll = ll_new;
      changed = true;
      ++state.length_accepted;
    } else {
      edges[k].length = x;
    }
  }
  if (changed) {
    state.tree = Tree::from_edges(p, edges);
    state.log_lik = ll;
    state.log_prior = target.log_prior(state.tree);
  }
  return state;
}

// Overloads taking raw statistics.
inline ChainState mh_topology_update(ChainState state, const SufficientStats& stats, const MhConfig& cfg,
                                     RngStream& rng) {
  return mh_topology_update(std::move(state), PosteriorTarget(stats, cfg.prior), cfg, rng);
}
inline ChainState mh_length_update(ChainState state, const SufficientStats& stats, const MhConfig& cfg,
                                   RngStream& rng) {
  return mh_length_update(std::move(state), PosteriorTarget(stats, cfg.prior), cfg, rng);
}

// Position and momentum of the Hamiltonian system. Internal lengths may be
// zero mid-trajectory, so the state holds a raw edge list in canonical
// order (root last) rather than a Tree.
struct HmcState {
  int p = 0;
  std::vector<Edge> edges;
  std::vector<double> momentum;
  double potential = 0.0;
  double kinetic = 0.0;

  double hamiltonian() const { return potential + kinetic; }

  static HmcState from_tree(const Tree& t) {
    HmcState s;
    s.p = t.p();
    s.edges = t.edges();
    s.momentum.assign(s.edges.size(), 0.0);
    return s;
  }

  Tree tree() const { return Tree::from_edges(p, edges); }

  std::optional<double> momentum_of(const Split& s, EdgeKind kind) const {
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (edges[k].split == s && edges[k].kind == kind) return momentum[k];
    }
    return std::nullopt;
  }
};

inline double kinetic_energy(const std::vector<double>& momentum, double mass) {
  double k = 0.0;
  for (double a : momentum) k += a * a;
  return 0.5 * k / mass;
}

// Picks the new split after an internal crossing. Receives the candidates,
// current split excluded, in canonical order.
using SplitChooser = std::function<Split(const std::vector<Split>&)>;

inline SplitChooser uniform_chooser(RngStream& rng) {
  return [&rng](const std::vector<Split>& c) { return c[rng.uniform_index(c.size())]; };
}

namespace detail {

inline void sort_canonical(HmcState& s) {
  std::vector<std::size_t> order(s.edges.size());
  std::iota(order.begin(), order.end(), 0);
  auto rank = [&](std::size_t i) { return s.edges[i].kind == EdgeKind::root ? 1 : 0; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (rank(i) != rank(j)) return rank(i) < rank(j);
    return s.edges[i].split < s.edges[j].split;
  });
  std::vector<Edge> e;
  std::vector<double> m;
  for (auto i : order) {
    e.push_back(s.edges[i]);
    m.push_back(s.momentum[i]);
  }
  s.edges = std::move(e);
  s.momentum = std::move(m);
}

// Move every length along its velocity for time `span`, handling the zero
// crossings in time order.
inline void drift(HmcState& s, double span, double mass, const SplitChooser& choose) {
  double left = span;
  for (;;) {
    std::size_t hit = s.edges.size();
    double tau = left;
    for (std::size_t k = 0; k < s.edges.size(); ++k) {
      const double v = s.momentum[k] / mass;
      if (v >= 0.0) continue;
      const double t = s.edges[k].length / -v;
      // strict < keeps the earliest canonical index on ties
      if (t <= left && (hit == s.edges.size() || t < tau)) {
        hit = k;
        tau = t;
      }
    }
    for (std::size_t k = 0; k < s.edges.size(); ++k) {
      s.edges[k].length = std::max(0.0, s.edges[k].length + tau * s.momentum[k] / mass);
    }
    left -= tau;
    if (hit == s.edges.size()) return;
    s.edges[hit].length = 0.0;
    s.momentum[hit] = -s.momentum[hit];
    if (s.edges[hit].kind == EdgeKind::internal) {
      std::vector<Split> present;
      for (const auto& e : s.edges) {
        if (e.kind == EdgeKind::internal) present.push_back(e.split);
      }
      const Split current = s.edges[hit].split;
      std::vector<Split> cands = resolution_candidates(Topology(s.p, present), current);
      std::erase(cands, current);
      if (!cands.empty()) {
        s.edges[hit].split = choose(cands);
        sort_canonical(s);
      }
    }
  }
}

}  // namespace detail

// One leapfrog step: half kick, drift with crossings, half kick. The
// potential and kinetic caches are not refreshed.
template <class Target>
void hmc_leapfrog(HmcState& s, const Target& target, const HmcConfig& cfg, const SplitChooser& choose) {
  auto kick = [&] {
    const auto g = target.surrogate_gradient(s.p, s.edges, cfg.delta);
    for (std::size_t k = 0; k < g.size(); ++k) s.momentum[k] -= 0.5 * cfg.step_size * g[k];
  };
  kick();
  detail::drift(s, cfg.step_size, cfg.mass, choose);
  kick();
}

struct HmcStepInfo {
  bool accepted = false;
  bool diverged = false;  // non-finite energy
  double energy_change = 0.0;
};

// Fresh momentum, leapfrog_steps steps, Metropolis test on the true
// Hamiltonian. On rejection `s` is left at its starting position.
template <class Target>
HmcStepInfo hmc_step(HmcState& s, const Target& target, const HmcConfig& cfg, RngStream& rng) {
  const double sd = std::sqrt(cfg.mass);
  for (auto& a : s.momentum) a = sd * rng.normal();
  s.potential = target.potential(s.p, s.edges);
  s.kinetic = kinetic_energy(s.momentum, cfg.mass);
  HmcState next = s;
  const auto choose = uniform_chooser(rng);
  for (int i = 0; i < cfg.leapfrog_steps; ++i) hmc_leapfrog(next, target, cfg, choose);
  HmcStepInfo info;
  bool boundary = false;
  for (const auto& e : next.edges) {
    if (e.kind != EdgeKind::root && e.length == 0.0) boundary = true;
  }
  next.potential = boundary ? std::numeric_limits<double>::infinity() : target.potential(next.p, next.edges);
  next.kinetic = kinetic_energy(next.momentum, cfg.mass);
  info.energy_change = next.hamiltonian() - s.hamiltonian();
  if (!std::isfinite(next.hamiltonian()) || !std::isfinite(s.hamiltonian())) {
    info.diverged = !boundary;
    return info;
  }
  if (detail::metropolis(-info.energy_change, rng)) {
    s = std::move(next);
    info.accepted = true;
  }
  return info;
}

enum class Algo { mh, hmc };

inline const char* algo_name(Algo a) { return a == Algo::mh ? "mh" : "hmc"; }

struct ChainResult {
  PosteriorArchive archive;
  std::vector<TracePoint> trace;  // iteration 0 is the initial state
  ChainState final_state;
  long diverged = 0;
};

inline constexpr std::uint64_t kMhStream = 0x6d68;
inline constexpr std::uint64_t kHmcStream = 0x686d63;

namespace detail {

inline void check_init(const Tree& init, const SufficientStats& stats) {
  if (init.p() != stats.p) {
    throw DimensionError("initial tree has " + std::to_string(init.p()) + " leaves but data has " +
                         std::to_string(stats.p) + " columns");
  }
}

inline bool retained(long iter, long burn_in, long thin) { return iter > burn_in && (iter - burn_in) % thin == 0; }

}  // namespace detail

inline ChainResult run_chain(const SufficientStats& stats, const Tree& init, const MhConfig& cfg) {
  cfg.validate();
  detail::check_init(init, stats);
  if (cfg.mode == MhMode::binary && !init.topology().is_resolved()) {
    throw std::invalid_argument("binary MH needs a resolved initial tree");
  }
  const PosteriorTarget target(stats, cfg.prior);
  RngStream rng(cfg.seed, kMhStream);
  ChainResult out;
  out.archive.p = init.p();
  out.archive.provenance = {"mh", "", cfg.seed};
  ChainState s = ChainState::start(init, target);
  out.trace.push_back({0, s.log_lik, s.log_prior});
  for (long it = 1; it <= cfg.iterations; ++it) {
    s = mh_topology_update(std::move(s), target, cfg, rng);
    s = mh_length_update(std::move(s), target, cfg, rng);
    s.iteration = it;
    detail::check_cached(s, target);
    out.trace.push_back({it, s.log_lik, s.log_prior});
    if (detail::retained(it, cfg.burn_in, cfg.thin)) out.archive.records.push_back({it, s.log_prior, s.log_lik, s.tree});
  }
  out.final_state = std::move(s);
  return out;
}

inline ChainResult run_chain(const SufficientStats& stats, const Tree& init, const HmcConfig& cfg) {
  cfg.validate();
  detail::check_init(init, stats);
  if (!init.topology().is_resolved()) throw std::invalid_argument("HMC needs a resolved initial tree");
  const PosteriorTarget target(stats, cfg.prior);
  RngStream rng(cfg.seed, kHmcStream);
  ChainResult out;
  out.archive.p = init.p();
  out.archive.provenance = {"hmc", "", cfg.seed};
  ChainState s = ChainState::start(init, target);
  HmcState h = HmcState::from_tree(init);
  out.trace.push_back({0, s.log_lik, s.log_prior});
  for (long it = 1; it <= cfg.iterations; ++it) {
    const auto info = hmc_step(h, target, cfg, rng);
    ++s.topology_proposed;
    ++s.length_proposed;
    if (info.accepted) {
      const Tree t = h.tree();
      if (t.topology() != s.tree.topology()) ++s.topology_accepted;
      ++s.length_accepted;
      s.tree = t;
      s.log_prior = target.log_prior(t);
      s.log_lik = target.log_lik(t);
    }
    if (info.diverged) ++out.diverged;
    s.iteration = it;
    out.trace.push_back({it, s.log_lik, s.log_prior});
    if (detail::retained(it, cfg.burn_in, cfg.thin)) out.archive.records.push_back({it, s.log_prior, s.log_lik, s.tree});
  }
  out.final_state = std::move(s);
  return out;
}

inline ChainResult run_chain(const DataSet& data, const Tree& init, const MhConfig& cfg) {
  return run_chain(suff_stats(data), init, cfg);
}
inline ChainResult run_chain(const DataSet& data, const Tree& init, const HmcConfig& cfg) {
  return run_chain(suff_stats(data), init, cfg);
}

}  // namespace ultratree

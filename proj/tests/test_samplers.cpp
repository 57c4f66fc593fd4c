#include <gtest/gtest.h>

#include <map>

#include "stat_checks.hpp"
#include "ultratree/posterior.hpp"
#include "ultratree/samplers.hpp"

using namespace ultratree;
using ultratree::oracle::indicator_se;
using ultratree::oracle::ks_exponential;

namespace {

Split sp(std::initializer_list<int> l, int p) { return Split::from_leaves(l, p); }

Tree p4_tree() {
  return Tree(4, {{sp({1, 2}, 4), 0.5}, {sp({3, 4}, 4), 0.3}}, {1.0, 1.1, 0.9, 1.2}, 0.4);
}

SufficientStats data_for(const Tree& t, int n, std::uint64_t seed) {
  RngStream rng(seed, 7);
  return suff_stats(sample_gaussian(tree_to_matrix(t), n, rng));
}

}  // namespace

TEST(Config, Validation) {
  HmcConfig h;
  h.leapfrog_steps = 0;
  EXPECT_THROW(h.validate(), ConfigError);
  try {
    h.validate();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "leapfrog_steps");
  }
  HmcConfig h2;
  h2.delta = -1;
  EXPECT_THROW(h2.validate(), ConfigError);
  MhConfig m;
  m.burn_in = m.iterations;
  EXPECT_THROW(m.validate(), ConfigError);
  MhConfig m2;
  m2.mode = MhMode::multifurcating;
  EXPECT_THROW(m2.validate(), ConfigError);
  m2.prior.kind = PriorKind::poisson_dirichlet;
  EXPECT_NO_THROW(m2.validate());
  MhConfig m3;
  m3.sigma_l = 0.0;
  EXPECT_THROW(m3.validate(), ConfigError);
}

TEST(MhTopology, SymmetricMoveAlwaysAccepted) {
  const PosteriorTarget target(SufficientStats::empty(6), PriorSpec{});
  MhConfig cfg;
  RngStream rng(1, 0);
  RngStream tr(2, 0);
  ChainState s = ChainState::start(random_tree(6, RandomTreeMode::uniform_binary, 1.0, tr), target);
  for (int i = 0; i < 2000; ++i) s = mh_topology_update(std::move(s), target, cfg, rng);
  EXPECT_EQ(s.topology_proposed, 2000);
  EXPECT_EQ(s.topology_accepted, 2000);
  EXPECT_TRUE(s.tree.topology().is_resolved());
}

TEST(MhTopology, CandidateProposalsP4) {
  const PosteriorTarget target(SufficientStats::empty(4), PriorSpec{});
  MhConfig cfg;
  RngStream rng(3, 0);
  const Tree t = p4_tree();
  std::map<Topology, int> seen;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    ChainState s = ChainState::start(t, target);
    s = mh_topology_update(std::move(s), target, cfg, rng);
    ++seen[s.tree.topology()];
    // the moved split keeps the removed length
    for (const auto& e : s.tree.internal_edges()) EXPECT_TRUE(e.length == 0.5 || e.length == 0.3);
  }
  // removing {3,4}: {1,2,3} or {1,2,4}; removing {1,2}: {1,3,4} or {2,3,4}
  const std::vector<Topology> expect{
      Topology(4, {sp({1, 2}, 4), sp({1, 2, 3}, 4)}), Topology(4, {sp({1, 2}, 4), sp({1, 2, 4}, 4)}),
      Topology(4, {sp({3, 4}, 4), sp({1, 3, 4}, 4)}), Topology(4, {sp({3, 4}, 4), sp({2, 3, 4}, 4)})};
  ASSERT_EQ(seen.size(), 4u);
  for (const auto& topo : expect) {
    ASSERT_TRUE(seen.count(topo));
    EXPECT_NEAR(seen[topo] / static_cast<double>(n), 0.25, 4 * std::sqrt(0.25 * 0.75 / n));
  }
}

TEST(MhTopology, HalfLikelihoodRatioAcceptsHalfTheTime) {
  RngStream rng(4, 0);
  int acc = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += detail::metropolis(std::log(0.5), rng) ? 1 : 0;
  EXPECT_NEAR(acc / static_cast<double>(n), 0.5, 4 * std::sqrt(0.25 / n));
  EXPECT_TRUE(detail::metropolis(0.0, rng));
}

TEST(MhTopology, MultifurcatingCorrectionsReverse) {
  for (std::size_t m = 1; m < 20; ++m) {
    EXPECT_NEAR(collapse_log_correction(m) + grow_log_correction(m - 1), 0.0, 1e-12);
  }
}

TEST(MhLength, ProposalEqualToCurrent) {
  EXPECT_EQ(length_log_alpha(0.7, 0.7, 0.0, 1.0, 0.1), 0.0);
  EXPECT_EQ(truncated_normal_log_ratio(0.3, 0.3, 0.5), 0.0);
}

TEST(MhLength, DetailedBalanceAlgebra) {
  RngStream rng(5, 0);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.exponential(1.0), y = rng.exponential(1.0);
    const double dl = rng.normal(0.0, 3.0), a = 0.1 + rng.uniform(), sd = 0.01 + rng.uniform();
    EXPECT_NEAR(length_log_alpha(x, y, dl, a, sd) + length_log_alpha(y, x, -dl, a, sd), 0.0, 1e-12);
  }
}

TEST(MhLength, TruncatedNormalRatioMatchesDensities) {
  // TN(x; y, sd) / TN(y; x, sd) from the normal density and cdf directly
  auto tn = [](double v, double c, double sd) {
    const double z = (v - c) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2 * std::numbers::pi) * 0.5 * std::erfc(-c / sd / std::sqrt(2.0)));
  };
  for (double x : {0.05, 0.3, 1.2}) {
    for (double y : {0.01, 0.4, 2.0}) {
      EXPECT_NEAR(truncated_normal_log_ratio(x, y, 0.25), std::log(tn(x, y, 0.25) / tn(y, x, 0.25)), 1e-12);
    }
  }
}

TEST(MhLength, PriorRecoveryP1) {
  // n = 0: the chain targets Exp(a) on the leaf and root lengths
  MhConfig cfg;
  cfg.iterations = 1000000;
  cfg.burn_in = 0;
  cfg.thin = 10;
  cfg.sigma_l = 1.5;
  cfg.prior.edge_mean = 0.8;
  cfg.seed = 6;
  const auto r = run_chain(SufficientStats::empty(1), Tree(1, {}, {1.0}, 0.5), cfg);
  std::vector<double> leaf, root;
  for (const auto& rec : r.archive.records) {
    leaf.push_back(rec.tree.leaf_length(1));
    root.push_back(rec.tree.root_length());
  }
  ASSERT_EQ(leaf.size(), 100000u);
  EXPECT_LT(ks_exponential(leaf, 0.8), 0.01);
  EXPECT_LT(ks_exponential(root, 0.8), 0.01);
}

TEST(MhChain, PriorRecoveryTopologiesP4) {
  for (double beta : {-1.5, 0.0}) {
    MhConfig cfg;
    cfg.iterations = 200000;
    cfg.burn_in = 1000;
    cfg.sigma_l = 1.0;
    cfg.prior.beta = beta;
    cfg.seed = 7;
    RngStream tr(8, 0);
    const auto r = run_chain(SufficientStats::empty(4), random_tree(4, RandomTreeMode::uniform_binary, 1.0, tr), cfg);
    const TopologyPrior prior(cfg.prior);
    for (const auto& topo : enumerate_topologies(4)) {
      std::vector<int> hits;
      for (const auto& rec : r.archive.records) hits.push_back(rec.tree.topology() == topo);
      double f = 0.0;
      for (int h : hits) f += h;
      f /= static_cast<double>(hits.size());
      EXPECT_NEAR(f, std::exp(prior.log_prior(topo)), 3 * indicator_se(hits)) << "beta=" << beta;
    }
  }
}

TEST(MhChain, MultifurcatingPriorRecoveryP4) {
  MhConfig cfg;
  cfg.iterations = 400000;
  cfg.burn_in = 1000;
  cfg.sigma_l = 1.0;
  cfg.mode = MhMode::multifurcating;
  cfg.prior.kind = PriorKind::poisson_dirichlet;
  cfg.prior.theta = 2.0;
  cfg.prior.alpha_pd = 0.3;
  cfg.seed = 9;
  const auto r = run_chain(SufficientStats::empty(4), p4_tree(), cfg);
  const TopologyPrior prior(cfg.prior);
  const auto all = enumerate_all_topologies(4);
  double total = 0.0;
  for (const auto& topo : all) {
    std::vector<int> hits;
    for (const auto& rec : r.archive.records) hits.push_back(rec.tree.topology() == topo);
    double f = 0.0;
    for (int h : hits) f += h;
    f /= static_cast<double>(hits.size());
    total += f;
    EXPECT_NEAR(f, std::exp(prior.log_prior(topo)), 3 * indicator_se(hits));
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(MhChain, Determinism) {
  const Tree init = p4_tree();
  const auto st = data_for(init, 50, 10);
  MhConfig cfg;
  cfg.iterations = 500;
  cfg.burn_in = 100;
  cfg.seed = 11;
  const auto a = run_chain(st, init, cfg);
  const auto b = run_chain(st, init, cfg);
  ASSERT_EQ(a.archive.size(), 400u);
  ASSERT_EQ(a.archive.size(), b.archive.size());
  for (std::size_t k = 0; k < a.archive.size(); ++k) {
    EXPECT_EQ(a.archive.records[k].tree, b.archive.records[k].tree);
    EXPECT_EQ(a.archive.records[k].log_lik, b.archive.records[k].log_lik);
    EXPECT_EQ(a.archive.records[k].iter, static_cast<long>(k) + 101);
  }
  cfg.seed = 12;
  const auto c = run_chain(st, init, cfg);
  EXPECT_NE(a.archive.records.back().log_lik, c.archive.records.back().log_lik);
}

TEST(MhChain, CountersMatchReplay) {
  RngStream tr(13, 0);
  const Tree init = random_tree(6, RandomTreeMode::uniform_binary, 1.0, tr);
  const auto st = data_for(random_tree(6, RandomTreeMode::uniform_binary, 1.0, tr), 60, 14);
  MhConfig cfg;
  cfg.iterations = 3000;
  cfg.burn_in = 0;
  cfg.seed = 15;
  const auto r = run_chain(st, init, cfg);
  long topo = 0, lengths = 0;
  Tree prev = init;
  for (const auto& rec : r.archive.records) {
    const Tree& cur = rec.tree;
    // splits that left and entered: at most one of each in binary mode
    std::optional<double> moved;
    if (cur.topology() != prev.topology()) {
      ++topo;
      for (const auto& e : prev.internal_edges()) {
        if (!cur.topology().contains(e.split)) moved = e.length;
      }
    }
    for (const auto& e : cur.edges()) {
      double before;
      if (e.kind == EdgeKind::leaf) before = prev.leaf_length(e.split.min_leaf());
      else if (e.kind == EdgeKind::root) before = prev.root_length();
      else before = prev.internal_length(e.split).value_or(moved.value_or(-1.0));
      if (e.length != before) ++lengths;
    }
    prev = cur;
  }
  EXPECT_EQ(topo, r.final_state.topology_accepted);
  EXPECT_EQ(lengths, r.final_state.length_accepted);
  EXPECT_EQ(r.final_state.topology_proposed, 3000);
  EXPECT_EQ(r.final_state.length_proposed, 3000L * 11);
  EXPECT_GT(topo, 0);
  EXPECT_LT(topo, 3000);
}

TEST(MhChain, ArchiveInvariants) {
  RngStream tr(16, 0);
  const Tree truth = random_tree(7, RandomTreeMode::uniform_binary, 1.0, tr);
  const auto st = data_for(truth, 70, 17);
  MhConfig cfg;
  cfg.iterations = 1500;
  cfg.burn_in = 500;
  cfg.seed = 18;
  const auto bin = run_chain(st, random_tree(7, RandomTreeMode::uniform_binary, 1.0, tr), cfg);
  for (const auto& rec : bin.archive.records) {
    EXPECT_TRUE(rec.tree.topology().is_resolved());
    EXPECT_TRUE(validate_ultrametric(tree_to_dense(rec.tree)).valid());
  }
  cfg.mode = MhMode::multifurcating;
  cfg.prior.kind = PriorKind::poisson_dirichlet;
  const auto multi = run_chain(st, Tree(7, {}, std::vector<double>(7, 1.0), 0.5), cfg);
  bool unresolved = false;
  for (const auto& rec : multi.archive.records) {
    unresolved = unresolved || !rec.tree.topology().is_resolved();
    EXPECT_TRUE(validate_ultrametric(tree_to_dense(rec.tree)).valid());
  }
  EXPECT_TRUE(unresolved);
}

TEST(MhChain, Errors) {
  MhConfig cfg;
  cfg.iterations = 10;
  cfg.burn_in = 0;
  EXPECT_THROW(run_chain(SufficientStats::empty(5), p4_tree(), cfg), DimensionError);
  EXPECT_THROW(run_chain(SufficientStats::empty(4), Tree(4, {}, {1, 1, 1, 1}, 0.0), cfg), std::invalid_argument);
}

TEST(MhChain, PosteriorRecoveryP3) {
  const Tree truth(3, {{sp({1, 2}, 3), 0.6}}, {0.8, 1.0, 1.3}, 0.5);
  long hits = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto st = data_for(truth, 1000, 100 + seed);
    MhConfig cfg;
    cfg.iterations = 2000;
    cfg.burn_in = 1000;
    cfg.seed = seed;
    RngStream tr(200 + seed, 0);
    const auto r = run_chain(st, random_tree(3, RandomTreeMode::uniform_binary, 1.0, tr), cfg);
    for (const auto& rec : r.archive.records) hits += rec.tree.topology() == truth.topology();
    total += static_cast<long>(r.archive.size());
  }
  EXPECT_GT(hits / static_cast<double>(total), 0.95);
}

TEST(Hmc, WorkedExampleCrossings) {
  HmcState s = HmcState::from_tree(Tree(4, {{sp({1, 2}, 4), 0.5}, {sp({3, 4}, 4), 0.3}}, {5, 5, 5, 5}, 5));
  for (std::size_t k = 0; k < s.edges.size(); ++k) {
    if (s.edges[k].split == sp({1, 2}, 4)) s.momentum[k] = -1.0;
    if (s.edges[k].split == sp({3, 4}, 4)) s.momentum[k] = -1.2;
  }
  HmcConfig cfg;
  cfg.step_size = 1.0;
  std::vector<std::vector<Split>> offered;
  const std::vector<Split> picks{sp({1, 2, 4}, 4), sp({2, 4}, 4)};
  SplitChooser choose = [&](const std::vector<Split>& c) {
    offered.push_back(c);
    return picks[offered.size() - 1];
  };
  hmc_leapfrog(s, FlatTarget{}, cfg, choose);
  ASSERT_EQ(offered.size(), 2u);
  EXPECT_EQ(offered[0], (std::vector<Split>{sp({1, 2, 3}, 4), sp({1, 2, 4}, 4)}));
  EXPECT_EQ(offered[1], (std::vector<Split>{sp({1, 4}, 4), sp({2, 4}, 4)}));
  const Tree t = s.tree();
  ASSERT_EQ(t.internal_edges().size(), 2u);
  EXPECT_DOUBLE_EQ(*t.internal_length(sp({2, 4}, 4)), 0.5);
  EXPECT_DOUBLE_EQ(*t.internal_length(sp({1, 2, 4}, 4)), 0.9);
  EXPECT_EQ(*s.momentum_of(sp({2, 4}, 4), EdgeKind::internal), 1.0);
  EXPECT_EQ(*s.momentum_of(sp({1, 2, 4}, 4), EdgeKind::internal), 1.2);
  // leaves untouched
  for (int i = 1; i <= 4; ++i) EXPECT_EQ(t.leaf_length(i), 5.0);
}

TEST(Hmc, LeafAndRootReflect) {
  HmcState s = HmcState::from_tree(Tree(3, {{sp({1, 2}, 3), 1.0}}, {0.2, 1, 1}, 0.1));
  s.momentum.assign(s.edges.size(), 0.0);
  s.momentum.front() = -1.0;  // leaf 1
  s.momentum.back() = -1.0;   // root
  HmcConfig cfg;
  cfg.step_size = 0.5;
  hmc_leapfrog(s, FlatTarget{}, cfg, [](const std::vector<Split>& c) { return c.front(); });
  const Tree t = s.tree();
  EXPECT_NEAR(t.leaf_length(1), 0.3, 1e-15);
  EXPECT_NEAR(t.root_length(), 0.4, 1e-15);
  EXPECT_EQ(t.topology(), Topology(3, {sp({1, 2}, 3)}));
  EXPECT_EQ(s.momentum.front(), 1.0);
}

TEST(Hmc, ReversibleAwayFromBoundaries) {
  const Tree t = p4_tree();
  const PosteriorTarget target(data_for(t, 40, 20), PriorSpec{});
  HmcConfig cfg;
  cfg.step_size = 0.002;
  cfg.delta = 0.0;
  HmcState s = HmcState::from_tree(t);
  RngStream rng(21, 0);
  for (auto& a : s.momentum) a = 0.3 * rng.normal();
  const HmcState start = s;
  const auto never = [](const std::vector<Split>&) -> Split { throw std::logic_error("unexpected crossing"); };
  for (int i = 0; i < 50; ++i) hmc_leapfrog(s, target, cfg, never);
  for (auto& a : s.momentum) a = -a;
  for (int i = 0; i < 50; ++i) hmc_leapfrog(s, target, cfg, never);
  for (std::size_t k = 0; k < s.edges.size(); ++k) {
    EXPECT_EQ(s.edges[k].split, start.edges[k].split);
    EXPECT_NEAR(s.edges[k].length, start.edges[k].length, 1e-9);
    EXPECT_NEAR(-s.momentum[k], start.momentum[k], 1e-9);
  }
}

TEST(Hmc, SurrogateGradientAtZeroDelta) {
  const Tree t = p4_tree();
  const auto st = data_for(t, 30, 22);
  PriorSpec prior;
  prior.edge_mean = 0.7;
  const PosteriorTarget target(st, prior);
  const auto g = target.surrogate_gradient(4, t.edges(), 0.0);
  const auto l = loglik_gradient(st, t);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(g[k], -l[k] + 1.0 / 0.7);
  EXPECT_EQ(PosteriorTarget::smooth(0.0, 0.003), 0.0015);
  EXPECT_EQ(PosteriorTarget::smooth(0.003, 0.003), 0.003);
  EXPECT_EQ(PosteriorTarget::smooth(0.002, 0.0), 0.002);
}

TEST(Hmc, SurrogateGradientFiniteDifference) {
  const Tree t(4, {{sp({1, 2}, 4), 0.002}, {sp({3, 4}, 4), 0.3}}, {1.0, 1.1, 0.9, 1.2}, 0.4);
  const PosteriorTarget target(data_for(t, 30, 23), PriorSpec{});
  const double delta = 0.003;
  auto edges = t.edges();
  const auto g = target.surrogate_gradient(4, edges, delta);
  auto u = [&](std::vector<Edge> e) {
    for (auto& x : e) x.length = PosteriorTarget::smooth(x.length, delta);
    return -gaussian_loglik(target.stats(), dense_from_edges(4, e)) +
           [&] { double s = 0; for (auto& x : e) s += x.length; return s; }();
  };
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const double h = 1e-7;
    auto up = edges, dn = edges;
    up[k].length += h;
    dn[k].length -= h;
    EXPECT_NEAR(g[k], (u(up) - u(dn)) / (2 * h), 1e-5 * std::max(1.0, std::abs(g[k])));
  }
}

TEST(Hmc, EnergyErrorScalesQuadratically) {
  const Tree t = p4_tree();
  const PosteriorTarget target(data_for(t, 40, 24), PriorSpec{});
  RngStream rng(25, 0);
  HmcState s0 = HmcState::from_tree(t);
  for (auto& a : s0.momentum) a = 0.5 * rng.normal();
  auto drift = [&](double eps, int steps) {
    HmcConfig cfg;
    cfg.step_size = eps;
    cfg.delta = 0.0;
    HmcState s = s0;
    const double h0 = target.potential(4, s.edges) + kinetic_energy(s.momentum, 1.0);
    for (int i = 0; i < steps; ++i) {
      hmc_leapfrog(s, target, cfg, [](const std::vector<Split>&) -> Split { throw std::logic_error("crossing"); });
    }
    return std::abs(target.potential(4, s.edges) + kinetic_energy(s.momentum, 1.0) - h0);
  };
  const double e1 = drift(0.004, 25);
  const double e2 = drift(0.002, 50);
  EXPECT_GT(e1, 0.0);
  EXPECT_NEAR(e1 / e2, 4.0, 1.0);
}

TEST(Hmc, ZeroDataStepAlwaysAcceptedWithoutCrossings) {
  const PosteriorTarget target(SufficientStats::empty(4), PriorSpec{});
  HmcConfig cfg;
  cfg.step_size = 0.01;
  cfg.leapfrog_steps = 10;
  cfg.delta = 0.0;
  RngStream rng(26, 0);
  HmcState s = HmcState::from_tree(Tree(4, {{sp({1, 2}, 4), 2.0}, {sp({3, 4}, 4), 2.0}}, {2, 2, 2, 2}, 2));
  for (int i = 0; i < 50; ++i) {
    const auto info = hmc_step(s, target, cfg, rng);
    // linear potential: leapfrog is exact
    EXPECT_NEAR(info.energy_change, 0.0, 1e-12);
    EXPECT_TRUE(info.accepted);
  }
}

TEST(Hmc, PriorRecovery) {
  HmcConfig cfg;
  cfg.iterations = 101000;
  cfg.burn_in = 1000;
  cfg.thin = 10;
  cfg.step_size = 0.05;
  cfg.leapfrog_steps = 20;
  cfg.delta = 0.003;
  cfg.prior.edge_mean = 0.5;
  cfg.seed = 27;
  const auto r = run_chain(SufficientStats::empty(4), p4_tree(), cfg);
  ASSERT_EQ(r.archive.size(), 10000u);
  std::vector<double> leaf, root, internal;
  for (const auto& rec : r.archive.records) {
    leaf.push_back(rec.tree.leaf_length(2));
    root.push_back(rec.tree.root_length());
    internal.push_back(rec.tree.internal_edges().front().length);
  }
  EXPECT_LT(ks_exponential(leaf, 0.5), 0.02);
  EXPECT_LT(ks_exponential(root, 0.5), 0.02);
  EXPECT_LT(ks_exponential(internal, 0.5), 0.02);
  const TopologyPrior prior(cfg.prior);
  for (const auto& topo : enumerate_topologies(4)) {
    std::vector<int> hits;
    for (const auto& rec : r.archive.records) hits.push_back(rec.tree.topology() == topo);
    double f = 0.0;
    for (int h : hits) f += h;
    f /= static_cast<double>(hits.size());
    EXPECT_NEAR(f, std::exp(prior.log_prior(topo)), 3 * indicator_se(hits));
  }
}

TEST(Hmc, AgreesWithMhOnSharedData) {
  const Tree truth = p4_tree();
  const auto st = data_for(truth, 100, 28);
  MhConfig mc;
  mc.iterations = 20000;
  mc.burn_in = 2000;
  mc.seed = 29;
  const auto mh = run_chain(st, truth, mc);
  HmcConfig hc;
  hc.iterations = 4000;
  hc.burn_in = 400;
  hc.step_size = 0.01;
  hc.leapfrog_steps = 30;
  hc.seed = 30;
  const auto hmc = run_chain(st, truth, hc);
  std::vector<double> a, b;
  for (const auto& r : mh.archive.records) a.push_back(r.log_lik);
  for (const auto& r : hmc.archive.records) b.push_back(r.log_lik);
  const auto sa = trace_stats(a), sb = trace_stats(b);
  EXPECT_LT(std::abs(sa.mean - sb.mean), 2 * std::hypot(sa.mc_se, sb.mc_se)) << sa.mean << " " << sb.mean;
  EXPECT_EQ(hmc.diverged, 0);
}

TEST(Hmc, Determinism) {
  const auto st = data_for(p4_tree(), 30, 31);
  HmcConfig cfg;
  cfg.iterations = 40;
  cfg.burn_in = 10;
  cfg.leapfrog_steps = 20;
  cfg.seed = 32;
  const auto a = run_chain(st, p4_tree(), cfg);
  const auto b = run_chain(st, p4_tree(), cfg);
  ASSERT_EQ(a.archive.size(), 30u);
  for (std::size_t k = 0; k < a.archive.size(); ++k) EXPECT_EQ(a.archive.records[k].tree, b.archive.records[k].tree);
}

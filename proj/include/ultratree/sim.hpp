#pragma once

// Simulation scenarios: draw a truth, generate data, run a chain and score
// the posterior, over replicates and sample sizes.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "geometry.hpp"
#include "model.hpp"
#include "posterior.hpp"
#include "samplers.hpp"
#include "treespace.hpp"

namespace ultratree {

struct GenDist {
  Distribution kind = Distribution::normal;
  int df = 0;

  std::string name() const { return kind == Distribution::normal ? "normal" : "t" + std::to_string(df); }

  static GenDist parse(const std::string& s) {
    if (s == "normal") return {};
    if (s.size() > 1 && s[0] == 't') {
      try {
        const int df = std::stoi(s.substr(1));
        if (df >= 3) return {Distribution::student_t, df};
      } catch (const std::exception&) {
      }
    }
    throw ConfigError("distribution", "unknown distribution '" + s + "' (normal, t3, t4, ...)");
  }
};

enum class TruthMode { resolved, unresolved, equidistant };
enum class DropMode { uniform, shortest };

inline const char* truth_mode_name(TruthMode m) {
  switch (m) {
    case TruthMode::resolved: return "resolved";
    case TruthMode::unresolved: return "unresolved";
    case TruthMode::equidistant: return "equidistant";
  }
  return "";
}

struct Scenario {
  int p = 10;
  std::vector<int> size_multiples{3, 5, 10, 25, 50};  // n = multiple * p
  std::vector<GenDist> distributions{GenDist{}};
  TruthMode truth_mode = TruthMode::resolved;
  int drop = 3;
  DropMode drop_mode = DropMode::uniform;
  int replicates = 50;
  bool fixed_truth = false;
  std::optional<Tree> truth;  // used as the fixed truth when set
  Algo algo = Algo::mh;
  MhConfig mh;
  HmcConfig hmc;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  double level = 0.95;
  long mean_passes = 200;
  double max_seconds = 3600.0;
  bool force = false;

  void validate() const {
    if (p < 2 || p > kMaxLeaves) throw ConfigError("p", "p must lie in 2..64");
    if (replicates < 1) throw ConfigError("replicates", "replicates must be at least 1");
    if (size_multiples.empty()) throw ConfigError("sample_sizes", "no sample sizes");
    for (int m : size_multiples) {
      if (m < 1) throw ConfigError("sample_sizes", "sample size multiples must be positive");
    }
    if (distributions.empty()) throw ConfigError("distributions", "no distributions");
    if (truth_mode == TruthMode::unresolved && (drop < 0 || drop > p - 2)) {
      throw ConfigError("drop", "drop must lie in 0..p-2");
    }
    if (truth && truth->p() != p) throw ConfigError("truth", "truth tree has the wrong leaf count");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level", "level must lie in (0, 1)");
    if (mean_passes < 1) throw ConfigError("mean_passes", "mean_passes must be positive");
    if (algo == Algo::mh) mh.validate(); else hmc.validate();
  }
};

struct PointScore {
  double d = 0.0;
  double frobenius = 0.0;
};

inline PointScore score_point_estimate(const UltrametricMatrix& est, const UltrametricMatrix& truth) {
  if (est.dim() != truth.dim()) throw DimensionError("score_point_estimate: dimensions differ");
  return {matrix_distance(est, truth), (est.matrix() - truth.matrix()).norm()};
}

// Resolved truth in the style of ape::rtree: a uniform random topology and
// U(0, 1) lengths on every edge.
inline Tree random_truth(int p, TruthMode mode, int drop, DropMode how, RngStream& rng) {
  if (mode == TruthMode::equidistant) return random_tree(p, RandomTreeMode::equidistant, 1.0, rng);
  const Topology topo = TopologyPrior(PriorSpec{}).sample(p, rng);
  std::vector<double> internal, leaves;
  for (std::size_t i = 0; i < topo.size(); ++i) internal.push_back(rng.uniform_open());
  for (int i = 0; i < p; ++i) leaves.push_back(rng.uniform_open());
  Tree t(topo, internal, std::move(leaves), rng.uniform_open());
  if (mode == TruthMode::unresolved) t = drop_internal_splits(t, drop, how == DropMode::shortest, rng);
  return t;
}

// Eight-split reference tree on ten leaves used as a fixed truth. Leaf and
// root lengths are U(0, 1) draws from a fixed seed.
inline Tree reference_truth() {
  constexpr int p = 10;
  auto s = [](std::initializer_list<int> l) { return Split::from_leaves(l, p); };
  std::vector<Edge> internal{
      {s({1, 2, 3, 4, 5, 6, 7, 8, 9}), 0.701, EdgeKind::internal}, {s({1, 2, 4}), 0.872, EdgeKind::internal},
      {s({2, 4}), 0.712, EdgeKind::internal},         {s({3, 5, 6, 7, 8, 9}), 0.880, EdgeKind::internal},
      {s({3, 5, 6, 8, 9}), 0.878, EdgeKind::internal}, {s({3, 9}), 0.854, EdgeKind::internal},
      {s({5, 6}), 0.231, EdgeKind::internal},          {s({5, 6, 8}), 0.869, EdgeKind::internal}};
  RngStream rng(2024, 0);
  std::vector<double> leaves;
  for (int i = 0; i < p; ++i) leaves.push_back(rng.uniform_open());
  const double root = rng.uniform_open();
  return Tree(p, std::move(internal), std::move(leaves), root);
}

// Resolved starting trees that share no internal split with one another.
inline std::vector<Tree> disjoint_inits(int p, int count, RngStream& rng) {
  std::vector<Tree> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 100000) throw std::runtime_error("disjoint_inits: no disjoint topologies found");
    Tree t = random_tree(p, RandomTreeMode::uniform_binary, 1.0, rng);
    bool ok = true;
    for (const auto& o : out)
      for (const auto& s : t.topology().splits()) ok = ok && !o.topology().contains(s);
    if (ok) out.push_back(std::move(t));
  }
  return out;
}

struct ReplicateResult {
  int replicate = 0;
  int n = 0;
  std::string distribution;
  Tree truth;
  std::vector<SplitRecovery> recovery;
  double min_recovery = 1.0;
  double mean_recovery = 1.0;
  double coverage = 0.0;
  PointScore mean_score;
  PointScore map_score;
  double mean_internal_splits = 0.0;
  double mean_log_lik = 0.0;
  long topology_accepted = 0;
  double seconds = 0.0;
};

struct Aggregate {
  double median = 0.0;
  double mean = 0.0;
  double sd = 0.0;

  static Aggregate of(std::vector<double> xs) {
    Aggregate a;
    if (xs.empty()) return a;
    a.median = quantile(xs, 0.5);
    for (double x : xs) a.mean += x;
    a.mean /= static_cast<double>(xs.size());
    for (double x : xs) a.sd += (x - a.mean) * (x - a.mean);
    a.sd = xs.size() > 1 ? std::sqrt(a.sd / static_cast<double>(xs.size() - 1)) : 0.0;
    return a;
  }
};

struct CellSummary {
  int n = 0;
  std::string distribution;
  Aggregate min_recovery, mean_recovery, coverage, mean_d, mean_frobenius, map_d, map_frobenius, internal_splits;
  // Per true split; only when every replicate shares one truth.
  std::vector<std::pair<Split, Aggregate>> split_recovery;
};

struct ScenarioReport {
  Scenario scenario;
  std::vector<ReplicateResult> replicates;  // cell-major, then replicate
  std::vector<CellSummary> cells;
  double seconds = 0.0;
  double estimated_seconds = 0.0;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kFixedTruthStream = 0x7472757468;

namespace detail {

inline unsigned worker_count(int requested) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return requested > 0 ? static_cast<unsigned>(requested) : hw;
}

// Wall-clock estimate from a short pilot chain.
inline double estimate_seconds(const Scenario& s, std::size_t jobs) {
  RngStream rng(s.seed, 0x70696c6f74);
  const Tree t = random_truth(s.p, TruthMode::resolved, 0, DropMode::uniform, rng);
  const auto st = suff_stats(sample_gaussian(tree_to_matrix(t), 2 * s.p, rng));
  const auto start = std::chrono::steady_clock::now();
  long per_chain;
  const long pilot = 50;
  if (s.algo == Algo::mh) {
    MhConfig c = s.mh;
    c.iterations = pilot;
    c.burn_in = 0;
    c.mode = MhMode::binary;
    c.prior = PriorSpec{};
    run_chain(st, t, c);
    per_chain = s.mh.iterations;
  } else {
    HmcConfig c = s.hmc;
    c.iterations = 5;
    c.burn_in = 0;
    run_chain(st, t, c);
    per_chain = s.hmc.iterations * pilot / 5;
  }
  const double pilot_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double workers = std::min<double>(worker_count(s.threads), static_cast<double>(jobs));
  return pilot_s * static_cast<double>(per_chain) / pilot * static_cast<double>(jobs) / workers;
}

}  // namespace detail

inline ReplicateResult run_replicate(const Scenario& s, const Tree& truth, int n, const GenDist& dist,
                                     std::uint64_t data_seed, std::uint64_t chain_seed, std::uint64_t init_seed) {
  const auto start = std::chrono::steady_clock::now();
  ReplicateResult out;
  out.n = n;
  out.distribution = dist.name();
  out.truth = truth;
  const auto tm = tree_to_matrix(truth);
  RngStream data_rng(data_seed, 0);
  const DataSet data = dist.kind == Distribution::normal ? sample_gaussian(tm, n, data_rng)
                                                         : sample_t(tm, dist.df, n, data_rng);
  RngStream init_rng(init_seed, 0);
  const Tree init = random_tree(s.p, RandomTreeMode::uniform_binary, 1.0, init_rng);
  ChainResult chain;
  if (s.algo == Algo::mh) {
    MhConfig c = s.mh;
    c.seed = chain_seed;
    chain = run_chain(data, init, c);
  } else {
    HmcConfig c = s.hmc;
    c.seed = chain_seed;
    chain = run_chain(data, init, c);
  }
  MeanConfig mc;
  mc.max_iterations = s.mean_passes * static_cast<long>(chain.archive.size());
  const auto rep = summarize(chain.archive, s.level, mc, truth);
  out.recovery = rep.recovery;
  if (!out.recovery.empty()) {
    out.min_recovery = 1.0;
    out.mean_recovery = 0.0;
    for (const auto& r : out.recovery) {
      out.min_recovery = std::min(out.min_recovery, r.frequency);
      out.mean_recovery += r.frequency;
    }
    out.mean_recovery /= static_cast<double>(out.recovery.size());
  }
  out.coverage = rep.coverage->rate;
  out.mean_score = score_point_estimate(rep.mean, tm);
  out.map_score = score_point_estimate(tree_to_matrix(rep.map.tree), tm);
  out.mean_internal_splits = rep.mean_internal_splits;
  out.mean_log_lik = rep.log_lik.mean;
  out.topology_accepted = chain.final_state.topology_accepted;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// Replicate r draws its truth and child seeds from stream r of the master
// seed, so cells at different n share truths replicate by replicate.
inline ScenarioReport run_scenario(const Scenario& s) {
  s.validate();
  const auto start = std::chrono::steady_clock::now();
  struct Job {
    std::size_t cell;
    int replicate;
  };
  std::vector<std::pair<int, GenDist>> cells;
  for (int m : s.size_multiples)
    for (const auto& d : s.distributions) cells.emplace_back(m * s.p, d);
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int r = 0; r < s.replicates; ++r) jobs.push_back({c, r});

  ScenarioReport report;
  report.scenario = s;
  report.estimated_seconds = detail::estimate_seconds(s, jobs.size());
  if (report.estimated_seconds > s.max_seconds && !s.force) {
    throw BudgetExceeded("scenario estimated at " + std::to_string(static_cast<long>(report.estimated_seconds)) +
                         " s, above the " + std::to_string(static_cast<long>(s.max_seconds)) +
                         " s cap; pass --force to run anyway");
  }

  std::optional<Tree> fixed = s.truth;
  if (!fixed && s.fixed_truth) {
    RngStream rng(s.seed, kFixedTruthStream);
    fixed = random_truth(s.p, s.truth_mode, s.drop, s.drop_mode, rng);
  }
  struct Seeds {
    Tree truth;
    std::uint64_t data, chain, init;
  };
  std::vector<Seeds> seeds;
  for (int r = 0; r < s.replicates; ++r) {
    RngStream rng(s.seed, static_cast<std::uint64_t>(r));
    Tree truth = fixed ? *fixed : random_truth(s.p, s.truth_mode, s.drop, s.drop_mode, rng);
    const auto a = rng.engine()(), b = rng.engine()(), c = rng.engine()();
    seeds.push_back({std::move(truth), a, b, c});
  }

  report.replicates.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t k; (k = next++) < jobs.size();) {
      try {
        const auto& j = jobs[k];
        const auto& sd = seeds[static_cast<std::size_t>(j.replicate)];
        const auto cell_id = static_cast<std::uint64_t>(j.cell);
        auto res = run_replicate(s, sd.truth, cells[j.cell].first, cells[j.cell].second,
                                 RngStream(sd.data, cell_id).engine()(), RngStream(sd.chain, cell_id).engine()(),
                                 sd.init);
        res.replicate = j.replicate;
        report.replicates[k] = std::move(res);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n_workers = std::min<unsigned>(detail::worker_count(s.threads), static_cast<unsigned>(jobs.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellSummary cs;
    cs.n = cells[c].first;
    cs.distribution = cells[c].second.name();
    std::vector<double> minr, meanr, cov, md, mf, pd, pf, is;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      if (jobs[k].cell != c) continue;
      const auto& r = report.replicates[k];
      minr.push_back(r.min_recovery);
      meanr.push_back(r.mean_recovery);
      cov.push_back(r.coverage);
      md.push_back(r.mean_score.d);
      mf.push_back(r.mean_score.frobenius);
      pd.push_back(r.map_score.d);
      pf.push_back(r.map_score.frobenius);
      is.push_back(r.mean_internal_splits);
    }
    cs.min_recovery = Aggregate::of(minr);
    cs.mean_recovery = Aggregate::of(meanr);
    cs.coverage = Aggregate::of(cov);
    cs.mean_d = Aggregate::of(md);
    cs.mean_frobenius = Aggregate::of(mf);
    cs.map_d = Aggregate::of(pd);
    cs.map_frobenius = Aggregate::of(pf);
    cs.internal_splits = Aggregate::of(is);
    if (fixed) {
      for (const auto& split : fixed->topology().splits()) {
        std::vector<double> f;
        for (std::size_t k = 0; k < jobs.size(); ++k) {
          if (jobs[k].cell != c) continue;
          for (const auto& r : report.replicates[k].recovery) {
            if (r.split == split) f.push_back(r.frequency);
          }
        }
        cs.split_recovery.emplace_back(split, Aggregate::of(f));
      }
    }
    report.cells.push_back(std::move(cs));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace ultratree

#pragma once

// Summaries of a posterior archive.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "archive.hpp"
#include "geometry.hpp"
#include "ultrametric.hpp"

namespace ultratree {

namespace detail {

inline void require_records(const PosteriorArchive& a, const char* who) {
  if (a.empty()) throw std::invalid_argument(std::string(who) + ": empty archive");
}

}  // namespace detail

// Fraction of records containing each split; absent splits read as 0.
class SplitFrequencies {
 public:
  SplitFrequencies() = default;
  explicit SplitFrequencies(std::map<Split, double> f) : freq_(std::move(f)) {}

  double operator()(const Split& s) const {
    auto it = freq_.find(s);
    return it == freq_.end() ? 0.0 : it->second;
  }
  const std::map<Split, double>& table() const { return freq_; }

 private:
  std::map<Split, double> freq_;
};

inline SplitFrequencies split_frequencies(const PosteriorArchive& archive) {
  detail::require_records(archive, "split_frequencies");
  std::map<Split, long> count;
  for (const auto& r : archive.records) {
    for (const auto& s : r.tree.topology().splits()) ++count[s];
  }
  std::map<Split, double> f;
  const double n = static_cast<double>(archive.size());
  for (const auto& [s, c] : count) f[s] = static_cast<double>(c) / n;
  return SplitFrequencies(std::move(f));
}

inline std::map<Topology, double> topology_frequencies(const PosteriorArchive& archive) {
  detail::require_records(archive, "topology_frequencies");
  std::map<Topology, double> f;
  for (const auto& r : archive.records) f[r.tree.topology()] += 1.0;
  for (auto& [t, c] : f) c /= static_cast<double>(archive.size());
  return f;
}

// Empirical quantile by linear interpolation between order statistics
// (h = (n - 1) q).
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q must lie in [0, 1]");
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

struct CredibleBounds {
  Eigen::MatrixXd lo;
  Eigen::MatrixXd hi;
};

inline CredibleBounds credible_intervals(const PosteriorArchive& archive, double level) {
  detail::require_records(archive, "credible_intervals");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credible_intervals: level must lie in (0, 1)");
  const int p = archive.records.front().tree.p();
  std::vector<Eigen::MatrixXd> ms;
  ms.reserve(archive.size());
  for (const auto& r : archive.records) ms.push_back(tree_to_dense(r.tree));
  CredibleBounds out{Eigen::MatrixXd(p, p), Eigen::MatrixXd(p, p)};
  const double tail = (1.0 - level) / 2.0;
  std::vector<double> xs(ms.size());
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j <= i; ++j) {
      for (std::size_t k = 0; k < ms.size(); ++k) xs[k] = ms[k](i, j);
      out.lo(i, j) = out.lo(j, i) = quantile(xs, tail);
      out.hi(i, j) = out.hi(j, i) = quantile(xs, 1.0 - tail);
    }
  }
  return out;
}

// Highest log_prior + log_lik; the earliest record wins ties.
inline const ArchiveRecord& map_record(const PosteriorArchive& archive) {
  detail::require_records(archive, "map_sample");
  const ArchiveRecord* best = &archive.records.front();
  for (const auto& r : archive.records) {
    if (r.log_posterior() > best->log_posterior()) best = &r;
  }
  return *best;
}

inline Tree map_sample(const PosteriorArchive& archive) { return map_record(archive).tree; }

inline Tree posterior_mean_tree(const PosteriorArchive& archive, const MeanConfig& cfg = {}) {
  detail::require_records(archive, "posterior_mean");
  return frechet_mean(archive.trees(), cfg);
}

inline UltrametricMatrix posterior_mean(const PosteriorArchive& archive, const MeanConfig& cfg = {}) {
  return tree_to_matrix(posterior_mean_tree(archive, cfg));
}

struct Coverage {
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> covered;
  double rate = 0.0;  // over the lower triangle and diagonal
};

inline Coverage coverage(const Eigen::MatrixXd& lo, const Eigen::MatrixXd& hi, const Eigen::MatrixXd& truth) {
  if (lo.rows() != truth.rows() || lo.cols() != truth.cols() || hi.rows() != truth.rows() ||
      hi.cols() != truth.cols() || truth.rows() != truth.cols()) {
    throw DimensionError("coverage: shapes differ");
  }
  const auto p = truth.rows();
  Coverage out{decltype(Coverage::covered)(p, p), 0.0};
  long hit = 0, total = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      out.covered(i, j) = lo(i, j) <= truth(i, j) && truth(i, j) <= hi(i, j);
      if (j <= i) {
        hit += out.covered(i, j) ? 1 : 0;
        ++total;
      }
    }
  }
  out.rate = static_cast<double>(hit) / static_cast<double>(total);
  return out;
}

inline Coverage coverage(const CredibleBounds& b, const UltrametricMatrix& truth) {
  return coverage(b.lo, b.hi, truth.matrix());
}

struct TraceStats {
  double mean = 0.0;
  double sd = 0.0;
  double mc_se = 0.0;  // batch means
  double min = 0.0;
  double max = 0.0;
  long count = 0;
};

// Standard error of the mean of an autocorrelated series from
// non-overlapping batch means.
inline double batch_means_se(const std::vector<double>& xs, int batches = 20) {
  const std::size_t size = xs.size() / static_cast<std::size_t>(batches);
  if (batches < 2 || size == 0) throw std::invalid_argument("batch_means_se: series too short");
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < size; ++k) s += xs[static_cast<std::size_t>(b) * size + k];
    means.push_back(s / static_cast<double>(size));
  }
  double m = 0.0;
  for (double x : means) m += x;
  m /= batches;
  double v = 0.0;
  for (double x : means) v += (x - m) * (x - m);
  v /= batches - 1;
  return std::sqrt(v / batches);
}

inline TraceStats trace_stats(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("trace_stats: empty series");
  TraceStats t;
  t.count = static_cast<long>(xs.size());
  t.min = *std::min_element(xs.begin(), xs.end());
  t.max = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += x;
  t.mean = s / static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - t.mean) * (x - t.mean);
  t.sd = xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0;
  t.mc_se = xs.size() >= 40 ? batch_means_se(xs) : t.sd / std::sqrt(static_cast<double>(xs.size()));
  return t;
}

// First index whose value is within 1% of the series maximum, i.e. the
// first x with x >= max - 0.01 |max|.
inline long iterations_to_reach_max(const std::vector<double>& xs, double fraction = 0.99) {
  if (xs.empty()) throw std::invalid_argument("iterations_to_reach_max: empty series");
  const double top = *std::max_element(xs.begin(), xs.end());
  const double bar = top - (1.0 - fraction) * std::abs(top);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (xs[k] >= bar) return static_cast<long>(k);
  }
  return static_cast<long>(xs.size()) - 1;
}

// Two series of retained log-likelihoods; they agree when their means differ
// by less than two combined batch-means standard errors.
struct ChainComparison {
  TraceStats a, b;
  double difference = 0.0;
  double combined_se = 0.0;
  bool agree = false;
};

inline ChainComparison compare_chains(const std::vector<double>& a, const std::vector<double>& b) {
  ChainComparison c;
  c.a = trace_stats(a);
  c.b = trace_stats(b);
  c.difference = c.a.mean - c.b.mean;
  c.combined_se = std::hypot(c.a.mc_se, c.b.mc_se);
  c.agree = std::abs(c.difference) < 2.0 * c.combined_se;
  return c;
}

inline std::vector<double> log_liks(const PosteriorArchive& archive) {
  std::vector<double> out;
  for (const auto& r : archive.records) out.push_back(r.log_lik);
  return out;
}

struct SplitRecovery {
  Split split;
  double frequency = 0.0;
};

struct SummaryReport {
  int p = 0;
  long records = 0;
  SplitFrequencies splits;
  double level = 0.95;
  CredibleBounds bounds;
  ArchiveRecord map;
  Tree mean_tree;
  UltrametricMatrix mean;
  TraceStats log_lik;
  TraceStats log_posterior;
  double mean_internal_splits = 0.0;

  // Filled when a truth is supplied.
  std::optional<Coverage> coverage;
  std::vector<SplitRecovery> recovery;
  std::optional<double> mean_distance, mean_frobenius, map_distance, map_frobenius;
};

inline SummaryReport summarize(const PosteriorArchive& archive, double level = 0.95, const MeanConfig& mean_cfg = {},
                               const std::optional<Tree>& truth = std::nullopt) {
  detail::require_records(archive, "summarize");
  SummaryReport r;
  r.p = archive.records.front().tree.p();
  r.records = static_cast<long>(archive.size());
  r.splits = split_frequencies(archive);
  r.level = level;
  r.bounds = credible_intervals(archive, level);
  r.map = map_record(archive);
  r.mean_tree = posterior_mean_tree(archive, mean_cfg);
  r.mean = tree_to_matrix(r.mean_tree);
  std::vector<double> ll, lpost;
  double internal = 0.0;
  for (const auto& rec : archive.records) {
    ll.push_back(rec.log_lik);
    lpost.push_back(rec.log_posterior());
    internal += static_cast<double>(rec.tree.internal_edges().size());
  }
  r.log_lik = trace_stats(ll);
  r.log_posterior = trace_stats(lpost);
  r.mean_internal_splits = internal / static_cast<double>(archive.size());
  if (truth) {
    if (truth->p() != r.p) throw DimensionError("summarize: truth has a different leaf count");
    const auto tm = tree_to_matrix(*truth);
    r.coverage = coverage(r.bounds, tm);
    for (const auto& s : truth->topology().splits()) r.recovery.push_back({s, r.splits(s)});
    r.mean_distance = tree_distance(r.mean_tree, *truth);
    r.mean_frobenius = (r.mean.matrix() - tm.matrix()).norm();
    r.map_distance = tree_distance(r.map.tree, *truth);
    r.map_frobenius = (tree_to_dense(r.map.tree) - tm.matrix()).norm();
  }
  return r;
}

}  // namespace ultratree

#pragma once

// JSON and CSV renderings of summaries, distances and scenario reports.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "geometry.hpp"
#include "newick.hpp"
#include "posterior.hpp"
#include "sim.hpp"
#include "ultrametric.hpp"

namespace ultratree {

using ojson = nlohmann::ordered_json;

inline ojson matrix_json(const Eigen::MatrixXd& m) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ojson trace_stats_json(const TraceStats& t) {
  return {{"mean", t.mean}, {"sd", t.sd}, {"mc_se", t.mc_se}, {"min", t.min}, {"max", t.max}, {"count", t.count}};
}

inline ojson validation_json(const ValidationReport& r) {
  ojson v = ojson::array();
  for (const auto& x : r.violations) {
    v.push_back({{"clause", clause_name(x.clause)}, {"i", x.i}, {"j", x.j}, {"k", x.k}, {"detail", x.detail}});
  }
  return {{"valid", r.valid()}, {"violations", std::move(v)}};
}

inline ojson distance_json(const Tree& a, const Tree& b, Combine how = Combine::sum) {
  const auto bhv = bhv_distance(a, b);
  const double leaf = leaf_root_distance(a, b);
  ojson common = ojson::array();
  for (const auto& c : bhv.support.common) {
    common.push_back({{"split", c.split.leaves()}, {"a", c.source}, {"b", c.target}});
  }
  ojson pairs = ojson::array();
  for (const auto& p : bhv.support.pairs) {
    ojson A = ojson::array(), B = ojson::array();
    for (const auto& e : p.a) A.push_back(e.split.leaves());
    for (const auto& e : p.b) B.push_back(e.split.leaves());
    pairs.push_back({{"a", std::move(A)}, {"b", std::move(B)}, {"norm_a", p.norm_a}, {"norm_b", p.norm_b}});
  }
  return {{"d_bhv", bhv.distance},
          {"leaf_term", leaf},
          {"d_tree", tree_distance(a, b, how)},
          {"combine", how == Combine::sum ? "sum" : "l2"},
          {"support", {{"common", std::move(common)}, {"pairs", std::move(pairs)}}}};
}

inline ojson summary_json(const SummaryReport& r) {
  ojson splits = ojson::array();
  for (const auto& [s, f] : r.splits.table()) splits.push_back({{"split", s.leaves()}, {"frequency", f}});
  ojson j{{"p", r.p},
          {"records", r.records},
          {"level", r.level},
          {"splits", std::move(splits)},
          {"mean_internal_splits", r.mean_internal_splits},
          {"log_lik", trace_stats_json(r.log_lik)},
          {"log_posterior", trace_stats_json(r.log_posterior)},
          {"map", {{"iter", r.map.iter}, {"log_posterior", r.map.log_posterior()}, {"newick", to_newick(r.map.tree)}}},
          {"mean_newick", to_newick(r.mean_tree)},
          {"mean", matrix_json(r.mean.matrix())},
          {"lower", matrix_json(r.bounds.lo)},
          {"upper", matrix_json(r.bounds.hi)}};
  if (r.coverage) {
    ojson rec = ojson::array();
    for (const auto& x : r.recovery) rec.push_back({{"split", x.split.leaves()}, {"frequency", x.frequency}});
    j["truth"] = {{"coverage", r.coverage->rate},
                  {"recovery", std::move(rec)},
                  {"mean_distance", *r.mean_distance},
                  {"mean_frobenius", *r.mean_frobenius},
                  {"map_distance", *r.map_distance},
                  {"map_frobenius", *r.map_frobenius}};
  }
  return j;
}

inline ojson aggregate_json(const Aggregate& a) { return {{"median", a.median}, {"mean", a.mean}, {"sd", a.sd}}; }

inline ojson scenario_json(const ScenarioReport& r) {
  const Scenario& s = r.scenario;
  ojson dists = ojson::array();
  for (const auto& d : s.distributions) dists.push_back(d.name());
  ojson cells = ojson::array();
  for (const auto& c : r.cells) {
    ojson cj{{"n", c.n},
             {"distribution", c.distribution},
             {"min_recovery", aggregate_json(c.min_recovery)},
             {"mean_recovery", aggregate_json(c.mean_recovery)},
             {"coverage", aggregate_json(c.coverage)},
             {"mean_d", aggregate_json(c.mean_d)},
             {"mean_frobenius", aggregate_json(c.mean_frobenius)},
             {"map_d", aggregate_json(c.map_d)},
             {"map_frobenius", aggregate_json(c.map_frobenius)},
             {"internal_splits", aggregate_json(c.internal_splits)}};
    if (!c.split_recovery.empty()) {
      ojson sr = ojson::array();
      for (const auto& [split, a] : c.split_recovery) {
        sr.push_back({{"split", split.leaves()}, {"frequency", aggregate_json(a)}});
      }
      cj["split_recovery"] = std::move(sr);
    }
    cells.push_back(std::move(cj));
  }
  ojson reps = ojson::array();
  for (const auto& x : r.replicates) {
    reps.push_back({{"replicate", x.replicate},
                    {"n", x.n},
                    {"distribution", x.distribution},
                    {"truth", to_newick(x.truth)},
                    {"min_recovery", x.min_recovery},
                    {"mean_recovery", x.mean_recovery},
                    {"coverage", x.coverage},
                    {"mean_d", x.mean_score.d},
                    {"mean_frobenius", x.mean_score.frobenius},
                    {"map_d", x.map_score.d},
                    {"map_frobenius", x.map_score.frobenius},
                    {"internal_splits", x.mean_internal_splits},
                    {"mean_log_lik", x.mean_log_lik}});
  }
  return {{"scenario",
           {{"p", s.p},
            {"sample_size_multiples", s.size_multiples},
            {"distributions", std::move(dists)},
            {"truth_mode", truth_mode_name(s.truth_mode)},
            {"drop", s.drop},
            {"drop_mode", s.drop_mode == DropMode::uniform ? "uniform" : "shortest"},
            {"replicates", s.replicates},
            {"fixed_truth", s.fixed_truth || s.truth.has_value()},
            {"algo", algo_name(s.algo)},
            {"seed", s.seed},
            {"level", s.level}}},
          {"cells", std::move(cells)},
          {"replicates", std::move(reps)}};
}

// One row per (n, distribution); with a fixed truth, one column per true
// split holding mean(sd) recovery in percent.
inline void write_scenario_csv(std::ostream& out, const ScenarioReport& r) {
  out << "n,distribution,coverage_median,mean_frobenius_median,mean_d_median,map_frobenius_median,"
         "min_recovery_median,internal_splits_mean";
  const bool per_split = !r.cells.empty() && !r.cells.front().split_recovery.empty();
  if (per_split) {
    for (const auto& [s, a] : r.cells.front().split_recovery) out << ",\"{" << s.key() << "}\"";
  }
  out << '\n';
  char buf[64];
  for (const auto& c : r.cells) {
    out << c.n << ',' << c.distribution << ',' << format_length(c.coverage.median) << ','
        << format_length(c.mean_frobenius.median) << ',' << format_length(c.mean_d.median) << ','
        << format_length(c.map_frobenius.median) << ',' << format_length(c.min_recovery.median) << ','
        << format_length(c.internal_splits.mean);
    if (per_split) {
      for (const auto& [s, a] : c.split_recovery) {
        std::snprintf(buf, sizeof buf, ",%.0f(%.0f)", 100.0 * a.mean, 100.0 * a.sd);
        out << buf;
      }
    }
    out << '\n';
  }
}

}  // namespace ultratree

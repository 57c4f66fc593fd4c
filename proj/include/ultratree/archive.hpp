#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tree.hpp"

namespace ultratree {

struct ArchiveRecord {
  long iter = 0;
  double log_prior = 0.0;
  double log_lik = 0.0;
  Tree tree;

  double log_posterior() const { return log_prior + log_lik; }
};

struct Provenance {
  std::string algo;
  std::string config_hash;
  std::uint64_t seed = 0;
};

// Retained states of one chain, in iteration order.
struct PosteriorArchive {
  int p = 0;
  std::vector<ArchiveRecord> records;
  Provenance provenance;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }

  std::vector<Tree> trees() const {
    std::vector<Tree> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.tree);
    return out;
  }
};

struct TracePoint {
  long iter = 0;
  double log_lik = 0.0;
  double log_prior = 0.0;
};

}  // namespace ultratree

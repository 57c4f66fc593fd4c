#pragma once

// Dinic max-flow on integer capacities, and the minimum-weight vertex cover of
// a bipartite graph read off the resulting minimum cut.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

namespace ultratree {

class MaxFlow {
 public:
  using cap_t = std::int64_t;
  static constexpr cap_t kInf = std::numeric_limits<cap_t>::max() / 4;

  explicit MaxFlow(int n) : adj_(static_cast<std::size_t>(n)), level_(static_cast<std::size_t>(n)), it_(static_cast<std::size_t>(n)) {}

  void add_edge(int u, int v, cap_t cap) {
    adj_[static_cast<std::size_t>(u)].push_back({v, static_cast<int>(adj_[static_cast<std::size_t>(v)].size()), cap});
    adj_[static_cast<std::size_t>(v)].push_back({u, static_cast<int>(adj_[static_cast<std::size_t>(u)].size()) - 1, 0});
  }

  cap_t run(int s, int t) {
    cap_t flow = 0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (cap_t f = dfs(s, t, kInf)) flow += f;
    }
    return flow;
  }

  // After run(): vertices reachable from s in the residual graph.
  std::vector<bool> source_side(int s) const {
    std::vector<bool> seen(adj_.size(), false);
    std::vector<int> stack{s};
    seen[static_cast<std::size_t>(s)] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& e : adj_[static_cast<std::size_t>(u)]) {
        if (e.cap > 0 && !seen[static_cast<std::size_t>(e.to)]) {
          seen[static_cast<std::size_t>(e.to)] = true;
          stack.push_back(e.to);
        }
      }
    }
    return seen;
  }

 private:
  struct Arc {
    int to;
    int rev;
    cap_t cap;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[static_cast<std::size_t>(s)] = 0;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (const auto& e : adj_[static_cast<std::size_t>(u)]) {
        if (e.cap > 0 && level_[static_cast<std::size_t>(e.to)] < 0) {
          level_[static_cast<std::size_t>(e.to)] = level_[static_cast<std::size_t>(u)] + 1;
          q.push(e.to);
        }
      }
    }
    return level_[static_cast<std::size_t>(t)] >= 0;
  }

  cap_t dfs(int u, int t, cap_t pushed) {
    if (u == t) return pushed;
    auto& edges = adj_[static_cast<std::size_t>(u)];
    for (int& i = it_[static_cast<std::size_t>(u)]; i < static_cast<int>(edges.size()); ++i) {
      Arc& e = edges[static_cast<std::size_t>(i)];
      if (e.cap <= 0 || level_[static_cast<std::size_t>(e.to)] != level_[static_cast<std::size_t>(u)] + 1) continue;
      if (cap_t f = dfs(e.to, t, std::min(pushed, e.cap))) {
        e.cap -= f;
        adj_[static_cast<std::size_t>(e.to)][static_cast<std::size_t>(e.rev)].cap += f;
        return f;
      }
    }
    return 0;
  }

  std::vector<std::vector<Arc>> adj_;
  std::vector<int> level_;
  std::vector<int> it_;
};

struct VertexCover {
  std::vector<bool> left;
  std::vector<bool> right;
  MaxFlow::cap_t weight = 0;
};

// Minimum-weight vertex cover of a bipartite graph. `edges` holds
// (left index, right index) pairs.
inline VertexCover min_weight_vertex_cover(const std::vector<MaxFlow::cap_t>& left_weights,
                                           const std::vector<MaxFlow::cap_t>& right_weights,
                                           const std::vector<std::pair<int, int>>& edges) {
  const int nl = static_cast<int>(left_weights.size());
  const int nr = static_cast<int>(right_weights.size());
  const int s = nl + nr;
  const int t = s + 1;
  MaxFlow g(nl + nr + 2);
  for (int i = 0; i < nl; ++i) g.add_edge(s, i, left_weights[static_cast<std::size_t>(i)]);
  for (int j = 0; j < nr; ++j) g.add_edge(nl + j, t, right_weights[static_cast<std::size_t>(j)]);
  for (const auto& [i, j] : edges) g.add_edge(i, nl + j, MaxFlow::kInf);
  VertexCover cover;
  cover.weight = g.run(s, t);
  const auto reach = g.source_side(s);
  cover.left.resize(static_cast<std::size_t>(nl));
  cover.right.resize(static_cast<std::size_t>(nr));
  for (int i = 0; i < nl; ++i) cover.left[static_cast<std::size_t>(i)] = !reach[static_cast<std::size_t>(i)];
  for (int j = 0; j < nr; ++j) cover.right[static_cast<std::size_t>(j)] = reach[static_cast<std::size_t>(nl + j)];
  return cover;
}

}  // namespace ultratree

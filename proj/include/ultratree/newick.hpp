#pragma once

// Rooted Newick with integer labels. Leaves are 1..p; the label 0 is a
// pseudo-leaf hanging from the top node whose branch length is the root
// edge. Children are written in order of their smallest leaf, lengths with
// 17 significant digits, so writing then reading is exact.
//
//   ((1:0.5,2:0.7):0.3,0:0.2,3:1.1);

#include <bit>
#include <cctype>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "tree.hpp"

namespace ultratree {

inline std::string format_length(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string to_newick(const Tree& t) {
  const int p = t.p();
  const auto nodes = build_nodes(t.topology());
  std::map<Split, const Node*> by_cluster;
  for (const auto& n : nodes) by_cluster[n.cluster] = &n;
  std::string out;
  auto emit = [&](auto&& self, const Node& n) -> void {
    out += '(';
    bool first = true;
    if (n.cluster == Split::full(p)) {
      out += "0:" + format_length(t.root_length());
      first = false;
    }
    for (const auto& c : n.children) {
      if (!first) out += ',';
      first = false;
      if (c.size() == 1) {
        out += std::to_string(c.min_leaf()) + ':' + format_length(t.leaf_length(c.min_leaf()));
      } else {
        self(self, *by_cluster.at(c));
        out += ':' + format_length(*t.internal_length(c));
      }
    }
    out += ')';
  };
  emit(emit, nodes.front());
  out += ';';
  return out;
}

namespace detail {

class NewickParser {
 public:
  explicit NewickParser(std::string_view s) : s_(s) {}

  struct Parsed {
    int label = -1;  // leaves only
    double length = -1.0;
    std::vector<Parsed> children;
  };

  Parsed parse() {
    Parsed top = node();
    skip();
    if (peek() == ':') {
      // a length on the top node is ignored only if zero
      ++pos_;
      if (number() != 0.0) fail("top node may not carry a branch length");
    }
    skip();
    if (peek() != ';') fail("expected ';'");
    ++pos_;
    skip();
    if (pos_ != s_.size()) fail("trailing characters");
    if (top.label >= 0) fail("a single leaf is not a tree");
    return top;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("newick: " + what + " at offset " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  double number() {
    skip();
    double x = 0.0;
    const char* b = s_.data() + pos_;
    const auto [end, ec] = std::from_chars(b, s_.data() + s_.size(), x);
    if (ec != std::errc() || end == b) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - b);
    if (!std::isfinite(x)) fail("non-finite length");
    return x;
  }

  Parsed node() {
    skip();
    Parsed n;
    if (peek() == '(') {
      ++pos_;
      for (;;) {
        Parsed c = node();
        skip();
        if (peek() != ':') fail("every child needs a branch length");
        ++pos_;
        c.length = number();
        if (c.length < 0.0) fail("negative branch length");
        n.children.push_back(std::move(c));
        skip();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == ')') {
          ++pos_;
          break;
        }
        fail("expected ',' or ')'");
      }
      if (n.children.size() < 2) fail("internal node with fewer than two children");
      return n;
    }
    const std::size_t start = pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (start == pos_) fail("expected a leaf label or '('");
    const auto text = s_.substr(start, pos_ - start);
    if (text.size() > 3) fail("leaf label too large");
    n.label = std::stoi(std::string(text));
    return n;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Zero-length internal edges collapse into multifurcations. The 0 leaf is
// optional; without it the root length is 0.
inline Tree parse_newick(std::string_view text) {
  using P = detail::NewickParser::Parsed;
  const P top = detail::NewickParser(text).parse();
  int p = 0;
  auto scan = [&](auto&& self, const P& n) -> void {
    if (n.label >= 0) p = std::max(p, n.label);
    for (const auto& c : n.children) self(self, c);
  };
  scan(scan, top);
  if (p < 1 || p > kMaxLeaves) throw ParseError("newick: leaf labels must cover 1..p with p in 1..64");
  std::vector<double> leaves(static_cast<std::size_t>(p), -1.0);
  std::vector<Edge> internal;
  double root = 0.0;
  bool saw_root = false;
  auto walk = [&](auto&& self, const P& n, int depth) -> std::uint64_t {
    if (n.label == 0) {
      if (depth != 1) throw ParseError("newick: leaf 0 must hang from the top node");
      if (saw_root) throw ParseError("newick: leaf 0 appears twice");
      saw_root = true;
      root = n.length;
      return 0;
    }
    if (n.label > 0) {
      auto& slot = leaves[static_cast<std::size_t>(n.label - 1)];
      if (slot >= 0.0) throw ParseError("newick: leaf " + std::to_string(n.label) + " appears twice");
      if (!(n.length > 0.0)) throw ParseError("newick: leaf " + std::to_string(n.label) + " needs a positive length");
      slot = n.length;
      return std::uint64_t{1} << (n.label - 1);
    }
    std::uint64_t bits = 0;
    for (const auto& c : n.children) bits |= self(self, c, depth + 1);
    if (depth > 0 && n.length > 0.0 && bits != leaf_mask(p) && std::popcount(bits) >= 2) {
      internal.push_back({Split(bits, p), n.length, EdgeKind::internal});
    } else if (depth > 0 && n.length > 0.0) {
      throw ParseError("newick: edge above {" + Split(bits, p).key() + "} is not an internal split");
    }
    return bits;
  };
  const std::uint64_t all = walk(walk, top, 0);
  if (all != leaf_mask(p)) throw ParseError("newick: leaf labels must cover 1..p");
  try {
    return Tree(p, std::move(internal), std::move(leaves), root);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("newick: ") + e.what());
  }
}

}  // namespace ultratree

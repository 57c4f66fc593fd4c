#pragma once

// Ultrametric covariance matrices and the bijection with extended treespace.
//
// tree_to_matrix sums |e_A| b_A b_A^T over every edge. matrix_to_tree undoes
// it level by level: subtract the smallest entry (the edge above the current
// node), group the remaining leaves into blocks of positive residual
// covariance, and recurse into each block.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "split.hpp"
#include "tree.hpp"

namespace ultratree {

inline constexpr double kDefaultTol = 1e-10;

enum class Clause {
  asymmetric,
  negative_entry,
  diagonal_dominance,
  three_point,  // S_ij >= min(S_ik, S_kj)
  not_positive_definite,
};

inline const char* clause_name(Clause c) {
  switch (c) {
    case Clause::asymmetric: return "asymmetric";
    case Clause::negative_entry: return "non-negativity";
    case Clause::diagonal_dominance: return "diagonal-dominance";
    case Clause::three_point: return "three-point";
    case Clause::not_positive_definite: return "positive-definiteness";
  }
  return "unknown";
}

// One violated clause. Indices are 1-based leaf labels; unused ones are 0.
struct Violation {
  Clause clause;
  int i = 0;
  int j = 0;
  int k = 0;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool valid() const { return violations.empty(); }
  bool has(Clause c) const {
    return std::any_of(violations.begin(), violations.end(),
                       [c](const Violation& v) { return v.clause == c; });
  }
  std::string summary() const {
    std::ostringstream os;
    for (const auto& v : violations) os << clause_name(v.clause) << ": " << v.detail << "; ";
    return os.str();
  }
};

class UltrametricViolation : public std::runtime_error {
 public:
  explicit UltrametricViolation(ValidationReport report)
      : std::runtime_error("not a strictly ultrametric matrix: " + report.summary()),
        report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

// Checks every clause and records the first witness of each violated one.
inline ValidationReport validate_ultrametric(const Eigen::MatrixXd& m, double tol = kDefaultTol) {
  if (m.rows() != m.cols()) throw DimensionError("validate_ultrametric: matrix is not square");
  ValidationReport report;
  const int p = static_cast<int>(m.rows());
  auto fmt = [](double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
  };

  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > tol) {
        report.violations.push_back({Clause::asymmetric, i + 1, j + 1, 0,
                                     "entries (" + std::to_string(i + 1) + "," +
                                         std::to_string(j + 1) + ") differ"});
        goto symmetric_done;
      }
    }
  }
symmetric_done:

  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (!(m(i, j) >= -tol)) {
        report.violations.push_back({Clause::negative_entry, i + 1, j + 1, 0,
                                     "entry (" + std::to_string(i + 1) + "," +
                                         std::to_string(j + 1) + ") = " + fmt(m(i, j))});
        goto negative_done;
      }
    }
  }
negative_done:

  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      if (!(m(i, i) - m(i, j) > tol)) {
        report.violations.push_back(
            {Clause::diagonal_dominance, i + 1, j + 1, 0,
             "diagonal (" + std::to_string(i + 1) + "," + std::to_string(i + 1) + ") = " +
                 fmt(m(i, i)) + " is not strictly greater than entry (" + std::to_string(i + 1) +
                 "," + std::to_string(j + 1) + ") = " + fmt(m(i, j))});
        goto dominance_done;
      }
    }
  }
dominance_done:

  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      for (int k = 0; k < p; ++k) {
        const double bound = std::min(m(i, k), m(k, j));
        if (m(i, j) < bound - tol) {
          report.violations.push_back({Clause::three_point, i + 1, j + 1, k + 1,
                                       "(i,j,k)=(" + std::to_string(i + 1) + "," +
                                           std::to_string(j + 1) + "," + std::to_string(k + 1) +
                                           "): " + fmt(m(i, j)) + " < min(" + fmt(m(i, k)) +
                                           ", " + fmt(m(k, j)) + ")"});
          goto three_point_done;
        }
      }
    }
  }
three_point_done:

  if (p > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(m.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success) {
      report.violations.push_back({Clause::not_positive_definite, 0, 0, 0,
                                   "Cholesky factorization failed"});
    }
  }
  return report;
}

// A validated strictly ultrametric, positive-definite matrix.
class UltrametricMatrix {
 public:
  UltrametricMatrix() = default;

  // Validates; throws UltrametricViolation carrying the report.
  static UltrametricMatrix from_matrix(Eigen::MatrixXd m, double tol = kDefaultTol) {
    auto report = validate_ultrametric(m, tol);
    if (!report.valid()) throw UltrametricViolation(std::move(report));
    // Symmetrize exactly from the lower triangle.
    m = m.selfadjointView<Eigen::Lower>();
    return UltrametricMatrix(std::move(m));
  }

  // Trusted construction from a matrix built by tree_to_matrix.
  static UltrametricMatrix from_trusted(Eigen::MatrixXd m) { return UltrametricMatrix(std::move(m)); }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  explicit UltrametricMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {}
  Eigen::MatrixXd m_;
};

// Dense E_A = b_A b_A^T, materialized on demand.
inline Eigen::MatrixXd basis_matrix(const Split& s) {
  const int p = s.p();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  for (int leaf : s.leaves()) b(leaf - 1) = 1.0;
  return b * b.transpose();
}

// Sum of |e_A| E_A over the given edges, in the order given. Zero lengths
// are allowed.
inline Eigen::MatrixXd dense_from_edges(int p, const std::vector<Edge>& edges) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  for (const auto& e : edges) {
    for (std::uint64_t x = e.split.bits(); x != 0; x &= x - 1) {
      const int a = std::countr_zero(x);
      for (std::uint64_t y = e.split.bits(); y != 0; y &= y - 1) m(a, std::countr_zero(y)) += e.length;
    }
  }
  return m;
}

// Accumulated in canonical edge order, so shrinking one length can never
// raise an entry.
inline Eigen::MatrixXd tree_to_dense(const Tree& t) { return dense_from_edges(t.p(), t.edges()); }

inline UltrametricMatrix tree_to_matrix(const Tree& t) {
  return UltrametricMatrix::from_trusted(tree_to_dense(t));
}

struct DecompositionLevel {
  double alpha = 0.0;
  // Blocks as 0-based indices into the input matrix, ordered by smallest
  // member, members ascending.
  std::vector<std::vector<int>> blocks;
  // Concatenation of the blocks: row r of the permuted matrix is row
  // permutation[r] of the input.
  std::vector<int> permutation;
  // Residual (input - alpha J) with rows and columns permuted; block diagonal.
  Eigen::MatrixXd permuted_residual;
};

namespace detail {

// Connected components of i ~ j iff residual(i, j) > tol, i != j.
inline std::vector<std::vector<int>> residual_blocks(const Eigen::MatrixXd& residual, double tol) {
  const int n = static_cast<int>(residual.rows());
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<int>> blocks;
  for (int start = 0; start < n; ++start) {
    if (label[static_cast<std::size_t>(start)] >= 0) continue;
    const int id = static_cast<int>(blocks.size());
    blocks.emplace_back();
    std::vector<int> stack{start};
    label[static_cast<std::size_t>(start)] = id;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      blocks.back().push_back(i);
      for (int j = 0; j < n; ++j) {
        if (j != i && label[static_cast<std::size_t>(j)] < 0 && residual(i, j) > tol) {
          label[static_cast<std::size_t>(j)] = id;
          stack.push_back(j);
        }
      }
    }
    std::sort(blocks.back().begin(), blocks.back().end());
  }
  // Discovery order already follows the smallest member of each block.
  return blocks;
}

}  // namespace detail

// One level of the decomposition on a raw matrix (no validation).
inline DecompositionLevel decompose_level(const Eigen::MatrixXd& m, double tol) {
  DecompositionLevel level;
  level.alpha = m.minCoeff();
  const Eigen::MatrixXd residual = m.array() - level.alpha;
  level.blocks = detail::residual_blocks(residual, tol);
  for (const auto& b : level.blocks) level.permutation.insert(level.permutation.end(), b.begin(), b.end());
  const int n = static_cast<int>(m.rows());
  level.permuted_residual.resize(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      level.permuted_residual(r, c) =
          residual(level.permutation[static_cast<std::size_t>(r)], level.permutation[static_cast<std::size_t>(c)]);
    }
  }
  return level;
}

inline DecompositionLevel decompose_step(const UltrametricMatrix& m, double tol = kDefaultTol) {
  if (m.dim() < 2) throw std::invalid_argument("decompose_step: dimension must be at least 2");
  return decompose_level(m.matrix(), tol);
}

namespace detail {

// Recurse into the submatrix on `members` (0-based leaf indices), whose
// residual already has the edges above this node removed. `is_root` marks
// the top call, whose alpha is the root length instead of an internal edge.
inline void peel(const Eigen::MatrixXd& sub, const std::vector<int>& members, int p, double tol,
                 std::vector<Edge>& internal, std::vector<double>& leaves) {
  const auto level = decompose_level(sub, tol);
  if (level.blocks.size() < 2) {
    ValidationReport r;
    r.violations.push_back({Clause::three_point, members.front() + 1, 0, 0,
                            "residual block does not separate into sub-blocks"});
    throw UltrametricViolation(std::move(r));
  }
  const Eigen::MatrixXd residual = sub.array() - level.alpha;
  for (const auto& block : level.blocks) {
    if (block.size() == 1) {
      const int local = block.front();
      leaves[static_cast<std::size_t>(members[static_cast<std::size_t>(local)])] = residual(local, local);
      continue;
    }
    const int n = static_cast<int>(block.size());
    Eigen::MatrixXd child(n, n);
    std::vector<int> child_members;
    std::uint64_t bits = 0;
    for (int r = 0; r < n; ++r) {
      const int gr = members[static_cast<std::size_t>(block[static_cast<std::size_t>(r)])];
      child_members.push_back(gr);
      bits |= std::uint64_t{1} << gr;
      for (int c = 0; c < n; ++c) {
        child(r, c) = residual(block[static_cast<std::size_t>(r)], block[static_cast<std::size_t>(c)]);
      }
    }
    const double len = child.minCoeff();
    internal.push_back({Split(bits, p), len, EdgeKind::internal});
    child.array() -= len;
    peel(child, child_members, p, tol, internal, leaves);
  }
}

}  // namespace detail

// Recovers the tree. Internal edges come from each block's smallest residual
// entry; a node with k >= 3 blocks is a multifurcation.
inline Tree matrix_to_tree(const UltrametricMatrix& um, double tol = kDefaultTol) {
  const Eigen::MatrixXd& m = um.matrix();
  const int p = um.dim();
  if (p == 0) throw std::invalid_argument("matrix_to_tree: empty matrix");
  if (p == 1) return Tree(1, {}, {m(0, 0)}, 0.0);
  const double root = m.minCoeff();
  Eigen::MatrixXd residual = m.array() - root;
  std::vector<int> members(static_cast<std::size_t>(p));
  std::iota(members.begin(), members.end(), 0);
  std::vector<Edge> internal;
  std::vector<double> leaves(static_cast<std::size_t>(p), 0.0);
  detail::peel(residual, members, p, tol, internal, leaves);
  return Tree(p, std::move(internal), std::move(leaves), root);
}

// Validates an arbitrary matrix first.
inline Tree matrix_to_tree(const Eigen::MatrixXd& m, double tol = kDefaultTol) {
  return matrix_to_tree(UltrametricMatrix::from_matrix(m, tol), tol);
}

// Entrywise order on the lower triangle including the diagonal.
inline bool vech_leq(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols()) {
    throw DimensionError("vech_leq: shapes differ");
  }
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = j; i < a.rows(); ++i) {
      if (!(a(i, j) <= b(i, j))) return false;
    }
  }
  return true;
}

inline bool vech_leq(const UltrametricMatrix& a, const UltrametricMatrix& b) {
  return vech_leq(a.matrix(), b.matrix());
}

// Half-vectorization (column-major lower triangle).
inline Eigen::VectorXd vech(const Eigen::MatrixXd& m) {
  const Eigen::Index p = m.rows();
  Eigen::VectorXd out(p * (p + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = j; i < p; ++i) out(k++) = m(i, j);
  }
  return out;
}

// Relabel leaves: leaf i of the input becomes leaf perm[i-1] (1-based).
inline Tree relabel(const Tree& t, const std::vector<int>& perm) {
  const int p = t.p();
  auto map_bits = [&](const Split& s) {
    std::uint64_t bits = 0;
    for (int leaf : s.leaves()) bits |= std::uint64_t{1} << (perm[static_cast<std::size_t>(leaf - 1)] - 1);
    return Split(bits, p);
  };
  std::vector<Edge> internal;
  for (const auto& e : t.internal_edges()) internal.push_back({map_bits(e.split), e.length, EdgeKind::internal});
  std::vector<double> leaves(static_cast<std::size_t>(p));
  for (int i = 1; i <= p; ++i) leaves[static_cast<std::size_t>(perm[static_cast<std::size_t>(i - 1)] - 1)] = t.leaf_length(i);
  return Tree(p, std::move(internal), std::move(leaves), t.root_length());
}

}  // namespace ultratree

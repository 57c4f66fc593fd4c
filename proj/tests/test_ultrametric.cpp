#include <gtest/gtest.h>

#include "ultratree/treespace.hpp"
#include "ultratree/ultrametric.hpp"
#include "oracles.hpp"

using namespace ultratree;

namespace {
Tree random_any(RngStream& rng, int p) { return oracle::random_any(rng, p, 0.5, 0.5); }
}  // namespace

namespace {

Split S(std::initializer_list<int> leaves, int p) { return Split::from_leaves(leaves, p); }

Eigen::MatrixXd M(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(rows.size(), rows.begin()->size());
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

// Root-to-MRCA path sum, written against the explicit tree.
Eigen::MatrixXd path_sum_oracle(const Tree& t) {
  const int p = t.p();
  Eigen::MatrixXd m(p, p);
  for (int i = 1; i <= p; ++i) {
    for (int j = 1; j <= p; ++j) {
      double s = t.root_length();
      for (const auto& e : t.internal_edges()) {
        if (e.split.contains(i) && e.split.contains(j)) s += e.length;
      }
      if (i == j) s += t.leaf_length(i);
      m(i - 1, j - 1) = s;
    }
  }
  return m;
}

}  // namespace

TEST(Validate, StarIsValid) {
  EXPECT_TRUE(validate_ultrametric(M({{2, 1, 1}, {1, 2, 1}, {1, 1, 2}})).valid());
}

TEST(Validate, DiagonalNotDominant) {
  const auto r = validate_ultrametric(M({{1, 1}, {1, 1}}));
  EXPECT_FALSE(r.valid());
  EXPECT_TRUE(r.has(Clause::diagonal_dominance));
}

TEST(Validate, ThreePointWitness) {
  const auto r = validate_ultrametric(M({{3, 0, 1}, {0, 3, 2}, {1, 2, 3}}));
  ASSERT_TRUE(r.has(Clause::three_point));
  const auto& v = *std::find_if(r.violations.begin(), r.violations.end(),
                                [](const Violation& x) { return x.clause == Clause::three_point; });
  EXPECT_EQ(v.i, 1);
  EXPECT_EQ(v.j, 2);
  EXPECT_EQ(v.k, 3);
}

TEST(Validate, NegativeAndNonSquare) {
  EXPECT_TRUE(validate_ultrametric(M({{2, -1}, {-1, 2}})).has(Clause::negative_entry));
  EXPECT_THROW(validate_ultrametric(Eigen::MatrixXd::Ones(2, 3)), DimensionError);
  EXPECT_TRUE(validate_ultrametric(M({{2, 1}, {0.5, 2}})).has(Clause::asymmetric));
}

TEST(Psi, StarP3) {
  const Tree t(3, {}, {1, 1, 1}, 1.0);
  EXPECT_EQ(tree_to_matrix(t).matrix(), M({{2, 1, 1}, {1, 2, 1}, {1, 1, 2}}));
}

TEST(Psi, ZeroRootIsDiagonal) {
  const Tree t(2, {}, {0.7, 1.3}, 0.0);
  EXPECT_EQ(tree_to_matrix(t).matrix(), M({{0.7, 0}, {0, 1.3}}));
}

TEST(Psi, NestedSplitsP4) {
  const Tree t(4, {{S({1, 2}, 4), 0.5}, {S({1, 2, 3}, 4), 0.2}}, {1, 1, 1, 1}, 0.1);
  const auto m = tree_to_matrix(t);
  EXPECT_NEAR(m(0, 1), 0.8, 1e-15);
  EXPECT_NEAR(m(0, 2), 0.3, 1e-15);
  EXPECT_NEAR(m(0, 3), 0.1, 1e-15);
  EXPECT_TRUE(m.matrix().isApprox(path_sum_oracle(t), 1e-15));
}

TEST(Psi, MatchesPathSumOracleAndValidates) {
  RngStream rng(11, 0);
  for (int i = 0; i < 500; ++i) {
    const Tree t = random_any(rng, 2 + static_cast<int>(rng.uniform_index(15)));
    const auto m = tree_to_matrix(t);
    EXPECT_LE((m.matrix() - path_sum_oracle(t)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(validate_ultrametric(m.matrix()).valid());
  }
}

TEST(Psi, ExactRationalInputValidatesWithZeroTol) {
  const Tree t(4, {{S({1, 2}, 4), 0.5}, {S({3, 4}, 4), 0.25}}, {1, 2, 1, 0.5}, 0.125);
  EXPECT_TRUE(validate_ultrametric(tree_to_matrix(t).matrix(), 0.0).valid());
}

TEST(Decompose, Diagonal) {
  const auto m = UltrametricMatrix::from_matrix(M({{1, 0, 0}, {0, 2, 0}, {0, 0, 3}}));
  const auto lvl = decompose_step(m);
  EXPECT_EQ(lvl.alpha, 0.0);
  EXPECT_EQ(lvl.blocks.size(), 3u);
}

TEST(Decompose, Star) {
  const auto m = UltrametricMatrix::from_matrix(M({{2, 1, 1}, {1, 2, 1}, {1, 1, 2}}));
  const auto lvl = decompose_step(m);
  EXPECT_EQ(lvl.alpha, 1.0);
  EXPECT_EQ(lvl.blocks.size(), 3u);
  EXPECT_EQ(lvl.permuted_residual, Eigen::MatrixXd::Identity(3, 3));
}

TEST(Decompose, SevenLeavesThreeBlocks) {
  // One internal edge of length zero merges three subtrees at the top.
  const int p = 7;
  const Tree t(p,
               {{S({2, 5}, p), 0.4}, {S({1, 3}, p), 0.5}, {S({4, 6, 7}, p), 0.6}, {S({6, 7}, p), 0.2}},
               {1, 1.5, 0.7, 0.9, 1.1, 0.3, 0.8}, 0.3);
  const auto m = tree_to_matrix(t);
  const auto lvl = decompose_step(m);
  EXPECT_DOUBLE_EQ(lvl.alpha, 0.3);
  ASSERT_EQ(lvl.blocks.size(), 3u);
  EXPECT_EQ(lvl.blocks[0], (std::vector<int>{0, 2}));
  EXPECT_EQ(lvl.blocks[1], (std::vector<int>{1, 4}));
  EXPECT_EQ(lvl.blocks[2], (std::vector<int>{3, 5, 6}));
  EXPECT_EQ(lvl.permutation, (std::vector<int>{0, 2, 1, 4, 3, 5, 6}));
  // Block diagonal residual.
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < p; ++c) {
      const bool same = (r < 2 && c < 2) || (r >= 2 && r < 4 && c >= 2 && c < 4) || (r >= 4 && c >= 4);
      if (!same) {
        EXPECT_EQ(lvl.permuted_residual(r, c), 0.0);
      }
    }
  }
  const Tree back = matrix_to_tree(m);
  EXPECT_EQ(back.topology(), t.topology());
  EXPECT_LE(*max_length_difference(back, t), 1e-12);
}

TEST(Phi, StarAndDiagonal) {
  const Tree star = matrix_to_tree(M({{2, 1, 1}, {1, 2, 1}, {1, 1, 2}}));
  EXPECT_EQ(star, Tree(3, {}, {1, 1, 1}, 1.0));
  const Tree diag = matrix_to_tree(M({{1, 0, 0}, {0, 2, 0}, {0, 0, 3}}));
  EXPECT_EQ(diag, Tree(3, {}, {1, 2, 3}, 0.0));
}

TEST(Phi, SingleLeaf) {
  const Tree t = matrix_to_tree(M({{2.5}}));
  EXPECT_EQ(t.root_length(), 0.0);
  EXPECT_EQ(t.leaf_length(1), 2.5);
}

TEST(Phi, RejectsInvalidWithWitness) {
  try {
    matrix_to_tree(M({{3, 0, 1}, {0, 3, 2}, {1, 2, 3}}));
    FAIL();
  } catch (const UltrametricViolation& e) {
    EXPECT_TRUE(e.report().has(Clause::three_point));
  }
}

TEST(RoundTrip, TreeMatrixTree) {
  RngStream rng(12, 0);
  for (int i = 0; i < 10000; ++i) {
    const Tree t = random_any(rng, 2 + static_cast<int>(rng.uniform_index(15)));
    const auto m = tree_to_matrix(t);
    const Tree back = matrix_to_tree(m);
    ASSERT_EQ(back.topology(), t.topology());
    ASSERT_LE(*max_length_difference(back, t), 1e-12);
    ASSERT_LE((tree_to_matrix(back).matrix() - m.matrix()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PositiveDefinite, CholeskySucceeds) {
  RngStream rng(13, 0);
  for (int i = 0; i < 1000; ++i) {
    const Tree t = random_any(rng, 1 + static_cast<int>(rng.uniform_index(16)) + 1);
    Eigen::LLT<Eigen::MatrixXd> llt(tree_to_matrix(t).matrix());
    ASSERT_EQ(llt.info(), Eigen::Success);
  }
}

TEST(Permutation, PhiCommutesWithRelabeling) {
  RngStream rng(14, 0);
  for (int i = 0; i < 500; ++i) {
    const int p = 2 + static_cast<int>(rng.uniform_index(11));
    const Tree t = random_any(rng, p);
    std::vector<int> perm(static_cast<std::size_t>(p));
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    const Eigen::MatrixXd m = tree_to_matrix(t).matrix();
    Eigen::MatrixXd pm(p, p);
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) pm(perm[a] - 1, perm[b] - 1) = m(a, b);
    const Tree lhs = matrix_to_tree(pm);
    const Tree rhs = relabel(matrix_to_tree(m), perm);
    ASSERT_EQ(lhs.topology(), rhs.topology());
    ASSERT_LE(*max_length_difference(lhs, rhs), 1e-12);
  }
}

TEST(Order, Reflexive) {
  const auto m = UltrametricMatrix::from_matrix(M({{2, 1}, {1, 2}}));
  EXPECT_TRUE(vech_leq(m, m));
  EXPECT_THROW(vech_leq(Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(3, 3)), DimensionError);
}

TEST(Order, ShrinkingAnyEdgeNeverIncreasesEntries) {
  RngStream rng(15, 0);
  for (int i = 0; i < 1000; ++i) {
    const Tree t = random_any(rng, 2 + static_cast<int>(rng.uniform_index(12)));
    auto edges = t.edges();
    const std::size_t j = rng.uniform_index(edges.size());
    edges[j].length *= rng.uniform();
    if (edges[j].kind == EdgeKind::leaf && edges[j].length == 0.0) continue;
    const Tree smaller = Tree::from_edges(t.p(), edges);
    EXPECT_TRUE(vech_leq(tree_to_matrix(smaller), tree_to_matrix(t)));
  }
}

TEST(Order, ReducedInternalLengthDifferenceIsBasisMatrix) {
  const Tree t(4, {{S({1, 2}, 4), 0.5}, {S({3, 4}, 4), 0.25}}, {1, 1, 1, 1}, 0.5);
  const Tree s(4, {{S({1, 2}, 4), 0.375}, {S({3, 4}, 4), 0.25}}, {1, 1, 1, 1}, 0.5);
  EXPECT_EQ(tree_to_matrix(t).matrix() - tree_to_matrix(s).matrix(), 0.125 * basis_matrix(S({1, 2}, 4)));
  EXPECT_TRUE(vech_leq(tree_to_matrix(s), tree_to_matrix(t)));
}

TEST(Order, BoundaryBelowEveryResolution) {
  const Topology top(4, {S({1, 2}, 4), S({3, 4}, 4)});
  const Tree boundary(4, {{S({1, 2}, 4), 0.5}}, {1, 1, 1, 1}, 0.2);
  for (const auto& c : resolution_candidates(top, S({3, 4}, 4))) {
    const Tree resolved(4, {{S({1, 2}, 4), 0.5}, {c, 0.3}}, {1, 1, 1, 1}, 0.2);
    EXPECT_TRUE(vech_leq(tree_to_matrix(boundary), tree_to_matrix(resolved)));
  }
}

TEST(Vech, Layout) {
  const Eigen::VectorXd v = vech(M({{1, 2, 4}, {2, 3, 5}, {4, 5, 6}}));
  EXPECT_EQ(v.size(), 6);
  EXPECT_EQ(v(0), 1);
  EXPECT_EQ(v(1), 2);
  EXPECT_EQ(v(2), 4);
  EXPECT_EQ(v(3), 3);
}

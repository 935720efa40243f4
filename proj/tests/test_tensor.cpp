#include "tensoria/dimension_tree.hpp"
#include "tensoria/errors.hpp"
#include "tensoria/tensor.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

using namespace tensoria;
using testutil::decode;
using testutil::random_tensor;

TEST(Shape, RejectsZeroAndEmpty) {
  EXPECT_THROW(Shape({2, 0, 3}), ShapeError);
  EXPECT_THROW(Shape(std::vector<Index>{}), ShapeError);
  EXPECT_EQ(Shape({2, 3, 4}).size(), 24u);
}

TEST(Shape, RejectsOverflow) {
  const Index big = Index(1) << 40;
  EXPECT_THROW(Shape({big, big}), ShapeError);
}

TEST(DenseTensor, RejectsWrongLengthAndNonFinite) {
  EXPECT_THROW(DenseTensor(Shape{2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(DenseTensor(Shape{2}, {1, std::nan("")}), ShapeError);
}

TEST(DenseTensor, RowMajorLastIndexFastest) {
  DenseTensor t(Shape{2, 3}, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.at({0, 2}), 2);
  EXPECT_EQ(t.at({1, 0}), 3);
}

TEST(Inner, OrthonormalElementary) {
  DenseTensor e(Shape{2, 2}, {1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(inner(e, e), 1.0);
}

TEST(Inner, NormSquared) {
  const auto u = random_tensor(Shape{3, 4, 2}, 1);
  EXPECT_NEAR(inner(u, u), norm(u) * norm(u), 1e-12 * inner(u, u));
}

TEST(Inner, ElementaryFactorizes) {
  Rng rng(7);
  const Eigen::VectorXd a = testutil::random_vector(3, rng), b = testutil::random_vector(4, rng);
  const Eigen::VectorXd c = testutil::random_vector(3, rng), d = testutil::random_vector(4, rng);
  // explicit loops for both sides
  double lhs = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) lhs += a(i) * b(j) * c(i) * d(j);
  double ac = 0, bd = 0;
  for (int i = 0; i < 3; ++i) ac += a(i) * c(i);
  for (int j = 0; j < 4; ++j) bd += b(j) * d(j);
  EXPECT_NEAR(lhs, ac * bd, 1e-12);
  EXPECT_NEAR(inner(outer({a, b}), outer({c, d})), ac * bd, 1e-12);
}

TEST(Inner, ShapeMismatchThrows) {
  EXPECT_THROW((void)inner(DenseTensor(Shape{2, 3}), DenseTensor(Shape{3, 2})), ShapeError);
}

TEST(Norm, Trivial) {
  EXPECT_EQ(norm(DenseTensor(Shape{3, 3})), 0.0);
  DenseTensor t(Shape{2, 2});
  t.at({1, 0}) = 3;
  EXPECT_DOUBLE_EQ(norm(t), 3.0);
}

TEST(Norm, EqualsFrobeniusOfEveryUnfolding) {
  const auto u = random_tensor(Shape{2, 3, 2, 3}, 3);
  double direct = 0;
  for (double x : u.data()) direct += x * x;
  direct = std::sqrt(direct);
  for (unsigned mask = 1; mask < 15; ++mask) {
    std::vector<Index> m;
    for (Index k = 0; k < 4; ++k)
      if (mask & (1u << k)) m.push_back(k);
    const Eigen::MatrixXd M = matricize_matrix(u, ModeSet(m));
    double s = 0;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j) s += M(i, j) * M(i, j);
    EXPECT_NEAR(std::sqrt(s), direct, 1e-12 * direct);
    EXPECT_NEAR(norm(u), direct, 1e-12 * direct);
  }
}

TEST(Matricize, Order2IdentityMode0) {
  const auto u = random_tensor(Shape{3, 4}, 5);
  const auto m = matricize(u, ModeSet{0});
  EXPECT_EQ(m.shape(), u.shape());
  EXPECT_EQ(m.data(), u.data());
}

TEST(Matricize, Mode1OfOrder3EntrywiseOracle) {
  const auto u = random_tensor(Shape{2, 2, 2}, 9);
  const Eigen::MatrixXd m = matricize_matrix(u, ModeSet{1});
  ASSERT_EQ(m.rows(), 2);
  ASSERT_EQ(m.cols(), 4);
  for (Index i1 = 0; i1 < 2; ++i1)
    for (Index i2 = 0; i2 < 2; ++i2)
      for (Index i3 = 0; i3 < 2; ++i3) {
        const double expected = u.data()[i1 * 4 + i2 * 2 + i3];
        EXPECT_EQ(m(static_cast<Eigen::Index>(i2), static_cast<Eigen::Index>(i1 * 2 + i3)), expected);
      }
}

TEST(Matricize, GeneralOracleAgainstDecode) {
  const Shape s{2, 3, 2, 2};
  const auto u = random_tensor(s, 11);
  const ModeSet alpha{1, 3};
  const Eigen::MatrixXd m = matricize_matrix(u, alpha);
  for (Index flat = 0; flat < s.size(); ++flat) {
    const auto idx = decode(flat, s.dims());
    const Index row = idx[1] * 2 + idx[3];
    const Index col = idx[0] * 2 + idx[2];
    EXPECT_EQ(m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)), u.data()[flat]);
  }
}

TEST(Matricize, RejectsEmptyOrFull) {
  const auto u = random_tensor(Shape{2, 2}, 1);
  EXPECT_THROW((void)matricize(u, ModeSet{}), ShapeError);
  EXPECT_THROW((void)matricize(u, ModeSet{0, 1}), ShapeError);
}

TEST(Dematricize, RoundTripOrder4) {
  const Shape s{3, 2, 4, 2};
  const auto u = random_tensor(s, 13);
  const ModeSet alpha{0, 2};
  const auto back = dematricize(matricize(u, alpha), alpha, s);
  EXPECT_EQ(back.data(), u.data());
  EXPECT_DOUBLE_EQ(norm(back), norm(u));
}

TEST(Dematricize, RankOneMatrixIsOuterProduct) {
  Rng rng(2);
  const Eigen::VectorXd a = testutil::random_vector(3, rng), b = testutil::random_vector(4, rng);
  const Eigen::MatrixXd m = a * b.transpose();
  const auto t = dematricize(m, ModeSet{0}, Shape{3, 4});
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j)
      EXPECT_EQ(t.at({i, j}), a(static_cast<Eigen::Index>(i)) * b(static_cast<Eigen::Index>(j)));
}

TEST(Dematricize, InconsistentDimsThrow) {
  EXPECT_THROW((void)dematricize(Eigen::MatrixXd::Zero(2, 5), ModeSet{0}, Shape{2, 3}), ShapeError);
}

TEST(Matricize, ExhaustiveRoundTripUpTo3333) {
  // every shape with dims in {1,2,3}, order 2..4, every proper mode subset
  Index checked = 0;
  for (Index d = 2; d <= 4; ++d) {
    Index combos = 1;
    for (Index k = 0; k < d; ++k) combos *= 3;
    for (Index c = 0; c < combos; ++c) {
      std::vector<Index> dims(d);
      Index cc = c;
      for (Index k = 0; k < d; ++k) {
        dims[k] = 1 + cc % 3;
        cc /= 3;
      }
      const Shape s(dims);
      const auto u = random_tensor(s, c + 100 * d);
      for (unsigned mask = 1; mask + 1 < (1u << d); ++mask) {
        std::vector<Index> m;
        for (Index k = 0; k < d; ++k)
          if (mask & (1u << k)) m.push_back(k);
        const ModeSet alpha(m);
        ASSERT_EQ(dematricize(matricize(u, alpha), alpha, s).data(), u.data());
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 1000u);
}

TEST(ModeApply, IdentityUnchanged) {
  const auto u = random_tensor(Shape{3, 4, 2}, 4);
  EXPECT_EQ(mode_apply(u, 1, Eigen::MatrixXd::Identity(4, 4)).data(), u.data());
}

TEST(ModeApply, Order2EqualsMatrixProduct) {
  Rng rng(5);
  const auto u = random_tensor(Shape{3, 4}, 6);
  const Eigen::MatrixXd M = testutil::random_matrix(5, 3, rng);
  const auto r = mode_apply(u, 0, M);
  const Eigen::MatrixXd U = matricize_matrix(u, ModeSet{0});
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 4; ++j) {
      double s = 0;
      for (Index k = 0; k < 3; ++k) s += M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) *
                                         U(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
      EXPECT_NEAR(r.at({i, j}), s, 1e-12);
    }
}

TEST(ModeApply, DistinctModesCommute) {
  Rng rng(8);
  const auto u = random_tensor(Shape{3, 4, 2}, 6);
  const Eigen::MatrixXd M1 = testutil::random_matrix(2, 3, rng), M2 = testutil::random_matrix(5, 4, rng);
  const auto a = mode_apply(mode_apply(u, 0, M1), 1, M2);
  const auto b = mode_apply(mode_apply(u, 1, M2), 0, M1);
  EXPECT_LT(testutil::rel_diff(a, b), 1e-14);
}

TEST(ModeApply, LinearInTensor) {
  Rng rng(9);
  const auto u = random_tensor(Shape{3, 4, 2}, 10), w = random_tensor(Shape{3, 4, 2}, 11);
  const Eigen::MatrixXd M = testutil::random_matrix(3, 2, rng);
  const double lam = -1.7;
  const auto lhs = mode_apply(u + lam * w, 2, M);
  const auto rhs = mode_apply(u, 2, M) + lam * mode_apply(w, 2, M);
  EXPECT_LT(testutil::rel_diff(lhs, rhs), 1e-14);
}

TEST(ModeApply, DimensionMismatchThrows) {
  const auto u = random_tensor(Shape{3, 4}, 1);
  EXPECT_THROW((void)mode_apply(u, 1, Eigen::MatrixXd::Zero(2, 3)), ShapeError);
}

TEST(AlphaRank, ElementaryIsOne) {
  Rng rng(1);
  const auto t = outer({testutil::random_vector(3, rng), testutil::random_vector(4, rng), testutil::random_vector(2, rng)});
  EXPECT_EQ(alpha_rank(t, ModeSet{0}, 0.0), 1u);
  EXPECT_EQ(alpha_rank(t, ModeSet{0, 2}, 0.0), 1u);
  EXPECT_EQ(alpha_rank(DenseTensor(Shape{3, 3}), ModeSet{0}, 0.0), 0u);
}

TEST(AlphaRank, SumOfTwoElementary) {
  Rng rng(3);
  auto t = outer({testutil::random_vector(3, rng), testutil::random_vector(3, rng), testutil::random_vector(3, rng)});
  t += outer({testutil::random_vector(3, rng), testutil::random_vector(3, rng), testutil::random_vector(3, rng)});
  const Eigen::MatrixXd m = matricize_matrix(t, ModeSet{0});
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  EXPECT_GT(sv(1), 1e-8 * sv(0));
  EXPECT_LT(sv(2), 1e-12 * sv(0));
  EXPECT_EQ(alpha_rank(t, ModeSet{0}, 0.0), 2u);
}

TEST(AlphaRank, SymmetricInComplement) {
  const auto u = random_tensor(Shape{2, 3, 2, 2}, 21);
  const Shape s = u.shape();
  for (unsigned mask = 1; mask < 15; ++mask) {
    std::vector<Index> m;
    for (Index k = 0; k < 4; ++k)
      if (mask & (1u << k)) m.push_back(k);
    const ModeSet a(m);
    EXPECT_EQ(alpha_rank(u, a, 0.0), alpha_rank(u, a.complement(4), 0.0));
  }
}

TEST(AlphaRank, RelativeThreshold) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  m.diagonal() << 100, 1, 1e-3;
  const auto t = DenseTensor::from_matrix(m);
  EXPECT_EQ(alpha_rank(t, ModeSet{0}, 0.0), 3u);
  EXPECT_EQ(alpha_rank(t, ModeSet{0}, 1e-3), 2u);
  EXPECT_EQ(alpha_rank(t, ModeSet{0}, 0.5), 1u);
  EXPECT_EQ(alpha_rank(1e6 * t, ModeSet{0}, 1e-3), 2u);
}

TEST(DimensionTree, BalancedStructure) {
  const auto t = DimensionTree::balanced(4);
  EXPECT_EQ(t.num_nodes(), 7u);
  EXPECT_EQ(t.node(0).modes, ModeSet({0, 1, 2, 3}));
  EXPECT_EQ(t.node(1).modes, ModeSet({0, 1}));
  EXPECT_EQ(t.node(2).modes, ModeSet({2, 3}));
  EXPECT_EQ(t.depth(), 2u);
  EXPECT_NEAR(t.hosvd_bound_constant(), std::sqrt(5.0), 1e-15);
  const auto t3 = DimensionTree::balanced(3);
  EXPECT_EQ(t3.node(1).modes, ModeSet({0, 1}));
  EXPECT_EQ(t3.node(2).modes, ModeSet({2}));
}

TEST(DimensionTree, LinearStructure) {
  const auto t = DimensionTree::linear(4);
  EXPECT_EQ(t.num_nodes(), 7u);
  bool found = false;
  for (const auto& n : t.nodes())
    if (n.modes == ModeSet({2, 3})) found = true;
  EXPECT_TRUE(found);
  EXPECT_EQ(t.depth(), 3u);
}

TEST(DimensionTree, ChildrenOrderedBySmallestModeAndBfs) {
  // parent list given in scrambled order
  std::vector<ModeSet> m{ModeSet{2}, ModeSet{0, 1, 2}, ModeSet{0, 1}, ModeSet{1}, ModeSet{0}};
  std::vector<long> p{1, -1, 1, 2, 2};
  const DimensionTree t(m, p);
  EXPECT_EQ(t, DimensionTree::balanced(3));
}

TEST(DimensionTree, RejectsBadTrees) {
  EXPECT_THROW(DimensionTree({ModeSet{0, 1}, ModeSet{0}}, {-1, 0}), ShapeError);  // one child
  EXPECT_THROW(DimensionTree({ModeSet{0, 1, 2}, ModeSet{0, 1}, ModeSet{1, 2}}, {-1, 0, 0}), ShapeError);
  EXPECT_THROW(DimensionTree({ModeSet{0, 1}, ModeSet{0}, ModeSet{1}}, {-1, -1, 0}), ShapeError);
  EXPECT_THROW(DimensionTree({ModeSet{1, 2}, ModeSet{1}, ModeSet{2}}, {-1, 0, 0}), ShapeError);
}

TEST(DimensionTree, ParentListRoundTrip) {
  const auto t = DimensionTree::balanced(5);
  std::vector<ModeSet> m;
  for (const auto& n : t.nodes()) m.push_back(n.modes);
  EXPECT_EQ(DimensionTree(m, t.parent_list()), t);
}

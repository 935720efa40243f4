#include "tensoria/decompose.hpp"
#include "tensoria/errors.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

using namespace tensoria;
using testutil::rel_diff;

namespace {
Eigen::MatrixXd reconstruct(const SVDResult& s) {
  return s.left * s.singular_values.asDiagonal() * s.right.transpose();
}
}  // namespace

TEST(TruncatedSvd, DiagonalExamples) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  m.diagonal() << 3, 2, 1;
  auto r2 = truncated_svd(DenseTensor::from_matrix(m), 2);
  EXPECT_NEAR(r2.report.achieved_error, 1.0, 1e-14);
  EXPECT_NEAR(r2.tensor.singular_values(0), 3.0, 1e-14);
  EXPECT_NEAR(r2.tensor.singular_values(1), 2.0, 1e-14);
  auto r3 = truncated_svd(DenseTensor::from_matrix(m), 3);
  EXPECT_NEAR(r3.report.achieved_error, 0.0, 1e-14);
  auto r9 = truncated_svd(DenseTensor::from_matrix(m), 9);
  EXPECT_EQ(r9.report.ranks_used[0], 3u);
}

TEST(TruncatedSvd, ReportedErrorMatchesSubtraction) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXd m = testutil::random_matrix(5, 4, rng);
    for (Index r = 0; r <= 4; ++r) {
      const auto res = truncated_svd(m, r);
      const double direct = (m - reconstruct(res.tensor)).norm();
      EXPECT_NEAR(res.report.achieved_error, direct, 1e-10 * m.norm());
      // Pythagoras
      const double kept = res.tensor.singular_values.squaredNorm();
      EXPECT_NEAR(m.squaredNorm(), kept + direct * direct, 1e-10 * m.squaredNorm());
    }
  }
}

TEST(TruncatedSvd, Invariants) {
  Rng rng(2);
  const Eigen::MatrixXd m = testutil::random_matrix(6, 4, rng);
  const auto res = truncated_svd(m, 4);
  const auto& s = res.tensor;
  EXPECT_LT((s.left.transpose() * s.left - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-12);
  EXPECT_LT((s.right.transpose() * s.right - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-12);
  for (Eigen::Index i = 1; i < 4; ++i) EXPECT_GE(s.singular_values(i - 1), s.singular_values(i));
  EXPECT_LT((reconstruct(s) - m).norm(), 1e-10 * m.norm());
  // sign convention
  for (Eigen::Index j = 0; j < 4; ++j) {
    Eigen::Index k;
    s.left.col(j).cwiseAbs().maxCoeff(&k);
    EXPECT_GE(s.left(k, j), 0.0);
  }
}

TEST(TruncatedSvd, RankOneBeatsRandomCandidates) {
  // integer matrices in [-2,2], compared against random normalized rank-one candidates
  Rng rng(3);
  for (int t = 0; t < 40; ++t) {
    const auto rows = rng.uniform_int(1, 4), cols = rng.uniform_int(1, 4);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<double>(rng.uniform_int(-2, 2));
    const double e = truncated_svd(m, 1).report.achieved_error;
    for (int c = 0; c < 500; ++c) {
      Eigen::VectorXd a = testutil::random_vector(rows, rng), b = testutil::random_vector(cols, rng);
      a.normalize();
      b.normalize();
      // best multiple of a b^T
      const double coef = a.dot(m * b);
      EXPECT_LE(e, (m - coef * a * b.transpose()).norm() + 1e-12);
    }
  }
}

TEST(Hosvd, ExactOnElementaryAndFullRank) {
  Rng rng(4);
  const auto t = outer({testutil::random_vector(3, rng), testutil::random_vector(4, rng), testutil::random_vector(2, rng)});
  EXPECT_LT(hosvd(t, {1, 1, 1}).report.achieved_error, 1e-12 * norm(t));
  const auto u = testutil::random_tensor(Shape{3, 4, 2}, 5);
  EXPECT_LT(hosvd(u, {3, 4, 2}).report.achieved_error, 1e-12 * norm(u));
}

TEST(Hosvd, ErrorBoundsAndStructure) {
  const auto u = testutil::random_tensor(Shape{4, 4, 4}, 6);
  const auto res = hosvd(u, {2, 2, 2});
  double tails = 0;
  for (Index nu = 0; nu < 3; ++nu) {
    const auto s = unfolding_singular_values(u, ModeSet{nu});
    tails += s.tail(2).squaredNorm();
    // factor = dominant left singular vectors
    const auto& U = res.tensor.factor(nu);
    EXPECT_LT((U.transpose() * U - Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-12);
  }
  EXPECT_LE(res.report.achieved_error * res.report.achieved_error, tails * (1 + 1e-12));
  EXPECT_NEAR(res.report.bound_constant, std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(res.report.achieved_error, norm(u - to_dense(res.tensor)), 1e-14);
}

TEST(Hosvd, ClampsWithWarning) {
  const auto u = testutil::random_tensor(Shape{2, 3, 3}, 7);
  const auto res = hosvd(u, {5, 2, 2});
  EXPECT_EQ(res.tensor.ranks()[0], 2u);
  EXPECT_FALSE(res.report.warnings.empty());
}

TEST(Hosvd, NestedSubspaces) {
  const auto u = testutil::random_tensor(Shape{4, 5, 4}, 8);
  const auto a = hosvd(u, {1, 2, 2}).tensor;
  const auto b = hosvd(u, {3, 3, 2}).tensor;
  for (Index nu = 0; nu < 3; ++nu) {
    const Eigen::MatrixXd Pr = a.factor(nu) * a.factor(nu).transpose();
    const Eigen::MatrixXd Ps = b.factor(nu) * b.factor(nu).transpose();
    EXPECT_LT((Pr * Ps - Pr).norm(), 1e-10);
  }
}

TEST(TTSvd, ExactRecovery) {
  const auto x = to_dense(random_tt(Shape{3, 4, 3}, {2, 2}, 9));
  const auto res = tt_svd(x, {2, 2});
  EXPECT_LT(res.report.achieved_error, 1e-12 * norm(x));
  EXPECT_EQ(res.tensor.ranks(), (std::vector<Index>{2, 2}));
}

TEST(TTSvd, Order2MatchesTruncatedSvd) {
  const auto m = testutil::random_tensor(Shape{5, 4}, 10);
  EXPECT_NEAR(tt_svd(m, {2}).report.achieved_error, truncated_svd(m, 2).report.achieved_error, 1e-12);
}

TEST(TTSvd, SweepTailBound) {
  const auto u = testutil::random_tensor(Shape{3, 3, 3, 3}, 11);
  const auto res = tt_svd(u, {2, 2, 2});
  // each interface error is at most the tail of the corresponding unfolding
  double tails = 0;
  for (Index k = 1; k < 4; ++k) tails += unfolding_singular_values(u, ModeSet::range(0, k)).tail(k == 2 ? 7 : 1).squaredNorm();
  EXPECT_LE(res.report.achieved_error * res.report.achieved_error, tails * (1 + 1e-12));
  EXPECT_NEAR(res.report.bound_constant, std::sqrt(3.0), 1e-15);
}

TEST(TreeHosvd, ExactOnElementaryAndMatchesSvdForOrder2) {
  Rng rng(12);
  const auto t = outer({testutil::random_vector(3, rng), testutil::random_vector(2, rng), testutil::random_vector(2, rng),
                        testutil::random_vector(3, rng)});
  EXPECT_LT(tree_hosvd(t, DimensionTree::balanced(4), {1}).report.achieved_error, 1e-12 * norm(t));
  const auto m = testutil::random_tensor(Shape{5, 4}, 13);
  const auto res = tree_hosvd(m, DimensionTree::balanced(2), {2});
  EXPECT_NEAR(res.report.achieved_error, truncated_svd(m, 2).report.achieved_error, 1e-12);
  EXPECT_NEAR(res.report.bound_constant, 1.0, 1e-15);
}

TEST(TreeHosvd, ExactRecoveryAndBound) {
  const auto tree = DimensionTree::balanced(4);
  const auto x = to_dense(random_tree(tree, Shape{3, 3, 3, 3}, {2}, 14));
  const auto res = tree_hosvd(x, tree, {2});
  EXPECT_LT(res.report.achieved_error, 1e-12 * norm(x));
  EXPECT_NEAR(res.report.bound_constant, std::sqrt(5.0), 1e-15);
  // orthonormal node bases
  for (Index i = 1; i < tree.num_nodes(); ++i) {
    const Eigen::MatrixXd U = node_basis(res.tensor, i);
    EXPECT_LT((U.transpose() * U - Eigen::MatrixXd::Identity(U.cols(), U.cols())).norm(), 1e-12);
  }
}

TEST(TreeHosvd, LevelProjectionOracle) {
  // explicit P^(2) P^(1) u with dense projectors on the balanced d=4 tree
  const auto u = testutil::random_tensor(Shape{3, 3, 3, 3}, 15);
  const auto tree = DimensionTree::balanced(4);
  const std::vector<Index> ranks{1, 3, 3, 2, 2, 2, 2};
  const auto res = tree_hosvd(u, tree, ranks);
  DenseTensor p = u;
  for (Index level = 1; level <= 2; ++level) {
    for (Index i = 1; i < tree.num_nodes(); ++i) {
      if (tree.node(i).level != level) continue;
      const auto& alpha = tree.node(i).modes;
      const auto s = svd(matricize_matrix(u, alpha));
      const Eigen::MatrixXd U = s.left.leftCols(static_cast<Eigen::Index>(ranks[i]));
      const Eigen::MatrixXd M = matricize_matrix(p, alpha);
      p = dematricize(Eigen::MatrixXd(U * (U.transpose() * M)), alpha, u.shape());
    }
  }
  EXPECT_LT(rel_diff(to_dense(res.tensor), p), 1e-12);
}

TEST(TreeHosvd, InadmissibleRanksThrow) {
  const auto u = testutil::random_tensor(Shape{2, 2, 2, 2}, 16);
  EXPECT_THROW((void)tree_hosvd(u, DimensionTree::balanced(4), {1, 4, 2, 2, 2, 2, 2}), RankError);
  EXPECT_THROW((void)tree_hosvd(u, DimensionTree::balanced(4), {3}), RankError);
}

TEST(Truncate, EpsZeroIsExactWithNumericalRanks) {
  const auto x = to_dense(random_tt(Shape{3, 4, 4, 3}, {2, 3, 2}, 17));
  for (Format f : {Format::Tucker, Format::TT, Format::Tree}) {
    const auto res = truncate(x, 0.0, f);
    EXPECT_LT(res.report.achieved_error, 1e-12 * norm(x)) << format_name(f);
  }
  EXPECT_EQ(std::get<TTTensor>(truncate(x, 0.0, Format::TT).tensor).ranks(), (std::vector<Index>{2, 3, 2}));
}

TEST(Truncate, EpsAtLeastOneGivesZero) {
  const auto u = testutil::random_tensor(Shape{3, 3, 3}, 18);
  for (Format f : {Format::Tucker, Format::TT, Format::Tree}) {
    const auto res = truncate(u, 1.0, f);
    EXPECT_EQ(norm(to_dense(res.tensor)), 0.0);
    EXPECT_LE(res.report.achieved_error, 1.0 * norm(u) + 1e-15);
  }
}

TEST(Truncate, NoisyTTRecoversRanks) {
  const Shape s{4, 5, 5, 4};
  const auto clean = to_dense(random_tt(s, {4, 4, 4}, 19));
  const auto noise = testutil::random_tensor(s, 20);
  const auto x = clean + (1e-3 * norm(clean) / norm(noise)) * noise;
  const double eps = 1e-2;
  for (Format f : {Format::Tucker, Format::TT, Format::Tree}) {
    const auto res = truncate(x, eps, f);
    EXPECT_LE(norm(x - to_dense(res.tensor)), eps * norm(x)) << format_name(f);
  }
  const auto tt = std::get<TTTensor>(truncate(x, eps, Format::TT).tensor);
  for (Index r : tt.ranks()) EXPECT_LE(r, 4u);
}

TEST(Truncate, ErrorWithinEpsOnRandomInputs) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto u = testutil::random_tensor(Shape{3, 4, 3, 2}, seed + 100);
    for (double eps : {0.05, 0.2, 0.5}) {
      for (Format f : {Format::Tucker, Format::TT, Format::Tree}) {
        const auto res = truncate(u, eps, f);
        EXPECT_LE(res.report.achieved_error, eps * norm(u) * (1 + 1e-12));
        EXPECT_NEAR(res.report.achieved_error, norm(u - to_dense(res.tensor)), 1e-12 * norm(u));
      }
    }
  }
}

TEST(Truncate, LowRankInputsStayLowRank) {
  const Shape s{3, 4, 4, 3};
  const auto base = random_tt(s, {2, 3, 2}, 21);
  const auto doubled = add(base, base);  // ranks (4,6,4), representable at (2,3,2)
  auto res = truncate(LowRank(doubled), 1e-12, Format::TT);
  EXPECT_EQ(std::get<TTTensor>(res.tensor).ranks(), (std::vector<Index>{2, 3, 2}));
  EXPECT_LT(rel_diff(to_dense(res.tensor), 2.0 * to_dense(base)), 1e-11);

  const auto tk = random_tucker(s, {2, 2, 2, 2}, 22);
  res = truncate(LowRank(add(tk, tk)), 1e-12, Format::Tucker);
  EXPECT_EQ(std::get<TuckerTensor>(res.tensor).ranks(), (std::vector<Index>{2, 2, 2, 2}));
  EXPECT_LT(rel_diff(to_dense(res.tensor), 2.0 * to_dense(tk)), 1e-11);

  const auto tr = random_tree(DimensionTree::balanced(4), s, {2}, 23);
  res = truncate(LowRank(add(tr, tr)), 1e-12, Format::Tree);
  for (Index i = 1; i < 7; ++i) EXPECT_EQ(std::get<TreeTensor>(res.tensor).rank(i), 2u);
  EXPECT_LT(rel_diff(to_dense(res.tensor), 2.0 * to_dense(tr)), 1e-11);

  const auto cp = random_cp(s, 2, 24);
  res = truncate(LowRank(cp), 1e-12, Format::TT);
  EXPECT_LT(rel_diff(to_dense(res.tensor), to_dense(cp)), 1e-11);
}

TEST(Truncate, LowRankErrorMatchesDenseAndEps) {
  const Shape s{3, 4, 4, 3};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = random_tt(s, {3, 4, 3}, seed);
    for (double eps : {1e-3, 0.1, 0.4}) {
      TruncationReport rep;
      const auto r = tt_round(a, eps, &rep);
      const double direct = norm(to_dense(a) - to_dense(r));
      EXPECT_NEAR(rep.achieved_error, direct, 1e-12 * norm(to_dense(a)));
      EXPECT_LE(direct, eps * norm(to_dense(a)) * (1 + 1e-12));
    }
    const auto t = random_tree(DimensionTree::balanced(4), s, {3}, seed + 10);
    for (double eps : {1e-3, 0.1, 0.4}) {
      const auto res = truncate(LowRank(t), eps, Format::Tree);
      const double direct = norm(to_dense(t) - to_dense(res.tensor));
      EXPECT_NEAR(res.report.achieved_error, direct, 1e-12 * norm(to_dense(t)));
      EXPECT_LE(direct, eps * norm(to_dense(t)) * (1 + 1e-12));
    }
  }
}

TEST(Truncate, CpTargetRejected) {
  const auto u = testutil::random_tensor(Shape{2, 2, 2}, 1);
  EXPECT_THROW((void)truncate(u, 0.1, Format::CP), std::invalid_argument);
}

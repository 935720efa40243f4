#include "tensoria/decompose.hpp"
#include "tensoria/solvers.hpp"

#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

using namespace tensoria;

namespace {

// B(y) = I everywhere, F = sum_l gamma_l (x) f_l with random tables.
AffineParametricSystem identity_system(Index N, Index L, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Grid1D> grid{gauss_legendre(4, -1, 1), gauss_legendre(3, -1, 1)};
  FactoredTable ones{Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(3)};
  std::vector<Eigen::VectorXd> f;
  std::vector<FactoredTable> gamma;
  for (Index l = 0; l < L; ++l) {
    f.push_back(testutil::random_vector(Eigen::Index(N), rng));
    gamma.push_back({testutil::random_vector(4, rng), testutil::random_vector(3, rng)});
  }
  return AffineParametricSystem({Eigen::MatrixXd::Identity(Eigen::Index(N), Eigen::Index(N))}, {ones}, f, gamma, grid);
}

// weighted left singular data of the flattened snapshots
Eigen::JacobiSVD<Eigen::MatrixXd> weighted_svd(const AffineParametricSystem& sys, const DenseTensor& u) {
  const Eigen::MatrixXd M = snapshot_matrix(sys, u) * sys.weights().cwiseSqrt().asDiagonal();
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

double weighted_error(const AffineParametricSystem& sys, const DenseTensor& a, const DenseTensor& b) {
  const Eigen::MatrixXd E = snapshot_matrix(sys, a - b);
  double s = 0;
  for (Index k = 0; k < sys.num_points(); ++k) s += sys.weight_at(k) * E.col(Eigen::Index(k)).squaredNorm();
  return std::sqrt(s);
}

double rho(const Eigen::VectorXd& sv, Index r) {
  return std::sqrt(sv.tail(sv.size() - Eigen::Index(r)).squaredNorm());
}

}  // namespace

// ---------------------------------------------------------------- Richardson

TEST(Richardson, IdentitySystemOneStep) {
  const auto sys = identity_system(5, 2, 1);
  RichardsonOptions o;
  o.alpha = 1.0;
  o.eps = 0.0;
  const auto res = richardson_lr(sys, o);
  EXPECT_EQ(res.trace.records.size(), 2u);
  EXPECT_EQ(res.trace.stop_reason, "converged");
  EXPECT_LE(testutil::rel_diff(to_dense(res.x), rhs_tensor(sys)), 1e-14);
}

TEST(Richardson, DeterministicGeometricRate) {
  const auto p = build_diffusion(8, 1, 1.0, 1);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.system.B_at(0)).eigenvalues();
  RichardsonOptions o;
  o.alpha = 1.0 / ev.maxCoeff();
  o.eps = 0.0;
  o.max_iter = 3000;
  const auto res = richardson_lr(p.system, o);
  EXPECT_EQ(res.trace.stop_reason, "converged");
  const double rate = std::max(std::abs(1 - o.alpha * ev.minCoeff()), std::abs(1 - o.alpha * ev.maxCoeff()));
  // residual contraction bounded by the spectral radius (residual norm is the A-invariant 2-norm)
  for (std::size_t i = 1; i < res.trace.records.size(); ++i)
    EXPECT_LE(res.trace.records[i].residual, rate * res.trace.records[i - 1].residual * (1 + 1e-9) + 1e-15);
  const DenseTensor u = full_solve(p.system);
  EXPECT_LE(testutil::rel_diff(to_dense(res.x), u), 1e-10);
}

TEST(Richardson, TruncatedOnBenchmark) {
  const auto p = build_diffusion(16, 2, 1.0, 4);
  const DenseTensor u = full_solve(p.system);
  const double F = residual_error(p.system, DenseTensor(p.system.solution_shape()));
  RichardsonOptions o;
  o.eps = 1e-6;
  o.mean_preconditioner = true;
  const auto res = richardson_lr(p.system, o);
  EXPECT_EQ(res.trace.stop_reason, "converged");
  EXPECT_LE(res.trace.records.back().residual, 10 * o.eps * F);
  for (const auto& rec : res.trace.records)
    for (std::size_t i = 0; i < rec.ranks.size(); ++i)
      EXPECT_LT(rec.ranks[i], alpha_rank(u, ModeSet::range(0, i + 1), 0.0) + 2);
  // plain iteration: slow but steady
  o.mean_preconditioner = false;
  o.eps = 1e-4;
  const auto plain = richardson_lr(p.system, o);
  EXPECT_LE(plain.trace.records.back().residual, 10 * o.eps * F);
}

TEST(Richardson, OtherFormats) {
  const auto p = build_diffusion(8, 2, 1.0, 3);
  const DenseTensor u = full_solve(p.system);
  for (Format f : {Format::Tucker, Format::Tree}) {
    RichardsonOptions o;
    o.eps = 1e-8;
    o.format = f;
    const auto res = richardson_lr(p.system, o);
    EXPECT_LE(testutil::rel_diff(to_dense(res.x), u), 1e-5);
  }
  RichardsonOptions o;
  o.format = Format::CP;
  EXPECT_THROW(static_cast<void>(richardson_lr(p.system, o)), std::invalid_argument);
}

TEST(Richardson, DivergenceCarriesTrace) {
  const auto p = build_diffusion(8, 1, 1.0, 2);
  RichardsonOptions o;
  o.alpha = 3.0 / estimate_beta_max(p.system);
  try {
    static_cast<void>(richardson_lr(p.system, o));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.trace.records.size(), 2u);
    EXPECT_EQ(e.trace.stop_reason, "diverged");
  }
}

// ---------------------------------------------------------------- minres

TEST(Minres, ExactWhenRankSuffices) {
  const auto p = build_diffusion(6, 1, 1.0, 3);  // solution (3, 5): rank <= 3
  OptimOptions o;
  o.restarts = 2;
  const auto res = minres_lr(p.system, Format::TT, {3}, o);
  EXPECT_LE(res.trace.records.back().residual, 1e-8);
  EXPECT_LE(testutil::rel_diff(to_dense(res.x), full_solve(p.system)), 1e-8);
}

TEST(Minres, SinglePointIsDirectSolve) {
  const auto p = build_diffusion(8, 1, 1.0, 1);
  OptimOptions o;
  o.restarts = 1;
  const auto res = minres_lr(p.system, Format::CP, {1}, o);
  EXPECT_LE(testutil::rel_diff(to_dense(res.x), full_solve(p.system)), 1e-10);
}

TEST(Minres, MonotoneSweepsAndWarmStartedRanks) {
  const auto p = build_diffusion(8, 2, 1.0, 3);
  OptimOptions o;
  o.restarts = 1;
  auto prev = minres_lr(p.system, Format::CP, {1}, o);
  for (Index r = 2; r <= 3; ++r) {
    for (std::size_t i = 1; i < prev.trace.records.size(); ++i)
      EXPECT_LE(prev.trace.records[i].residual, prev.trace.records[i - 1].residual * (1 + 1e-12));
    // rank r+1 start: previous terms plus one column whose first factor is zero
    const auto& cp = std::get<CPTensor>(prev.x);
    Rng rng(r);
    std::vector<Eigen::MatrixXd> f;
    for (Index nu = 0; nu < cp.order(); ++nu) {
      Eigen::MatrixXd m(cp.factor(nu).rows(), cp.factor(nu).cols() + 1);
      m << cp.factor(nu) * (nu == 0 ? cp.weights().asDiagonal().toDenseMatrix() : Eigen::MatrixXd::Identity(cp.factor(nu).cols(), cp.factor(nu).cols())),
          (nu == 0 ? Eigen::VectorXd::Zero(m.rows()) : testutil::random_vector(m.rows(), rng));
      f.push_back(m);
    }
    const CPTensor start(cp.shape(), f);
    const auto next = minres_lr(p.system, LowRank(start), o);
    EXPECT_LE(next.trace.records.back().residual, prev.trace.records.back().residual * (1 + 1e-12));
    EXPECT_NEAR(next.trace.records.front().residual, prev.trace.records.back().residual, 1e-12);
    prev = next;
  }
}

TEST(Minres, ObjectiveEqualsResidualError) {
  const auto p = build_diffusion(6, 2, 1.0, 2);
  const DenseTensor w = testutil::random_tensor(p.system.solution_shape(), 3);
  EXPECT_NEAR(std::sqrt(residual_objective(p.system).value(w)), residual_error(p.system, w), 1e-12);
}

// ---------------------------------------------------------------- PGD (Galerkin)

TEST(PgdGalerkin, SinglePointRankOne) {
  const auto p = build_diffusion(10, 1, 1.0, 1);
  const auto sol = pgd_galerkin(p.system, 3);
  EXPECT_EQ(sol.rank(), 1u);
  EXPECT_LE(testutil::rel_diff(sol.to_dense(p.system), full_solve(p.system)), 1e-10);
}

TEST(PgdGalerkin, IdentityOperatorGivesSingularPairs) {
  const auto sys = identity_system(6, 3, 2);
  PgdOptions o;
  o.tol = 1e-15;
  o.max_sweeps = 2000;
  const auto sol = pgd_galerkin(sys, 3, o);
  const auto svd = weighted_svd(sys, rhs_tensor(sys));
  const Eigen::VectorXd sw = sys.weights().cwiseSqrt();
  for (Index r = 0; r < 3; ++r) {
    const Eigen::VectorXd v = sol.V.col(Eigen::Index(r));
    EXPECT_NEAR(std::abs(v.dot(svd.matrixU().col(Eigen::Index(r)))), 1.0, 1e-8);
    const Eigen::VectorXd s = sol.S.col(Eigen::Index(r)).cwiseProduct(sw);
    EXPECT_NEAR(s.norm(), svd.singularValues()(Eigen::Index(r)), 1e-8 * svd.singularValues()(0));
  }
}

TEST(PgdGalerkin, BenchmarkEnergyGap) {
  const auto p = build_diffusion(16, 2, 1.0, 4);
  const DenseTensor u = full_solve(p.system);
  const double Ju = energy(p.system, u);
  const Index rmax = std::min<Index>(p.system.num_points(), p.system.state_dim());
  const auto sol = pgd_galerkin(p.system, rmax);
  double prev = INFINITY;
  bool reached = false;
  for (const auto& rec : sol.trace.records) {
    const double gap = rec.energy - Ju;
    EXPECT_GE(gap, -1e-12 * std::abs(Ju));
    EXPECT_LE(gap, prev + 1e-14 * std::abs(Ju));
    prev = gap;
    reached = reached || gap <= 1e-6 * std::abs(Ju);
  }
  EXPECT_TRUE(reached);
}

TEST(PgdGalerkin, GalerkinOrthogonality) {
  const auto p = build_diffusion(10, 2, 1.0, 3);
  const auto& sys = p.system;
  PgdOptions o;
  o.tol = 1e-16;
  o.max_sweeps = 5000;
  const auto sol = pgd_galerkin(sys, 2, o);
  const DenseTensor ur = sol.to_dense(sys);
  const Eigen::MatrixXd R = snapshot_matrix(sys, operator_apply(sys, ur) - rhs_tensor(sys));
  const Eigen::VectorXd w = sys.weights();
  const double Fn = residual_error(sys, DenseTensor(sys.solution_shape()));
  const Eigen::VectorXd vr = sol.V.col(sol.V.cols() - 1), sr = sol.S.col(sol.S.cols() - 1);
  // delta w = s (x) v_r for unit s, and s_r (x) v for unit v
  for (Index k = 0; k < sys.num_points(); ++k) {
    const double g = w(Eigen::Index(k)) * R.col(Eigen::Index(k)).dot(vr);
    const double nd = std::sqrt(w(Eigen::Index(k)));
    EXPECT_LE(std::abs(g), 1e-8 * Fn * nd);
  }
  const Eigen::VectorXd gv = R * (w.cwiseProduct(sr));
  const double nsr = std::sqrt(w.dot(sr.cwiseAbs2()));
  for (Eigen::Index i = 0; i < gv.size(); ++i) EXPECT_LE(std::abs(gv(i)), 1e-8 * Fn * nsr);
}

// ---------------------------------------------------------------- PGD (subspace)

TEST(PgdSubspace, SaturatesAtFullRank) {
  const auto p = build_diffusion(8, 2, 1.0, 3);
  const auto& sys = p.system;
  const double Ju = energy(sys, full_solve(sys));
  const auto res = pgd_subspace(sys, sys.state_dim());
  EXPECT_LE(res.solution.trace.records.back().energy - Ju, 1e-9);
}

TEST(PgdSubspace, NestedAndMonotone) {
  const auto p = build_diffusion(16, 2, 1.0, 4);
  const auto a = pgd_subspace(p.system, 3);
  const auto b = pgd_subspace(p.system, 4);
  ASSERT_EQ(a.solution.rank(), 3u);
  ASSERT_EQ(b.solution.rank(), 4u);
  EXPECT_EQ(Eigen::MatrixXd(b.solution.V.leftCols(3)), a.solution.V);
  const Eigen::MatrixXd G = b.solution.V.transpose() * b.solution.V;
  EXPECT_LE((G - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-12);
  for (std::size_t i = 1; i < b.solution.trace.records.size(); ++i)
    EXPECT_LE(b.solution.trace.records[i].energy, b.solution.trace.records[i - 1].energy + 1e-15);
  ASSERT_EQ(b.models.size(), 4u);
  EXPECT_EQ(b.models[1].rank(), 2u);
  const Eigen::MatrixXd red = b.solution.V.transpose() * p.system.op(1) * b.solution.V;
  EXPECT_LE((red - b.models[3].B[1]).norm(), 1e-14 * red.norm());
  // reduced operators SPD at every grid point
  for (Index k = 0; k < p.system.num_points(); ++k) {
    Eigen::MatrixXd Bk = Eigen::MatrixXd::Zero(4, 4);
    for (Index l = 0; l < p.system.num_operators(); ++l) Bk += p.system.lambda_at(l, k) * b.models[3].B[l];
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(Bk).info(), Eigen::Success);
  }
}

TEST(PgdSubspace, IdentityOperatorGivesSvdSubspace) {
  const auto sys = identity_system(7, 4, 5);
  PgdOptions o;
  o.tol = 1e-15;
  o.max_sweeps = 2000;
  const auto res = pgd_subspace(sys, 3, o);
  const auto svd = weighted_svd(sys, rhs_tensor(sys));
  for (Index r = 1; r <= 3; ++r) {
    const Eigen::MatrixXd V = res.solution.V.leftCols(Eigen::Index(r));
    const Eigen::MatrixXd Q = svd.matrixU().leftCols(Eigen::Index(r));
    // principal angles: |Q^T V| singular values all 1
    const Eigen::VectorXd c = Eigen::JacobiSVD<Eigen::MatrixXd>(Q.transpose() * V).singularValues();
    EXPECT_NEAR(c.minCoeff(), 1.0, 1e-8);
  }
}

TEST(PgdSubspace, WithinFactorTenOfBestRankR) {
  const auto p = build_diffusion(32, 2, 1.0, 5);
  const DenseTensor u = full_solve(p.system);
  const Eigen::VectorXd sv = weighted_svd(p.system, u).singularValues();
  // the exact solution has rank 3 here; beyond it both errors are rounding noise
  const double floor = 1e-13 * weighted_error(p.system, u, DenseTensor(u.shape()));
  std::vector<double> err;
  const auto res = pgd_subspace(p.system, 8, {}, [&](const ConvergenceRecord&, const DenseTensor& w) {
    err.push_back(weighted_error(p.system, w, u));
  });
  ASSERT_EQ(err.size(), 9u);
  for (Index r = 1; r <= 8; ++r) {
    EXPECT_GE(err[r], rho(sv, r) * (1 - 1e-8) - floor) << r;
    EXPECT_LE(err[r], 10 * rho(sv, r) + floor) << r;
  }
  EXPECT_LE(err[1], 10 * rho(sv, 1));
  EXPECT_LE(err[2], 10 * rho(sv, 2));
  const double Ju = energy(p.system, u);
  for (std::size_t i = 1; i < res.solution.trace.records.size(); ++i)
    EXPECT_LE(res.solution.trace.records[i].energy - Ju,
              res.solution.trace.records[i - 1].energy - Ju + 1e-14 * std::abs(Ju));
}

// ---------------------------------------------------------------- POD / EIM

TEST(Pod, EqualSnapshotsRankOne) {
  Rng rng(1);
  const Eigen::VectorXd v = testutil::random_vector(5, rng);
  const Eigen::MatrixXd S = v.replicate(1, 4);
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(4, 0.25);
  const auto res = pod(S, w, 1);
  EXPECT_LE(res.error, 1e-14 * v.norm());
  EXPECT_LE(projection_error(S, w, res.basis), 1e-14 * v.norm());
  EXPECT_THROW(static_cast<void>(pod(S, w, 5)), RankError);
}

TEST(Pod, ErrorIdentityAndNesting) {
  const auto p = build_diffusion(16, 2, 1.0, 5);
  const DenseTensor u = full_solve(p.system);
  const Eigen::MatrixXd S = snapshot_matrix(p.system, u);
  const Eigen::VectorXd w = p.system.weights();
  const double scale = std::sqrt(w.dot(S.colwise().squaredNorm().transpose()));
  Eigen::MatrixXd prev;
  for (Index r = 0; r <= 10; ++r) {
    const auto res = pod(S, w, r);
    EXPECT_LE(std::abs(projection_error(S, w, res.basis) - res.error), 1e-10 * scale) << r;
    if (r > 0) EXPECT_EQ(Eigen::MatrixXd(res.basis.leftCols(Eigen::Index(r - 1))), prev);
    prev = res.basis;
  }
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S * w.asDiagonal() * S.transpose()).eigenvalues().reverse();
  const auto full = pod(S, w, 3);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(full.eigenvalues(i), ev(i), 1e-12 * ev(0));
}

TEST(Eim, IdenticalSnapshots) {
  Rng rng(4);
  const Eigen::MatrixXd S = testutil::random_vector(6, rng).replicate(1, 5);
  const auto res = eim_greedy(S, 4);
  EXPECT_EQ(res.indices, std::vector<Index>{0});
  EXPECT_LE(res.sup_errors.back(), 1e-14 * res.sup_errors.front());
}

TEST(Eim, OrthogonalSnapshotsInIndexOrder) {
  Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(6, 4)).householderQ() *
                      Eigen::MatrixXd::Identity(6, 4);
  Q *= 2.0;
  const auto res = eim_greedy(Q, 4);
  EXPECT_EQ(res.indices, (std::vector<Index>{0, 1, 2, 3}));
  ASSERT_EQ(res.sup_errors.size(), 5u);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(res.sup_errors[i], 2.0, 1e-12);
  EXPECT_LE(res.sup_errors[4], 1e-12);
}

TEST(Eim, SupErrorDominatesPod) {
  const auto p = build_diffusion(16, 2, 1.0, 5);
  const Eigen::MatrixXd S = snapshot_matrix(p.system, full_solve(p.system));
  const auto e = eim_greedy(S, 8);
  for (std::size_t i = 1; i < e.sup_errors.size(); ++i) EXPECT_LE(e.sup_errors[i], e.sup_errors[i - 1]);
  for (Index r = 0; r < e.sup_errors.size(); ++r)
    EXPECT_GE(e.sup_errors[r], pod(S, p.system.weights(), r).error * (1 - 1e-12));
}

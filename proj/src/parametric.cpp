#include "tensoria/parametric.hpp"

#include "tensoria/errors.hpp"
#include "tensoria/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tensoria {

namespace {

constexpr Index kMaxSpdChecks = 4096;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace

Grid1D gauss_legendre(Index K, double lo, double hi) {
  if (K < 1) throw std::invalid_argument("gauss_legendre: K must be >= 1");
  if (!(hi >= lo)) throw std::invalid_argument("gauss_legendre: hi < lo");
  Grid1D g;
  g.points.resize(static_cast<Eigen::Index>(K));
  g.weights.resize(static_cast<Eigen::Index>(K));
  const double n = static_cast<double>(K);
  for (Index i = 0; i < K; ++i) {
    // Chebyshev-like initial guess, then Newton on P_K
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (Index k = 2; k <= K; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2 * kk - 1) * x * p1 - (kk - 1) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      const double pK = K == 1 ? x : p1;
      const double pKm1 = K == 1 ? 1.0 : p0;
      dp = n * (x * pK - pKm1) / (x * x - 1.0);
      const double dx = pK / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // ascending order
    const auto j = static_cast<Eigen::Index>(K - 1 - i);
    g.points(j) = x;
    g.weights(j) = w;
  }
  if (K % 2 == 1) g.points(static_cast<Eigen::Index>(K / 2)) = 0.0;
  g.weights /= g.weights.sum();
  g.points = (0.5 * (hi - lo)) * g.points.array() + 0.5 * (hi + lo);
  return g;
}

// ---------------------------------------------------------------- system

AffineParametricSystem::AffineParametricSystem(std::vector<Eigen::MatrixXd> operators,
                                               std::vector<FactoredTable> lambda, std::vector<Eigen::VectorXd> rhs,
                                               std::vector<FactoredTable> gamma, std::vector<Grid1D> grid)
    : B_(std::move(operators)),
      lambda_(std::move(lambda)),
      f_(std::move(rhs)),
      gamma_(std::move(gamma)),
      grid_(std::move(grid)) {
  require(!B_.empty(), "system needs at least one operator");
  require(!f_.empty(), "system needs at least one right-hand side");
  require(!grid_.empty(), "system needs at least one parameter dimension");
  require(lambda_.size() == B_.size(), "one lambda table per operator");
  require(gamma_.size() == f_.size(), "one gamma table per right-hand side");
  N_ = static_cast<Index>(B_[0].rows());
  require(N_ >= 1, "state dimension must be >= 1");
  for (const auto& b : B_) require(b.rows() == b.cols() && static_cast<Index>(b.rows()) == N_, "operators must be N x N");
  for (const auto& f : f_) require(static_cast<Index>(f.size()) == N_, "right-hand sides must have length N");
  std::vector<Index> dims;
  for (const auto& g : grid_) {
    require(g.points.size() >= 1 && g.points.size() == g.weights.size(), "grid points and weights must match");
    if ((g.weights.array() <= 0.0).any()) throw std::invalid_argument("grid weights must be positive");
    if (std::abs(g.weights.sum() - 1.0) > 1e-12) throw std::invalid_argument("grid weights must sum to 1");
    dims.push_back(static_cast<Index>(g.points.size()));
  }
  grid_shape_ = Shape(dims);
  dims.push_back(N_);
  sol_shape_ = Shape(dims);
  auto check_tables = [&](const std::vector<FactoredTable>& ts) {
    for (const auto& t : ts) {
      require(t.size() == grid_.size(), "parameter tables need one factor per dimension");
      for (Index nu = 0; nu < t.size(); ++nu) {
        require(t[nu].size() == grid_[nu].points.size(), "parameter table length differs from grid size");
        if (!t[nu].allFinite()) throw std::invalid_argument("parameter table has non-finite values");
      }
    }
  };
  check_tables(lambda_);
  check_tables(gamma_);
  for (const auto& b : B_)
    if ((b - b.transpose()).norm() > 1e-12 * (b.norm() + 1.0)) throw std::invalid_argument("operators must be symmetric");

  const Index K = num_points();
  const Index checks = std::min(K, kMaxSpdChecks);
  for (Index c = 0; c < checks; ++c) {
    const Index k = K <= kMaxSpdChecks ? c : c * (K - 1) / (checks - 1);
    Eigen::LLT<Eigen::MatrixXd> llt(B_at(k));
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("operator B(y) is not positive definite at grid point " + std::to_string(k));
  }
}

double AffineParametricSystem::table_at(const FactoredTable& t, Index k) const {
  double v = 1.0;
  for (Index nu = grid_.size(); nu-- > 0;) {
    const Index K = grid_shape_[nu];
    v *= t[nu](static_cast<Eigen::Index>(k % K));
    k /= K;
  }
  return v;
}

double AffineParametricSystem::lambda_at(Index l, Index k) const { return table_at(lambda_.at(l), k); }
double AffineParametricSystem::gamma_at(Index l, Index k) const { return table_at(gamma_.at(l), k); }

double AffineParametricSystem::weight_at(Index k) const {
  double v = 1.0;
  for (Index nu = grid_.size(); nu-- > 0;) {
    const Index K = grid_shape_[nu];
    v *= grid_[nu].weights(static_cast<Eigen::Index>(k % K));
    k /= K;
  }
  return v;
}

Eigen::VectorXd AffineParametricSystem::weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(num_points()));
  for (Index k = 0; k < num_points(); ++k) w(static_cast<Eigen::Index>(k)) = weight_at(k);
  return w;
}

Eigen::VectorXd AffineParametricSystem::point_at(Index k) const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(grid_.size()));
  for (Index nu = grid_.size(); nu-- > 0;) {
    const Index K = grid_shape_[nu];
    y(static_cast<Eigen::Index>(nu)) = grid_[nu].points(static_cast<Eigen::Index>(k % K));
    k /= K;
  }
  return y;
}

Eigen::MatrixXd AffineParametricSystem::B_at(Index k) const {
  Eigen::MatrixXd b = lambda_at(0, k) * B_[0];
  for (Index l = 1; l < B_.size(); ++l) b += lambda_at(l, k) * B_[l];
  return b;
}

Eigen::VectorXd AffineParametricSystem::f_at(Index k) const {
  Eigen::VectorXd f = gamma_at(0, k) * f_[0];
  for (Index l = 1; l < f_.size(); ++l) f += gamma_at(l, k) * f_[l];
  return f;
}

// ---------------------------------------------------------------- diffusion

Eigen::MatrixXd p1_stiffness(Index n_el, double a, double b) {
  if (n_el < 2) throw std::invalid_argument("n_el must be >= 2");
  const Index N = n_el - 1;
  const double h = 1.0 / static_cast<double>(n_el);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  for (Index e = 0; e < n_el; ++e) {
    const double x0 = static_cast<double>(e) * h, x1 = static_cast<double>(e + 1) * h;
    const double overlap = std::max(0.0, std::min(x1, b) - std::max(x0, a));
    if (overlap <= 0.0) continue;
    // integral of c * phi_i' phi_j' over the element: +-overlap / h^2
    const double s = overlap / (h * h);
    // element nodes e and e+1; interior node j has index j-1
    const long i0 = static_cast<long>(e) - 1, i1 = static_cast<long>(e);
    const long n = static_cast<long>(N);
    if (i0 >= 0) S(i0, i0) += s;
    if (i1 < n) S(i1, i1) += s;
    if (i0 >= 0 && i1 < n) {
      S(i0, i1) -= s;
      S(i1, i0) -= s;
    }
  }
  return S;
}

Eigen::VectorXd p1_load(Index n_el) {
  if (n_el < 2) throw std::invalid_argument("n_el must be >= 2");
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_el - 1), 1.0 / static_cast<double>(n_el));
}

DiffusionProblem build_diffusion(Index n_el, Index d, double kappa0, const std::vector<Index>& K) {
  if (n_el < 2) throw std::invalid_argument("n_el must be >= 2");
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (K.size() != d) throw std::invalid_argument("need one grid size per parameter dimension");
  DiffusionBenchmark bench;
  bench.n_el = n_el;
  bench.d = d;
  bench.kappa0 = kappa0;
  bench.K = K;
  if (!(kappa0 > bench.xi_max))
    throw std::invalid_argument("kappa0 must exceed 0.45 for a uniformly positive coefficient");
  std::vector<Grid1D> grid;
  for (Index nu = 0; nu < d; ++nu) grid.push_back(gauss_legendre(K[nu], -bench.xi_max, bench.xi_max));
  std::vector<Eigen::MatrixXd> ops;
  std::vector<FactoredTable> lambda;
  auto ones = [&] {
    FactoredTable t;
    for (Index nu = 0; nu < d; ++nu) t.push_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(K[nu])));
    return t;
  };
  ops.push_back(kappa0 * p1_stiffness(n_el, 0.0, 1.0));
  lambda.push_back(ones());
  for (Index nu = 0; nu < d; ++nu) {
    const double a = static_cast<double>(nu) / static_cast<double>(d);
    const double b = static_cast<double>(nu + 1) / static_cast<double>(d);
    ops.push_back(p1_stiffness(n_el, a, b));
    FactoredTable t = ones();
    t[nu] = grid[nu].points;
    lambda.push_back(std::move(t));
  }
  AffineParametricSystem sys(std::move(ops), std::move(lambda), {p1_load(n_el)}, {ones()}, std::move(grid));
  return {std::move(sys), bench};
}

DiffusionProblem build_diffusion(Index n_el, Index d, double kappa0, Index K) {
  return build_diffusion(n_el, d, kappa0, std::vector<Index>(d, K));
}

// ---------------------------------------------------------------- solves

Eigen::MatrixXd snapshot_matrix(const AffineParametricSystem& sys, const DenseTensor& w) {
  if (!(w.shape() == sys.solution_shape())) throw ShapeError("tensor shape differs from grid x state");
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMat>(w.data().data(), static_cast<Eigen::Index>(sys.num_points()),
                                  static_cast<Eigen::Index>(sys.state_dim()))
      .transpose();
}

DenseTensor from_snapshots(const AffineParametricSystem& sys, const Eigen::MatrixXd& m) {
  if (static_cast<Index>(m.rows()) != sys.state_dim() || static_cast<Index>(m.cols()) != sys.num_points())
    throw ShapeError("snapshot matrix must be N x K");
  DenseTensor out(sys.solution_shape());
  const Index N = sys.state_dim();
  for (Index k = 0; k < sys.num_points(); ++k)
    for (Index i = 0; i < N; ++i) out.data()[k * N + i] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  return out;
}

DenseTensor full_solve(const AffineParametricSystem& sys) {
  const Index K = sys.num_points();
  Eigen::MatrixXd U(static_cast<Eigen::Index>(sys.state_dim()), static_cast<Eigen::Index>(K));
  std::vector<char> failed(K, 0);
  parallel_for(K, [&](std::size_t k) {
    Eigen::LLT<Eigen::MatrixXd> llt(sys.B_at(k));
    if (llt.info() != Eigen::Success) {
      failed[k] = 1;
      return;
    }
    U.col(static_cast<Eigen::Index>(k)) = llt.solve(sys.f_at(k));
  });
  for (Index k = 0; k < K; ++k)
    if (failed[k]) throw NumericalError("singular system at grid point " + std::to_string(k));
  return from_snapshots(sys, U);
}

CPTensor rhs_cp(const AffineParametricSystem& sys) {
  const Index d = sys.param_dim();
  const auto L = static_cast<Eigen::Index>(sys.num_rhs());
  std::vector<Eigen::MatrixXd> f;
  for (Index nu = 0; nu < d; ++nu) {
    Eigen::MatrixXd m(sys.grid()[nu].points.size(), L);
    for (Eigen::Index l = 0; l < L; ++l) m.col(l) = sys.gamma(static_cast<Index>(l))[nu];
    f.push_back(m);
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(sys.state_dim()), L);
  for (Eigen::Index l = 0; l < L; ++l) m.col(l) = sys.rhs(static_cast<Index>(l));
  f.push_back(m);
  return CPTensor(sys.solution_shape(), std::move(f));
}

DenseTensor rhs_tensor(const AffineParametricSystem& sys) {
  Eigen::MatrixXd F(static_cast<Eigen::Index>(sys.state_dim()), static_cast<Eigen::Index>(sys.num_points()));
  for (Index k = 0; k < sys.num_points(); ++k) F.col(static_cast<Eigen::Index>(k)) = sys.f_at(k);
  return from_snapshots(sys, F);
}

DenseTensor operator_apply(const AffineParametricSystem& sys, const DenseTensor& w) {
  const Eigen::MatrixXd W = snapshot_matrix(sys, w);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(W.rows(), W.cols());
  for (Index l = 0; l < sys.num_operators(); ++l) {
    Eigen::MatrixXd BW = sys.op(l) * W;
    for (Index k = 0; k < sys.num_points(); ++k)
      out.col(static_cast<Eigen::Index>(k)) += sys.lambda_at(l, k) * BW.col(static_cast<Eigen::Index>(k));
  }
  return from_snapshots(sys, out);
}

namespace {

// Lambda_l^(1) (x) ... (x) B_l applied to one separable structure.
LowRank apply_term(const AffineParametricSystem& sys, const LowRank& w, Index l) {
  const Index d = sys.param_dim();
  const FactoredTable& lam = sys.lambda(l);
  const Eigen::MatrixXd& B = sys.op(l);
  auto mode_matrix = [&](Index nu, const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
    if (nu < d) return lam[nu].asDiagonal() * m;
    return B * m;
  };
  if (const auto* cp = std::get_if<CPTensor>(&w)) {
    auto f = cp->factors();
    for (Index nu = 0; nu <= d; ++nu) f[nu] = mode_matrix(nu, f[nu]);
    return CPTensor(cp->shape(), std::move(f), cp->weights());
  }
  if (const auto* tk = std::get_if<TuckerTensor>(&w)) {
    auto f = tk->factors();
    for (Index nu = 0; nu <= d; ++nu) f[nu] = mode_matrix(nu, f[nu]);
    return TuckerTensor(tk->shape(), tk->core(), std::move(f));
  }
  if (const auto* tt = std::get_if<TTTensor>(&w)) {
    auto c = tt->cores();
    for (Index nu = 0; nu <= d; ++nu) {
      const Eigen::MatrixXd M = nu < d ? Eigen::MatrixXd(lam[nu].asDiagonal()) : B;
      c[nu] = mode_apply(c[nu], 1, M);
    }
    return TTTensor(tt->shape(), std::move(c));
  }
  const auto& tr = std::get<TreeTensor>(w);
  auto leaves = tr.leaf_bases();
  for (Index nu = 0; nu <= d; ++nu) {
    auto& m = leaves.at(tr.tree().leaf_of_mode(nu));
    m = mode_matrix(nu, m);
  }
  return TreeTensor(tr.tree(), tr.shape(), tr.ranks(), std::move(leaves), tr.transfers());
}

}  // namespace

LowRank operator_apply(const AffineParametricSystem& sys, const LowRank& w) {
  const Shape s = std::visit([](const auto& t) { return t.shape(); }, w);
  if (!(s == sys.solution_shape())) throw ShapeError("tensor shape differs from grid x state");
  LowRank acc = apply_term(sys, w, 0);
  for (Index l = 1; l < sys.num_operators(); ++l) {
    const LowRank t = apply_term(sys, w, l);
    acc = std::visit(
        [&](const auto& a) -> LowRank {
          using T = std::decay_t<decltype(a)>;
          return add(a, std::get<T>(t));
        },
        acc);
  }
  return acc;
}

LowRank apply_state_matrix(const LowRank& w, const Eigen::MatrixXd& M) {
  if (const auto* cp = std::get_if<CPTensor>(&w)) {
    auto f = cp->factors();
    f.back() = M * f.back();
    return CPTensor(cp->shape(), std::move(f), cp->weights());
  }
  if (const auto* tk = std::get_if<TuckerTensor>(&w)) {
    auto f = tk->factors();
    f.back() = M * f.back();
    return TuckerTensor(tk->shape(), tk->core(), std::move(f));
  }
  if (const auto* tt = std::get_if<TTTensor>(&w)) {
    auto c = tt->cores();
    c.back() = mode_apply(c.back(), 1, M);
    return TTTensor(tt->shape(), std::move(c));
  }
  const auto& tr = std::get<TreeTensor>(w);
  auto leaves = tr.leaf_bases();
  auto& m = leaves.at(tr.tree().leaf_of_mode(tr.order() - 1));
  m = M * m;
  return TreeTensor(tr.tree(), tr.shape(), tr.ranks(), std::move(leaves), tr.transfers());
}

Eigen::MatrixXd mean_operator(const AffineParametricSystem& sys) {
  const Eigen::VectorXd w = sys.weights();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.state_dim()), static_cast<Eigen::Index>(sys.state_dim()));
  for (Index l = 0; l < sys.num_operators(); ++l) {
    double m = 0.0;
    for (Index k = 0; k < sys.num_points(); ++k) m += w(static_cast<Eigen::Index>(k)) * sys.lambda_at(l, k);
    B += m * sys.op(l);
  }
  return B;
}

double residual_error(const AffineParametricSystem& sys, const DenseTensor& w) {
  const Eigen::MatrixXd R = snapshot_matrix(sys, operator_apply(sys, w) - rhs_tensor(sys));
  double s = 0.0;
  for (Index k = 0; k < sys.num_points(); ++k) s += sys.weight_at(k) * R.col(static_cast<Eigen::Index>(k)).squaredNorm();
  return std::sqrt(s);
}

double energy(const AffineParametricSystem& sys, const DenseTensor& w) {
  const Eigen::MatrixXd W = snapshot_matrix(sys, w);
  const Eigen::MatrixXd AW = snapshot_matrix(sys, operator_apply(sys, w));
  double s = 0.0;
  for (Index k = 0; k < sys.num_points(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    s += sys.weight_at(k) * (AW.col(kk).dot(W.col(kk)) - 2.0 * sys.f_at(k).dot(W.col(kk)));
  }
  return s;
}

double estimate_beta_max(const AffineParametricSystem& sys, Index iterations) {
  const auto N = static_cast<Eigen::Index>(sys.state_dim());
  std::vector<double> best(sys.num_points(), 0.0);
  parallel_for(sys.num_points(), [&](std::size_t k) {
    const Eigen::MatrixXd B = sys.B_at(k);
    Eigen::VectorXd v(N);
    for (Eigen::Index i = 0; i < N; ++i) v(i) = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + 0.01 * static_cast<double>(i));
    v.normalize();
    double lam = 0.0;
    for (Index it = 0; it < iterations; ++it) {
      const Eigen::VectorXd bv = B * v;
      lam = v.dot(bv);
      const double n = bv.norm();
      if (!(n > 0.0)) break;
      v = bv / n;
    }
    best[k] = lam;
  });
  return *std::max_element(best.begin(), best.end());
}

}  // namespace tensoria

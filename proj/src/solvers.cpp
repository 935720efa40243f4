#include "tensoria/solvers.hpp"

#include "tensoria/decompose.hpp"
#include "tensoria/linalg.hpp"
#include "tensoria/parallel.hpp"
#include "tensoria/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace tensoria {

namespace {

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

LowRank lr_add(const LowRank& a, const LowRank& b) {
  return std::visit(
      [&](const auto& x) -> LowRank {
        using T = std::decay_t<decltype(x)>;
        return add(x, std::get<T>(b));
      },
      a);
}

LowRank lr_scale(const LowRank& a, double s) {
  return std::visit([&](const auto& x) -> LowRank { return scale(x, s); }, a);
}

LowRank rhs_in_format(const AffineParametricSystem& sys, Format f, const std::optional<DimensionTree>& tree) {
  const CPTensor F = rhs_cp(sys);
  switch (f) {
    case Format::TT: return cp_to_tt(F);
    case Format::Tucker: return cp_to_tucker(F);
    case Format::Tree: return cp_to_tree(F, tree ? *tree : DimensionTree::balanced(F.order()));
    case Format::CP: break;
  }
  throw std::invalid_argument("Richardson iteration needs a format with SVD truncation (tucker, tt, tree)");
}

// Precomputed per-point data for the order-two solvers.
struct PointData {
  std::vector<Eigen::MatrixXd> B;
  Eigen::MatrixXd F;  // N x K
  Eigen::VectorXd w;  // K

  explicit PointData(const AffineParametricSystem& sys) : F(sys.state_dim(), sys.num_points()), w(sys.weights()) {
    for (Index k = 0; k < sys.num_points(); ++k) {
      B.push_back(sys.B_at(k));
      F.col(static_cast<Eigen::Index>(k)) = sys.f_at(k);
    }
  }
  [[nodiscard]] Index K() const { return B.size(); }

  [[nodiscard]] double energy(const Eigen::MatrixXd& U) const {
    double s = 0.0;
    for (Index k = 0; k < K(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      s += w(kk) * (U.col(kk).dot(B[k] * U.col(kk)) - 2.0 * F.col(kk).dot(U.col(kk)));
    }
    return s;
  }
  [[nodiscard]] double residual(const Eigen::MatrixXd& U) const {
    double s = 0.0;
    for (Index k = 0; k < K(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      s += w(kk) * (B[k] * U.col(kk) - F.col(kk)).squaredNorm();
    }
    return std::sqrt(s);
  }
};

}  // namespace

// ---------------------------------------------------------------- Richardson

namespace {

// Largest eigenvalue of Bbar^-1 B(y^k) over the grid, by power iteration on
// the symmetric form L^-1 B L^-T.
double preconditioned_beta_max(const AffineParametricSystem& sys, Index iterations = 200) {
  Eigen::LLT<Eigen::MatrixXd> llt(mean_operator(sys));
  const auto N = static_cast<Eigen::Index>(sys.state_dim());
  const Eigen::MatrixXd L = llt.matrixL();
  std::vector<double> best(sys.num_points(), 0.0);
  parallel_for(sys.num_points(), [&](std::size_t k) {
    Eigen::MatrixXd C = L.triangularView<Eigen::Lower>().solve(sys.B_at(k));
    C = L.triangularView<Eigen::Lower>().solve(C.transpose()).transpose();
    Eigen::VectorXd v = Eigen::VectorXd::Ones(N).normalized();
    double lam = 0.0;
    for (Index it = 0; it < iterations; ++it) {
      const Eigen::VectorXd cv = C * v;
      lam = v.dot(cv);
      const double n = cv.norm();
      if (!(n > 0.0)) break;
      v = cv / n;
    }
    best[k] = lam;
  });
  return *std::max_element(best.begin(), best.end());
}

}  // namespace

LowRankSolution richardson_lr(const AffineParametricSystem& sys, const RichardsonOptions& opts,
                              const Observer& observe) {
  if (!(opts.eps >= 0.0)) throw std::invalid_argument("eps must be >= 0");
  if (opts.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  Eigen::MatrixXd Pinv;
  if (opts.mean_preconditioner) {
    Eigen::LLT<Eigen::MatrixXd> llt(mean_operator(sys));
    if (llt.info() != Eigen::Success) throw NumericalError("mean operator is not positive definite");
    Pinv = llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(sys.state_dim()), static_cast<Eigen::Index>(sys.state_dim())));
  }
  const double alpha = opts.alpha > 0.0 ? opts.alpha : 1.0 / (opts.mean_preconditioner ? preconditioned_beta_max(sys) : estimate_beta_max(sys));
  const Stopwatch clock;
  const LowRank F = rhs_in_format(sys, opts.format, opts.tree);
  const DenseTensor zero(sys.solution_shape());
  const double r0 = residual_error(sys, zero);
  const double floor = std::max(opts.eps, 1e-13) * r0;
  SolverTrace trace;
  trace.records.push_back({0, r0, 0.0, {}, clock.ms()});
  if (observe) observe(trace.records.back(), zero);
  std::optional<LowRank> u;
  double best_before = r0;
  bool stalled = false;
  trace.stop_reason = "max_iter";
  for (Index it = 1; it <= opts.max_iter; ++it) {
    LowRank g = u ? lr_add(F, lr_scale(operator_apply(sys, *u), -1.0)) : F;
    if (opts.mean_preconditioner) g = apply_state_matrix(g, Pinv);
    LowRank v = u ? lr_add(*u, lr_scale(g, alpha)) : lr_scale(g, alpha);
    u = truncate(v, opts.eps, opts.format, opts.tree).tensor;
    const DenseTensor dense = to_dense(*u);
    ConvergenceRecord rec{it, residual_error(sys, dense), energy(sys, dense), ranks_of(*u), clock.ms()};
    trace.records.push_back(rec);
    if (observe) observe(rec, dense);
    if (!std::isfinite(rec.residual) || rec.residual > 10.0 * r0) {
      trace.stop_reason = "diverged";
      throw DivergenceError("Richardson iteration diverged (residual grew 10x); reduce alpha", std::move(trace));
    }
    if (rec.residual <= floor) {
      trace.stop_reason = "converged";
      break;
    }
    // best residual of the last `window` iterations vs the best before them
    if (it >= opts.window) {
      best_before = std::min(best_before, trace.records[it - opts.window].residual);
      double best_recent = rec.residual;
      for (Index j = it - opts.window + 1; j < it; ++j) best_recent = std::min(best_recent, trace.records[j].residual);
      stalled = best_recent > 0.999 * best_before;
    }
    if (stalled) {
      trace.stop_reason = "stagnation";
      break;
    }
  }
  return {std::move(*u), std::move(trace)};
}

// ---------------------------------------------------------------- minres

QuadraticObjective residual_objective(const AffineParametricSystem& sys) {
  const Index N = sys.state_dim();
  Eigen::VectorXd sw(static_cast<Eigen::Index>(sys.num_points() * N));
  for (Index k = 0; k < sys.num_points(); ++k)
    sw.segment(static_cast<Eigen::Index>(k * N), static_cast<Eigen::Index>(N)).setConstant(std::sqrt(sys.weight_at(k)));
  const Eigen::VectorXd g = sw.cwiseProduct(rhs_tensor(sys).as_vector());
  return QuadraticObjective::least_squares(
      sys.solution_shape(),
      [&sys, sw](const DenseTensor& w) -> Eigen::VectorXd {
        return sw.cwiseProduct(operator_apply(sys, w).as_vector());
      },
      g);
}

namespace {

LowRankSolution to_solution(const AffineParametricSystem& sys, AlsResult r) {
  SolverTrace t;
  for (const auto& s : r.trace.steps) t.records.push_back({s.step, s.objective, 0.0, s.ranks, 0.0});
  t.records.back().energy = energy(sys, to_dense(r.x));
  t.stop_reason = r.trace.stop_reason;
  return {std::move(r.x), std::move(t)};
}

}  // namespace

LowRankSolution minres_lr(const AffineParametricSystem& sys, Format format, const std::vector<Index>& ranks,
                          const OptimOptions& opts, const std::optional<DimensionTree>& tree) {
  opts.validate();
  const auto obj = residual_objective(sys);
  std::vector<AlsResult> runs;
  const Index n = std::max<Index>(opts.restarts, 1);
  std::vector<std::optional<AlsResult>> slots(n);
  parallel_for(n, [&](std::size_t k) {
    slots[k] = als_minimize(obj, random_lowrank(format, sys.solution_shape(), ranks, stream_seed(opts.seed, k), tree),
                            opts);
  });
  Index best = 0;
  for (Index k = 1; k < n; ++k)
    if (slots[k]->trace.steps.back().objective < slots[best]->trace.steps.back().objective) best = k;
  return to_solution(sys, std::move(*slots[best]));
}

LowRankSolution minres_lr(const AffineParametricSystem& sys, LowRank init, const OptimOptions& opts) {
  return to_solution(sys, als_minimize(residual_objective(sys), std::move(init), opts));
}

// ---------------------------------------------------------------- PGD

DenseTensor PGDSolution::to_dense(const AffineParametricSystem& sys) const {
  if (V.cols() == 0) return DenseTensor(sys.solution_shape());
  return from_snapshots(sys, V * S.transpose());
}

PGDSolution pgd_galerkin(const AffineParametricSystem& sys, Index r_max, const PgdOptions& opts,
                         const Observer& observe) {
  if (opts.max_sweeps < 1 || !(opts.tol > 0.0)) throw std::invalid_argument("PGD options: max_sweeps >= 1, tol > 0");
  const Stopwatch clock;
  const PointData pd(sys);
  const Index K = pd.K();
  const auto N = static_cast<Eigen::Index>(sys.state_dim());
  PGDSolution sol;
  sol.V.resize(N, 0);
  sol.S.resize(static_cast<Eigen::Index>(K), 0);
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(K));
  Eigen::MatrixXd R = pd.F;  // f_k - B_k u_k
  auto record = [&](Index r) {
    ConvergenceRecord rec{r, pd.residual(U), pd.energy(U), {r}, clock.ms()};
    sol.trace.records.push_back(rec);
    if (observe) observe(rec, from_snapshots(sys, U));
  };
  record(0);
  sol.trace.stop_reason = "max_rank";
  for (Index r = 1; r <= r_max; ++r) {
    Eigen::VectorXd s = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(K));
    Eigen::VectorXd v = Eigen::VectorXd::Zero(N);
    double dJ_prev = 0.0;  // J(u_{r-1} + s v) - J(u_{r-1})
    for (Index sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
      // spatial problem
      Eigen::MatrixXd Bh = Eigen::MatrixXd::Zero(N, N);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
      for (Index k = 0; k < K; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        Bh += (pd.w(kk) * s(kk) * s(kk)) * pd.B[k];
        rhs += (pd.w(kk) * s(kk)) * R.col(kk);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(Bh);
      if (llt.info() != Eigen::Success) throw NumericalError("PGD: assembled spatial operator is singular");
      v = llt.solve(rhs);
      const double nv = v.norm();
      if (!(nv > 0.0)) break;
      v /= nv;
      // parametric problem, one scalar equation per point
      for (Index k = 0; k < K; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        s(kk) = v.dot(R.col(kk)) / v.dot(pd.B[k] * v);
      }
      double dJ = 0.0;
      for (Index k = 0; k < K; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        dJ += pd.w(kk) * (s(kk) * s(kk) * v.dot(pd.B[k] * v) - 2.0 * s(kk) * v.dot(R.col(kk)));
      }
      const double J = pd.energy(U) + dJ;
      const bool done = sweep > 1 && std::abs(dJ - dJ_prev) <= opts.tol * std::abs(J);
      dJ_prev = dJ;
      if (done) break;
    }
    const double cn = std::sqrt((pd.w.array() * s.array().square()).sum());
    const double un = std::sqrt((pd.w.transpose() * U.colwise().squaredNorm().transpose()).value());
    if (!(cn > 0.0) || cn < 1e-14 * un || !v.allFinite()) {
      sol.trace.stop_reason = "degenerate";
      break;
    }
    U += v * s.transpose();
    for (Index k = 0; k < K; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      R.col(kk) = pd.F.col(kk) - pd.B[k] * U.col(kk);
    }
    sol.V.conservativeResize(Eigen::NoChange, sol.V.cols() + 1);
    sol.V.col(sol.V.cols() - 1) = v;
    sol.S.conservativeResize(Eigen::NoChange, sol.S.cols() + 1);
    sol.S.col(sol.S.cols() - 1) = s;
    record(r);
  }
  return sol;
}

namespace {

ReducedModel reduce(const AffineParametricSystem& sys, const Eigen::MatrixXd& V) {
  ReducedModel m;
  for (Index l = 0; l < sys.num_operators(); ++l) m.B.push_back(V.transpose() * sys.op(l) * V);
  for (Index l = 0; l < sys.num_rhs(); ++l) m.f.push_back(V.transpose() * sys.rhs(l));
  return m;
}

// Solves the r x r reduced system at every grid point; rows of the result are s(y^k).
Eigen::MatrixXd reduced_solve(const AffineParametricSystem& sys, const ReducedModel& m) {
  const Index K = sys.num_points();
  const auto r = static_cast<Eigen::Index>(m.rank());
  Eigen::MatrixXd S(static_cast<Eigen::Index>(K), r);
  std::vector<char> failed(K, 0);
  parallel_for(K, [&](std::size_t k) {
    Eigen::MatrixXd B = sys.lambda_at(0, k) * m.B[0];
    for (Index l = 1; l < m.B.size(); ++l) B += sys.lambda_at(l, k) * m.B[l];
    Eigen::VectorXd f = sys.gamma_at(0, k) * m.f[0];
    for (Index l = 1; l < m.f.size(); ++l) f += sys.gamma_at(l, k) * m.f[l];
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) {
      failed[k] = 1;
      return;
    }
    S.row(static_cast<Eigen::Index>(k)) = llt.solve(f).transpose();
  });
  for (char c : failed)
    if (c) throw NumericalError("PGD: reduced system is singular");
  return S;
}

}  // namespace

PgdSubspaceResult pgd_subspace(const AffineParametricSystem& sys, Index r_max, const PgdOptions& opts,
                               const Observer& observe) {
  if (opts.max_sweeps < 1 || !(opts.tol > 0.0)) throw std::invalid_argument("PGD options: max_sweeps >= 1, tol > 0");
  const Stopwatch clock;
  const PointData pd(sys);
  const Index K = pd.K();
  const auto N = static_cast<Eigen::Index>(sys.state_dim());
  r_max = std::min<Index>(r_max, static_cast<Index>(N));
  PgdSubspaceResult out;
  PGDSolution& sol = out.solution;
  sol.V.resize(N, 0);
  sol.S.resize(static_cast<Eigen::Index>(K), 0);
  auto record = [&](Index r) {
    const Eigen::MatrixXd U = r == 0 ? Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(K)) : Eigen::MatrixXd(sol.V * sol.S.transpose());
    ConvergenceRecord rec{r, pd.residual(U), pd.energy(U), {r}, clock.ms()};
    sol.trace.records.push_back(rec);
    if (observe) observe(rec, from_snapshots(sys, U));
  };
  record(0);
  sol.trace.stop_reason = "max_rank";
  for (Index r = 1; r <= r_max; ++r) {
    const Eigen::MatrixXd Vp = sol.V;  // fixed V_{r-1}
    Eigen::MatrixXd Sfull(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(r));
    Sfull.leftCols(static_cast<Eigen::Index>(r - 1)) = sol.S;
    Sfull.col(static_cast<Eigen::Index>(r - 1)).setOnes();
    Eigen::VectorXd vr;
    Eigen::MatrixXd Vr;
    ReducedModel model;
    double J_prev = 0.0;
    bool have = false;
    for (Index sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
      // (a) spatial problem for v_r with all coefficients fixed
      const Eigen::VectorXd sr = Sfull.col(static_cast<Eigen::Index>(r - 1));
      const Eigen::MatrixXd Ucur = Vp * Sfull.leftCols(static_cast<Eigen::Index>(r - 1)).transpose();
      Eigen::MatrixXd Bh = Eigen::MatrixXd::Zero(N, N);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
      for (Index k = 0; k < K; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        Bh += (pd.w(kk) * sr(kk) * sr(kk)) * pd.B[k];
        rhs += (pd.w(kk) * sr(kk)) * (pd.F.col(kk) - pd.B[k] * Ucur.col(kk));
      }
      Eigen::LLT<Eigen::MatrixXd> llt(Bh);
      if (llt.info() != Eigen::Success) break;
      Eigen::VectorXd v = llt.solve(rhs);
      const double n0 = v.norm();
      for (int pass = 0; pass < 2; ++pass) v -= Vp * (Vp.transpose() * v);
      const double n1 = v.norm();
      if (!(n0 > 0.0) || n1 <= 1e-12 * n0) break;  // no new direction; keep the last one
      vr = v / n1;
      Vr.resize(N, static_cast<Eigen::Index>(r));
      Vr << Vp, vr;
      // (b) reduced collocation problem for all coefficients
      model = reduce(sys, Vr);
      Sfull = reduced_solve(sys, model);
      have = true;
      const double J = pd.energy(Vr * Sfull.transpose());
      const bool done = sweep > 1 && std::abs(J_prev - J) <= opts.tol * std::abs(J);
      J_prev = J;
      if (done) break;
    }
    if (!have) {
      sol.trace.stop_reason = "saturated";
      break;
    }
    sol.V = Vr;
    sol.S = Sfull;
    out.models.push_back(std::move(model));
    record(r);
  }
  return out;
}

// ---------------------------------------------------------------- POD / EIM

PODResult pod(const Eigen::MatrixXd& snapshots, const Eigen::VectorXd& weights, Index r) {
  const Eigen::Index N = snapshots.rows(), K = snapshots.cols();
  if (weights.size() != K) throw ShapeError("pod: one weight per snapshot");
  if ((weights.array() <= 0.0).any()) throw std::invalid_argument("pod: weights must be positive");
  if (r > static_cast<Index>(std::min(N, K))) throw RankError("pod: r must be <= min(N, K)");
  const Eigen::MatrixXd M = snapshots * weights.cwiseSqrt().asDiagonal();
  const SVDResult s = svd(M);
  PODResult out;
  out.basis = s.left.leftCols(static_cast<Eigen::Index>(r));
  out.coefficients = out.basis.transpose() * snapshots;
  out.eigenvalues = s.singular_values.array().square();
  out.error = std::sqrt(out.eigenvalues.tail(out.eigenvalues.size() - static_cast<Eigen::Index>(r)).sum());
  return out;
}

PODResult pod(const AffineParametricSystem& sys, const DenseTensor& u, Index r) {
  return pod(snapshot_matrix(sys, u), sys.weights(), r);
}

double projection_error(const Eigen::MatrixXd& snapshots, const Eigen::VectorXd& weights,
                        const Eigen::MatrixXd& basis) {
  const Eigen::MatrixXd E = snapshots - basis * (basis.transpose() * snapshots);
  return std::sqrt((weights.transpose() * E.colwise().squaredNorm().transpose()).value());
}

EIMResult eim_greedy(const Eigen::MatrixXd& snapshots, Index r) {
  const Eigen::Index N = snapshots.rows(), K = snapshots.cols();
  if (r > static_cast<Index>(K)) throw RankError("eim_greedy: r must be <= number of snapshots");
  EIMResult out;
  out.basis.resize(N, 0);
  Eigen::MatrixXd E = snapshots;  // current projection errors
  auto sup = [&](Index* arg) {
    const Eigen::VectorXd n = E.colwise().norm();
    const double mx = K > 0 ? n.maxCoeff() : 0.0;
    // ties: smallest index within rounding of the maximum
    Eigen::Index best = 0;
    while (best < K && n(best) < mx * (1.0 - 1e-12)) ++best;
    if (arg) *arg = static_cast<Index>(best);
    return mx;
  };
  const double scale = sup(nullptr);
  out.sup_errors.push_back(scale);
  for (Index step = 0; step < r; ++step) {
    Index k = 0;
    const double e = sup(&k);
    if (!(e > 1e-14 * scale)) break;
    Eigen::VectorXd q = snapshots.col(static_cast<Eigen::Index>(k));
    for (int pass = 0; pass < 2; ++pass) q -= out.basis * (out.basis.transpose() * q);
    const double qn = q.norm();
    if (!(qn > 0.0)) break;
    q /= qn;
    out.basis.conservativeResize(Eigen::NoChange, out.basis.cols() + 1);
    out.basis.col(out.basis.cols() - 1) = q;
    out.indices.push_back(k);
    E = snapshots - out.basis * (out.basis.transpose() * snapshots);
    out.sup_errors.push_back(sup(nullptr));
  }
  return out;
}

}  // namespace tensoria

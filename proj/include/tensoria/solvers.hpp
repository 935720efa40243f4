#pragma once

// Low-rank solvers for the collocated parametric system: truncated Richardson,
// residual minimization, rank-one PGD (Galerkin), subspace PGD, POD and the
// sup-norm (EIM) greedy.

#include "tensoria/errors.hpp"
#include "tensoria/optimize.hpp"
#include "tensoria/parametric.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace tensoria {

struct ConvergenceRecord {
  Index step = 0;             // iteration, sweep or rank
  double residual = 0.0;      // residual_error of the iterate
  double energy = 0.0;        // J of the iterate
  std::vector<Index> ranks;
  double wallclock_ms = 0.0;  // since solver start
};

struct SolverTrace {
  std::vector<ConvergenceRecord> records;
  std::string stop_reason;
};

// Called once per record with the iterate as a dense (K_1..K_d, N) tensor.
using Observer = std::function<void(const ConvergenceRecord&, const DenseTensor&)>;

struct DivergenceError : NumericalError {
  DivergenceError(const std::string& msg, SolverTrace t) : NumericalError(msg), trace(std::move(t)) {}
  SolverTrace trace;
};

struct LowRankSolution {
  LowRank x;
  SolverTrace trace;
};

struct RichardsonOptions {
  double alpha = 0.0;  // <= 0: 1 / estimate_beta_max
  double eps = 1e-6;   // truncation tolerance (relative) and stopping floor
  Index max_iter = 20000;
  Format format = Format::TT;
  std::optional<DimensionTree> tree;  // tree format only; balanced by default
  Index window = 50;                  // stagnation: best residual improves < 0.1% over this many iterations
  // Precondition with the inverse of the mean operator (state mode only); alpha
  // then refers to the preconditioned operator.
  bool mean_preconditioner = false;
};

// u <- truncate(u - alpha P (A u - F), eps), P = I or I (x) ... (x) Bbar^-1. Throws DivergenceError when the
// residual exceeds 10x the initial one.
[[nodiscard]] LowRankSolution richardson_lr(const AffineParametricSystem& sys, const RichardsonOptions& opts,
                                            const Observer& observe = {});

// Minimizes residual_error over the format by ALS (one record per sweep).
[[nodiscard]] LowRankSolution minres_lr(const AffineParametricSystem& sys, Format format, const std::vector<Index>& ranks,
                                        const OptimOptions& opts,
                                        const std::optional<DimensionTree>& tree = std::nullopt);
[[nodiscard]] LowRankSolution minres_lr(const AffineParametricSystem& sys, LowRank init, const OptimOptions& opts);
// residual_error(w)^2 as a least-squares objective
[[nodiscard]] QuadraticObjective residual_objective(const AffineParametricSystem& sys);

struct PgdOptions {
  Index max_sweeps = 50;
  double tol = 1e-8;  // relative decrease of J per alternation
};

// u_r = sum_i s_i (x) v_i over the flattened grid (S is K x r, V is N x r).
struct PGDSolution {
  Eigen::MatrixXd V;
  Eigen::MatrixXd S;
  SolverTrace trace;  // one record per rank

  [[nodiscard]] Index rank() const { return static_cast<Index>(V.cols()); }
  [[nodiscard]] DenseTensor to_dense(const AffineParametricSystem& sys) const;
};

[[nodiscard]] PGDSolution pgd_galerkin(const AffineParametricSystem& sys, Index r_max, const PgdOptions& opts = {},
                                       const Observer& observe = {});

struct ReducedModel {
  std::vector<Eigen::MatrixXd> B;  // V^T B_l V
  std::vector<Eigen::VectorXd> f;  // V^T f_l
  [[nodiscard]] Index rank() const { return B.empty() ? 0 : static_cast<Index>(B[0].rows()); }
};

struct PgdSubspaceResult {
  PGDSolution solution;               // V orthonormal
  std::vector<ReducedModel> models;   // models[r-1] for rank r
};

[[nodiscard]] PgdSubspaceResult pgd_subspace(const AffineParametricSystem& sys, Index r_max,
                                             const PgdOptions& opts = {}, const Observer& observe = {});

struct PODResult {
  Eigen::MatrixXd basis;         // N x r, orthonormal
  Eigen::MatrixXd coefficients;  // r x K, basis^T snapshots
  Eigen::VectorXd eigenvalues;   // of the weighted correlation operator, nonincreasing
  double error = 0.0;            // sqrt of the eigenvalue tail
};

// snapshots: N x K; weights: K positive
[[nodiscard]] PODResult pod(const Eigen::MatrixXd& snapshots, const Eigen::VectorXd& weights, Index r);
[[nodiscard]] PODResult pod(const AffineParametricSystem& sys, const DenseTensor& u, Index r);
// sqrt(sum_k w_k |u_k - P u_k|^2) measured directly
[[nodiscard]] double projection_error(const Eigen::MatrixXd& snapshots, const Eigen::VectorXd& weights,
                                      const Eigen::MatrixXd& basis);

struct EIMResult {
  Eigen::MatrixXd basis;           // N x r, orthonormal
  std::vector<Index> indices;      // selected snapshot columns
  std::vector<double> sup_errors;  // sup_errors[r] = max_k |u_k - P_r u_k|, r = 0..
};

[[nodiscard]] EIMResult eim_greedy(const Eigen::MatrixXd& snapshots, Index r);

}  // namespace tensoria

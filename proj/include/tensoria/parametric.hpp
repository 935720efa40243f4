#pragma once

// Parameter-dependent linear systems B(y) u(y) = f(y) in affine form,
// collocated on a tensorized grid, and the random-coefficient diffusion model.

#include "tensoria/formats.hpp"
#include "tensoria/tensor.hpp"

#include <Eigen/Dense>

#include <vector>

namespace tensoria {

// Per-dimension collocation points and weights (weights sum to 1).
struct Grid1D {
  Eigen::VectorXd points;
  Eigen::VectorXd weights;
};

// K-point Gauss-Legendre rule mapped to [lo, hi], weights normalized to sum 1.
[[nodiscard]] Grid1D gauss_legendre(Index K, double lo, double hi);

// Separable parameter function: value at grid index k is prod_nu table[nu](k_nu).
using FactoredTable = std::vector<Eigen::VectorXd>;

class AffineParametricSystem {
 public:
  // B(y) = sum_l lambda_l(y) B_l, f(y) = sum_l gamma_l(y) f_l. Validates shapes,
  // weights, and that B(y) is SPD (Cholesky at every grid point when there are
  // at most 4096 of them, otherwise at 4096 evenly spaced ones).
  AffineParametricSystem(std::vector<Eigen::MatrixXd> operators, std::vector<FactoredTable> lambda,
                         std::vector<Eigen::VectorXd> rhs, std::vector<FactoredTable> gamma, std::vector<Grid1D> grid);

  [[nodiscard]] Index state_dim() const { return N_; }
  [[nodiscard]] Index param_dim() const { return grid_.size(); }
  [[nodiscard]] Index num_operators() const { return B_.size(); }
  [[nodiscard]] Index num_rhs() const { return f_.size(); }
  [[nodiscard]] const Eigen::MatrixXd& op(Index l) const { return B_[l]; }
  [[nodiscard]] const Eigen::VectorXd& rhs(Index l) const { return f_[l]; }
  [[nodiscard]] const FactoredTable& lambda(Index l) const { return lambda_[l]; }
  [[nodiscard]] const FactoredTable& gamma(Index l) const { return gamma_[l]; }
  [[nodiscard]] const std::vector<Grid1D>& grid() const { return grid_; }

  // (K_1, ..., K_d)
  [[nodiscard]] const Shape& grid_shape() const { return grid_shape_; }
  // (K_1, ..., K_d, N)
  [[nodiscard]] const Shape& solution_shape() const { return sol_shape_; }
  [[nodiscard]] Index num_points() const { return grid_shape_.size(); }

  // Flat grid index k, row-major over (K_1..K_d).
  [[nodiscard]] double lambda_at(Index l, Index k) const;
  [[nodiscard]] double gamma_at(Index l, Index k) const;
  [[nodiscard]] double weight_at(Index k) const;
  [[nodiscard]] Eigen::VectorXd weights() const;  // all K, flat order
  [[nodiscard]] Eigen::MatrixXd B_at(Index k) const;
  [[nodiscard]] Eigen::VectorXd f_at(Index k) const;
  // parameter values y^k
  [[nodiscard]] Eigen::VectorXd point_at(Index k) const;

 private:
  [[nodiscard]] double table_at(const FactoredTable& t, Index k) const;

  std::vector<Eigen::MatrixXd> B_;
  std::vector<FactoredTable> lambda_;
  std::vector<Eigen::VectorXd> f_;
  std::vector<FactoredTable> gamma_;
  std::vector<Grid1D> grid_;
  Index N_ = 0;
  Shape grid_shape_;
  Shape sol_shape_;
};

struct DiffusionBenchmark {
  Index n_el = 0;
  Index d = 0;
  double kappa0 = 1.0;
  double xi_max = 0.45;
  std::vector<Index> K;
};

struct DiffusionProblem {
  AffineParametricSystem system;
  DiffusionBenchmark benchmark;
};

// -(kappa u')' = 1 on (0,1), u(0) = u(1) = 0, P1 elements on n_el uniform cells,
// kappa(x, xi) = kappa0 + sum_nu xi_nu 1_{D_nu}(x), D_nu = ((nu-1)/d, nu/d).
// Operators: B_0 (kappa0), then B_nu (indicator of D_nu).
[[nodiscard]] DiffusionProblem build_diffusion(Index n_el, Index d, double kappa0, const std::vector<Index>& K);
[[nodiscard]] DiffusionProblem build_diffusion(Index n_el, Index d, double kappa0, Index K = 5);

// P1 stiffness matrix on the interior nodes for the piecewise constant
// coefficient c(x) = 1 on (a, b), 0 elsewhere.
[[nodiscard]] Eigen::MatrixXd p1_stiffness(Index n_el, double a, double b);
[[nodiscard]] Eigen::VectorXd p1_load(Index n_el);

// Direct solve at every grid point; NumericalError when a system is singular.
[[nodiscard]] DenseTensor full_solve(const AffineParametricSystem& sys);

// F = sum_l gamma_l (x) f_l as a dense tensor / rank-L CP tensor.
[[nodiscard]] DenseTensor rhs_tensor(const AffineParametricSystem& sys);
[[nodiscard]] CPTensor rhs_cp(const AffineParametricSystem& sys);

// A w with A = sum_l Lambda_l^(1) (x) ... (x) Lambda_l^(d) (x) B_l.
[[nodiscard]] DenseTensor operator_apply(const AffineParametricSystem& sys, const DenseTensor& w);
// Same in the format of w; ranks grow by the factor R (CP rank by R).
[[nodiscard]] LowRank operator_apply(const AffineParametricSystem& sys, const LowRank& w);

// Applies M to the state mode of w, keeping the format and ranks.
[[nodiscard]] LowRank apply_state_matrix(const LowRank& w, const Eigen::MatrixXd& M);
// B at the grid mean of the lambda's: sum_l E[lambda_l] B_l
[[nodiscard]] Eigen::MatrixXd mean_operator(const AffineParametricSystem& sys);

// sqrt(sum_k w_k |B(y^k) w(y^k) - f(y^k)|^2)
[[nodiscard]] double residual_error(const AffineParametricSystem& sys, const DenseTensor& w);
// sum_k w_k (<B(y^k) w, w> - 2 <f(y^k), w>)
[[nodiscard]] double energy(const AffineParametricSystem& sys, const DenseTensor& w);

// Order-two view: column k is w(y^k); N x K.
[[nodiscard]] Eigen::MatrixXd snapshot_matrix(const AffineParametricSystem& sys, const DenseTensor& w);
[[nodiscard]] DenseTensor from_snapshots(const AffineParametricSystem& sys, const Eigen::MatrixXd& m);

// Largest eigenvalue of B(y^k) over the grid, by power iteration.
[[nodiscard]] double estimate_beta_max(const AffineParametricSystem& sys, Index iterations = 200);

}  // namespace tensoria

#pragma once

// Alternating (block coordinate) minimization over low-rank parametrizations,
// greedy rank-one and Tucker constructions, and least-squares fitting.

#include "tensoria/basis.hpp"
#include "tensoria/formats.hpp"
#include "tensoria/tensor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tensoria {

struct OptimOptions {
  Index max_sweeps = 100;
  double stagnation_tol = 1e-8;  // relative objective decrease per sweep
  Index restarts = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GreedyStep {
  Index step = 0;
  double objective = 0.0;        // sqrt of the quadratic functional
  double correction_norm = 0.0;
  std::vector<Index> ranks;
  bool rank_deficient = false;   // some block solve fell back to least-norm
  double data_error = 0.0;       // fitting only: root mean squared data misfit
};

struct GreedyTrace {
  std::vector<GreedyStep> steps;
  std::string stop_reason;
};

// E(w) = <H w, w> - 2 <b, w> + c with H symmetric positive semidefinite.
class QuadraticObjective {
 public:
  using Apply = std::function<DenseTensor(const DenseTensor&)>;
  using LinearMap = std::function<Eigen::VectorXd(const DenseTensor&)>;

  // ||target - w||^2
  [[nodiscard]] static QuadraticObjective distance_to(DenseTensor target);
  // ||phi(w) - g||^2 for a linear phi
  [[nodiscard]] static QuadraticObjective least_squares(Shape shape, LinearMap phi, Eigen::VectorXd g);
  // General form. H is probed for linearity, symmetry and semidefiniteness
  // on random inputs; std::invalid_argument when a probe fails.
  [[nodiscard]] static QuadraticObjective general(Shape shape, Apply apply_H, DenseTensor b, double c);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] double value(const DenseTensor& w) const;
  // b - H w, the steepest descent direction up to a factor 2
  // Empty for the least-squares form (no adjoint available).
  [[nodiscard]] std::optional<DenseTensor> residual(const DenseTensor& w) const;
  // Same functional in the shifted variable: E_u(w) = E(u + w).
  [[nodiscard]] QuadraticObjective shifted(const DenseTensor& u) const;

  // Minimizes E(offset + A p) + ridge |p|^2 over p, where the columns of A are
  // flattened tensors. Least-norm solution when singular.
  [[nodiscard]] Eigen::VectorXd solve_linear(const Eigen::MatrixXd& A, const DenseTensor* offset, double ridge,
                                             bool* rank_deficient) const;

 private:
  enum class Kind { Distance, LeastSquares, General };
  Kind kind_ = Kind::Distance;
  Shape shape_;
  DenseTensor target_;   // Distance: target; General: b
  LinearMap phi_;
  Eigen::VectorXd g_;
  Apply H_;
  double c_ = 0.0;
};

// Parameter blocks of a format: CP factors; Tucker factors then core; TT
// cores; tree leaves and transfers in node order.
[[nodiscard]] std::vector<Eigen::VectorXd> parameter_blocks(const LowRank& x);
[[nodiscard]] LowRank with_block(const LowRank& x, Index block, const Eigen::VectorXd& p);
// Flattened derivative of the dense tensor with respect to one block (exact by multilinearity).
[[nodiscard]] Eigen::MatrixXd block_design(const LowRank& x, Index block);

struct AlsResult {
  LowRank x;
  GreedyTrace trace;
};

// Block coordinate descent from a given start.
[[nodiscard]] AlsResult als_minimize(const QuadraticObjective& obj, LowRank init, const OptimOptions& opts,
                                     double ridge = 0.0);

// Best approximation of target: best of opts.restarts random starts, each
// with its own stream derived from (seed, restart).
[[nodiscard]] AlsResult als_best_approx(const DenseTensor& target, Format format, const std::vector<Index>& ranks,
                                        const OptimOptions& opts,
                                        const std::optional<DimensionTree>& tree = std::nullopt);
[[nodiscard]] AlsResult als_best_approx(const DenseTensor& target, LowRank init, const OptimOptions& opts);

struct GreedyResult {
  CPTensor x;
  GreedyTrace trace;
};

// u_r = u_{r-1} + w_r with w_r an ALS rank-one minimizer started from the
// dominant HOSVD factors of b - H u_{r-1}.
[[nodiscard]] GreedyResult greedy_rank_one(const QuadraticObjective& obj, Index r_max, const OptimOptions& opts);
// Same corrections; all weights refreshed after each step.
[[nodiscard]] GreedyResult orthogonal_greedy(const QuadraticObjective& obj, Index r_max, const OptimOptions& opts);
// Optimal weights for fixed (normalized) factors; least-norm when singular.
[[nodiscard]] CPTensor refit_coefficients(const QuadraticObjective& obj, const CPTensor& x, bool* rank_deficient = nullptr);
// Rank-one ALS minimizer of obj from the given start (unit factors, magnitude in the weight).
[[nodiscard]] CPTensor rank_one_correction(const QuadraticObjective& obj, const CPTensor& start, const OptimOptions& opts);

struct TuckerGreedyResult {
  TuckerTensor x;
  GreedyTrace trace;
};
[[nodiscard]] TuckerGreedyResult greedy_tucker(const DenseTensor& target, Index steps, const OptimOptions& opts);

struct FitResult {
  LowRank coefficients;
  GreedyTrace trace;
  double ridge = 0.0;
};

// points: K x d, values: K. Minimizes (1/K) sum (g - h)^2 + ridge * |params|^2.
[[nodiscard]] FitResult least_squares_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                                          const std::vector<FunctionBasis>& bases, Format format,
                                          const std::vector<Index>& ranks, double ridge, const OptimOptions& opts,
                                          const std::optional<DimensionTree>& tree = std::nullopt);
// h(y) = sum_k a_k prod_nu psi_k_nu(y_nu) for every row of points
[[nodiscard]] Eigen::VectorXd predict(const LowRank& coefficients, const std::vector<FunctionBasis>& bases,
                                      const Eigen::MatrixXd& points);

}  // namespace tensoria

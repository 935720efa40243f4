#pragma once

#include <Eigen/Dense>

namespace tensoria {

struct SVDResult {
  Eigen::MatrixXd left;               // orthonormal columns
  Eigen::VectorXd singular_values;    // nonincreasing
  Eigen::MatrixXd right;              // orthonormal columns
};

// Thin SVD. Each left singular vector has a nonnegative largest-magnitude entry
// (first such entry on ties); the right vector is flipped along with it.
[[nodiscard]] SVDResult svd(const Eigen::MatrixXd& m);

struct QRResult {
  Eigen::MatrixXd Q;  // m x k, k = min(m, n)
  Eigen::MatrixXd R;  // k x n, diag(R) >= 0
};

[[nodiscard]] QRResult thin_qr(const Eigen::MatrixXd& m);

// Least-norm least-squares solution. rank_deficient is set when A has
// numerically dependent columns.
struct LstsqResult {
  Eigen::VectorXd x;
  bool rank_deficient = false;
};
[[nodiscard]] LstsqResult lstsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

// Solve a symmetric positive semidefinite system H x = g in the least-norm sense.
[[nodiscard]] LstsqResult solve_psd(const Eigen::MatrixXd& H, const Eigen::VectorXd& g);

// Orthonormal basis of range(m) keeping singular values above rel_tol * sigma_max.
[[nodiscard]] Eigen::MatrixXd range_basis(const Eigen::MatrixXd& m, double rel_tol);

// Kronecker product a (x) b.
[[nodiscard]] Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace tensoria

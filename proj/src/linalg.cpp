#include "tensoria/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tensoria {

SVDResult svd(const Eigen::MatrixXd& m) {
  SVDResult out;
  if (m.rows() == 0 || m.cols() == 0) {
    out.left.resize(m.rows(), 0);
    out.right.resize(m.cols(), 0);
    return out;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> s(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.left = s.matrixU();
  out.singular_values = s.singularValues();
  out.right = s.matrixV();
  for (Eigen::Index j = 0; j < out.left.cols(); ++j) {
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index i = 0; i < out.left.rows(); ++i) {
      // strict comparison keeps the first maximal entry; a small slack avoids
      // flips from last-bit noise between near-equal entries
      if (std::abs(out.left(i, j)) > mag * (1.0 + 1e-12)) {
        mag = std::abs(out.left(i, j));
        best = i;
      }
    }
    if (out.left(best, j) < 0) {
      out.left.col(j) *= -1.0;
      out.right.col(j) *= -1.0;
    }
  }
  return out;
}

QRResult thin_qr(const Eigen::MatrixXd& m) {
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  QRResult out;
  out.Q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), k);
  out.R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < k; ++i) {
    if (out.R(i, i) < 0) {
      out.R.row(i) *= -1.0;
      out.Q.col(i) *= -1.0;
    }
  }
  return out;
}

LstsqResult lstsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  LstsqResult out;
  if (A.cols() == 0) {
    out.x.resize(0);
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  out.x = cod.solve(b);
  out.rank_deficient = cod.rank() < A.cols();
  return out;
}

LstsqResult solve_psd(const Eigen::MatrixXd& H, const Eigen::VectorXd& g) {
  LstsqResult out;
  if (H.cols() == 0) {
    out.x.resize(0);
    return out;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Eigen::VectorXd D = ldlt.vectorD();
    const double dmax = D.cwiseAbs().maxCoeff();
    if (D.minCoeff() > 1e-13 * dmax && dmax > 0) {
      out.x = ldlt.solve(g);
      return out;
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(H);
  cod.setThreshold(1e-13);
  out.x = cod.solve(g);
  out.rank_deficient = true;
  return out;
}

Eigen::MatrixXd range_basis(const Eigen::MatrixXd& m, double rel_tol) {
  const SVDResult s = svd(m);
  if (s.singular_values.size() == 0 || s.singular_values(0) == 0.0) return Eigen::MatrixXd(m.rows(), 0);
  Eigen::Index r = 0;
  while (r < s.singular_values.size() && s.singular_values(r) > rel_tol * s.singular_values(0)) ++r;
  return s.left.leftCols(r);
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace tensoria

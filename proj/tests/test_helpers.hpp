#pragma once

#include "tensoria/rng.hpp"
#include "tensoria/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace testutil {

inline tensoria::DenseTensor random_tensor(const tensoria::Shape& s, std::uint64_t seed) {
  tensoria::Rng rng(seed);
  std::vector<double> d(s.size());
  for (double& x : d) x = rng.normal();
  return tensoria::DenseTensor(s, std::move(d));
}

inline Eigen::VectorXd random_vector(Eigen::Index n, tensoria::Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, tensoria::Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

inline double rel_diff(const tensoria::DenseTensor& a, const tensoria::DenseTensor& b) {
  const double nb = tensoria::norm(b);
  return tensoria::norm(a - b) / (nb > 0 ? nb : 1.0);
}

// Decodes a flat row-major position into a multi-index (independent of the library).
inline std::vector<std::size_t> decode(std::size_t flat, const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> idx(dims.size());
  for (std::size_t k = dims.size(); k-- > 0;) {
    idx[k] = flat % dims[k];
    flat /= dims[k];
  }
  return idx;
}

}  // namespace testutil

#pragma once

// One-dimensional function dictionaries used by least-squares fitting.

#include <Eigen/Dense>

#include <cstddef>
#include <string>

namespace tensoria {

class FunctionBasis {
 public:
  enum class Kind { Legendre, Monomial };

  // Legendre polynomials P_0..P_{size-1} of the variable mapped from [lo,hi]
  // to [-1,1]; monomials use the same mapping.
  FunctionBasis(Kind kind, std::size_t size, double lo = -1.0, double hi = 1.0);
  // "legendre" or "monomial"
  [[nodiscard]] static FunctionBasis parse(const std::string& kind, std::size_t size, double lo = -1.0, double hi = 1.0);

  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] Eigen::VectorXd eval(double y) const;

 private:
  Kind kind_;
  std::size_t size_;
  double lo_, hi_;
};

}  // namespace tensoria

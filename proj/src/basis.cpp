#include "tensoria/basis.hpp"

#include <stdexcept>

namespace tensoria {

FunctionBasis::FunctionBasis(Kind kind, std::size_t size, double lo, double hi)
    : kind_(kind), size_(size), lo_(lo), hi_(hi) {
  if (size == 0) throw std::invalid_argument("basis size must be >= 1");
  if (!(hi > lo)) throw std::invalid_argument("basis interval must have hi > lo");
}

FunctionBasis FunctionBasis::parse(const std::string& kind, std::size_t size, double lo, double hi) {
  if (kind == "legendre") return FunctionBasis(Kind::Legendre, size, lo, hi);
  if (kind == "monomial") return FunctionBasis(Kind::Monomial, size, lo, hi);
  throw std::invalid_argument("unknown basis kind: " + kind);
}

Eigen::VectorXd FunctionBasis::eval(double y) const {
  const double t = (2.0 * y - lo_ - hi_) / (hi_ - lo_);
  Eigen::VectorXd v(static_cast<Eigen::Index>(size_));
  v(0) = 1.0;
  if (size_ == 1) return v;
  v(1) = t;
  for (std::size_t k = 2; k < size_; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    if (kind_ == Kind::Monomial) {
      v(i) = v(i - 1) * t;
    } else {
      // Bonnet recursion
      const double kk = static_cast<double>(k);
      v(i) = ((2 * kk - 1) * t * v(i - 1) - (kk - 1) * v(i - 2)) / kk;
    }
  }
  return v;
}

}  // namespace tensoria

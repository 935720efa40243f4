#include "tensoria/tensor.hpp"

#include "tensoria/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace tensoria {

Shape::Shape(std::vector<Index> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw ShapeError("shape must have order >= 1");
  size_ = 1;
  for (Index n : dims_) {
    if (n == 0) throw ShapeError("shape dimensions must be >= 1");
    if (size_ > std::numeric_limits<Index>::max() / n) throw ShapeError("shape size overflows");
    size_ *= n;
  }
}

std::vector<Index> Shape::strides() const {
  std::vector<Index> s(dims_.size(), 1);
  for (Index k = dims_.size(); k-- > 1;) s[k - 1] = s[k] * dims_[k];
  return s;
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)), data_(shape_.size(), 0.0) {}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_.size())
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape size " +
                     std::to_string(shape_.size()));
  for (double x : data_)
    if (!std::isfinite(x)) throw ShapeError("tensor entries must be finite");
}

DenseTensor DenseTensor::from_matrix(const Eigen::MatrixXd& m) {
  DenseTensor t(Shape{static_cast<Index>(m.rows()), static_cast<Index>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.data_[i * m.cols() + j] = m(i, j);
  return t;
}

DenseTensor DenseTensor::from_vector(const Eigen::VectorXd& v) {
  return DenseTensor(Shape{static_cast<Index>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

Index DenseTensor::flat_index(std::span<const Index> idx) const {
  if (idx.size() != shape_.order()) throw ShapeError("index order mismatch");
  Index flat = 0;
  for (Index k = 0; k < idx.size(); ++k) {
    if (idx[k] >= shape_[k]) throw ShapeError("index out of range");
    flat = flat * shape_[k] + idx[k];
  }
  return flat;
}

Eigen::MatrixXd DenseTensor::to_matrix() const {
  if (order() != 2) throw ShapeError("to_matrix needs an order-2 tensor");
  const auto rows = static_cast<Eigen::Index>(shape_[0]);
  const auto cols = static_cast<Eigen::Index>(shape_[1]);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data_[i * cols + j];
  return m;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& o) {
  if (!(shape_ == o.shape_)) throw ShapeError("shape mismatch in +");
  for (Index i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& o) {
  if (!(shape_ == o.shape_)) throw ShapeError("shape mismatch in -");
  for (Index i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

ModeSet::ModeSet(std::vector<Index> modes) : modes_(std::move(modes)) {
  for (Index k = 1; k < modes_.size(); ++k)
    if (modes_[k] <= modes_[k - 1]) throw ShapeError("mode set must be strictly increasing");
}

ModeSet ModeSet::range(Index lo, Index hi) {
  std::vector<Index> m;
  for (Index k = lo; k < hi; ++k) m.push_back(k);
  return ModeSet(std::move(m));
}

bool ModeSet::contains(Index nu) const { return std::binary_search(modes_.begin(), modes_.end(), nu); }

ModeSet ModeSet::complement(Index d) const {
  std::vector<Index> m;
  for (Index k = 0; k < d; ++k)
    if (!contains(k)) m.push_back(k);
  return ModeSet(std::move(m));
}

double inner(const DenseTensor& u, const DenseTensor& v) {
  if (!(u.shape() == v.shape())) throw ShapeError("shape mismatch in inner");
  double s = 0.0;
  for (Index i = 0; i < u.size(); ++i) s += u.data()[i] * v.data()[i];
  return s;
}

double norm(const DenseTensor& u) {
  // scaled accumulation, avoids overflow for huge entries
  return u.as_vector().norm();
}

DenseTensor permute(const DenseTensor& u, std::span<const Index> perm) {
  const Index d = u.order();
  if (perm.size() != d) throw ShapeError("permutation length mismatch");
  std::vector<bool> seen(d, false);
  for (Index p : perm) {
    if (p >= d || seen[p]) throw ShapeError("invalid permutation");
    seen[p] = true;
  }
  std::vector<Index> new_dims(d);
  for (Index k = 0; k < d; ++k) new_dims[k] = u.shape()[perm[k]];
  Shape out_shape(new_dims);
  const auto in_strides = u.shape().strides();
  std::vector<Index> step(d);  // input stride of each output mode
  for (Index k = 0; k < d; ++k) step[k] = in_strides[perm[k]];

  std::vector<double> out(u.size());
  std::vector<Index> idx(d, 0);
  Index src = 0;
  const auto& in = u.data();
  for (Index flat = 0; flat < out.size(); ++flat) {
    out[flat] = in[src];
    for (Index k = d; k-- > 0;) {
      if (++idx[k] < new_dims[k]) {
        src += step[k];
        break;
      }
      src -= step[k] * (new_dims[k] - 1);
      idx[k] = 0;
    }
  }
  return DenseTensor(std::move(out_shape), std::move(out));
}

DenseTensor reshape(const DenseTensor& u, Shape shape) {
  if (shape.size() != u.size()) throw ShapeError("reshape size mismatch");
  return DenseTensor(std::move(shape), u.data());
}

namespace {

void check_proper(const ModeSet& alpha, Index d) {
  if (alpha.empty()) throw ShapeError("matricization needs a nonempty mode set");
  if (alpha.modes().back() >= d) throw ShapeError("mode out of range");
  if (alpha.size() == d) throw ShapeError("matricization needs a proper mode subset");
}

std::vector<Index> alpha_first_perm(const ModeSet& alpha, Index d) {
  std::vector<Index> perm = alpha.modes();
  const ModeSet rest = alpha.complement(d);
  perm.insert(perm.end(), rest.modes().begin(), rest.modes().end());
  return perm;
}

Index prod_over(const Shape& s, const std::vector<Index>& modes) {
  Index p = 1;
  for (Index k : modes) p *= s[k];
  return p;
}

}  // namespace

DenseTensor matricize(const DenseTensor& u, const ModeSet& alpha) {
  const Index d = u.order();
  check_proper(alpha, d);
  const auto perm = alpha_first_perm(alpha, d);
  const Index rows = prod_over(u.shape(), alpha.modes());
  return reshape(permute(u, perm), Shape{rows, u.size() / rows});
}

Eigen::MatrixXd matricize_matrix(const DenseTensor& u, const ModeSet& alpha) {
  return matricize(u, alpha).to_matrix();
}

DenseTensor dematricize(const DenseTensor& m, const ModeSet& alpha, const Shape& shape) {
  const Index d = shape.order();
  check_proper(alpha, d);
  if (m.order() != 2) throw ShapeError("dematricize needs an order-2 tensor");
  const Index rows = prod_over(shape, alpha.modes());
  if (m.shape()[0] != rows || m.shape()[1] != shape.size() / rows)
    throw ShapeError("matrix dims inconsistent with shape and mode set");
  const auto perm = alpha_first_perm(alpha, d);
  std::vector<Index> permuted_dims(d);
  for (Index k = 0; k < d; ++k) permuted_dims[k] = shape[perm[k]];
  std::vector<Index> inverse(d);
  for (Index k = 0; k < d; ++k) inverse[perm[k]] = k;
  return permute(reshape(m, Shape(permuted_dims)), inverse);
}

DenseTensor dematricize(const Eigen::MatrixXd& m, const ModeSet& alpha, const Shape& shape) {
  return dematricize(DenseTensor::from_matrix(m), alpha, shape);
}

DenseTensor mode_apply(const DenseTensor& u, Index nu, const Eigen::MatrixXd& M) {
  const Index d = u.order();
  if (nu >= d) throw ShapeError("mode out of range");
  const Index n = u.shape()[nu];
  if (static_cast<Index>(M.cols()) != n) throw ShapeError("operator column count differs from mode size");
  const auto m = static_cast<Index>(M.rows());
  if (m == 0) throw ShapeError("operator must have at least one row");
  Index left = 1, right = 1;
  for (Index k = 0; k < nu; ++k) left *= u.shape()[k];
  for (Index k = nu + 1; k < d; ++k) right *= u.shape()[k];
  std::vector<Index> dims = u.shape().dims();
  dims[nu] = m;
  std::vector<double> out(left * m * right, 0.0);
  const auto& in = u.data();
  for (Index l = 0; l < left; ++l) {
    const double* src = in.data() + l * n * right;
    double* dst = out.data() + l * m * right;
    for (Index i = 0; i < m; ++i) {
      double* drow = dst + i * right;
      for (Index j = 0; j < n; ++j) {
        const double c = M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (c == 0.0) continue;
        const double* srow = src + j * right;
        for (Index r = 0; r < right; ++r) drow[r] += c * srow[r];
      }
    }
  }
  return DenseTensor(Shape(dims), std::move(out));
}

Index alpha_rank(const DenseTensor& u, const ModeSet& alpha, double tol) {
  if (tol < 0) throw ShapeError("tolerance must be nonnegative");
  const Eigen::MatrixXd m = matricize_matrix(u, alpha);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  double threshold = tol * s(0);
  if (tol == 0.0) {
    // numerical rank: the usual eps * max(m,n) * sigma_max cutoff
    threshold = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(m.rows(), m.cols())) * s(0);
  }
  Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > threshold) ++r;
  return r;
}

DenseTensor outer(const std::vector<Eigen::VectorXd>& vs) {
  if (vs.empty()) throw ShapeError("outer needs at least one vector");
  std::vector<Index> dims;
  for (const auto& v : vs) dims.push_back(static_cast<Index>(v.size()));
  Shape shape(dims);
  std::vector<double> data(shape.size());
  std::vector<double> acc{1.0};
  for (const auto& v : vs) {
    std::vector<double> next(acc.size() * static_cast<Index>(v.size()));
    for (Index a = 0; a < acc.size(); ++a)
      for (Eigen::Index i = 0; i < v.size(); ++i) next[a * v.size() + i] = acc[a] * v(i);
    acc.swap(next);
  }
  return DenseTensor(std::move(shape), std::move(acc));
}

}  // namespace tensoria

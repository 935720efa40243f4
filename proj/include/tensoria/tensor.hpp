#pragma once

// Dense order-d tensors. Storage is row-major (last index fastest).
// Modes are numbered 0..d-1 throughout the library.

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace tensoria {

using Index = std::size_t;

class Shape {
 public:
  Shape() = default;
  explicit Shape(std::vector<Index> dims);
  Shape(std::initializer_list<Index> dims) : Shape(std::vector<Index>(dims)) {}

  [[nodiscard]] Index order() const { return dims_.size(); }
  [[nodiscard]] Index operator[](Index nu) const { return dims_[nu]; }
  [[nodiscard]] const std::vector<Index>& dims() const { return dims_; }
  // product of dims (1 for the empty shape)
  [[nodiscard]] Index size() const { return size_; }
  // row-major strides
  [[nodiscard]] std::vector<Index> strides() const;

  friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }

 private:
  std::vector<Index> dims_;
  Index size_ = 1;
};

class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape);  // zeros
  DenseTensor(Shape shape, std::vector<double> data);

  [[nodiscard]] static DenseTensor from_matrix(const Eigen::MatrixXd& m);
  [[nodiscard]] static DenseTensor from_vector(const Eigen::VectorXd& v);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] Index order() const { return shape_.order(); }
  [[nodiscard]] Index size() const { return data_.size(); }
  [[nodiscard]] const std::vector<double>& data() const { return data_; }
  [[nodiscard]] std::vector<double>& data() { return data_; }

  [[nodiscard]] Index flat_index(std::span<const Index> idx) const;
  [[nodiscard]] double at(std::span<const Index> idx) const { return data_[flat_index(idx)]; }
  [[nodiscard]] double& at(std::span<const Index> idx) { return data_[flat_index(idx)]; }
  [[nodiscard]] double at(std::initializer_list<Index> idx) const {
    return at(std::span<const Index>(idx.begin(), idx.size()));
  }
  [[nodiscard]] double& at(std::initializer_list<Index> idx) {
    return at(std::span<const Index>(idx.begin(), idx.size()));
  }

  // order-2 only
  [[nodiscard]] Eigen::MatrixXd to_matrix() const;
  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> as_vector() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }
  [[nodiscard]] Eigen::Map<Eigen::VectorXd> as_vector() {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  DenseTensor& operator+=(const DenseTensor& o);
  DenseTensor& operator-=(const DenseTensor& o);
  DenseTensor& operator*=(double s);

  friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
  friend DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Strictly increasing set of modes.
class ModeSet {
 public:
  ModeSet() = default;
  explicit ModeSet(std::vector<Index> modes);
  ModeSet(std::initializer_list<Index> modes) : ModeSet(std::vector<Index>(modes)) {}

  [[nodiscard]] static ModeSet range(Index lo, Index hi);  // {lo,...,hi-1}
  [[nodiscard]] const std::vector<Index>& modes() const { return modes_; }
  [[nodiscard]] Index size() const { return modes_.size(); }
  [[nodiscard]] bool empty() const { return modes_.empty(); }
  [[nodiscard]] Index front() const { return modes_.front(); }
  [[nodiscard]] bool contains(Index nu) const;
  [[nodiscard]] ModeSet complement(Index d) const;

  friend bool operator==(const ModeSet& a, const ModeSet& b) = default;

 private:
  std::vector<Index> modes_;
};

[[nodiscard]] double inner(const DenseTensor& u, const DenseTensor& v);
[[nodiscard]] double norm(const DenseTensor& u);

// Generalized transpose: result mode k is input mode perm[k].
[[nodiscard]] DenseTensor permute(const DenseTensor& u, std::span<const Index> perm);
[[nodiscard]] DenseTensor reshape(const DenseTensor& u, Shape shape);

[[nodiscard]] DenseTensor matricize(const DenseTensor& u, const ModeSet& alpha);
[[nodiscard]] Eigen::MatrixXd matricize_matrix(const DenseTensor& u, const ModeSet& alpha);
[[nodiscard]] DenseTensor dematricize(const DenseTensor& m, const ModeSet& alpha, const Shape& shape);
[[nodiscard]] DenseTensor dematricize(const Eigen::MatrixXd& m, const ModeSet& alpha, const Shape& shape);

// id x ... x M x ... x id applied along mode nu
[[nodiscard]] DenseTensor mode_apply(const DenseTensor& u, Index nu, const Eigen::MatrixXd& M);

[[nodiscard]] Index alpha_rank(const DenseTensor& u, const ModeSet& alpha, double tol);

// v_0 (x) v_1 (x) ... (x) v_{d-1}
[[nodiscard]] DenseTensor outer(const std::vector<Eigen::VectorXd>& vs);

// Calls f(idx) for every multi-index in row-major order.
template <class F>
void for_each_index(const Shape& shape, F&& f) {
  const Index d = shape.order();
  std::vector<Index> idx(d, 0);
  const Index total = shape.size();
  for (Index flat = 0; flat < total; ++flat) {
    f(std::span<const Index>(idx));
    for (Index k = d; k-- > 0;) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
}

}  // namespace tensoria

#pragma once

// Low-rank representations: canonical (CP), Tucker, tensor train (TT) and
// tree-based Tucker over a DimensionTree.

#include "tensoria/dimension_tree.hpp"
#include "tensoria/tensor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace tensoria {

class CPTensor {
 public:
  // factor nu is n_nu x r; weights default to ones
  CPTensor(Shape shape, std::vector<Eigen::MatrixXd> factors, std::optional<Eigen::VectorXd> weights = std::nullopt);
  [[nodiscard]] static CPTensor zero(const Shape& shape);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] Index order() const { return shape_.order(); }
  [[nodiscard]] Index rank() const { return static_cast<Index>(weights_.size()); }
  [[nodiscard]] const std::vector<Eigen::MatrixXd>& factors() const { return factors_; }
  [[nodiscard]] const Eigen::MatrixXd& factor(Index nu) const { return factors_[nu]; }
  [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }

 private:
  Shape shape_;
  std::vector<Eigen::MatrixXd> factors_;
  Eigen::VectorXd weights_;
};

class TuckerTensor {
 public:
  TuckerTensor(Shape shape, DenseTensor core, std::vector<Eigen::MatrixXd> factors);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] Index order() const { return shape_.order(); }
  [[nodiscard]] const std::vector<Index>& ranks() const { return core_.shape().dims(); }
  [[nodiscard]] const DenseTensor& core() const { return core_; }
  [[nodiscard]] const std::vector<Eigen::MatrixXd>& factors() const { return factors_; }
  [[nodiscard]] const Eigen::MatrixXd& factor(Index nu) const { return factors_[nu]; }

 private:
  Shape shape_;
  DenseTensor core_;
  std::vector<Eigen::MatrixXd> factors_;
};

class TTTensor {
 public:
  // core k has shape (r_{k-1}, n_k, r_k) with r_{-1} = r_{d-1} = 1
  TTTensor(Shape shape, std::vector<DenseTensor> cores);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] Index order() const { return shape_.order(); }
  // the d-1 interior ranks
  [[nodiscard]] std::vector<Index> ranks() const;
  // r_k between core k and core k+1, with boundary values for k = -1 and d-1
  [[nodiscard]] Index left_rank(Index k) const { return cores_[k].shape()[0]; }
  [[nodiscard]] Index right_rank(Index k) const { return cores_[k].shape()[2]; }
  [[nodiscard]] const std::vector<DenseTensor>& cores() const { return cores_; }
  [[nodiscard]] const DenseTensor& core(Index k) const { return cores_[k]; }
  // core k as (r_{k-1} n_k) x r_k
  [[nodiscard]] Eigen::MatrixXd left_unfolding(Index k) const;
  // core k as r_{k-1} x (n_k r_k)
  [[nodiscard]] Eigen::MatrixXd right_unfolding(Index k) const;

 private:
  Shape shape_;
  std::vector<DenseTensor> cores_;
};

class TreeTensor {
 public:
  // ranks per node (r_root = 1); leaf_bases keyed by leaf node id
  // (n_nu x r_leaf); transfers keyed by internal node id with shape
  // (r_alpha, r_beta1, ..., r_betak) in child order.
  TreeTensor(DimensionTree tree, Shape shape, std::vector<Index> ranks, std::map<Index, Eigen::MatrixXd> leaf_bases,
             std::map<Index, DenseTensor> transfers);

  [[nodiscard]] const DimensionTree& tree() const { return tree_; }
  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] Index order() const { return shape_.order(); }
  [[nodiscard]] const std::vector<Index>& ranks() const { return ranks_; }
  [[nodiscard]] Index rank(Index node) const { return ranks_[node]; }
  [[nodiscard]] const std::map<Index, Eigen::MatrixXd>& leaf_bases() const { return leaf_bases_; }
  [[nodiscard]] const Eigen::MatrixXd& leaf_basis(Index node) const { return leaf_bases_.at(node); }
  [[nodiscard]] const std::map<Index, DenseTensor>& transfers() const { return transfers_; }
  [[nodiscard]] const DenseTensor& transfer(Index node) const { return transfers_.at(node); }
  // transfer of an internal node as r_alpha x prod r_beta
  [[nodiscard]] Eigen::MatrixXd transfer_matrix(Index node) const;

 private:
  DimensionTree tree_;
  Shape shape_;
  std::vector<Index> ranks_;
  std::map<Index, Eigen::MatrixXd> leaf_bases_;
  std::map<Index, DenseTensor> transfers_;
};

enum class Format { CP, Tucker, TT, Tree };
[[nodiscard]] Format parse_format(const std::string& name);
[[nodiscard]] std::string format_name(Format f);

using LowRank = std::variant<CPTensor, TuckerTensor, TTTensor, TreeTensor>;

[[nodiscard]] DenseTensor to_dense(const CPTensor& x);
[[nodiscard]] DenseTensor to_dense(const TuckerTensor& x);
[[nodiscard]] DenseTensor to_dense(const TTTensor& x);
[[nodiscard]] DenseTensor to_dense(const TreeTensor& x);
[[nodiscard]] DenseTensor to_dense(const LowRank& x);

// Basis of node alpha: rows run row-major over the node's modes, columns over r_alpha.
[[nodiscard]] Eigen::MatrixXd node_basis(const TreeTensor& x, Index node);

[[nodiscard]] double eval(const CPTensor& x, std::span<const Index> idx);
[[nodiscard]] double eval(const TuckerTensor& x, std::span<const Index> idx);
[[nodiscard]] double eval(const TTTensor& x, std::span<const Index> idx);
[[nodiscard]] double eval(const TreeTensor& x, std::span<const Index> idx);
[[nodiscard]] double eval(const LowRank& x, std::span<const Index> idx);

[[nodiscard]] Index param_count(const CPTensor& x);
[[nodiscard]] Index param_count(const TuckerTensor& x);
[[nodiscard]] Index param_count(const TTTensor& x);
[[nodiscard]] Index param_count(const TreeTensor& x);
[[nodiscard]] Index param_count(const LowRank& x);

[[nodiscard]] CPTensor add(const CPTensor& x, const CPTensor& y);
[[nodiscard]] TuckerTensor add(const TuckerTensor& x, const TuckerTensor& y);
[[nodiscard]] TTTensor add(const TTTensor& x, const TTTensor& y);
[[nodiscard]] TreeTensor add(const TreeTensor& x, const TreeTensor& y);

[[nodiscard]] CPTensor scale(const CPTensor& x, double s);
[[nodiscard]] TuckerTensor scale(const TuckerTensor& x, double s);
[[nodiscard]] TTTensor scale(const TTTensor& x, double s);
[[nodiscard]] TreeTensor scale(const TreeTensor& x, double s);

[[nodiscard]] TuckerTensor orthonormalize(const TuckerTensor& x);
// left-orthogonal cores 0..d-2
[[nodiscard]] TTTensor orthonormalize(const TTTensor& x);
// orthonormal bases at every non-root node
[[nodiscard]] TreeTensor orthonormalize(const TreeTensor& x);
// Assembles a tree tensor from raw node data whose ranks may violate
// r_alpha <= prod r_beta; a bottom-up QR pass orthonormalizes and shrinks them.
[[nodiscard]] TreeTensor tree_from_raw(const DimensionTree& tree, const Shape& shape,
                                       std::map<Index, Eigen::MatrixXd> leaf_bases,
                                       std::map<Index, Eigen::MatrixXd> transfer_matrices);

[[nodiscard]] double format_norm(const CPTensor& x);
[[nodiscard]] double format_norm(const TuckerTensor& x);
[[nodiscard]] double format_norm(const TTTensor& x);
[[nodiscard]] double format_norm(const TreeTensor& x);
[[nodiscard]] double format_norm(const LowRank& x);

[[nodiscard]] std::vector<Index> ranks_of(const LowRank& x);

// Admissibility of requested ranks; throws RankError on failure.
void check_tucker_ranks(const Shape& shape, const std::vector<Index>& ranks);
void check_tt_ranks(const Shape& shape, const std::vector<Index>& ranks);
// per-node ranks (root included) or per-node ranks without the root
void check_tree_ranks(const DimensionTree& tree, const Shape& shape, const std::vector<Index>& ranks);
// Expands a per-non-root-node rank list, or a single value, to a full per-node list.
[[nodiscard]] std::vector<Index> expand_tree_ranks(const DimensionTree& tree, const std::vector<Index>& ranks);

[[nodiscard]] CPTensor random_cp(const Shape& shape, Index r, std::uint64_t seed);
[[nodiscard]] TuckerTensor random_tucker(const Shape& shape, const std::vector<Index>& ranks, std::uint64_t seed);
[[nodiscard]] TTTensor random_tt(const Shape& shape, const std::vector<Index>& ranks, std::uint64_t seed);
[[nodiscard]] TreeTensor random_tree(const DimensionTree& tree, const Shape& shape, const std::vector<Index>& ranks,
                                     std::uint64_t seed);
// CP takes a single rank; the tree format uses the balanced tree unless one is given.
[[nodiscard]] LowRank random_lowrank(Format f, const Shape& shape, const std::vector<Index>& ranks, std::uint64_t seed,
                                     const std::optional<DimensionTree>& tree = std::nullopt);

[[nodiscard]] TTTensor cp_to_tt(const CPTensor& x);
[[nodiscard]] TuckerTensor cp_to_tucker(const CPTensor& x);
[[nodiscard]] TreeTensor cp_to_tree(const CPTensor& x, const DimensionTree& tree);
// Tree on the linear tree reproducing x exactly.
[[nodiscard]] TreeTensor tt_to_tree(const TTTensor& x);

}  // namespace tensoria

#pragma once

// SVD-based compression: truncated SVD, HOSVD (Tucker), TT-SVD, tree HOSVD,
// and tolerance-driven truncation.

#include "tensoria/dimension_tree.hpp"
#include "tensoria/formats.hpp"
#include "tensoria/linalg.hpp"
#include "tensoria/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tensoria {

struct TruncationReport {
  double achieved_error = 0.0;  // absolute, canonical norm
  std::vector<Index> ranks_used;
  double bound_constant = 1.0;
  double input_norm = 0.0;
  std::vector<std::string> warnings;
};

template <class T>
struct Decomposition {
  T tensor;
  TruncationReport report;
};

// Singular values of the alpha-unfolding.
[[nodiscard]] Eigen::VectorXd unfolding_singular_values(const DenseTensor& u, const ModeSet& alpha);

[[nodiscard]] Decomposition<SVDResult> truncated_svd(const DenseTensor& m, Index r);
[[nodiscard]] Decomposition<SVDResult> truncated_svd(const Eigen::MatrixXd& m, Index r);

// Ranks above the mode sizes are clamped and noted in the report.
[[nodiscard]] Decomposition<TuckerTensor> hosvd(const DenseTensor& u, std::vector<Index> ranks);

[[nodiscard]] Decomposition<TTTensor> tt_svd(const DenseTensor& u, std::vector<Index> ranks);

// ranks: one per node, one per non-root node, or a single value for all
// non-root nodes. Throws RankError when inadmissible.
[[nodiscard]] Decomposition<TreeTensor> tree_hosvd(const DenseTensor& u, const DimensionTree& tree,
                                                   const std::vector<Index>& ranks);

// Smallest ranks with relative error <= eps. The eps^2 budget is split evenly
// over the d modes (Tucker), the d-1 interfaces (TT) or the non-root nodes (tree).
// The CP target is not supported. The tree defaults to the balanced one.
[[nodiscard]] Decomposition<LowRank> truncate(const DenseTensor& u, double eps, Format target,
                                              const std::optional<DimensionTree>& tree = std::nullopt);
// Low-rank input, never densified. eps is relative to the norm of x. CP input
// is converted to the target first; a TT input may target the tree format
// (on the linear tree).
[[nodiscard]] Decomposition<LowRank> truncate(const LowRank& x, double eps, Format target,
                                              const std::optional<DimensionTree>& tree = std::nullopt);

[[nodiscard]] TTTensor tt_round(const TTTensor& x, double eps, TruncationReport* report = nullptr);

}  // namespace tensoria

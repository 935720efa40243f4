#pragma once

// Rooted partition tree over modes {0..d-1}. Nodes are stored breadth-first
// (root = node 0); children of a node are ordered by their smallest mode.

#include "tensoria/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tensoria {

struct TreeNode {
  ModeSet modes;
  std::optional<Index> parent;
  std::vector<Index> children;
  Index level = 0;
};

class DimensionTree {
 public:
  // Nested description: each node lists its modes; parents[i] is the parent
  // of node i (-1 for the root). Nodes are renumbered breadth-first.
  DimensionTree(std::vector<ModeSet> node_modes, std::vector<long> parents);

  [[nodiscard]] static DimensionTree balanced(Index d);
  [[nodiscard]] static DimensionTree linear(Index d);  // {k} | {k+1..d-1} chain
  [[nodiscard]] static DimensionTree star(Index d);    // root with d leaves
  [[nodiscard]] static DimensionTree by_name(const std::string& name, Index d);

  [[nodiscard]] Index order() const { return d_; }
  [[nodiscard]] Index num_nodes() const { return nodes_.size(); }
  [[nodiscard]] const TreeNode& node(Index i) const { return nodes_[i]; }
  [[nodiscard]] const std::vector<TreeNode>& nodes() const { return nodes_; }
  [[nodiscard]] static constexpr Index root() { return 0; }
  [[nodiscard]] bool is_leaf(Index i) const { return nodes_[i].children.empty(); }
  [[nodiscard]] Index depth() const;  // max level
  [[nodiscard]] Index leaf_of_mode(Index nu) const { return leaf_of_mode_[nu]; }
  [[nodiscard]] std::vector<Index> internal_nodes() const;
  [[nodiscard]] std::vector<long> parent_list() const;
  // constant of the tree HOSVD error bound: sqrt(#nodes-1-s), s = 1 iff the root has 2 children;
  // for binary trees this is sqrt(2d-2-s)
  [[nodiscard]] double hosvd_bound_constant() const;

  friend bool operator==(const DimensionTree& a, const DimensionTree& b);

 private:
  Index d_ = 0;
  std::vector<TreeNode> nodes_;
  std::vector<Index> leaf_of_mode_;
};

}  // namespace tensoria

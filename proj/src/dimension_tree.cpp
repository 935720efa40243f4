#include "tensoria/dimension_tree.hpp"

#include "tensoria/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>

namespace tensoria {

DimensionTree::DimensionTree(std::vector<ModeSet> node_modes, std::vector<long> parents) {
  const Index n = node_modes.size();
  if (n == 0 || parents.size() != n) throw ShapeError("tree: node and parent lists must be nonempty and equal length");
  long root = -1;
  std::vector<std::vector<Index>> kids(n);
  for (Index i = 0; i < n; ++i) {
    if (node_modes[i].empty()) throw ShapeError("tree: empty node");
    if (parents[i] < 0) {
      if (root >= 0) throw ShapeError("tree: more than one root");
      root = static_cast<long>(i);
    } else {
      if (static_cast<Index>(parents[i]) >= n || static_cast<Index>(parents[i]) == i)
        throw ShapeError("tree: bad parent index");
      kids[static_cast<Index>(parents[i])].push_back(i);
    }
  }
  if (root < 0) throw ShapeError("tree: no root");
  const ModeSet& rm = node_modes[static_cast<Index>(root)];
  d_ = rm.size();
  if (rm != ModeSet::range(0, d_)) throw ShapeError("tree: root must hold every mode");

  // breadth-first renumbering with children sorted by smallest mode
  std::vector<long> new_id(n, -1);
  std::deque<std::pair<Index, long>> queue{{static_cast<Index>(root), -1}};
  while (!queue.empty()) {
    auto [old, par] = queue.front();
    queue.pop_front();
    if (new_id[old] >= 0) throw ShapeError("tree: cycle");
    TreeNode node;
    node.modes = node_modes[old];
    if (par >= 0) {
      node.parent = static_cast<Index>(par);
      node.level = nodes_[static_cast<Index>(par)].level + 1;
    }
    const Index id = nodes_.size();
    new_id[old] = static_cast<long>(id);
    if (par >= 0) nodes_[static_cast<Index>(par)].children.push_back(id);
    nodes_.push_back(node);
    auto ch = kids[old];
    std::sort(ch.begin(), ch.end(), [&](Index a, Index b) { return node_modes[a].front() < node_modes[b].front(); });
    for (Index c : ch) queue.emplace_back(c, static_cast<long>(id));
  }
  if (nodes_.size() != n) throw ShapeError("tree: disconnected nodes");

  leaf_of_mode_.assign(d_, 0);
  std::vector<bool> leaf_seen(d_, false);
  for (Index i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    if (node.children.empty()) {
      if (node.modes.size() != 1) throw ShapeError("tree: leaves must be singletons");
      const Index nu = node.modes.front();
      if (leaf_seen[nu]) throw ShapeError("tree: repeated leaf");
      leaf_seen[nu] = true;
      leaf_of_mode_[nu] = i;
      continue;
    }
    if (node.children.size() < 2) throw ShapeError("tree: internal nodes need at least two children");
    std::vector<Index> uni;
    for (Index c : node.children) {
      const auto& cm = nodes_[c].modes.modes();
      uni.insert(uni.end(), cm.begin(), cm.end());
    }
    std::sort(uni.begin(), uni.end());
    if (uni != node.modes.modes()) throw ShapeError("tree: children must partition their parent");
  }
}

DimensionTree DimensionTree::balanced(Index d) {
  if (d == 0) throw ShapeError("tree order must be >= 1");
  std::vector<ModeSet> modes;
  std::vector<long> parents;
  std::function<void(Index, Index, long)> build = [&](Index lo, Index hi, long par) {
    const long id = static_cast<long>(modes.size());
    modes.push_back(ModeSet::range(lo, hi));
    parents.push_back(par);
    if (hi - lo <= 1) return;
    const Index mid = lo + (hi - lo + 1) / 2;
    build(lo, mid, id);
    build(mid, hi, id);
  };
  build(0, d, -1);
  return DimensionTree(std::move(modes), std::move(parents));
}

DimensionTree DimensionTree::linear(Index d) {
  if (d == 0) throw ShapeError("tree order must be >= 1");
  std::vector<ModeSet> modes{ModeSet::range(0, d)};
  std::vector<long> parents{-1};
  long tail = 0;
  for (Index k = 0; k + 1 < d; ++k) {
    modes.push_back(ModeSet{k});
    parents.push_back(tail);
    if (k + 2 == d) {
      modes.push_back(ModeSet{d - 1});
      parents.push_back(tail);
    } else {
      modes.push_back(ModeSet::range(k + 1, d));
      parents.push_back(tail);
      tail = static_cast<long>(modes.size()) - 1;
    }
  }
  return DimensionTree(std::move(modes), std::move(parents));
}

DimensionTree DimensionTree::star(Index d) {
  if (d == 0) throw ShapeError("tree order must be >= 1");
  std::vector<ModeSet> modes{ModeSet::range(0, d)};
  std::vector<long> parents{-1};
  if (d > 1)
    for (Index k = 0; k < d; ++k) {
      modes.push_back(ModeSet{k});
      parents.push_back(0);
    }
  return DimensionTree(std::move(modes), std::move(parents));
}

DimensionTree DimensionTree::by_name(const std::string& name, Index d) {
  if (name == "balanced") return balanced(d);
  if (name == "linear" || name == "tt") return linear(d);
  if (name == "star" || name == "tucker") return star(d);
  throw ShapeError("unknown tree name: " + name);
}

Index DimensionTree::depth() const {
  Index L = 0;
  for (const auto& n : nodes_) L = std::max(L, n.level);
  return L;
}

std::vector<Index> DimensionTree::internal_nodes() const {
  std::vector<Index> out;
  for (Index i = 0; i < nodes_.size(); ++i)
    if (!is_leaf(i)) out.push_back(i);
  return out;
}

std::vector<long> DimensionTree::parent_list() const {
  std::vector<long> out;
  for (const auto& n : nodes_) out.push_back(n.parent ? static_cast<long>(*n.parent) : -1);
  return out;
}

double DimensionTree::hosvd_bound_constant() const {
  if (d_ == 1) return 1.0;
  // one projection per non-root node; with two root children one of them is redundant
  const double s = nodes_[0].children.size() == 2 ? 1.0 : 0.0;
  return std::sqrt(static_cast<double>(nodes_.size() - 1) - s);
}

bool operator==(const DimensionTree& a, const DimensionTree& b) {
  if (a.nodes_.size() != b.nodes_.size()) return false;
  for (Index i = 0; i < a.nodes_.size(); ++i)
    if (a.nodes_[i].modes != b.nodes_[i].modes || a.nodes_[i].parent != b.nodes_[i].parent) return false;
  return true;
}

}  // namespace tensoria

#include "tensoria/formats.hpp"

#include "tensoria/errors.hpp"
#include "tensoria/linalg.hpp"
#include "tensoria/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace tensoria {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd rowmajor_matrix(const std::vector<double>& data, Index rows, Index cols) {
  return Eigen::Map<const RowMat>(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::vector<double> rowmajor_data(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<Index>(m.size()));
  Eigen::Map<RowMat>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

Eigen::MatrixXd random_matrix(Rng& rng, Index rows, Index cols) {
  Eigen::MatrixXd m(rows, cols);
  // filled row by row so the stream order matches the row-major convention
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

DenseTensor random_dense(Rng& rng, const Shape& shape) {
  std::vector<double> data(shape.size());
  for (double& x : data) x = rng.normal();
  return DenseTensor(shape, std::move(data));
}

Index product(const std::vector<Index>& v) {
  Index p = 1;
  for (Index x : v) p *= x;
  return p;
}

// Copies src into dst at the given per-mode offsets.
void place_block(DenseTensor& dst, const DenseTensor& src, const std::vector<Index>& offsets) {
  const Index d = src.order();
  std::vector<Index> target(d);
  Index flat = 0;
  for_each_index(src.shape(), [&](std::span<const Index> idx) {
    for (Index k = 0; k < d; ++k) target[k] = idx[k] + offsets[k];
    dst.at(std::span<const Index>(target)) = src.data()[flat++];
  });
}

std::vector<Index> child_ranks(const DimensionTree& tree, const std::vector<Index>& ranks, Index node) {
  std::vector<Index> out;
  for (Index c : tree.node(node).children) out.push_back(ranks[c]);
  return out;
}

Index child_position(const DimensionTree& tree, Index node) {
  const auto& sib = tree.node(*tree.node(node).parent).children;
  return static_cast<Index>(std::find(sib.begin(), sib.end(), node) - sib.begin());
}

}  // namespace

// ---------------------------------------------------------------- CP

CPTensor::CPTensor(Shape shape, std::vector<Eigen::MatrixXd> factors, std::optional<Eigen::VectorXd> weights)
    : shape_(std::move(shape)), factors_(std::move(factors)) {
  if (factors_.size() != shape_.order()) throw ShapeError("CP: need one factor per mode");
  const Eigen::Index r = factors_[0].cols();
  for (Index nu = 0; nu < factors_.size(); ++nu) {
    if (static_cast<Index>(factors_[nu].rows()) != shape_[nu]) throw ShapeError("CP: factor row count differs from mode size");
    if (factors_[nu].cols() != r) throw ShapeError("CP: factors must share the column count");
    if (!factors_[nu].allFinite()) throw ShapeError("CP: non-finite factor entries");
  }
  weights_ = weights ? *weights : Eigen::VectorXd::Ones(r);
  if (weights_.size() != r) throw ShapeError("CP: weight count differs from rank");
  if (!weights_.allFinite()) throw ShapeError("CP: non-finite weights");
}

CPTensor CPTensor::zero(const Shape& shape) {
  std::vector<Eigen::MatrixXd> f;
  for (Index nu = 0; nu < shape.order(); ++nu) f.emplace_back(shape[nu], 0);
  return CPTensor(shape, std::move(f));
}

// ---------------------------------------------------------------- Tucker

TuckerTensor::TuckerTensor(Shape shape, DenseTensor core, std::vector<Eigen::MatrixXd> factors)
    : shape_(std::move(shape)), core_(std::move(core)), factors_(std::move(factors)) {
  const Index d = shape_.order();
  if (core_.order() != d || factors_.size() != d) throw ShapeError("Tucker: core order and factor count must equal d");
  for (Index nu = 0; nu < d; ++nu) {
    if (static_cast<Index>(factors_[nu].rows()) != shape_[nu]) throw ShapeError("Tucker: factor row count differs from mode size");
    if (static_cast<Index>(factors_[nu].cols()) != core_.shape()[nu]) throw ShapeError("Tucker: factor columns differ from core dims");
    if (!factors_[nu].allFinite()) throw ShapeError("Tucker: non-finite factor entries");
  }
}

// ---------------------------------------------------------------- TT

TTTensor::TTTensor(Shape shape, std::vector<DenseTensor> cores) : shape_(std::move(shape)), cores_(std::move(cores)) {
  const Index d = shape_.order();
  if (cores_.size() != d) throw ShapeError("TT: need one core per mode");
  for (Index k = 0; k < d; ++k) {
    const auto& c = cores_[k];
    if (c.order() != 3) throw ShapeError("TT: cores must have order 3");
    if (c.shape()[1] != shape_[k]) throw ShapeError("TT: core mode size differs from shape");
    if (k > 0 && c.shape()[0] != cores_[k - 1].shape()[2]) throw ShapeError("TT: adjacent core ranks differ");
  }
  if (cores_.front().shape()[0] != 1 || cores_.back().shape()[2] != 1) throw ShapeError("TT: boundary ranks must be 1");
}

std::vector<Index> TTTensor::ranks() const {
  std::vector<Index> r;
  for (Index k = 0; k + 1 < cores_.size(); ++k) r.push_back(cores_[k].shape()[2]);
  return r;
}

Eigen::MatrixXd TTTensor::left_unfolding(Index k) const {
  const auto& s = cores_[k].shape();
  return rowmajor_matrix(cores_[k].data(), s[0] * s[1], s[2]);
}

Eigen::MatrixXd TTTensor::right_unfolding(Index k) const {
  const auto& s = cores_[k].shape();
  return rowmajor_matrix(cores_[k].data(), s[0], s[1] * s[2]);
}

// ---------------------------------------------------------------- Tree

TreeTensor::TreeTensor(DimensionTree tree, Shape shape, std::vector<Index> ranks,
                       std::map<Index, Eigen::MatrixXd> leaf_bases, std::map<Index, DenseTensor> transfers)
    : tree_(std::move(tree)),
      shape_(std::move(shape)),
      ranks_(std::move(ranks)),
      leaf_bases_(std::move(leaf_bases)),
      transfers_(std::move(transfers)) {
  if (tree_.order() != shape_.order()) throw ShapeError("tree: order differs from shape");
  if (ranks_.size() != tree_.num_nodes()) throw RankError("tree: need one rank per node");
  if (ranks_[0] != 1) throw RankError("tree: root rank must be 1");
  for (Index i = 0; i < tree_.num_nodes(); ++i) {
    if (ranks_[i] == 0) throw RankError("tree: ranks must be >= 1");
    if (tree_.is_leaf(i)) {
      auto it = leaf_bases_.find(i);
      if (it == leaf_bases_.end()) throw ShapeError("tree: missing leaf basis");
      const Index nu = tree_.node(i).modes.front();
      if (static_cast<Index>(it->second.rows()) != shape_[nu] || static_cast<Index>(it->second.cols()) != ranks_[i])
        throw ShapeError("tree: leaf basis has wrong size");
      if (!it->second.allFinite()) throw ShapeError("tree: non-finite leaf basis");
    } else {
      auto it = transfers_.find(i);
      if (it == transfers_.end()) throw ShapeError("tree: missing transfer tensor");
      std::vector<Index> expect{ranks_[i]};
      const auto cr = child_ranks(tree_, ranks_, i);
      expect.insert(expect.end(), cr.begin(), cr.end());
      if (it->second.shape().dims() != expect) throw ShapeError("tree: transfer tensor has wrong shape");
      if (ranks_[i] > product(cr)) throw RankError("tree: rank exceeds product of child ranks");
    }
  }
  if (leaf_bases_.size() + transfers_.size() != tree_.num_nodes()) throw ShapeError("tree: extra node data");
}

Eigen::MatrixXd TreeTensor::transfer_matrix(Index node) const {
  const auto& t = transfers_.at(node);
  return rowmajor_matrix(t.data(), t.shape()[0], t.size() / t.shape()[0]);
}

// ---------------------------------------------------------------- naming

Format parse_format(const std::string& name) {
  if (name == "cp") return Format::CP;
  if (name == "tucker") return Format::Tucker;
  if (name == "tt") return Format::TT;
  if (name == "tree" || name == "ht") return Format::Tree;
  throw ShapeError("unknown format: " + name);
}

std::string format_name(Format f) {
  switch (f) {
    case Format::CP: return "cp";
    case Format::Tucker: return "tucker";
    case Format::TT: return "tt";
    case Format::Tree: return "tree";
  }
  return "?";
}

// ---------------------------------------------------------------- to_dense

DenseTensor to_dense(const CPTensor& x) {
  const Index d = x.order();
  const auto r = static_cast<Eigen::Index>(x.rank());
  if (r == 0) return DenseTensor(x.shape());
  // Khatri-Rao accumulation, rows ordered row-major
  Eigen::MatrixXd K = x.factor(0) * x.weights().asDiagonal();
  for (Index nu = 1; nu < d; ++nu) {
    const auto& U = x.factor(nu);
    Eigen::MatrixXd next(K.rows() * U.rows(), r);
    for (Eigen::Index i = 0; i < K.rows(); ++i)
      for (Eigen::Index j = 0; j < U.rows(); ++j) next.row(i * U.rows() + j) = K.row(i).cwiseProduct(U.row(j));
    K.swap(next);
  }
  Eigen::VectorXd v = K.rowwise().sum();
  return DenseTensor(x.shape(), std::vector<double>(v.data(), v.data() + v.size()));
}

DenseTensor to_dense(const TuckerTensor& x) {
  DenseTensor t = x.core();
  for (Index nu = 0; nu < x.order(); ++nu) t = mode_apply(t, nu, x.factor(nu));
  return t;
}

DenseTensor to_dense(const TTTensor& x) {
  const Index d = x.order();
  RowMat acc = Eigen::Map<const RowMat>(x.core(0).data().data(), static_cast<Eigen::Index>(x.shape()[0]),
                                        static_cast<Eigen::Index>(x.right_rank(0)));
  for (Index k = 1; k < d; ++k) {
    const RowMat R = x.right_unfolding(k);
    RowMat prod = acc * R;  // P x (n_k r_k), row-major == (P n_k) x r_k
    acc = Eigen::Map<const RowMat>(prod.data(), prod.rows() * static_cast<Eigen::Index>(x.shape()[k]),
                                   static_cast<Eigen::Index>(x.right_rank(k)));
  }
  return DenseTensor(x.shape(), std::vector<double>(acc.data(), acc.data() + acc.size()));
}

Eigen::MatrixXd node_basis(const TreeTensor& x, Index node) {
  const auto& tree = x.tree();
  if (tree.is_leaf(node)) return x.leaf_basis(node);
  const auto& children = tree.node(node).children;
  Eigen::MatrixXd K = node_basis(x, children[0]);
  std::vector<Index> mode_order = tree.node(children[0]).modes.modes();
  for (Index c = 1; c < children.size(); ++c) {
    K = kron(K, node_basis(x, children[c]));
    const auto& cm = tree.node(children[c]).modes.modes();
    mode_order.insert(mode_order.end(), cm.begin(), cm.end());
  }
  const Eigen::MatrixXd U = K * x.transfer_matrix(node).transpose();
  if (std::is_sorted(mode_order.begin(), mode_order.end())) return U;
  // rows follow the children's concatenated modes; reorder to increasing modes
  const Index m = mode_order.size();
  std::vector<Index> dims;
  for (Index nu : mode_order) dims.push_back(x.shape()[nu]);
  dims.push_back(static_cast<Index>(U.cols()));
  const DenseTensor t(Shape(dims), rowmajor_data(U));
  std::vector<Index> sorted = mode_order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<Index> perm;
  for (Index nu : sorted)
    perm.push_back(static_cast<Index>(std::find(mode_order.begin(), mode_order.end(), nu) - mode_order.begin()));
  perm.push_back(m);
  const DenseTensor p = permute(t, perm);
  return rowmajor_matrix(p.data(), static_cast<Index>(U.rows()), static_cast<Index>(U.cols()));
}

DenseTensor to_dense(const TreeTensor& x) {
  const Eigen::MatrixXd U = node_basis(x, DimensionTree::root());
  return DenseTensor(x.shape(), std::vector<double>(U.data(), U.data() + U.rows()));
}

DenseTensor to_dense(const LowRank& x) {
  return std::visit([](const auto& v) { return to_dense(v); }, x);
}

// ---------------------------------------------------------------- eval

namespace {
void check_index(const Shape& s, std::span<const Index> idx) {
  if (idx.size() != s.order()) throw ShapeError("index order mismatch");
  for (Index k = 0; k < idx.size(); ++k)
    if (idx[k] >= s[k]) throw ShapeError("index out of range");
}
}  // namespace

double eval(const CPTensor& x, std::span<const Index> idx) {
  check_index(x.shape(), idx);
  Eigen::VectorXd acc = x.weights();
  for (Index nu = 0; nu < x.order(); ++nu)
    acc = acc.cwiseProduct(x.factor(nu).row(static_cast<Eigen::Index>(idx[nu])).transpose());
  return acc.sum();
}

double eval(const TuckerTensor& x, std::span<const Index> idx) {
  check_index(x.shape(), idx);
  DenseTensor t = x.core();
  for (Index nu = 0; nu < x.order(); ++nu)
    t = mode_apply(t, nu, Eigen::MatrixXd(x.factor(nu).row(static_cast<Eigen::Index>(idx[nu]))));
  return t.data()[0];
}

double eval(const TTTensor& x, std::span<const Index> idx) {
  check_index(x.shape(), idx);
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Ones(1);
  for (Index k = 0; k < x.order(); ++k) {
    const auto& s = x.core(k).shape();
    Eigen::MatrixXd slice(s[0], s[2]);
    for (Index a = 0; a < s[0]; ++a)
      for (Index b = 0; b < s[2]; ++b) slice(a, b) = x.core(k).data()[(a * s[1] + idx[k]) * s[2] + b];
    acc = acc * slice;
  }
  return acc(0);
}

namespace {
Eigen::VectorXd tree_eval_node(const TreeTensor& x, Index node, std::span<const Index> idx) {
  const auto& tree = x.tree();
  if (tree.is_leaf(node))
    return x.leaf_basis(node).row(static_cast<Eigen::Index>(idx[tree.node(node).modes.front()])).transpose();
  Eigen::VectorXd k = Eigen::VectorXd::Ones(1);
  for (Index c : tree.node(node).children) {
    const Eigen::VectorXd v = tree_eval_node(x, c, idx);
    Eigen::VectorXd next(k.size() * v.size());
    for (Eigen::Index i = 0; i < k.size(); ++i) next.segment(i * v.size(), v.size()) = k(i) * v;
    k.swap(next);
  }
  return x.transfer_matrix(node) * k;
}
}  // namespace

double eval(const TreeTensor& x, std::span<const Index> idx) {
  check_index(x.shape(), idx);
  return tree_eval_node(x, DimensionTree::root(), idx)(0);
}

double eval(const LowRank& x, std::span<const Index> idx) {
  return std::visit([&](const auto& v) { return eval(v, idx); }, x);
}

// ---------------------------------------------------------------- param_count

Index param_count(const CPTensor& x) {
  Index s = 0;
  for (Index nu = 0; nu < x.order(); ++nu) s += x.shape()[nu];
  return x.rank() * s;
}

Index param_count(const TuckerTensor& x) {
  Index s = x.core().size();
  for (Index nu = 0; nu < x.order(); ++nu) s += x.ranks()[nu] * x.shape()[nu];
  return s;
}

Index param_count(const TTTensor& x) {
  Index s = 0;
  for (const auto& c : x.cores()) s += c.size();
  return s;
}

Index param_count(const TreeTensor& x) {
  Index s = 0;
  for (const auto& [node, U] : x.leaf_bases()) s += static_cast<Index>(U.size());
  for (const auto& [node, C] : x.transfers()) s += C.size();
  return s;
}

Index param_count(const LowRank& x) {
  return std::visit([](const auto& v) { return param_count(v); }, x);
}

// ---------------------------------------------------------------- add / scale

CPTensor add(const CPTensor& x, const CPTensor& y) {
  if (!(x.shape() == y.shape())) throw ShapeError("add: shape mismatch");
  std::vector<Eigen::MatrixXd> f;
  for (Index nu = 0; nu < x.order(); ++nu) {
    Eigen::MatrixXd m(x.shape()[nu], x.rank() + y.rank());
    m << x.factor(nu), y.factor(nu);
    f.push_back(std::move(m));
  }
  Eigen::VectorXd w(x.rank() + y.rank());
  w << x.weights(), y.weights();
  return CPTensor(x.shape(), std::move(f), w);
}

TuckerTensor add(const TuckerTensor& x, const TuckerTensor& y) {
  if (!(x.shape() == y.shape())) throw ShapeError("add: shape mismatch");
  const Index d = x.order();
  std::vector<Index> rk(d);
  std::vector<Eigen::MatrixXd> f;
  for (Index nu = 0; nu < d; ++nu) {
    rk[nu] = x.ranks()[nu] + y.ranks()[nu];
    Eigen::MatrixXd m(x.shape()[nu], rk[nu]);
    m << x.factor(nu), y.factor(nu);
    f.push_back(std::move(m));
  }
  DenseTensor core{Shape(rk)};
  place_block(core, x.core(), std::vector<Index>(d, 0));
  place_block(core, y.core(), x.ranks());
  return TuckerTensor(x.shape(), std::move(core), std::move(f));
}

TTTensor add(const TTTensor& x, const TTTensor& y) {
  if (!(x.shape() == y.shape())) throw ShapeError("add: shape mismatch");
  const Index d = x.order();
  std::vector<DenseTensor> cores;
  for (Index k = 0; k < d; ++k) {
    const auto& sx = x.core(k).shape();
    const auto& sy = y.core(k).shape();
    const Index a = (k == 0) ? 1 : sx[0] + sy[0];
    const Index b = (k + 1 == d) ? 1 : sx[2] + sy[2];
    DenseTensor c{Shape{a, sx[1], b}};
    place_block(c, x.core(k), {0, 0, 0});
    place_block(c, y.core(k), {k == 0 ? 0 : sx[0], 0, k + 1 == d ? 0 : sx[2]});
    if (d == 1) c = x.core(0) + y.core(0);
    cores.push_back(std::move(c));
  }
  return TTTensor(x.shape(), std::move(cores));
}

TreeTensor add(const TreeTensor& x, const TreeTensor& y) {
  if (!(x.shape() == y.shape())) throw ShapeError("add: shape mismatch");
  if (!(x.tree() == y.tree())) throw ShapeError("add: tree mismatch");
  const auto& tree = x.tree();
  const Index n = tree.num_nodes();
  std::vector<Index> ranks(n);
  for (Index i = 0; i < n; ++i) ranks[i] = i == 0 ? 1 : x.rank(i) + y.rank(i);
  std::map<Index, Eigen::MatrixXd> leaves;
  std::map<Index, DenseTensor> transfers;
  for (Index i = 0; i < n; ++i) {
    if (tree.is_leaf(i)) {
      const auto& ux = x.leaf_basis(i);
      const auto& uy = y.leaf_basis(i);
      if (i == 0) {
        leaves[i] = ux + uy;
      } else {
        Eigen::MatrixXd m(ux.rows(), ux.cols() + uy.cols());
        m << ux, uy;
        leaves[i] = std::move(m);
      }
      continue;
    }
    std::vector<Index> dims{ranks[i]};
    const auto cr = child_ranks(tree, ranks, i);
    dims.insert(dims.end(), cr.begin(), cr.end());
    DenseTensor c{Shape(dims)};
    place_block(c, x.transfer(i), std::vector<Index>(dims.size(), 0));
    std::vector<Index> off = x.transfer(i).shape().dims();
    if (i == 0) off[0] = 0;
    place_block(c, y.transfer(i), off);
    transfers.emplace(i, std::move(c));
  }
  return TreeTensor(tree, x.shape(), std::move(ranks), std::move(leaves), std::move(transfers));
}

CPTensor scale(const CPTensor& x, double s) { return CPTensor(x.shape(), x.factors(), s * x.weights()); }

TuckerTensor scale(const TuckerTensor& x, double s) { return TuckerTensor(x.shape(), s * x.core(), x.factors()); }

TTTensor scale(const TTTensor& x, double s) {
  auto cores = x.cores();
  cores.back() *= s;
  return TTTensor(x.shape(), std::move(cores));
}

TreeTensor scale(const TreeTensor& x, double s) {
  auto leaves = x.leaf_bases();
  auto transfers = x.transfers();
  if (x.tree().is_leaf(0))
    leaves[0] *= s;
  else
    transfers.at(0) *= s;
  return TreeTensor(x.tree(), x.shape(), x.ranks(), std::move(leaves), std::move(transfers));
}

// ---------------------------------------------------------------- orthonormalize

TuckerTensor orthonormalize(const TuckerTensor& x) {
  DenseTensor core = x.core();
  std::vector<Eigen::MatrixXd> f;
  for (Index nu = 0; nu < x.order(); ++nu) {
    const QRResult qr = thin_qr(x.factor(nu));
    core = mode_apply(core, nu, qr.R);
    f.push_back(qr.Q);
  }
  return TuckerTensor(x.shape(), std::move(core), std::move(f));
}

TTTensor orthonormalize(const TTTensor& x) {
  const Index d = x.order();
  std::vector<DenseTensor> cores = x.cores();
  for (Index k = 0; k + 1 < d; ++k) {
    const auto s = cores[k].shape();
    const QRResult qr = thin_qr(rowmajor_matrix(cores[k].data(), s[0] * s[1], s[2]));
    const auto kk = static_cast<Index>(qr.Q.cols());
    cores[k] = DenseTensor(Shape{s[0], s[1], kk}, rowmajor_data(qr.Q));
    const auto s1 = cores[k + 1].shape();
    const Eigen::MatrixXd next = qr.R * rowmajor_matrix(cores[k + 1].data(), s1[0], s1[1] * s1[2]);
    cores[k + 1] = DenseTensor(Shape{kk, s1[1], s1[2]}, rowmajor_data(next));
  }
  return TTTensor(x.shape(), std::move(cores));
}

TreeTensor tree_from_raw(const DimensionTree& tree, const Shape& shape, std::map<Index, Eigen::MatrixXd> leaves,
                         std::map<Index, Eigen::MatrixXd> mats) {
  if (tree.order() != shape.order()) throw ShapeError("tree order differs from shape");
  const Index n = tree.num_nodes();
  std::vector<Index> ranks(n, 1);
  for (const auto& [i, U] : leaves) ranks[i] = static_cast<Index>(U.cols());
  for (const auto& [i, C] : mats) ranks[i] = static_cast<Index>(C.rows());
  // column ranks of each transfer matrix as currently stored
  std::map<Index, std::vector<Index>> col_ranks;
  for (Index i = 0; i < n; ++i)
    if (!tree.is_leaf(i)) col_ranks[i] = child_ranks(tree, ranks, i);
  // breadth-first ids: children always come after their parent
  for (Index i = n; i-- > 1;) {
    Eigen::MatrixXd R;
    if (tree.is_leaf(i)) {
      const QRResult qr = thin_qr(leaves.at(i));
      leaves[i] = qr.Q;
      R = qr.R;
    } else {
      const QRResult qr = thin_qr(mats.at(i).transpose());
      mats[i] = qr.Q.transpose();
      R = qr.R;
    }
    ranks[i] = static_cast<Index>(R.rows());
    // fold R into the parent's transfer along this child's slot
    const Index parent = *tree.node(i).parent;
    const Index pos = child_position(tree, i);
    auto& cr = col_ranks.at(parent);
    std::vector<Index> dims{static_cast<Index>(mats.at(parent).rows())};
    dims.insert(dims.end(), cr.begin(), cr.end());
    DenseTensor C(Shape(dims), rowmajor_data(mats.at(parent)));
    C = mode_apply(C, pos + 1, R);
    cr[pos] = ranks[i];
    mats[parent] = rowmajor_matrix(C.data(), dims[0], C.size() / dims[0]);
  }
  std::map<Index, DenseTensor> transfers;
  for (auto& [i, M] : mats) {
    std::vector<Index> dims{ranks[i]};
    const auto cr = child_ranks(tree, ranks, i);
    dims.insert(dims.end(), cr.begin(), cr.end());
    if (i == 0 && M.rows() != 1) throw RankError("tree: root rank must be 1");
    transfers.emplace(i, DenseTensor(Shape(dims), rowmajor_data(M)));
  }
  return TreeTensor(tree, shape, std::move(ranks), std::move(leaves), std::move(transfers));
}

TreeTensor orthonormalize(const TreeTensor& x) {
  std::map<Index, Eigen::MatrixXd> mats;
  for (const auto& [i, C] : x.transfers()) mats[i] = x.transfer_matrix(i);
  if (x.tree().is_leaf(0)) return x;
  return tree_from_raw(x.tree(), x.shape(), x.leaf_bases(), std::move(mats));
}

// ---------------------------------------------------------------- norms

double format_norm(const CPTensor& x) {
  if (x.rank() == 0) return 0.0;
  Eigen::MatrixXd G = Eigen::MatrixXd::Ones(x.rank(), x.rank());
  for (const auto& U : x.factors()) G = G.cwiseProduct(U.transpose() * U);
  return std::sqrt(std::max(0.0, x.weights().dot(G * x.weights())));
}

double format_norm(const TuckerTensor& x) { return norm(orthonormalize(x).core()); }

double format_norm(const TTTensor& x) { return norm(orthonormalize(x).cores().back()); }

double format_norm(const TreeTensor& x) {
  const TreeTensor o = orthonormalize(x);
  if (o.tree().is_leaf(0)) return o.leaf_basis(0).norm();
  return norm(o.transfer(0));
}

double format_norm(const LowRank& x) {
  return std::visit([](const auto& v) { return format_norm(v); }, x);
}

std::vector<Index> ranks_of(const LowRank& x) {
  struct V {
    std::vector<Index> operator()(const CPTensor& c) const { return {c.rank()}; }
    std::vector<Index> operator()(const TuckerTensor& t) const { return t.ranks(); }
    std::vector<Index> operator()(const TTTensor& t) const { return t.ranks(); }
    std::vector<Index> operator()(const TreeTensor& t) const { return t.ranks(); }
  };
  return std::visit(V{}, x);
}

// ---------------------------------------------------------------- admissibility

void check_tucker_ranks(const Shape& shape, const std::vector<Index>& ranks) {
  const Index d = shape.order();
  if (ranks.size() != d) throw RankError("Tucker: need one rank per mode");
  for (Index nu = 0; nu < d; ++nu) {
    if (ranks[nu] < 1 || ranks[nu] > shape[nu]) throw RankError("Tucker: rank must lie in [1, n_nu]");
    Index others = 1;
    for (Index mu = 0; mu < d; ++mu)
      if (mu != nu) others *= ranks[mu];
    if (d > 1 && ranks[nu] > others) throw RankError("Tucker: rank exceeds product of the other ranks");
  }
}

void check_tt_ranks(const Shape& shape, const std::vector<Index>& ranks) {
  const Index d = shape.order();
  if (ranks.size() + 1 != d) throw RankError("TT: need d-1 ranks");
  for (Index k = 0; k + 1 < d; ++k) {
    const Index left = k == 0 ? 1 : ranks[k - 1];
    const Index right = k + 2 == d ? 1 : ranks[k + 1];
    if (ranks[k] < 1) throw RankError("TT: ranks must be >= 1");
    if (ranks[k] > left * shape[k] || ranks[k] > shape[k + 1] * right)
      throw RankError("TT: rank exceeds neighbouring rank times mode size");
  }
}

std::vector<Index> expand_tree_ranks(const DimensionTree& tree, const std::vector<Index>& ranks) {
  const Index n = tree.num_nodes();
  if (ranks.size() == n) return ranks;
  if (ranks.size() + 1 == n) {
    std::vector<Index> out{1};
    out.insert(out.end(), ranks.begin(), ranks.end());
    return out;
  }
  if (ranks.size() == 1) {
    std::vector<Index> out(n, ranks[0]);
    out[0] = 1;
    return out;
  }
  throw RankError("tree: rank list length must be 1, #nodes-1 or #nodes");
}

void check_tree_ranks(const DimensionTree& tree, const Shape& shape, const std::vector<Index>& ranks) {
  if (tree.order() != shape.order()) throw ShapeError("tree order differs from shape");
  if (ranks.size() != tree.num_nodes()) throw RankError("tree: need one rank per node");
  if (ranks[0] != 1) throw RankError("tree: root rank must be 1");
  for (Index i = 0; i < tree.num_nodes(); ++i) {
    const auto& node = tree.node(i);
    if (ranks[i] < 1) throw RankError("tree: ranks must be >= 1");
    if (tree.is_leaf(i)) {
      if (ranks[i] > shape[node.modes.front()]) throw RankError("tree: leaf rank exceeds mode size");
    } else if (ranks[i] > product(child_ranks(tree, ranks, i))) {
      throw RankError("tree: rank exceeds product of child ranks");
    }
    if (node.parent) {
      Index bound = ranks[*node.parent];
      for (Index s : tree.node(*node.parent).children)
        if (s != i) bound *= ranks[s];
      if (ranks[i] > bound) throw RankError("tree: rank exceeds parent rank times sibling ranks");
    }
  }
}

// ---------------------------------------------------------------- random

CPTensor random_cp(const Shape& shape, Index r, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::MatrixXd> f;
  for (Index nu = 0; nu < shape.order(); ++nu) f.push_back(random_matrix(rng, shape[nu], r));
  return CPTensor(shape, std::move(f));
}

TuckerTensor random_tucker(const Shape& shape, const std::vector<Index>& ranks, std::uint64_t seed) {
  check_tucker_ranks(shape, ranks);
  Rng rng(seed);
  DenseTensor core = random_dense(rng, Shape(ranks));
  std::vector<Eigen::MatrixXd> f;
  for (Index nu = 0; nu < shape.order(); ++nu) f.push_back(random_matrix(rng, shape[nu], ranks[nu]));
  return TuckerTensor(shape, std::move(core), std::move(f));
}

TTTensor random_tt(const Shape& shape, const std::vector<Index>& ranks, std::uint64_t seed) {
  check_tt_ranks(shape, ranks);
  Rng rng(seed);
  const Index d = shape.order();
  std::vector<DenseTensor> cores;
  for (Index k = 0; k < d; ++k) {
    const Index a = k == 0 ? 1 : ranks[k - 1];
    const Index b = k + 1 == d ? 1 : ranks[k];
    cores.push_back(random_dense(rng, Shape{a, shape[k], b}));
  }
  return TTTensor(shape, std::move(cores));
}

TreeTensor random_tree(const DimensionTree& tree, const Shape& shape, const std::vector<Index>& ranks_in,
                       std::uint64_t seed) {
  const auto ranks = expand_tree_ranks(tree, ranks_in);
  check_tree_ranks(tree, shape, ranks);
  Rng rng(seed);
  std::map<Index, Eigen::MatrixXd> leaves;
  std::map<Index, DenseTensor> transfers;
  for (Index i = 0; i < tree.num_nodes(); ++i) {
    if (tree.is_leaf(i)) {
      leaves[i] = random_matrix(rng, shape[tree.node(i).modes.front()], ranks[i]);
    } else {
      std::vector<Index> dims{ranks[i]};
      const auto cr = child_ranks(tree, ranks, i);
      dims.insert(dims.end(), cr.begin(), cr.end());
      transfers.emplace(i, random_dense(rng, Shape(dims)));
    }
  }
  return TreeTensor(tree, shape, ranks, std::move(leaves), std::move(transfers));
}

LowRank random_lowrank(Format f, const Shape& shape, const std::vector<Index>& ranks, std::uint64_t seed,
                       const std::optional<DimensionTree>& tree) {
  switch (f) {
    case Format::CP:
      if (ranks.size() != 1) throw RankError("CP: expected a single rank");
      return random_cp(shape, ranks[0], seed);
    case Format::Tucker: return random_tucker(shape, ranks, seed);
    case Format::TT: return random_tt(shape, ranks, seed);
    case Format::Tree:
      return random_tree(tree ? *tree : DimensionTree::balanced(shape.order()), shape, ranks, seed);
  }
  throw RankError("unknown format");
}

// ---------------------------------------------------------------- conversions

TTTensor cp_to_tt(const CPTensor& x) {
  const Index d = x.order();
  const Index r = x.rank();
  std::vector<DenseTensor> cores;
  if (r == 0) {
    for (Index k = 0; k < d; ++k) cores.emplace_back(Shape{1, x.shape()[k], 1});
    return TTTensor(x.shape(), std::move(cores));
  }
  if (d == 1) {
    const Eigen::VectorXd v = x.factor(0) * x.weights();
    cores.emplace_back(Shape{1, x.shape()[0], 1}, std::vector<double>(v.data(), v.data() + v.size()));
    return TTTensor(x.shape(), std::move(cores));
  }
  for (Index k = 0; k < d; ++k) {
    const Index n = x.shape()[k];
    const Index a = k == 0 ? 1 : r;
    const Index b = k + 1 == d ? 1 : r;
    DenseTensor c{Shape{a, n, b}};
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < n; ++j) {
        double v = x.factor(k)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        if (k == 0) v *= x.weights()(static_cast<Eigen::Index>(i));
        c.at({a == 1 ? 0 : i, j, b == 1 ? 0 : i}) = v;
      }
    cores.push_back(std::move(c));
  }
  return TTTensor(x.shape(), std::move(cores));
}

TuckerTensor cp_to_tucker(const CPTensor& x) {
  const Index d = x.order();
  const Index r = std::max<Index>(x.rank(), 1);
  DenseTensor core{Shape(std::vector<Index>(d, r))};
  std::vector<Eigen::MatrixXd> f;
  for (Index nu = 0; nu < d; ++nu) {
    f.push_back(x.rank() == 0 ? Eigen::MatrixXd::Zero(x.shape()[nu], 1) : x.factor(nu));
  }
  for (Index i = 0; i < x.rank(); ++i) core.at(std::vector<Index>(d, i)) = x.weights()(static_cast<Eigen::Index>(i));
  return TuckerTensor(x.shape(), std::move(core), std::move(f));
}

TreeTensor cp_to_tree(const CPTensor& x, const DimensionTree& tree) {
  if (tree.order() != x.order()) throw ShapeError("tree order differs from tensor order");
  const Index r = std::max<Index>(x.rank(), 1);
  const Index n = tree.num_nodes();
  std::vector<Index> ranks(n, r);
  ranks[0] = 1;
  std::map<Index, Eigen::MatrixXd> leaves;
  std::map<Index, DenseTensor> transfers;
  for (Index i = 0; i < n; ++i) {
    if (tree.is_leaf(i)) {
      const Index nu = tree.node(i).modes.front();
      Eigen::MatrixXd U = x.rank() == 0 ? Eigen::MatrixXd::Zero(x.shape()[nu], 1) : x.factor(nu);
      if (i == 0) U = x.rank() == 0 ? U : Eigen::MatrixXd(U * x.weights());
      leaves[i] = U;
      continue;
    }
    const Index k = tree.node(i).children.size();
    std::vector<Index> dims{ranks[i]};
    dims.insert(dims.end(), k, r);
    DenseTensor C{Shape(dims)};
    for (Index j = 0; j < x.rank(); ++j) {
      std::vector<Index> idx(k + 1, j);
      if (i == 0) idx[0] = 0;
      C.at(std::span<const Index>(idx)) = i == 0 ? x.weights()(static_cast<Eigen::Index>(j)) : 1.0;
    }
    transfers.emplace(i, std::move(C));
  }
  return TreeTensor(tree, x.shape(), std::move(ranks), std::move(leaves), std::move(transfers));
}

TreeTensor tt_to_tree(const TTTensor& x) {
  const Index d = x.order();
  DimensionTree tree = DimensionTree::linear(d);
  std::vector<Index> ranks(tree.num_nodes());
  std::map<Index, Eigen::MatrixXd> leaves;
  std::map<Index, DenseTensor> transfers;
  for (Index i = 0; i < tree.num_nodes(); ++i) {
    const Index k = tree.node(i).modes.front();
    if (!tree.is_leaf(i)) {
      // node {k,...,d-1} carries core k unchanged
      ranks[i] = x.left_rank(k);
      transfers.emplace(i, x.core(k));
    } else if (k + 1 < d || d == 1) {
      if (d == 1) {
        ranks[i] = 1;
        leaves[i] = rowmajor_matrix(x.core(0).data(), x.shape()[0], 1);
      } else {
        ranks[i] = x.shape()[k];
        leaves[i] = Eigen::MatrixXd::Identity(x.shape()[k], x.shape()[k]);
      }
    } else {
      ranks[i] = x.left_rank(k);
      leaves[i] = x.right_unfolding(k).transpose();
    }
  }
  return TreeTensor(std::move(tree), x.shape(), std::move(ranks), std::move(leaves), std::move(transfers));
}

}  // namespace tensoria

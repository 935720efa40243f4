#include "tensoria/decompose.hpp"

#include "tensoria/errors.hpp"
#include "tensoria/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tensoria {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// relative cutoff below which singular values count as zero
constexpr double kRankFloor = 1e-14;

Eigen::MatrixXd rowmajor_matrix(const std::vector<double>& data, Index rows, Index cols) {
  return Eigen::Map<const RowMat>(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::vector<double> rowmajor_data(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<Index>(m.size()));
  Eigen::Map<RowMat>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

// Smallest r >= 1 whose tail sum of squares fits the budget, capped at the numerical rank.
Index choose_rank(const Eigen::VectorXd& s, double budget_sq, double* tail_sq = nullptr) {
  const auto n = static_cast<Index>(s.size());
  Index numerical = 0;
  if (n > 0 && s(0) > 0)
    for (Index i = 0; i < n; ++i)
      if (s(static_cast<Eigen::Index>(i)) > kRankFloor * s(0)) ++numerical;
  Index r = numerical;
  double tail = 0.0;
  while (r > 0) {
    const double next = tail + s(static_cast<Eigen::Index>(r - 1)) * s(static_cast<Eigen::Index>(r - 1));
    if (next > budget_sq) break;
    tail = next;
    --r;
  }
  r = std::max<Index>(r, 1);
  if (tail_sq) {
    double t = 0.0;
    for (Index i = r; i < n; ++i) t += s(static_cast<Eigen::Index>(i)) * s(static_cast<Eigen::Index>(i));
    *tail_sq = t;
  }
  return r;
}

// Kronecker product of child bases with rows reordered to increasing mode order.
Eigen::MatrixXd children_kron(const DimensionTree& tree, Index node, const Shape& shape,
                              const std::map<Index, Eigen::MatrixXd>& bases) {
  const auto& children = tree.node(node).children;
  Eigen::MatrixXd K = bases.at(children[0]);
  std::vector<Index> order = tree.node(children[0]).modes.modes();
  for (Index c = 1; c < children.size(); ++c) {
    K = kron(K, bases.at(children[c]));
    const auto& cm = tree.node(children[c]).modes.modes();
    order.insert(order.end(), cm.begin(), cm.end());
  }
  if (std::is_sorted(order.begin(), order.end())) return K;
  std::vector<Index> dims;
  for (Index nu : order) dims.push_back(shape[nu]);
  dims.push_back(static_cast<Index>(K.cols()));
  const DenseTensor t(Shape(dims), rowmajor_data(K));
  std::vector<Index> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<Index> perm;
  for (Index nu : sorted) perm.push_back(static_cast<Index>(std::find(order.begin(), order.end(), nu) - order.begin()));
  perm.push_back(order.size());
  return rowmajor_matrix(permute(t, perm).data(), static_cast<Index>(K.rows()), static_cast<Index>(K.cols()));
}

void require_order2plus(const DenseTensor& u) {
  if (u.order() < 2) throw ShapeError("decomposition needs order >= 2");
}

TuckerTensor zero_tucker(const Shape& s) {
  std::vector<Eigen::MatrixXd> f;
  for (Index nu = 0; nu < s.order(); ++nu) f.push_back(Eigen::MatrixXd::Identity(s[nu], 1));
  return TuckerTensor(s, DenseTensor(Shape(std::vector<Index>(s.order(), 1))), std::move(f));
}

TTTensor zero_tt(const Shape& s) {
  std::vector<DenseTensor> cores;
  for (Index k = 0; k < s.order(); ++k) cores.emplace_back(Shape{1, s[k], 1});
  return TTTensor(s, std::move(cores));
}

TreeTensor zero_tree(const DimensionTree& tree, const Shape& s) {
  std::map<Index, Eigen::MatrixXd> leaves;
  std::map<Index, Eigen::MatrixXd> mats;
  for (Index i = 0; i < tree.num_nodes(); ++i) {
    if (tree.is_leaf(i))
      leaves[i] = Eigen::MatrixXd::Identity(s[tree.node(i).modes.front()], 1);
    else
      mats[i] = Eigen::MatrixXd::Zero(1, 1);
  }
  return tree_from_raw(tree, s, std::move(leaves), std::move(mats));
}

// Tree HOSVD with explicit per-node ranks, no admissibility check; ranks that
// cannot be realized shrink in the QR assembly.
TreeTensor tree_hosvd_raw(const DenseTensor& u, const DimensionTree& tree, const std::vector<Index>& ranks,
                          std::vector<std::string>* warnings) {
  const Index n = tree.num_nodes();
  std::vector<Eigen::MatrixXd> U(n);
  parallel_for(n - 1, [&](std::size_t k) {
    const Index i = k + 1;
    const SVDResult s = svd(matricize_matrix(u, tree.node(i).modes));
    U[i] = s.left.leftCols(std::min<Eigen::Index>(static_cast<Eigen::Index>(ranks[i]), s.left.cols()));
  });
  for (Index i = 1; i < n; ++i)
    if (warnings && static_cast<Index>(U[i].cols()) < ranks[i])
      warnings->push_back("rank of node " + std::to_string(i) + " clamped to " + std::to_string(U[i].cols()));
  std::map<Index, Eigen::MatrixXd> bases, leaves, mats;
  for (Index i = 1; i < n; ++i) bases[i] = U[i];
  for (Index i = 0; i < n; ++i) {
    if (tree.is_leaf(i)) {
      leaves[i] = U[i];
      continue;
    }
    const Eigen::MatrixXd K = children_kron(tree, i, u.shape(), bases);
    if (i == 0)
      mats[i] = u.as_vector().transpose() * K;
    else
      mats[i] = U[i].transpose() * K;
  }
  return tree_from_raw(tree, u.shape(), std::move(leaves), std::move(mats));
}

// Sequential left-to-right sweep; either fixed ranks or a per-interface budget.
TTTensor tt_sweep(const DenseTensor& u, const std::vector<Index>* ranks, double budget_sq, TruncationReport& rep) {
  const Index d = u.order();
  std::vector<DenseTensor> cores;
  Eigen::MatrixXd C = rowmajor_matrix(u.data(), u.shape()[0], u.size() / u.shape()[0]);
  Index r_prev = 1;
  for (Index k = 0; k + 1 < d; ++k) {
    const Index nk = u.shape()[k];
    const Index rows = r_prev * nk;
    const Index cols = static_cast<Index>(C.size()) / rows;
    const std::vector<double> cdata = rowmajor_data(C);
    const SVDResult s = svd(rowmajor_matrix(cdata, rows, cols));
    Index rk;
    if (ranks) {
      rk = (*ranks)[k];
      if (rk > static_cast<Index>(s.singular_values.size())) {
        rep.warnings.push_back("TT rank " + std::to_string(k + 1) + " clamped to " +
                               std::to_string(s.singular_values.size()));
        rk = static_cast<Index>(s.singular_values.size());
      }
    } else {
      rk = choose_rank(s.singular_values, budget_sq);
    }
    const auto r = static_cast<Eigen::Index>(rk);
    cores.emplace_back(Shape{r_prev, nk, rk}, rowmajor_data(s.left.leftCols(r)));
    C = s.singular_values.head(r).asDiagonal() * s.right.leftCols(r).transpose();
    r_prev = rk;
  }
  cores.emplace_back(Shape{r_prev, u.shape()[d - 1], 1}, rowmajor_data(C));
  return TTTensor(u.shape(), std::move(cores));
}

}  // namespace

Eigen::VectorXd unfolding_singular_values(const DenseTensor& u, const ModeSet& alpha) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(matricize_matrix(u, alpha)).singularValues();
}

Decomposition<SVDResult> truncated_svd(const Eigen::MatrixXd& m, Index r) {
  const SVDResult full = svd(m);
  const auto k = static_cast<Eigen::Index>(std::min<Index>(r, static_cast<Index>(full.singular_values.size())));
  Decomposition<SVDResult> out;
  out.tensor.left = full.left.leftCols(k);
  out.tensor.singular_values = full.singular_values.head(k);
  out.tensor.right = full.right.leftCols(k);
  const auto& s = full.singular_values;
  out.report.achieved_error = s.tail(s.size() - k).norm();
  out.report.ranks_used = {static_cast<Index>(k)};
  out.report.bound_constant = 1.0;
  out.report.input_norm = m.norm();
  return out;
}

Decomposition<SVDResult> truncated_svd(const DenseTensor& m, Index r) {
  if (m.order() != 2) throw ShapeError("truncated_svd needs an order-2 tensor");
  return truncated_svd(m.to_matrix(), r);
}

Decomposition<TuckerTensor> hosvd(const DenseTensor& u, std::vector<Index> ranks) {
  require_order2plus(u);
  const Index d = u.order();
  if (ranks.size() != d) throw RankError("hosvd: need one rank per mode");
  TruncationReport rep;
  for (Index nu = 0; nu < d; ++nu) {
    if (ranks[nu] == 0) throw RankError("hosvd: ranks must be >= 1");
    if (ranks[nu] > u.shape()[nu]) {
      rep.warnings.push_back("rank of mode " + std::to_string(nu) + " clamped to " + std::to_string(u.shape()[nu]));
      ranks[nu] = u.shape()[nu];
    }
  }
  std::vector<Eigen::MatrixXd> factors(d);
  parallel_for(d, [&](std::size_t nu) {
    const SVDResult s = svd(matricize_matrix(u, ModeSet{nu}));
    factors[nu] = s.left.leftCols(std::min<Eigen::Index>(static_cast<Eigen::Index>(ranks[nu]), s.left.cols()));
  });
  DenseTensor core = u;
  for (Index nu = 0; nu < d; ++nu) {
    if (static_cast<Index>(factors[nu].cols()) < ranks[nu]) {
      rep.warnings.push_back("rank of mode " + std::to_string(nu) + " clamped to " + std::to_string(factors[nu].cols()));
    }
    core = mode_apply(core, nu, factors[nu].transpose());
  }
  TuckerTensor x(u.shape(), std::move(core), std::move(factors));
  rep.achieved_error = norm(u - to_dense(x));
  rep.ranks_used = x.ranks();
  rep.bound_constant = std::sqrt(static_cast<double>(d));
  rep.input_norm = norm(u);
  return {std::move(x), std::move(rep)};
}

Decomposition<TTTensor> tt_svd(const DenseTensor& u, std::vector<Index> ranks) {
  require_order2plus(u);
  const Index d = u.order();
  if (ranks.size() + 1 != d) throw RankError("tt_svd: need d-1 ranks");
  for (Index r : ranks)
    if (r == 0) throw RankError("tt_svd: ranks must be >= 1");
  TruncationReport rep;
  TTTensor x = tt_sweep(u, &ranks, 0.0, rep);
  rep.achieved_error = norm(u - to_dense(x));
  rep.ranks_used = x.ranks();
  rep.bound_constant = std::sqrt(static_cast<double>(d - 1));
  rep.input_norm = norm(u);
  return {std::move(x), std::move(rep)};
}

Decomposition<TreeTensor> tree_hosvd(const DenseTensor& u, const DimensionTree& tree, const std::vector<Index>& ranks) {
  require_order2plus(u);
  if (tree.order() != u.order()) throw ShapeError("tree order differs from tensor order");
  const auto full = expand_tree_ranks(tree, ranks);
  check_tree_ranks(tree, u.shape(), full);
  TruncationReport rep;
  TreeTensor x = tree_hosvd_raw(u, tree, full, &rep.warnings);
  rep.achieved_error = norm(u - to_dense(x));
  rep.ranks_used = x.ranks();
  rep.bound_constant = tree.hosvd_bound_constant();
  rep.input_norm = norm(u);
  return {std::move(x), std::move(rep)};
}

Decomposition<LowRank> truncate(const DenseTensor& u, double eps, Format target, const std::optional<DimensionTree>& tree_opt) {
  if (!(eps >= 0)) throw std::invalid_argument("eps must be >= 0");
  if (target == Format::CP) throw std::invalid_argument("truncate: the cp target is not supported");
  require_order2plus(u);
  const Index d = u.order();
  const DimensionTree tree = tree_opt ? *tree_opt : DimensionTree::balanced(d);
  if (target == Format::Tree && tree.order() != d) throw ShapeError("tree order differs from tensor order");
  const double nu_norm = norm(u);
  TruncationReport rep;
  rep.input_norm = nu_norm;
  switch (target) {
    case Format::Tucker: rep.bound_constant = std::sqrt(static_cast<double>(d)); break;
    case Format::TT: rep.bound_constant = std::sqrt(static_cast<double>(d - 1)); break;
    default: rep.bound_constant = tree.hosvd_bound_constant();
  }
  if (eps >= 1.0 || nu_norm == 0.0) {
    LowRank z = target == Format::Tucker ? LowRank(zero_tucker(u.shape()))
                : target == Format::TT   ? LowRank(zero_tt(u.shape()))
                                         : LowRank(zero_tree(tree, u.shape()));
    rep.achieved_error = nu_norm;
    rep.ranks_used = ranks_of(z);
    return {std::move(z), std::move(rep)};
  }
  const double total_sq = eps * eps * nu_norm * nu_norm;
  LowRank result = [&]() -> LowRank {
    if (target == Format::Tucker) {
      std::vector<Index> ranks(d);
      parallel_for(d, [&](std::size_t k) {
        ranks[k] = choose_rank(unfolding_singular_values(u, ModeSet{k}), total_sq / static_cast<double>(d));
      });
      auto h = hosvd(u, ranks);
      return h.tensor;
    }
    if (target == Format::TT) return tt_sweep(u, nullptr, total_sq / static_cast<double>(d - 1), rep);
    const Index n = tree.num_nodes();
    std::vector<Index> ranks(n, 1);
    parallel_for(n - 1, [&](std::size_t k) {
      ranks[k + 1] = choose_rank(unfolding_singular_values(u, tree.node(k + 1).modes), total_sq / static_cast<double>(n - 1));
    });
    return tree_hosvd_raw(u, tree, ranks, nullptr);
  }();
  rep.achieved_error = norm(u - to_dense(result));
  rep.ranks_used = ranks_of(result);
  return {std::move(result), std::move(rep)};
}

TTTensor tt_round(const TTTensor& x, double eps, TruncationReport* report) {
  if (!(eps >= 0)) throw std::invalid_argument("eps must be >= 0");
  const Index d = x.order();
  const TTTensor o = orthonormalize(x);
  const double nrm = norm(o.cores().back());
  TruncationReport rep;
  rep.input_norm = nrm;
  rep.bound_constant = std::sqrt(static_cast<double>(std::max<Index>(d - 1, 1)));
  if (d == 1) {
    rep.ranks_used = {};
    if (report) *report = rep;
    return o;
  }
  if (eps >= 1.0 || nrm == 0.0) {
    rep.achieved_error = nrm;
    TTTensor z = zero_tt(x.shape());
    rep.ranks_used = z.ranks();
    if (report) *report = rep;
    return z;
  }
  const double budget_sq = eps * eps * nrm * nrm / static_cast<double>(d - 1);
  std::vector<DenseTensor> cores = o.cores();
  double err_sq = 0.0;
  for (Index k = d; k-- > 1;) {
    const auto sk = cores[k].shape();
    const SVDResult s = svd(rowmajor_matrix(cores[k].data(), sk[0], sk[1] * sk[2]));
    double tail = 0.0;
    const Index r = choose_rank(s.singular_values, budget_sq, &tail);
    err_sq += tail;
    const auto re = static_cast<Eigen::Index>(r);
    cores[k] = DenseTensor(Shape{r, sk[1], sk[2]}, rowmajor_data(s.right.leftCols(re).transpose()));
    const auto sp = cores[k - 1].shape();
    const Eigen::MatrixXd left = rowmajor_matrix(cores[k - 1].data(), sp[0] * sp[1], sp[2]) *
                                 (s.left.leftCols(re) * s.singular_values.head(re).asDiagonal());
    cores[k - 1] = DenseTensor(Shape{sp[0], sp[1], r}, rowmajor_data(left));
  }
  TTTensor out(x.shape(), std::move(cores));
  // the discarded parts are mutually orthogonal, so the tails add up exactly
  rep.achieved_error = std::sqrt(err_sq);
  rep.ranks_used = out.ranks();
  if (report) *report = rep;
  return out;
}

namespace {

TreeTensor tree_round(const TreeTensor& x, double eps, TruncationReport& rep) {
  const auto& tree = x.tree();
  const Index n = tree.num_nodes();
  const TreeTensor o = orthonormalize(x);
  const double nrm = format_norm(o);
  rep.input_norm = nrm;
  rep.bound_constant = tree.hosvd_bound_constant();
  if (eps >= 1.0 || nrm == 0.0) {
    TreeTensor z = zero_tree(tree, x.shape());
    rep.achieved_error = nrm;
    rep.ranks_used = z.ranks();
    return z;
  }
  const double budget_sq = eps * eps * nrm * nrm / static_cast<double>(n - 1);
  // reduced Gramians, top-down
  std::vector<Eigen::MatrixXd> G(n);
  G[0] = Eigen::MatrixXd::Constant(1, 1, nrm * nrm);
  std::vector<Eigen::MatrixXd> S(n);
  for (Index a = 0; a < n; ++a) {
    if (tree.is_leaf(a)) continue;
    const DenseTensor& C = o.transfer(a);
    const DenseTensor GC = mode_apply(C, 0, G[a]);
    const auto& children = tree.node(a).children;
    for (Index p = 0; p < children.size(); ++p) {
      const ModeSet slot{p + 1};
      G[children[p]] = matricize_matrix(GC, slot) * matricize_matrix(C, slot).transpose();
    }
  }
  for (Index b = 1; b < n; ++b) {
    const Eigen::MatrixXd sym = 0.5 * (G[b] + G[b].transpose());
    // singular vectors of the Gramian (symmetric PSD): SVD gives descending order
    const SVDResult s = svd(sym);
    Eigen::VectorXd sv = s.singular_values.cwiseMax(0.0).cwiseSqrt();
    const Index r = choose_rank(sv, budget_sq);
    S[b] = s.left.leftCols(static_cast<Eigen::Index>(r));
  }
  std::map<Index, Eigen::MatrixXd> leaves, mats;
  for (Index a = 0; a < n; ++a) {
    if (tree.is_leaf(a)) {
      leaves[a] = o.leaf_basis(a) * S[a];
      continue;
    }
    DenseTensor C = o.transfer(a);
    if (a != 0) C = mode_apply(C, 0, S[a].transpose());
    const auto& children = tree.node(a).children;
    for (Index p = 0; p < children.size(); ++p) C = mode_apply(C, p + 1, S[children[p]].transpose());
    mats[a] = rowmajor_matrix(C.data(), C.shape()[0], C.size() / C.shape()[0]);
  }
  TreeTensor out = tree_from_raw(tree, x.shape(), std::move(leaves), std::move(mats));
  rep.achieved_error = format_norm(add(o, scale(out, -1.0)));
  rep.ranks_used = out.ranks();
  return out;
}

}  // namespace

Decomposition<LowRank> truncate(const LowRank& x, double eps, Format target, const std::optional<DimensionTree>& tree_opt) {
  if (!(eps >= 0)) throw std::invalid_argument("eps must be >= 0");
  if (target == Format::CP) throw std::invalid_argument("truncate: the cp target is not supported");
  TruncationReport rep;
  if (const auto* cp = std::get_if<CPTensor>(&x)) {
    if (target == Format::TT) return truncate(LowRank(cp_to_tt(*cp)), eps, target);
    if (target == Format::Tucker) return truncate(LowRank(cp_to_tucker(*cp)), eps, target);
    const DimensionTree tree = tree_opt ? *tree_opt : DimensionTree::balanced(cp->order());
    return truncate(LowRank(cp_to_tree(*cp, tree)), eps, target);
  }
  if (const auto* tt = std::get_if<TTTensor>(&x)) {
    if (target == Format::TT) {
      TTTensor r = tt_round(*tt, eps, &rep);
      return {LowRank(std::move(r)), std::move(rep)};
    }
    if (target == Format::Tree && (!tree_opt || *tree_opt == DimensionTree::linear(tt->order())))
      return truncate(LowRank(tt_to_tree(*tt)), eps, target);
  }
  if (const auto* tk = std::get_if<TuckerTensor>(&x); tk && target == Format::Tucker) {
    const TuckerTensor o = orthonormalize(*tk);
    auto inner_result = truncate(o.core(), eps, Format::Tucker);
    const auto& ct = std::get<TuckerTensor>(inner_result.tensor);
    std::vector<Eigen::MatrixXd> f;
    for (Index nu = 0; nu < o.order(); ++nu) f.push_back(o.factor(nu) * ct.factor(nu));
    TuckerTensor out(o.shape(), ct.core(), std::move(f));
    rep = inner_result.report;
    rep.ranks_used = out.ranks();
    return {LowRank(std::move(out)), std::move(rep)};
  }
  if (const auto* tr = std::get_if<TreeTensor>(&x); tr && target == Format::Tree) {
    if (tree_opt && !(*tree_opt == tr->tree())) throw std::invalid_argument("truncate: tree conversion is not supported");
    TreeTensor out = tree_round(*tr, eps, rep);
    return {LowRank(std::move(out)), std::move(rep)};
  }
  throw std::invalid_argument("truncate: conversion from " + format_name(static_cast<Format>(x.index())) + " to " +
                              format_name(target) + " is not supported");
}

}  // namespace tensoria

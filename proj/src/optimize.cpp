#include "tensoria/optimize.hpp"

#include "tensoria/decompose.hpp"
#include "tensoria/errors.hpp"
#include "tensoria/linalg.hpp"
#include "tensoria/parallel.hpp"
#include "tensoria/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace tensoria {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  RowMat r = m;
  return Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& p, Eigen::Index rows, Eigen::Index cols) {
  if (p.size() != rows * cols) throw ShapeError("block size mismatch");
  return Eigen::Map<const RowMat>(p.data(), rows, cols);
}

Eigen::VectorXd flatten(const DenseTensor& t) { return t.as_vector(); }

DenseTensor unflatten(const Eigen::VectorXd& p, const Shape& shape) {
  if (static_cast<Index>(p.size()) != shape.size()) throw ShapeError("block size mismatch");
  return DenseTensor(shape, std::vector<double>(p.data(), p.data() + p.size()));
}

DenseTensor tensor_from(const Shape& shape, const Eigen::VectorXd& v) { return unflatten(v, shape); }

double tensor_dot(const DenseTensor& a, const DenseTensor& b) { return a.as_vector().dot(b.as_vector()); }

// Dominant left singular vector of each unfolding.
std::vector<Eigen::VectorXd> dominant_factors(const DenseTensor& r) {
  std::vector<Eigen::VectorXd> out;
  for (Index nu = 0; nu < r.order(); ++nu) {
    const Eigen::MatrixXd m = matricize_matrix(r, ModeSet({nu}));
    out.push_back(svd(m).left.col(0));
  }
  return out;
}

CPTensor rank_one(const Shape& shape, const std::vector<Eigen::VectorXd>& vs, double weight) {
  std::vector<Eigen::MatrixXd> f;
  for (const auto& v : vs) f.emplace_back(v);
  Eigen::VectorXd w(1);
  w(0) = weight;
  return CPTensor(shape, std::move(f), w);
}

// Unit columns, magnitudes in the weights. Zero columns give zero weights.
CPTensor normalize_cp(const CPTensor& x) {
  std::vector<Eigen::MatrixXd> f = x.factors();
  Eigen::VectorXd w = x.weights();
  for (Index j = 0; j < x.rank(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    for (auto& m : f) {
      const double n = m.col(jj).norm();
      if (n > 0.0) {
        m.col(jj) /= n;
        w(jj) *= n;
      } else {
        w(jj) = 0.0;
      }
    }
    // keep weights nonnegative
    if (w(jj) < 0.0) {
      w(jj) = -w(jj);
      f[0].col(jj) = -f[0].col(jj);
    }
  }
  return CPTensor(x.shape(), std::move(f), w);
}

DenseTensor term_dense(const CPTensor& x, Index j) {
  std::vector<Eigen::VectorXd> vs;
  for (const auto& m : x.factors()) vs.emplace_back(m.col(static_cast<Eigen::Index>(j)));
  return outer(vs);
}

double block_penalty(const LowRank& x) {
  double s = 0.0;
  for (const auto& p : parameter_blocks(x)) s += p.squaredNorm();
  return s;
}

using Annotate = std::function<void(const LowRank&, GreedyStep&)>;

AlsResult als_core(const QuadraticObjective& obj, LowRank x, const OptimOptions& opts, double ridge,
                   const Annotate& annotate) {
  opts.validate();
  if (ridge < 0.0) throw std::invalid_argument("ridge must be >= 0");
  if (!(std::visit([](const auto& t) { return t.shape(); }, x) == obj.shape()))
    throw ShapeError("ALS: start shape differs from objective shape");
  const Index nblocks = parameter_blocks(x).size();
  auto total = [&](const LowRank& v, const DenseTensor& dense) {
    double f = obj.value(dense);
    if (ridge > 0.0) f += ridge * block_penalty(v);
    return f;
  };
  GreedyTrace trace;
  DenseTensor dense = to_dense(x);
  double f = total(x, dense);
  {
    GreedyStep s;
    s.step = 0;
    s.objective = std::sqrt(std::max(f, 0.0));
    s.ranks = ranks_of(x);
    if (annotate) annotate(x, s);
    trace.steps.push_back(s);
  }
  trace.stop_reason = "max_sweeps";
  for (Index sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    bool deficient = false;
    for (Index b = 0; b < nblocks; ++b) {
      const Eigen::MatrixXd A = block_design(x, b);
      bool def = false;
      const Eigen::VectorXd p = obj.solve_linear(A, nullptr, ridge, &def);
      deficient = deficient || def;
      x = with_block(x, b, p);
    }
    DenseTensor next = to_dense(x);
    const double fn = total(x, next);
    GreedyStep s;
    s.step = sweep;
    s.objective = std::sqrt(std::max(fn, 0.0));
    s.correction_norm = norm(next - dense);
    s.ranks = ranks_of(x);
    s.rank_deficient = deficient;
    if (annotate) annotate(x, s);
    trace.steps.push_back(s);
    dense = std::move(next);
    const double drop = f - fn;
    f = fn;
    if (drop <= opts.stagnation_tol * std::abs(f + drop)) {
      trace.stop_reason = "stagnation";
      break;
    }
  }
  return {std::move(x), std::move(trace)};
}

double final_objective(const GreedyTrace& t) { return t.steps.back().objective; }

AlsResult best_of(std::vector<AlsResult>& runs) {
  Index best = 0;
  for (Index k = 1; k < runs.size(); ++k)
    if (final_objective(runs[k].trace) < final_objective(runs[best].trace)) best = k;
  return std::move(runs[best]);
}

std::vector<LowRank> random_starts(Format format, const Shape& shape, const std::vector<Index>& ranks,
                                   const OptimOptions& opts, const std::optional<DimensionTree>& tree) {
  const Index n = std::max<Index>(opts.restarts, 1);
  std::vector<LowRank> out;
  for (Index k = 0; k < n; ++k) out.push_back(random_lowrank(format, shape, ranks, stream_seed(opts.seed, k), tree));
  return out;
}

std::vector<AlsResult> run_all(const QuadraticObjective& obj, const std::vector<LowRank>& starts,
                               const OptimOptions& opts, double ridge, const Annotate& annotate) {
  std::vector<std::optional<AlsResult>> slots(starts.size());
  parallel_for(starts.size(), [&](std::size_t k) { slots[k] = als_core(obj, starts[k], opts, ridge, annotate); });
  std::vector<AlsResult> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace

void OptimOptions::validate() const {
  if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be >= 1");
  if (!(stagnation_tol > 0.0)) throw std::invalid_argument("stagnation_tol must be > 0");
}

// ---------------------------------------------------------------- objective

QuadraticObjective QuadraticObjective::distance_to(DenseTensor target) {
  QuadraticObjective q;
  q.kind_ = Kind::Distance;
  q.shape_ = target.shape();
  q.target_ = std::move(target);
  return q;
}

QuadraticObjective QuadraticObjective::least_squares(Shape shape, LinearMap phi, Eigen::VectorXd g) {
  if (!phi) throw std::invalid_argument("least_squares: empty map");
  QuadraticObjective q;
  q.kind_ = Kind::LeastSquares;
  q.shape_ = std::move(shape);
  q.phi_ = std::move(phi);
  q.g_ = std::move(g);
  return q;
}

QuadraticObjective QuadraticObjective::general(Shape shape, Apply apply_H, DenseTensor b, double c) {
  if (!apply_H) throw std::invalid_argument("general objective: empty operator");
  if (!(b.shape() == shape)) throw ShapeError("general objective: b shape differs");
  Rng rng(0x5EEDULL);
  auto rnd = [&] {
    DenseTensor t(shape);
    for (auto& v : t.data()) v = rng.normal();
    return t;
  };
  for (int probe = 0; probe < 3; ++probe) {
    const DenseTensor x = rnd(), y = rnd();
    const DenseTensor hx = apply_H(x), hy = apply_H(y);
    if (!(hx.shape() == shape) || !(hy.shape() == shape)) throw std::invalid_argument("operator changes the shape");
    const DenseTensor hxy = apply_H(x + 2.0 * y);
    const double scale = norm(hx) + 2.0 * norm(hy) + 1e-300;
    if (norm(hxy - hx - 2.0 * hy) > 1e-8 * scale) throw std::invalid_argument("objective is not quadratic: operator not linear");
    const double a = tensor_dot(hx, y), bb = tensor_dot(x, hy);
    const double sc = std::max(norm(hx) * norm(y), norm(x) * norm(hy)) + 1e-300;
    if (std::abs(a - bb) > 1e-8 * sc) throw std::invalid_argument("objective is not quadratic: operator not symmetric");
    if (tensor_dot(hx, x) < -1e-10 * norm(hx) * norm(x)) throw std::invalid_argument("objective is not convex: operator not semidefinite");
  }
  QuadraticObjective q;
  q.kind_ = Kind::General;
  q.shape_ = std::move(shape);
  q.H_ = std::move(apply_H);
  q.target_ = std::move(b);
  q.c_ = c;
  return q;
}

double QuadraticObjective::value(const DenseTensor& w) const {
  switch (kind_) {
    case Kind::Distance: return (target_ - w).as_vector().squaredNorm();
    case Kind::LeastSquares: return (phi_(w) - g_).squaredNorm();
    case Kind::General: return tensor_dot(H_(w), w) - 2.0 * tensor_dot(target_, w) + c_;
  }
  return 0.0;
}

std::optional<DenseTensor> QuadraticObjective::residual(const DenseTensor& w) const {
  switch (kind_) {
    case Kind::Distance: return target_ - w;
    case Kind::LeastSquares: return std::nullopt;
    case Kind::General: return target_ - H_(w);
  }
  return std::nullopt;
}

QuadraticObjective QuadraticObjective::shifted(const DenseTensor& u) const {
  QuadraticObjective q = *this;
  switch (kind_) {
    case Kind::Distance: q.target_ = target_ - u; break;
    case Kind::LeastSquares: q.g_ = g_ - phi_(u); break;
    case Kind::General: {
      const DenseTensor hu = H_(u);
      q.c_ = value(u);
      q.target_ = target_ - hu;
      break;
    }
  }
  return q;
}

Eigen::VectorXd QuadraticObjective::solve_linear(const Eigen::MatrixXd& A, const DenseTensor* offset, double ridge,
                                                 bool* rank_deficient) const {
  const Eigen::Index n = A.cols();
  if (static_cast<Index>(A.rows()) != shape_.size()) throw ShapeError("design rows differ from tensor size");
  LstsqResult res;
  if (kind_ == Kind::General) {
    Eigen::MatrixXd HA(A.rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) HA.col(j) = H_(tensor_from(shape_, A.col(j))).as_vector();
    Eigen::MatrixXd G = A.transpose() * HA;
    G = 0.5 * (G + G.transpose()).eval();
    G.diagonal().array() += ridge;
    Eigen::VectorXd rhs = A.transpose() * target_.as_vector();
    if (offset) rhs -= A.transpose() * H_(*offset).as_vector();
    res = solve_psd(G, rhs);
  } else {
    Eigen::MatrixXd M;
    Eigen::VectorXd rhs;
    if (kind_ == Kind::Distance) {
      M = A;
      rhs = target_.as_vector();
      if (offset) rhs -= offset->as_vector();
    } else {
      rhs = g_;
      if (offset) rhs -= phi_(*offset);
      M.resize(rhs.size(), n);
      for (Eigen::Index j = 0; j < n; ++j) M.col(j) = phi_(tensor_from(shape_, A.col(j)));
    }
    if (ridge > 0.0) {
      Eigen::MatrixXd Mr(M.rows() + n, n);
      Mr << M, std::sqrt(ridge) * Eigen::MatrixXd::Identity(n, n);
      Eigen::VectorXd rr(rhs.size() + n);
      rr << rhs, Eigen::VectorXd::Zero(n);
      res = lstsq(Mr, rr);
    } else {
      res = lstsq(M, rhs);
    }
  }
  if (rank_deficient) *rank_deficient = res.rank_deficient;
  return res.x;
}

// ---------------------------------------------------------------- blocks

std::vector<Eigen::VectorXd> parameter_blocks(const LowRank& x) {
  std::vector<Eigen::VectorXd> out;
  if (const auto* cp = std::get_if<CPTensor>(&x)) {
    for (const auto& f : cp->factors()) out.push_back(flatten(f));
  } else if (const auto* tk = std::get_if<TuckerTensor>(&x)) {
    for (const auto& f : tk->factors()) out.push_back(flatten(f));
    out.push_back(flatten(tk->core()));
  } else if (const auto* tt = std::get_if<TTTensor>(&x)) {
    for (const auto& c : tt->cores()) out.push_back(flatten(c));
  } else {
    const auto& tr = std::get<TreeTensor>(x);
    for (Index a = 0; a < tr.tree().num_nodes(); ++a) {
      if (tr.tree().is_leaf(a))
        out.push_back(flatten(tr.leaf_basis(a)));
      else
        out.push_back(flatten(tr.transfer(a)));
    }
  }
  return out;
}

LowRank with_block(const LowRank& x, Index block, const Eigen::VectorXd& p) {
  if (const auto* cp = std::get_if<CPTensor>(&x)) {
    auto f = cp->factors();
    if (block >= f.size()) throw std::out_of_range("block index");
    f[block] = unflatten(p, f[block].rows(), f[block].cols());
    return CPTensor(cp->shape(), std::move(f), cp->weights());
  }
  if (const auto* tk = std::get_if<TuckerTensor>(&x)) {
    auto f = tk->factors();
    DenseTensor core = tk->core();
    if (block < f.size())
      f[block] = unflatten(p, f[block].rows(), f[block].cols());
    else if (block == f.size())
      core = unflatten(p, core.shape());
    else
      throw std::out_of_range("block index");
    return TuckerTensor(tk->shape(), std::move(core), std::move(f));
  }
  if (const auto* tt = std::get_if<TTTensor>(&x)) {
    auto c = tt->cores();
    if (block >= c.size()) throw std::out_of_range("block index");
    c[block] = unflatten(p, c[block].shape());
    return TTTensor(tt->shape(), std::move(c));
  }
  const auto& tr = std::get<TreeTensor>(x);
  if (block >= tr.tree().num_nodes()) throw std::out_of_range("block index");
  auto leaves = tr.leaf_bases();
  auto transfers = tr.transfers();
  if (tr.tree().is_leaf(block)) {
    auto& m = leaves.at(block);
    m = unflatten(p, m.rows(), m.cols());
  } else {
    auto& t = transfers.at(block);
    t = unflatten(p, t.shape());
  }
  return TreeTensor(tr.tree(), tr.shape(), tr.ranks(), std::move(leaves), std::move(transfers));
}

Eigen::MatrixXd block_design(const LowRank& x, Index block) {
  const Eigen::VectorXd p = parameter_blocks(x).at(block);
  const Index N = std::visit([](const auto& t) { return t.shape().size(); }, x);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(N), p.size());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    e(j) = 1.0;
    A.col(j) = to_dense(with_block(x, block, e)).as_vector();
    e(j) = 0.0;
  }
  return A;
}

// ---------------------------------------------------------------- ALS

AlsResult als_minimize(const QuadraticObjective& obj, LowRank init, const OptimOptions& opts, double ridge) {
  return als_core(obj, std::move(init), opts, ridge, nullptr);
}

AlsResult als_best_approx(const DenseTensor& target, Format format, const std::vector<Index>& ranks,
                          const OptimOptions& opts, const std::optional<DimensionTree>& tree) {
  opts.validate();
  const auto obj = QuadraticObjective::distance_to(target);
  auto runs = run_all(obj, random_starts(format, target.shape(), ranks, opts, tree), opts, 0.0, nullptr);
  AlsResult best = best_of(runs);
  if (auto* cp = std::get_if<CPTensor>(&best.x)) best.x = normalize_cp(*cp);
  return best;
}

AlsResult als_best_approx(const DenseTensor& target, LowRank init, const OptimOptions& opts) {
  AlsResult r = als_core(QuadraticObjective::distance_to(target), std::move(init), opts, 0.0, nullptr);
  if (auto* cp = std::get_if<CPTensor>(&r.x)) r.x = normalize_cp(*cp);
  return r;
}

// ---------------------------------------------------------------- greedy

CPTensor rank_one_correction(const QuadraticObjective& obj, const CPTensor& start, const OptimOptions& opts) {
  if (start.rank() != 1) throw RankError("rank-one correction needs a rank-one start");
  AlsResult r = als_core(obj, start, opts, 0.0, nullptr);
  return normalize_cp(std::get<CPTensor>(r.x));
}

namespace {

// Start for the next correction: dominant factors of the residual direction,
// random normals when there is no dense residual. Empty when the residual is zero.
std::optional<CPTensor> greedy_start(const QuadraticObjective& shifted, const OptimOptions& opts, Index step) {
  const Shape& shape = shifted.shape();
  const DenseTensor zero(shape);
  if (auto r = shifted.residual(zero)) {
    const double rn = norm(*r);
    if (!(rn > 0.0)) return std::nullopt;
    auto vs = dominant_factors(*r);
    return rank_one(shape, vs, tensor_dot(*r, outer(vs)));
  }
  Rng rng(stream_seed(opts.seed, step));
  std::vector<Eigen::VectorXd> vs;
  for (Index nu = 0; nu < shape.order(); ++nu) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(shape[nu]));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    vs.push_back(v);
  }
  return rank_one(shape, vs, 1.0);
}

GreedyResult greedy_impl(const QuadraticObjective& obj, Index r_max, const OptimOptions& opts, bool orthogonal) {
  opts.validate();
  const Shape& shape = obj.shape();
  const Index d = shape.order();
  std::vector<Eigen::MatrixXd> factors;
  for (Index nu = 0; nu < d; ++nu) factors.emplace_back(shape[nu], 0);
  CPTensor u(shape, factors, Eigen::VectorXd(0));
  DenseTensor dense(shape);
  GreedyResult out{u, {}};
  out.trace.steps.push_back({0, std::sqrt(std::max(obj.value(dense), 0.0)), 0.0, {0}, false, 0.0});
  out.trace.stop_reason = "max_rank";
  for (Index r = 1; r <= r_max; ++r) {
    const QuadraticObjective sh = obj.shifted(dense);
    const auto start = greedy_start(sh, opts, r);
    if (!start) {
      out.trace.stop_reason = "degenerate";
      break;
    }
    const CPTensor w = rank_one_correction(sh, *start, opts);
    const double cn = w.weights()(0);
    const double un = norm(dense);
    if (!(cn > 0.0) || cn < 1e-14 * un) {
      out.trace.stop_reason = "degenerate";
      break;
    }
    auto f = u.factors();
    Eigen::VectorXd wts(u.rank() + 1);
    wts << u.weights(), cn;
    for (Index nu = 0; nu < d; ++nu) {
      f[nu].conservativeResize(Eigen::NoChange, f[nu].cols() + 1);
      f[nu].col(f[nu].cols() - 1) = w.factor(nu).col(0);
    }
    u = CPTensor(shape, std::move(f), wts);
    bool deficient = false;
    if (orthogonal) u = refit_coefficients(obj, u, &deficient);
    dense = to_dense(u);
    out.trace.steps.push_back({r, std::sqrt(std::max(obj.value(dense), 0.0)), cn, {r}, deficient, 0.0});
    if (cn < opts.stagnation_tol * norm(dense)) {
      out.trace.stop_reason = "stagnation";
      break;
    }
  }
  out.x = u;
  return out;
}

}  // namespace

GreedyResult greedy_rank_one(const QuadraticObjective& obj, Index r_max, const OptimOptions& opts) {
  return greedy_impl(obj, r_max, opts, false);
}

GreedyResult orthogonal_greedy(const QuadraticObjective& obj, Index r_max, const OptimOptions& opts) {
  return greedy_impl(obj, r_max, opts, true);
}

CPTensor refit_coefficients(const QuadraticObjective& obj, const CPTensor& x, bool* rank_deficient) {
  if (!(x.shape() == obj.shape())) throw ShapeError("refit: shape mismatch");
  Eigen::MatrixXd A(static_cast<Eigen::Index>(x.shape().size()), static_cast<Eigen::Index>(x.rank()));
  for (Index j = 0; j < x.rank(); ++j) A.col(static_cast<Eigen::Index>(j)) = term_dense(x, j).as_vector();
  const Eigen::VectorXd s = obj.solve_linear(A, nullptr, 0.0, rank_deficient);
  return CPTensor(x.shape(), x.factors(), s);
}

TuckerGreedyResult greedy_tucker(const DenseTensor& target, Index steps, const OptimOptions& opts) {
  opts.validate();
  if (steps < 1) throw std::invalid_argument("greedy_tucker: steps must be >= 1");
  const Shape& shape = target.shape();
  const Index d = shape.order();
  std::vector<Eigen::MatrixXd> U;
  for (Index nu = 0; nu < d; ++nu) U.emplace_back(shape[nu], 0);
  auto project = [&](const std::vector<Eigen::MatrixXd>& bases) {
    DenseTensor core = target;
    for (Index nu = 0; nu < d; ++nu) core = mode_apply(core, nu, bases[nu].transpose());
    return core;
  };
  std::vector<Index> zr(d, 1);
  std::vector<Eigen::MatrixXd> zf;
  for (Index nu = 0; nu < d; ++nu) zf.push_back(Eigen::MatrixXd::Zero(shape[nu], 1));
  TuckerTensor x(shape, DenseTensor(Shape(zr)), zf);
  DenseTensor dense(shape);
  TuckerGreedyResult out{x, {}};
  out.trace.steps.push_back({0, norm(target), 0.0, std::vector<Index>(d, 0), false, 0.0});
  out.trace.stop_reason = "max_steps";
  for (Index m = 1; m <= steps; ++m) {
    const DenseTensor r = target - dense;
    if (!(norm(r) > 0.0)) {
      out.trace.stop_reason = "converged";
      break;
    }
    auto vs = dominant_factors(r);
    const CPTensor w =
        rank_one_correction(QuadraticObjective::distance_to(r), rank_one(shape, vs, tensor_dot(r, outer(vs))), opts);
    const double cn = w.weights()(0);
    if (!(cn > 0.0)) {
      out.trace.stop_reason = "degenerate";
      break;
    }
    bool grew = false;
    for (Index nu = 0; nu < d; ++nu) {
      Eigen::VectorXd a = w.factor(nu).col(0);
      for (int pass = 0; pass < 2; ++pass) a -= U[nu] * (U[nu].transpose() * a);
      const double an = a.norm();
      if (an > 1e-10) {
        U[nu].conservativeResize(Eigen::NoChange, U[nu].cols() + 1);
        U[nu].col(U[nu].cols() - 1) = a / an;
        grew = true;
      }
    }
    if (!grew) {
      out.trace.stop_reason = "stagnation";
      break;
    }
    DenseTensor core = project(U);
    x = TuckerTensor(shape, core, U);
    dense = to_dense(x);
    std::vector<Index> dims;
    for (const auto& b : U) dims.push_back(static_cast<Index>(b.cols()));
    out.trace.steps.push_back({m, norm(target - dense), cn, dims, false, 0.0});
  }
  out.x = x;
  return out;
}

// ---------------------------------------------------------------- fitting

namespace {

Eigen::MatrixXd feature_matrix(const std::vector<FunctionBasis>& bases, const Eigen::MatrixXd& points) {
  const Index d = bases.size();
  if (static_cast<Index>(points.cols()) != d) throw ShapeError("points must have one column per basis");
  Index total = 1;
  for (const auto& b : bases) total *= b.size();
  Eigen::MatrixXd Phi(points.rows(), static_cast<Eigen::Index>(total));
  for (Eigen::Index k = 0; k < points.rows(); ++k) {
    Eigen::MatrixXd row = bases[0].eval(points(k, 0)).transpose();
    for (Index nu = 1; nu < d; ++nu)
      row = kron(row, bases[nu].eval(points(k, static_cast<Eigen::Index>(nu))).transpose());
    Phi.row(k) = row;
  }
  return Phi;
}

}  // namespace

FitResult least_squares_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                            const std::vector<FunctionBasis>& bases, Format format, const std::vector<Index>& ranks,
                            double ridge, const OptimOptions& opts, const std::optional<DimensionTree>& tree) {
  opts.validate();
  if (points.rows() < 1 || points.rows() != values.size())
    throw std::invalid_argument("fit: need as many values as points, at least one");
  if (bases.empty()) throw std::invalid_argument("fit: no bases");
  if (!(ridge >= 0.0)) throw std::invalid_argument("fit: ridge must be >= 0");
  if (!values.allFinite() || !points.allFinite()) throw std::invalid_argument("fit: non-finite data");
  std::vector<Index> dims;
  for (const auto& b : bases) dims.push_back(b.size());
  const Shape shape(dims);
  const double inv = 1.0 / std::sqrt(static_cast<double>(points.rows()));
  const Eigen::MatrixXd Phi = inv * feature_matrix(bases, points);
  const auto obj = QuadraticObjective::least_squares(
      shape, [Phi](const DenseTensor& w) -> Eigen::VectorXd { return Phi * w.as_vector(); }, inv * values);
  Annotate note = [&obj](const LowRank& x, GreedyStep& s) { s.data_error = std::sqrt(obj.value(to_dense(x))); };
  auto runs = run_all(obj, random_starts(format, shape, ranks, opts, tree), opts, ridge, note);
  AlsResult best = best_of(runs);
  return {std::move(best.x), std::move(best.trace), ridge};
}

Eigen::VectorXd predict(const LowRank& coefficients, const std::vector<FunctionBasis>& bases,
                        const Eigen::MatrixXd& points) {
  const DenseTensor a = to_dense(coefficients);
  std::vector<Index> dims;
  for (const auto& b : bases) dims.push_back(b.size());
  if (!(a.shape() == Shape(dims))) throw ShapeError("predict: coefficient shape differs from bases");
  return feature_matrix(bases, points) * a.as_vector();
}

}  // namespace tensoria

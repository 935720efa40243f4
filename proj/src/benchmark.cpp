#include "tensoria/benchmark.hpp"

#include "tensoria/io.hpp"
#include "tensoria/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace tensoria {

namespace {

using json = nlohmann::json;

class Clock {
 public:
  [[nodiscard]] double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Reference {
  DenseTensor u;
  double energy = 0.0;
};

BenchmarkRow make_row(const AffineParametricSystem& sys, const Reference& ref, Index step, const DenseTensor& w,
                      double ms) {
  return {step, residual_error(sys, w), energy(sys, w) - ref.energy, sup_error(sys, ref.u, w), ms};
}

json rows_summary(const std::vector<BenchmarkRow>& rows) {
  if (rows.empty()) return json();
  const BenchmarkRow& r = rows.back();
  return {{"rank_or_iter", r.rank_or_iter}, {"residual", r.residual}, {"energy_gap", r.energy_gap},
          {"sup_error", r.sup_error}};
}

// uniform TT ranks clamped to the unfolding sizes
std::vector<Index> uniform_tt_ranks(const Shape& shape, Index r) {
  std::vector<Index> ranks;
  for (Index i = 1; i < shape.order(); ++i) {
    Index left = 1, right = 1;
    for (Index j = 0; j < i; ++j) left *= shape[j];
    for (Index j = i; j < shape.order(); ++j) right *= shape[j];
    ranks.push_back(std::min({r, left, right}));
  }
  return ranks;
}

Eigen::MatrixXd project_columns(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& m) {
  if (basis.cols() == 0) return Eigen::MatrixXd::Zero(m.rows(), m.cols());
  return basis * (basis.transpose() * m);
}

}  // namespace

const std::vector<std::string>& benchmark_solver_names() {
  static const std::vector<std::string> names{"richardson", "minres", "pgd-galerkin", "pgd-subspace", "pod", "eim"};
  return names;
}

void validate(const BenchmarkConfig& cfg) {
  if (cfg.n_el < 2) throw std::invalid_argument("--nel must be >= 2");
  if (cfg.d < 1) throw std::invalid_argument("--d must be >= 1");
  if (cfg.k < 1) throw std::invalid_argument("--k must be >= 1");
  if (cfg.max_rank < 1) throw std::invalid_argument("--max-rank must be >= 1");
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("--eps must be > 0");
  const auto& known = benchmark_solver_names();
  for (const auto& s : cfg.solvers)
    if (std::find(known.begin(), known.end(), s) == known.end())
      throw std::invalid_argument("unknown solver '" + s + "'");
}

void write_convergence_csv(const std::filesystem::path& path, const std::vector<BenchmarkRow>& rows, bool timing) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "# tensoria-v1\n";
  os << "rank_or_iter,residual,energy_gap,sup_error,wallclock_ms\n";
  for (const auto& r : rows) {
    os << r.rank_or_iter << ',' << fmt17(r.residual) << ',' << fmt17(r.energy_gap) << ',' << fmt17(r.sup_error) << ','
       << (timing ? fmt17(r.wallclock_ms) : std::string("nan")) << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

double sup_error(const AffineParametricSystem& sys, const DenseTensor& u, const DenseTensor& w) {
  const Eigen::MatrixXd diff = snapshot_matrix(sys, u) - snapshot_matrix(sys, w);
  return diff.cols() == 0 ? 0.0 : diff.colwise().norm().maxCoeff();
}

double weighted_error(const AffineParametricSystem& sys, const DenseTensor& u, const DenseTensor& w) {
  const Eigen::MatrixXd diff = snapshot_matrix(sys, u) - snapshot_matrix(sys, w);
  double s = 0.0;
  for (Eigen::Index k = 0; k < diff.cols(); ++k) s += sys.weight_at(k) * diff.col(k).squaredNorm();
  return std::sqrt(s);
}

json run_diffusion_benchmark(const BenchmarkConfig& cfg, const std::filesystem::path& out) {
  validate(cfg);
  std::vector<std::string> selected = cfg.solvers.empty() ? benchmark_solver_names() : cfg.solvers;

  const DiffusionProblem prob = build_diffusion(cfg.n_el, cfg.d, cfg.kappa0, cfg.k);
  const AffineParametricSystem& sys = prob.system;

  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec || !std::filesystem::is_directory(out)) throw IoError("cannot create output directory " + out.string());

  Reference ref;
  ref.u = full_solve(sys);
  ref.energy = energy(sys, ref.u);
  write_tensor_dt1(out / "reference.dt1", ref.u);

  const Eigen::MatrixXd snaps = snapshot_matrix(sys, ref.u);
  const Eigen::VectorXd weights = sys.weights();
  const Index full_rank = std::min<Index>(snaps.rows(), snaps.cols());
  const Index max_rank = std::min(cfg.max_rank, full_rank);

  json system;
  system["nel"] = cfg.n_el;
  system["d"] = cfg.d;
  system["k"] = prob.benchmark.K;
  system["kappa0"] = cfg.kappa0;
  system["xi_max"] = prob.benchmark.xi_max;
  system["state_dim"] = sys.state_dim();
  system["num_points"] = sys.num_points();
  system["num_operators"] = sys.num_operators();
  system["solution_shape"] = sys.solution_shape().dims();
  system["seed"] = cfg.seed;
  json grid = json::array();
  for (const auto& g : sys.grid()) {
    grid.push_back({{"points", std::vector<double>(g.points.data(), g.points.data() + g.points.size())},
                    {"weights", std::vector<double>(g.weights.data(), g.weights.data() + g.weights.size())}});
  }
  system["grid"] = grid;
  write_json_file(out / "system.json", system);

  // rho_r: tail of the weighted correlation spectrum
  const PODResult spectrum = pod(snaps, weights, 0);
  std::vector<double> rho(static_cast<std::size_t>(max_rank) + 1, 0.0);
  for (Index r = 0; r <= max_rank; ++r) {
    double tail = 0.0;
    for (Eigen::Index i = static_cast<Eigen::Index>(r); i < spectrum.eigenvalues.size(); ++i)
      tail += std::max(0.0, spectrum.eigenvalues(i));
    rho[r] = std::sqrt(tail);
  }

  json summary;
  summary["schema"] = "tensoria-v1";
  summary["system"] = "system.json";
  summary["reference"] = {{"file", "reference.dt1"},
                          {"weighted_norm", weighted_error(sys, ref.u, DenseTensor(sys.solution_shape()))},
                          {"energy", ref.energy},
                          {"residual", residual_error(sys, ref.u)}};
  json bound = json::array();
  for (Index r = 0; r <= max_rank; ++r) bound.push_back({{"rank", r}, {"rho", rho[r]}});
  summary["lower_bound"] = bound;
  summary["solvers"] = json::object();

  // per-rank weighted errors for the rank-indexed solvers
  auto by_rank = [&](const std::vector<std::pair<Index, double>>& errs) {
    json arr = json::array();
    for (const auto& [r, e] : errs) {
      json row{{"rank", r}, {"weighted_error", e}};
      if (r <= max_rank) row["rho"] = rho[r];
      arr.push_back(row);
    }
    return arr;
  };

  for (const auto& name : selected) {
    std::vector<BenchmarkRow> rows;
    std::vector<std::pair<Index, double>> errs;
    json entry;
    const Clock clock;
    if (name == "richardson") {
      RichardsonOptions opts;
      opts.eps = cfg.eps;
      opts.mean_preconditioner = cfg.precondition;
      auto observe = [&](const ConvergenceRecord& rec, const DenseTensor& w) {
        rows.push_back({rec.step, rec.residual, rec.energy - ref.energy, sup_error(sys, ref.u, w), rec.wallclock_ms});
      };
      try {
        const LowRankSolution sol = richardson_lr(sys, opts, observe);
        entry["stop_reason"] = sol.trace.stop_reason;
        entry["final_ranks"] = ranks_of(sol.x);
      } catch (const DivergenceError&) {
        write_convergence_csv(out / (name + ".csv"), rows, cfg.timing);
        throw;
      }
      entry["eps"] = cfg.eps;
      entry["preconditioned"] = cfg.precondition;
    } else if (name == "minres") {
      OptimOptions opts;
      opts.seed = cfg.seed;
      opts.restarts = 1;
      rows.push_back(make_row(sys, ref, 0, DenseTensor(sys.solution_shape()), clock.ms()));
      errs.push_back({0, weighted_error(sys, ref.u, DenseTensor(sys.solution_shape()))});
      for (Index r = 1; r <= max_rank; ++r) {
        const LowRankSolution sol = minres_lr(sys, Format::TT, uniform_tt_ranks(sys.solution_shape(), r), opts);
        const DenseTensor w = to_dense(sol.x);
        rows.push_back(make_row(sys, ref, r, w, clock.ms()));
        errs.push_back({r, weighted_error(sys, ref.u, w)});
      }
      entry["format"] = "tt";
      entry["stop_reason"] = "max_rank";
    } else if (name == "pgd-galerkin" || name == "pgd-subspace") {
      auto observe = [&](const ConvergenceRecord& rec, const DenseTensor& w) {
        rows.push_back({rec.step, rec.residual, rec.energy - ref.energy, sup_error(sys, ref.u, w), rec.wallclock_ms});
        errs.push_back({rec.step, weighted_error(sys, ref.u, w)});
      };
      const SolverTrace trace = name == "pgd-galerkin" ? pgd_galerkin(sys, max_rank, {}, observe).trace
                                                       : pgd_subspace(sys, max_rank, {}, observe).solution.trace;
      entry["stop_reason"] = trace.stop_reason;
    } else if (name == "pod" || name == "eim") {
      Eigen::MatrixXd basis;
      if (name == "pod") {
        basis = pod(snaps, weights, max_rank).basis;
      } else {
        const EIMResult e = eim_greedy(snaps, max_rank);
        basis = e.basis;
        std::vector<Index> idx(e.indices.begin(), e.indices.end());
        entry["indices"] = idx;
      }
      for (Index r = 0; r <= static_cast<Index>(basis.cols()); ++r) {
        const DenseTensor w = from_snapshots(sys, project_columns(basis.leftCols(static_cast<Eigen::Index>(r)), snaps));
        rows.push_back(make_row(sys, ref, r, w, clock.ms()));
        errs.push_back({r, weighted_error(sys, ref.u, w)});
      }
      entry["stop_reason"] = static_cast<Index>(basis.cols()) < max_rank ? "exhausted" : "max_rank";
    }
    write_convergence_csv(out / (name + ".csv"), rows, cfg.timing);
    entry["csv"] = name + ".csv";
    entry["final"] = rows_summary(rows);
    if (!errs.empty()) entry["by_rank"] = by_rank(errs);
    summary["solvers"][name] = entry;
  }
  write_json_file(out / "summary.json", summary);
  return summary;
}

}  // namespace tensoria

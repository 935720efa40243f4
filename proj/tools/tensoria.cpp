// tensoria command-line frontend: decompose, fit, benchmark-diffusion, info.
//
// Exit codes: 0 success, 2 I/O, 3 domain/validation, 4 numerical failure.

#include "tensoria/basis.hpp"
#include "tensoria/benchmark.hpp"
#include "tensoria/decompose.hpp"
#include "tensoria/errors.hpp"
#include "tensoria/io.hpp"
#include "tensoria/optimize.hpp"
#include "tensoria/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <utility>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tensoria;

namespace {

constexpr int kOk = 0;
constexpr int kIo = 2;
constexpr int kDomain = 3;
constexpr int kNumerical = 4;

struct RunConfig {
  std::string command;
  std::string in, out, report, trace;
  std::string points, values, basis;
  std::string format = "tt";
  std::string tree = "balanced";
  std::vector<Index> rank;
  std::optional<double> eps;
  double ridge = 0.0;
  double range_lo = -1.0, range_hi = 1.0;
  BenchmarkConfig bench;
  std::string solvers;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

std::uint64_t default_seed() {
  if (const char* s = std::getenv("TENSORIA_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw std::invalid_argument("TENSORIA_SEED must be a nonnegative integer");
    }
  }
  return 0;
}

void require_readable(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("missing input path");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
}

void require_writable_parent(const std::string& path) {
  if (path.empty()) return;
  const fs::path parent = fs::absolute(fs::path(path)).parent_path();
  if (!fs::is_directory(parent)) throw IoError("output directory does not exist: " + parent.string());
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Numeric rows; blank lines and '#' comments are skipped.
std::vector<std::vector<double>> read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) {
      const std::string c = trim(cell);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (c.empty() || used != c.size())
        throw IoError(path + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path + ":" + std::to_string(lineno) + ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path + ": no data rows");
  return rows;
}

json report_json(const TruncationReport& r, const std::string& format) {
  return {{"format", format},         {"achieved_error", r.achieved_error},
          {"relative_error", r.input_norm > 0.0 ? r.achieved_error / r.input_norm : 0.0},
          {"ranks_used", r.ranks_used}, {"bound_constant", r.bound_constant},
          {"input_norm", r.input_norm}, {"warnings", r.warnings}};
}

int cmd_decompose(const RunConfig& cfg) {
  if (cfg.rank.empty() == !cfg.eps.has_value()) throw std::invalid_argument("give exactly one of --rank and --eps");
  require_readable(cfg.in);
  require_writable_parent(cfg.out);
  require_writable_parent(cfg.report);
  const Format format = parse_format(cfg.format);
  if (cfg.eps && !(*cfg.eps >= 0.0)) throw std::invalid_argument("--eps must be >= 0");

  const DenseTensor t = read_tensor(cfg.in);
  const Index d = t.shape().order();
  std::optional<DimensionTree> tree;
  if (format == Format::Tree) tree = DimensionTree::by_name(cfg.tree, d);

  auto run = [&]() -> std::pair<LowRank, TruncationReport> {
    if (cfg.eps) {
      auto dec = truncate(t, *cfg.eps, format, tree);
      return {std::move(dec.tensor), std::move(dec.report)};
    }
    switch (format) {
      case Format::Tucker: {
        auto dec = hosvd(t, cfg.rank);
        return {std::move(dec.tensor), std::move(dec.report)};
      }
      case Format::TT: {
        auto dec = tt_svd(t, cfg.rank);
        return {std::move(dec.tensor), std::move(dec.report)};
      }
      case Format::Tree: {
        auto dec = tree_hosvd(t, *tree, cfg.rank);
        return {std::move(dec.tensor), std::move(dec.report)};
      }
      case Format::CP:
        break;
    }
    if (cfg.rank.size() != 1) throw RankError("cp takes a single rank");
    OptimOptions opts;
    opts.seed = cfg.seed;
    auto res = als_best_approx(t, Format::CP, cfg.rank, opts);
    TruncationReport rep;
    DenseTensor diff = t;
    diff -= to_dense(res.x);
    rep.achieved_error = norm(diff);
    rep.input_norm = norm(t);
    rep.ranks_used = ranks_of(res.x);
    return {std::move(res.x), rep};
  };
  const auto [x, rep] = run();
  json rj = report_json(rep, format_name(format));
  if (format == Format::CP) rj["bound_constant"] = nullptr;
  if (!cfg.out.empty()) write_lowrank(cfg.out, x);
  if (!cfg.report.empty()) write_json_file(cfg.report, rj);
  if (cfg.report.empty()) std::cout << rj.dump(2) << '\n';
  return kOk;
}

std::vector<FunctionBasis> parse_basis(const std::string& spec, double lo, double hi) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("--basis must look like legendre:5,5,5");
  const std::string kind = spec.substr(0, colon);
  std::vector<FunctionBasis> bases;
  for (const auto& s : split(spec.substr(colon + 1), ',')) {
    std::size_t used = 0;
    long n = 0;
    try {
      n = std::stol(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty() || n < 1) throw std::invalid_argument("bad basis size '" + s + "'");
    bases.push_back(FunctionBasis::parse(kind, static_cast<std::size_t>(n), lo, hi));
  }
  return bases;
}

int cmd_fit(const RunConfig& cfg) {
  require_readable(cfg.points);
  require_readable(cfg.values);
  require_writable_parent(cfg.out);
  require_writable_parent(cfg.trace);
  const Format format = parse_format(cfg.format);
  const auto bases = parse_basis(cfg.basis, cfg.range_lo, cfg.range_hi);
  if (!(cfg.ridge >= 0.0)) throw std::invalid_argument("--ridge must be >= 0");

  const auto prow = read_csv(cfg.points);
  const auto vrow = read_csv(cfg.values);
  if (vrow.front().size() != 1) throw IoError(cfg.values + ": expected one value per row");
  if (prow.size() != vrow.size()) throw IoError("points and values have different row counts");
  if (prow.front().size() != bases.size()) throw std::invalid_argument("point dimension differs from basis count");

  Eigen::MatrixXd P(static_cast<Eigen::Index>(prow.size()), static_cast<Eigen::Index>(bases.size()));
  Eigen::VectorXd g(static_cast<Eigen::Index>(prow.size()));
  for (std::size_t i = 0; i < prow.size(); ++i) {
    for (std::size_t j = 0; j < bases.size(); ++j) P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = prow[i][j];
    g(static_cast<Eigen::Index>(i)) = vrow[i][0];
  }

  OptimOptions opts;
  opts.seed = cfg.seed;
  std::optional<DimensionTree> tree;
  if (format == Format::Tree) tree = DimensionTree::by_name(cfg.tree, static_cast<Index>(bases.size()));
  const FitResult fit = least_squares_fit(P, g, bases, format, cfg.rank, cfg.ridge, opts, tree);
  const double rmse = fit.trace.steps.empty() ? 0.0 : fit.trace.steps.back().data_error;

  json j = lowrank_to_json(fit.coefficients);
  j["fit"] = {{"basis", cfg.basis}, {"range", {cfg.range_lo, cfg.range_hi}}, {"ridge", cfg.ridge},
              {"rmse", rmse}, {"samples", prow.size()}, {"stop_reason", fit.trace.stop_reason}};
  if (!cfg.out.empty()) write_json_file(cfg.out, j);

  std::string trace_path = cfg.trace;
  if (trace_path.empty() && !cfg.out.empty()) trace_path = fs::path(cfg.out).replace_extension(".trace.csv").string();
  if (!trace_path.empty()) {
    std::ofstream os(trace_path, std::ios::binary);
    if (!os) throw IoError("cannot write " + trace_path);
    os << "# tensoria-v1\n# ridge=" << fmt17(cfg.ridge) << "\nstep,objective,data_error\n";
    for (const auto& s : fit.trace.steps) os << s.step << ',' << fmt17(s.objective) << ',' << fmt17(s.data_error) << '\n';
    if (!os) throw IoError("write failed: " + trace_path);
  }
  std::cout << json{{"rmse", rmse}, {"ridge", cfg.ridge}, {"ranks", ranks_of(fit.coefficients)}}.dump() << '\n';
  return kOk;
}

int cmd_benchmark(RunConfig cfg) {
  if (cfg.out.empty()) throw std::invalid_argument("--out is required");
  cfg.bench.seed = cfg.seed;
  cfg.bench.solvers.clear();
  for (const auto& s : split(cfg.solvers, ','))
    if (!trim(s).empty()) cfg.bench.solvers.push_back(trim(s));
  validate(cfg.bench);
  const json summary = run_diffusion_benchmark(cfg.bench, cfg.out);
  std::cout << "wrote " << summary["solvers"].size() << " solver tables to " << cfg.out << '\n';
  return kOk;
}

int cmd_info(const RunConfig& cfg) {
  require_readable(cfg.in);
  std::ifstream f(cfg.in, std::ios::binary);
  const char first = static_cast<char>(f.peek());
  json out;
  bool lowrank = false;
  if (first == '{' || first == ' ' || first == '\n') {
    const json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) throw IoError(cfg.in + ": invalid JSON");
    lowrank = j.contains("format");
  }
  if (lowrank) {
    const LowRank x = read_lowrank(cfg.in);
    Shape shape = std::visit([](const auto& t) { return t.shape(); }, x);
    out = {{"kind", "lowrank"},          {"format", format_name(static_cast<Format>(x.index()))}, {"shape", shape.dims()},
           {"ranks", ranks_of(x)},       {"parameters", param_count(x)},        {"norm", format_norm(x)}};
  } else {
    const DenseTensor t = read_tensor(cfg.in);
    out = {{"kind", "dense"}, {"order", t.shape().order()}, {"shape", t.shape().dims()},
           {"size", t.shape().size()}, {"norm", norm(t)}};
    if (t.shape().size() > 0) {
      const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
      out["min"] = *lo;
      out["max"] = *hi;
    }
  }
  std::cout << out.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tensoria: low-rank tensor decompositions and parametric solvers"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::optional<std::uint64_t> seed;

  try {
    cfg.seed = default_seed();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomain;
  }
  app.add_option("--threads", cfg.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "random seed (default TENSORIA_SEED or 0)");

  auto* dec = app.add_subcommand("decompose", "compress a dense tensor");
  dec->add_option("--in", cfg.in, "input tensor (.dt1 or JSON)")->required();
  dec->add_option("--format", cfg.format, "cp | tucker | tt | tree")->required();
  auto* rank_opt = dec->add_option("--rank", cfg.rank, "rank tuple, e.g. 3,3")->delimiter(',');
  auto* eps_opt = dec->add_option("--eps", cfg.eps, "relative error tolerance");
  rank_opt->excludes(eps_opt);
  dec->add_option("--tree", cfg.tree, "balanced | linear | star");
  dec->add_option("--out", cfg.out, "decomposed tensor JSON");
  dec->add_option("--report", cfg.report, "truncation report JSON");

  auto* fit = app.add_subcommand("fit", "least-squares fit of a low-rank expansion");
  fit->add_option("--points", cfg.points, "CSV of sample points, one per row")->required();
  fit->add_option("--values", cfg.values, "CSV of sample values, one per row")->required();
  fit->add_option("--basis", cfg.basis, "kind:sizes, e.g. legendre:5,5,5")->required();
  fit->add_option("--range", cfg.range_lo, "lower end of the input range (default -1)");
  fit->add_option("--range-hi", cfg.range_hi, "upper end of the input range (default 1)");
  fit->add_option("--format", cfg.format, "cp | tucker | tt | tree")->required();
  fit->add_option("--rank", cfg.rank, "rank tuple")->delimiter(',')->required();
  fit->add_option("--ridge", cfg.ridge, "ridge penalty");
  fit->add_option("--tree", cfg.tree, "balanced | linear | star");
  fit->add_option("--out", cfg.out, "fitted tensor JSON");
  fit->add_option("--trace", cfg.trace, "trace CSV (default: <out>.trace.csv)");

  auto* bench = app.add_subcommand("benchmark-diffusion", "parametric diffusion benchmark");
  bench->add_option("--nel", cfg.bench.n_el, "finite elements");
  bench->add_option("--d", cfg.bench.d, "number of random parameters");
  bench->add_option("--k", cfg.bench.k, "collocation points per parameter");
  bench->add_option("--kappa0", cfg.bench.kappa0, "mean diffusivity");
  bench->add_option("--solvers", cfg.solvers, "comma list of richardson,minres,pgd-galerkin,pgd-subspace,pod,eim");
  bench->add_option("--max-rank", cfg.bench.max_rank, "largest rank for rank-indexed solvers");
  bench->add_option("--eps", cfg.bench.eps, "Richardson truncation tolerance");
  bench->add_flag("--precondition", cfg.bench.precondition, "mean-operator preconditioner for Richardson");
  bench->add_flag("--timing", cfg.bench.timing, "record wall-clock times (output no longer reproducible)");
  bench->add_option("--out", cfg.out, "output directory")->required();

  auto* info = app.add_subcommand("info", "print tensor metadata");
  info->add_option("--in", cfg.in, "tensor file (.dt1, dense JSON or low-rank JSON)")->required();

  // --seed and --threads are accepted after the subcommand as well
  for (auto* sub : {dec, fit, bench, info}) {
    sub->add_option("--threads", cfg.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", seed, "random seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kDomain;
  }
  if (seed) cfg.seed = *seed;
  set_num_threads(cfg.threads);

  try {
    if (dec->parsed()) return cmd_decompose(cfg);
    if (fit->parsed()) return cmd_fit(cfg);
    if (bench->parsed()) return cmd_benchmark(cfg);
    if (info->parsed()) return cmd_info(cfg);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kDomain;
}

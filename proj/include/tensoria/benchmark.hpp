#pragma once

// Diffusion benchmark driver: builds the collocated system, solves it exactly,
// runs the selected low-rank solvers and writes convergence tables.
//
// Output directory layout:
//   system.json       benchmark parameters, grid, sizes
//   reference.dt1     full solution, shape (K_1..K_d, N)
//   <solver>.csv      rank_or_iter,residual,energy_gap,sup_error,wallclock_ms
//   summary.json      per-rank weighted errors next to rho_r

#include "tensoria/parametric.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tensoria {

struct BenchmarkConfig {
  Index n_el = 32;
  Index d = 3;
  Index k = 5;
  double kappa0 = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::string> solvers;  // empty: all
  Index max_rank = 8;
  double eps = 1e-6;            // richardson truncation tolerance
  bool precondition = false;    // richardson mean-operator preconditioner
  bool timing = false;          // otherwise wallclock_ms is written as nan
};

[[nodiscard]] const std::vector<std::string>& benchmark_solver_names();

// Throws std::invalid_argument on unknown solvers or bad sizes.
void validate(const BenchmarkConfig& cfg);

struct BenchmarkRow {
  Index rank_or_iter = 0;
  double residual = 0.0;
  double energy_gap = 0.0;
  double sup_error = 0.0;
  double wallclock_ms = 0.0;
};

void write_convergence_csv(const std::filesystem::path& path, const std::vector<BenchmarkRow>& rows, bool timing);

// max over grid points of the Euclidean state error
[[nodiscard]] double sup_error(const AffineParametricSystem& sys, const DenseTensor& u, const DenseTensor& w);
// sqrt(sum_k w_k |u_k - w_k|^2)
[[nodiscard]] double weighted_error(const AffineParametricSystem& sys, const DenseTensor& u, const DenseTensor& w);

// Returns the summary that was written to out/summary.json. A diverging
// Richardson run leaves its partial CSV behind and rethrows.
nlohmann::json run_diffusion_benchmark(const BenchmarkConfig& cfg, const std::filesystem::path& out);

}  // namespace tensoria

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ipgn/ipm.hpp"
#include "ipgn/problem.hpp"

namespace ipgn::experiments {

inline constexpr const char* kSchemaVersion = "ipgn/1";

/// Effective configuration of one CLI invocation.
struct RunConfig {
  std::string command = "solve";
  int mesh = 44;
  std::vector<int> meshes{32, 64, 128};
  ProblemConfig problem;
  IpmConfig ipm;
  std::string out = "ipgn_out";
  std::vector<double> gammas;        // Morozov sweep; empty selects the default grid
  std::vector<double> noise_levels{0.01, 0.02, 0.05, 0.10};
  std::vector<double> table_gammas{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<double> mus{1e-1, 1e-3, 1e-5};
  double epsilon = 1e-4;
  bool dump_blocks = false;
  bool inject_negative_w = false;

  void validate() const;
};

/// Flat JSON keys: mesh, meshes, gamma (sets gamma1 and gamma2), gamma1, gamma2, noise, corr_len,
/// rho_lower, seed, solver, out, mu0, tol, max_steps, krylov_tol, krylov_max_it, inner_tol,
/// gammas, noise_levels, table_gammas, mus, epsilon, dump_blocks.
void apply_json(RunConfig& cfg, const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string to_json(const RunConfig& cfg);

/// Default Morozov grid: 3e-4 * 10^(k/4), k = -2..6.
std::vector<double> default_morozov_grid();

struct SolveSummary {
  IpmResult result;
  double misfit_left = 0.0;  // ||u* - u_dzeta||_{L2(left)}
  double noise_left = 0.0;   // ||zeta||_{L2(left)}
  double rho_rel_error = 0.0;
  std::string error;         // non-empty when the IPM failed
  bool ok() const { return error.empty() && result.converged; }
};

/// Runs one optimization. When out_dir is non-empty writes fields.vtk, records.csv and manifest.json.
SolveSummary run_solve(const RunConfig& cfg, int mesh, const std::string& out_dir = "");

struct ScalingRow {
  int n = 0;
  int dim_rho = 0;
  int solves_gmres = 0;
  double mean_gmres = 0.0;
  int solves_cg = 0;
  double mean_cg = 0.0;
  std::string status = "ok";
};

std::vector<ScalingRow> scaling_study(const RunConfig& cfg);
void write_scaling_csv(const std::string& path, const std::vector<ScalingRow>& rows);

struct MuTraceRow {
  int step = 0;
  double mu = 0.0;
  int iters_blockgs = 0;
  int iters_central = 0;
  int iters_constraint = 0;
  int iters_cg = 0;
};

/// Block Gauss-Seidel GMRES drives the iterates; the other solvers are applied to the same systems.
std::vector<MuTraceRow> mu_trace(const RunConfig& cfg);
void write_mu_trace_csv(const std::string& path, const std::vector<MuTraceRow>& rows);

struct MorozovRow {
  double gamma = 0.0;
  double misfit_left = 0.0;
  double noise_left = 0.0;
  int steps = 0;
  double mean_krylov = 0.0;
  bool converged = false;
};

std::vector<MorozovRow> morozov_sweep(const RunConfig& cfg, int mesh, const std::vector<double>& gammas);
/// Adjacent gammas where misfit - noise changes sign from negative to non-negative.
std::optional<std::pair<double, double>> morozov_bracket(const std::vector<MorozovRow>& rows);
/// Log-linear interpolation of the crossing inside the bracket.
std::optional<double> morozov_gamma(const std::vector<MorozovRow>& rows);
void write_morozov_csv(const std::string& path, const std::vector<MorozovRow>& rows);

struct NoiseRow {
  double noise = 0.0;
  double gamma = 0.0;  // Morozov gamma (NaN if no crossing)
  double mean_gmres = 0.0;
  int steps = 0;
};

struct RegularizationRow {
  double gamma = 0.0;
  double mean_gmres = 0.0;
  int steps = 0;
  bool converged = false;
};

std::vector<NoiseRow> noise_table(const RunConfig& cfg);
std::vector<RegularizationRow> regularization_table(const RunConfig& cfg);
void write_noise_csv(const std::string& path, const std::vector<NoiseRow>& rows);
void write_regularization_csv(const std::string& path, const std::vector<RegularizationRow>& rows);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// All dense spectral verifications on 4, 6 and 8 cells per side.
std::vector<CheckResult> spectral_verify(const RunConfig& cfg);

/// Writes manifest.json: schema, command, effective config, artifacts and a free-form summary (JSON text).
void write_manifest(const std::string& dir, const RunConfig& cfg, const std::vector<std::string>& artifacts,
                    const std::string& summary_json, const std::string& status);

}  // namespace ipgn::experiments

#include "ipgn/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "ipgn/errors.hpp"
#include "ipgn/kkt.hpp"
#include "ipgn/spectral_lab.hpp"

namespace ipgn::experiments {

using nlohmann::json;
namespace fs = std::filesystem;

void RunConfig::validate() const {
  problem.validate();
  ipm.validate();
  if (mesh < 2 || mesh % 2 != 0) throw ConfigError("mesh must be an even number of cells >= 2");
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    if (meshes[i] < 2 || meshes[i] % 2 != 0) throw ConfigError("meshes must be even numbers of cells >= 2");
    if (i > 0 && meshes[i] <= meshes[i - 1]) throw ConfigError("meshes must be ascending");
  }
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (!(gammas[i] > 0.0)) throw ConfigError("gammas must be positive");
    if (i > 0 && gammas[i] <= gammas[i - 1]) throw ConfigError("gammas must be ascending");
  }
  for (double g : table_gammas)
    if (!(g > 0.0)) throw ConfigError("table_gammas must be positive");
  for (double s : noise_levels)
    if (!(s >= 0.0)) throw ConfigError("noise_levels must be nonnegative");
  for (double m : mus)
    if (!(m > 0.0)) throw ConfigError("mus must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (out.empty()) throw ConfigError("out must be a directory path");
}

void apply_json(RunConfig& cfg, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "mesh") cfg.mesh = v.get<int>();
      else if (k == "meshes") cfg.meshes = v.get<std::vector<int>>();
      else if (k == "gamma") cfg.problem.gamma1 = cfg.problem.gamma2 = v.get<double>();
      else if (k == "gamma1") cfg.problem.gamma1 = v.get<double>();
      else if (k == "gamma2") cfg.problem.gamma2 = v.get<double>();
      else if (k == "noise") cfg.problem.noise_level = v.get<double>();
      else if (k == "corr_len") cfg.problem.corr_len = v.get<double>();
      else if (k == "rho_lower") cfg.problem.rho_lower = v.get<double>();
      else if (k == "seed") cfg.problem.seed = v.get<std::uint64_t>();
      else if (k == "solver") cfg.ipm.solver = parse_solver(v.get<std::string>());
      else if (k == "out") cfg.out = v.get<std::string>();
      else if (k == "mu0") cfg.ipm.mu0 = v.get<double>();
      else if (k == "tol") cfg.ipm.tol = v.get<double>();
      else if (k == "max_steps") cfg.ipm.max_steps = v.get<int>();
      else if (k == "krylov_tol") cfg.ipm.krylov_tol = v.get<double>();
      else if (k == "krylov_max_it") cfg.ipm.krylov_max_it = v.get<int>();
      else if (k == "inner_tol") cfg.ipm.inner.rel_tol = v.get<double>();
      else if (k == "gammas") cfg.gammas = v.get<std::vector<double>>();
      else if (k == "noise_levels") cfg.noise_levels = v.get<std::vector<double>>();
      else if (k == "table_gammas") cfg.table_gammas = v.get<std::vector<double>>();
      else if (k == "mus") cfg.mus = v.get<std::vector<double>>();
      else if (k == "epsilon") cfg.epsilon = v.get<double>();
      else if (k == "dump_blocks") cfg.dump_blocks = v.get<bool>();
      else throw ConfigError("config: unknown key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  apply_json(cfg, ss.str());
  return cfg;
}

namespace {

json config_json(const RunConfig& c) {
  return json{{"command", c.command},
              {"mesh", c.mesh},
              {"meshes", c.meshes},
              {"gamma1", c.problem.gamma1},
              {"gamma2", c.problem.gamma2},
              {"noise", c.problem.noise_level},
              {"corr_len", c.problem.corr_len},
              {"gamma_zeta", c.problem.effective_gamma_zeta()},
              {"delta_zeta", c.problem.delta_zeta},
              {"rho_lower", c.problem.rho_lower},
              {"seed", c.problem.seed},
              {"solver", to_string(c.ipm.solver)},
              {"out", c.out},
              {"mu0", c.ipm.mu0},
              {"kappa_mu", c.ipm.kappa_mu},
              {"theta_mu", c.ipm.theta_mu},
              {"kappa_eps", c.ipm.kappa_eps},
              {"tol", c.ipm.tol},
              {"tau_min", c.ipm.tau_min},
              {"max_steps", c.ipm.max_steps},
              {"krylov_tol", c.ipm.krylov_tol},
              {"krylov_max_it", c.ipm.krylov_max_it},
              {"inner_tol", c.ipm.inner.rel_tol},
              {"gammas", c.gammas.empty() ? default_morozov_grid() : c.gammas},
              {"noise_levels", c.noise_levels},
              {"table_gammas", c.table_gammas},
              {"mus", c.mus},
              {"epsilon", c.epsilon},
              {"dump_blocks", c.dump_blocks}};
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << std::setprecision(17);
  return out;
}

ModelProblem make_problem(const RunConfig& cfg, int mesh) { return ModelProblem(mesh, cfg.problem); }

}  // namespace

std::string to_json(const RunConfig& cfg) { return config_json(cfg).dump(2); }

std::vector<double> default_morozov_grid() {
  std::vector<double> g;
  for (int k = -2; k <= 6; ++k) g.push_back(3e-4 * std::pow(10.0, k / 4.0));
  return g;
}

void write_manifest(const std::string& dir, const RunConfig& cfg, const std::vector<std::string>& artifacts,
                    const std::string& summary_json, const std::string& status) {
  fs::create_directories(dir);
  json m{{"schema", kSchemaVersion},
         {"command", cfg.command},
         {"status", status},
         {"config", config_json(cfg)},
         {"artifacts", artifacts},
         {"summary", summary_json.empty() ? json::object() : json::parse(summary_json)}};
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in " + dir);
  out << m.dump(2) << '\n';
}

SolveSummary run_solve(const RunConfig& cfg, int mesh, const std::string& out_dir) {
  const ModelProblem problem = make_problem(cfg, mesh);
  SolveSummary s;
  KktObserver observer;
  if (!out_dir.empty() && cfg.dump_blocks) {
    observer = [&](int step, const IpmState&, const KktSystem& sys) {
      spectral::write_kkt_blocks((fs::path(out_dir) / ("blocks_step" + std::to_string(step))).string(), sys, problem.mass());
    };
  }
  try {
    s.result = outer_loop(problem, cfg.ipm, observer);
  } catch (const std::exception& e) {
    s.error = e.what();
  }
  const auto& mesh_ = problem.mesh();
  const Vector rho_true = interpolate(mesh_, exact::rho_true, Space::Parameter).values;
  s.noise_left = problem.left_norm(problem.data().zeta);
  if (!s.result.state.u.empty()) {
    s.misfit_left = problem.left_norm(s.result.state.u - problem.data().u_dzeta);
    s.rho_rel_error = problem.mass_norm(s.result.state.rho - rho_true) / problem.mass_norm(rho_true);
  }
  if (out_dir.empty()) return s;

  fs::create_directories(out_dir);
  std::vector<std::string> artifacts;
  if (!s.result.state.u.empty()) {
    const auto& st = s.result.state;
    write_vtk((fs::path(out_dir) / "fields.vtk").string(), mesh_,
              {{"u_dzeta", problem.data().u_dzeta},
               {"u_star", st.u},
               {"lambda_star", st.lambda},
               {"rho_true", rho_true},
               {"rho_star", st.rho},
               {"z_star", st.z}});
    artifacts.push_back("fields.vtk");
  }
  write_records_csv((fs::path(out_dir) / "records.csv").string(), s.result.records);
  artifacts.push_back("records.csv");
  json summary{{"converged", s.result.converged},
               {"steps", s.result.steps()},
               {"mean_krylov", s.result.mean_krylov()},
               {"e_total", s.result.final_errors.e_total},
               {"tol", cfg.ipm.tol},
               {"misfit_left", s.misfit_left},
               {"noise_left", s.noise_left},
               {"rho_rel_error", s.rho_rel_error},
               {"dim_rho", problem.n_nodes()}};
  if (!s.error.empty()) summary["error"] = s.error;
  write_manifest(out_dir, cfg, artifacts, summary.dump(), s.ok() ? "ok" : "failed");
  return s;
}

std::vector<ScalingRow> scaling_study(const RunConfig& cfg) {
  std::vector<ScalingRow> rows;
  for (int n : cfg.meshes) {
    ScalingRow r;
    r.n = n;
    r.dim_rho = (n + 1) * (n + 1);
    RunConfig c = cfg;
    c.ipm.solver = SolverKind::GmresBlockGS;
    const SolveSummary g = run_solve(c, n);
    c.ipm.solver = SolverKind::CgReduced;
    const SolveSummary cg = run_solve(c, n);
    r.solves_gmres = g.result.steps();
    r.mean_gmres = g.result.mean_krylov();
    r.solves_cg = cg.result.steps();
    r.mean_cg = cg.result.mean_krylov();
    if (!g.ok()) r.status = "gmres failed: " + g.error;
    else if (!cg.ok()) r.status = "cg failed: " + cg.error;
    rows.push_back(r);
  }
  return rows;
}

void write_scaling_csv(const std::string& path, const std::vector<ScalingRow>& rows) {
  auto out = open_csv(path);
  out << "n,dim_rho,solves_gmres,mean_gmres_iters,solves_cg,mean_cg_iters,status\n";
  for (const auto& r : rows)
    out << r.n << ',' << r.dim_rho << ',' << r.solves_gmres << ',' << r.mean_gmres << ',' << r.solves_cg << ','
        << r.mean_cg << ',' << '"' << r.status << '"' << '\n';
}

std::vector<MuTraceRow> mu_trace(const RunConfig& cfg) {
  const ModelProblem problem = make_problem(cfg, cfg.mesh);
  IpmConfig ic = cfg.ipm;
  ic.solver = SolverKind::GmresBlockGS;
  std::vector<MuTraceRow> rows;
  auto observer = [&](int step, const IpmState& s, const KktSystem& sys) {
    KktSolver solver(sys, ic.inner);
    MuTraceRow r;
    r.step = step;
    r.mu = s.mu;
    r.iters_central = solver.solve_fullspace_gmres(Preconditioner::Central, ic.krylov_tol, ic.krylov_max_it).second.iterations;
    r.iters_constraint =
        solver.solve_fullspace_gmres(Preconditioner::Constraint, ic.krylov_tol, ic.krylov_max_it).second.iterations;
    r.iters_cg = solver.solve_reduced_cg(ic.krylov_tol, ic.krylov_max_it).second.iterations;
    rows.push_back(r);
  };
  const IpmResult res = outer_loop(problem, ic, observer);
  for (std::size_t i = 0; i < rows.size() && i < res.records.size(); ++i) rows[i].iters_blockgs = res.records[i].krylov_iters;
  return rows;
}

void write_mu_trace_csv(const std::string& path, const std::vector<MuTraceRow>& rows) {
  auto out = open_csv(path);
  out << "step,mu,iters_blockgs,iters_central,iters_constraint,iters_cg\n";
  for (const auto& r : rows)
    out << r.step << ',' << r.mu << ',' << r.iters_blockgs << ',' << r.iters_central << ',' << r.iters_constraint << ','
        << r.iters_cg << '\n';
}

std::vector<MorozovRow> morozov_sweep(const RunConfig& cfg, int mesh, const std::vector<double>& gammas) {
  std::vector<MorozovRow> rows;
  for (double g : gammas) {
    RunConfig c = cfg;
    c.problem.gamma1 = c.problem.gamma2 = g;
    const SolveSummary s = run_solve(c, mesh);
    rows.push_back({g, s.misfit_left, s.noise_left, s.result.steps(), s.result.mean_krylov(), s.ok()});
  }
  return rows;
}

std::optional<std::pair<double, double>> morozov_bracket(const std::vector<MorozovRow>& rows) {
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (!rows[i].converged || !rows[i + 1].converged) continue;
    if (rows[i].misfit_left < rows[i].noise_left && rows[i + 1].misfit_left >= rows[i + 1].noise_left)
      return std::make_pair(rows[i].gamma, rows[i + 1].gamma);
  }
  return std::nullopt;
}

std::optional<double> morozov_gamma(const std::vector<MorozovRow>& rows) {
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const auto& a = rows[i];
    const auto& b = rows[i + 1];
    if (!a.converged || !b.converged) continue;
    if (a.misfit_left < a.noise_left && b.misfit_left >= b.noise_left) {
      const double fa = std::log(a.misfit_left / a.noise_left), fb = std::log(b.misfit_left / b.noise_left);
      const double t = fa == fb ? 0.0 : -fa / (fb - fa);
      return std::exp(std::log(a.gamma) + t * (std::log(b.gamma) - std::log(a.gamma)));
    }
  }
  return std::nullopt;
}

void write_morozov_csv(const std::string& path, const std::vector<MorozovRow>& rows) {
  auto out = open_csv(path);
  out << "gamma,misfit_left,noise_left,steps,mean_gmres_iters,converged\n";
  for (const auto& r : rows)
    out << r.gamma << ',' << r.misfit_left << ',' << r.noise_left << ',' << r.steps << ',' << r.mean_krylov << ','
        << (r.converged ? 1 : 0) << '\n';
}

std::vector<NoiseRow> noise_table(const RunConfig& cfg) {
  std::vector<double> grid;
  for (int k = -10; k <= -2; ++k) grid.push_back(std::pow(10.0, k / 2.0));
  std::vector<NoiseRow> rows;
  for (double sigma : cfg.noise_levels) {
    RunConfig c = cfg;
    c.problem.noise_level = sigma;
    NoiseRow r;
    r.noise = sigma;
    const auto g = morozov_gamma(morozov_sweep(c, cfg.mesh, grid));
    r.gamma = g.value_or(std::numeric_limits<double>::quiet_NaN());
    if (g) {
      c.problem.gamma1 = c.problem.gamma2 = *g;
      const SolveSummary s = run_solve(c, cfg.mesh);
      r.mean_gmres = s.result.mean_krylov();
      r.steps = s.result.steps();
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<RegularizationRow> regularization_table(const RunConfig& cfg) {
  std::vector<RegularizationRow> rows;
  for (double g : cfg.table_gammas) {
    RunConfig c = cfg;
    c.ipm.solver = SolverKind::GmresBlockGS;
    c.problem.gamma1 = c.problem.gamma2 = g;
    const SolveSummary s = run_solve(c, cfg.mesh);
    rows.push_back({g, s.result.mean_krylov(), s.result.steps(), s.ok()});
  }
  return rows;
}

void write_noise_csv(const std::string& path, const std::vector<NoiseRow>& rows) {
  auto out = open_csv(path);
  out << "noise,morozov_gamma,mean_gmres_iters,steps\n";
  for (const auto& r : rows) out << r.noise << ',' << r.gamma << ',' << r.mean_gmres << ',' << r.steps << '\n';
}

void write_regularization_csv(const std::string& path, const std::vector<RegularizationRow>& rows) {
  auto out = open_csv(path);
  out << "gamma,mean_gmres_iters,steps,converged\n";
  for (const auto& r : rows) out << r.gamma << ',' << r.mean_gmres << ',' << r.steps << ',' << (r.converged ? 1 : 0) << '\n';
}

std::vector<CheckResult> spectral_verify(const RunConfig& cfg) {
  using namespace spectral;
  std::vector<CheckResult> out;
  auto fmt = [](double v) {
    std::ostringstream s;
    s << std::setprecision(3) << v;
    return s.str();
  };
  auto guard = [&](const std::string& name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("exception: ") + e.what()});
    }
  };

  for (int n : {4, 6, 8}) {
    for (double mu : cfg.mus) {
      const std::string name = "prop1 n=" + std::to_string(n) + " mu=" + fmt(mu);
      guard(name, [&] {
        SnapshotOptions o;
        o.mu = mu;
        o.gamma = cfg.problem.gamma1;
        o.epsilon = cfg.epsilon;
        DenseKkt d = assemble_dense_snapshot(n, o);
        if (cfg.inject_negative_w) {
          d.W(0, 0) = -std::abs(d.W(0, 0));
          d = dense_from_blocks(d.M, d.H_uu, d.H_rr, d.W, d.J_u, d.J_rho, d.mu, d.epsilon);
        }
        const auto r = verify_prop1(d, 1e-8);
        std::string detail = r.precondition_ok ? "max_imag=" + fmt(r.max_imag) + " min-1=" + fmt(r.min_eig - 1.0) +
                                                     " match=" + fmt(r.match_err) + " upper=" + fmt(r.upper_excess)
                                               : "precondition failed: " + r.precondition_message;
        out.push_back({name, r.passed(), detail});
      });
    }
  }
  guard("ordering dim=12 trials=200", [&] {
    std::mt19937_64 rng(cfg.problem.seed + 12);
    const auto r = verify_eig_ordering(200, 12, rng);
    out.push_back({"ordering dim=12 trials=200", r.passed(),
                   "violations=" + std::to_string(r.violations) + " max_excess=" + fmt(r.max_excess)});
  });
  guard("diagonalizability n=6", [&] {
    SnapshotOptions o;
    o.epsilon = cfg.epsilon;
    const auto r = verify_diagonalizability(assemble_dense_snapshot(6, o), cfg.epsilon);
    out.push_back({"defect detected n=6", r.defect_detected(),
                   "algebraic=" + std::to_string(r.algebraic_unit) + " geometric=" + std::to_string(r.geometric_unit)});
    out.push_back({"perturbed diagonalization n=6", r.off_diagonal <= 1e-8,
                   "offdiag=" + fmt(r.off_diagonal) + " kappa(Y)=" + fmt(r.kappa_y)});
  });
  guard("no defect with full observation n=6", [&] {
    SnapshotOptions o;
    o.observe_all = true;
    const auto r = verify_diagonalizability(assemble_dense_snapshot(6, o), cfg.epsilon);
    out.push_back({"no defect with full observation n=6", !r.defect_detected(),
                   "algebraic=" + std::to_string(r.algebraic_unit) + " geometric=" + std::to_string(r.geometric_unit)});
  });
  guard("residual bound n=8", [&] {
    SnapshotOptions o;
    o.epsilon = cfg.epsilon;
    const DenseKkt d = assemble_dense_snapshot(8, o);
    std::mt19937_64 rng(cfg.problem.seed + 8);
    std::normal_distribution<double> nd;
    bool ok = true;
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
      Eigen::VectorXd b(d.size());
      for (int i = 0; i < b.size(); ++i) b(i) = nd(rng);
      const auto r = verify_residual_bound(d, b);
      ok = ok && r.holds;
      worst = std::max(worst, r.worst_margin);
    }
    out.push_back({"residual bound n=8", ok, "worst ratio/bound=" + fmt(worst)});
  });
  guard("exact Schur n=4", [&] {
    ProblemConfig pc = cfg.problem;
    ModelProblem p(4, pc);
    const KktSystem sys = build_kkt(p, snapshot_state(p, 1e-2, 0.1));
    const auto r = exact_schur_gmres(sys, 1e-10);
    out.push_back({"exact Schur n=4", r.converged && r.iterations <= 2, "iterations=" + std::to_string(r.iterations)});
  });
  return out;
}

}  // namespace ipgn::experiments

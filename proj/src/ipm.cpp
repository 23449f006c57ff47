#include "ipgn/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace ipgn {

Vector bound_gap(const ModelProblem& problem, const Vector& rho) {
  Vector g(rho.size());
  const double lo = problem.config().rho_lower;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    g[i] = rho[i] - lo;
    if (!(g[i] > 0.0)) {
      throw InteriorViolation("parameter violates the lower bound at node " + std::to_string(i) +
                              " (gap " + std::to_string(g[i]) + ")");
    }
  }
  return g;
}

KktResiduals kkt_residuals(const ModelProblem& problem, const IpmState& s, double mu) {
  const Vector gap = bound_gap(problem, s.rho);
  const Vector& ml = problem.lumped();
  KktResiduals r;
  r.r_u = problem.grad_u(s.u) + problem.jacobian_u(s.u, s.rho).transpose_times(s.lambda);
  r.r_rho = problem.grad_rho(s.rho) + problem.jacobian_rho(s.u).transpose_times(s.lambda);
  for (std::size_t i = 0; i < gap.size(); ++i) r.r_rho[i] -= ml[i] * s.z[i];
  r.r_lambda = problem.constraint(s.u, s.rho);
  r.r_z.resize(gap.size());
  for (std::size_t i = 0; i < gap.size(); ++i) r.r_z[i] = s.z[i] * gap[i] - mu;
  return r;
}

SolverKind parse_solver(const std::string& name) {
  if (name == "gmres-blockgs") return SolverKind::GmresBlockGS;
  if (name == "cg-reduced") return SolverKind::CgReduced;
  if (name == "gmres-central") return SolverKind::GmresCentral;
  if (name == "gmres-constraint") return SolverKind::GmresConstraint;
  throw ConfigError("unknown solver '" + name +
                    "' (expected gmres-blockgs, cg-reduced, gmres-central or gmres-constraint)");
}

std::string to_string(SolverKind s) {
  switch (s) {
    case SolverKind::GmresBlockGS:
      return "gmres-blockgs";
    case SolverKind::CgReduced:
      return "cg-reduced";
    case SolverKind::GmresCentral:
      return "gmres-central";
    case SolverKind::GmresConstraint:
      return "gmres-constraint";
  }
  return "?";
}

void IpmConfig::validate() const {
  if (!(mu0 > 0.0)) throw ConfigError("ipm: mu0 must be positive");
  if (!(kappa_mu > 0.0 && kappa_mu < 1.0)) throw ConfigError("ipm: kappa_mu must lie in (0,1)");
  if (!(theta_mu > 1.0 && theta_mu < 2.0)) throw ConfigError("ipm: theta_mu must lie in (1,2)");
  if (!(tol > 0.0)) throw ConfigError("ipm: tol must be positive");
  if (!(tau_min > 0.0 && tau_min < 1.0)) throw ConfigError("ipm: tau_min must lie in (0,1)");
  if (!(kappa_eps > 0.0)) throw ConfigError("ipm: kappa_eps must be positive");
  if (!(s_max > 0.0)) throw ConfigError("ipm: s_max must be positive");
  if (!(alpha_min > 0.0)) throw ConfigError("ipm: alpha_min must be positive");
  if (!(kappa_sigma > 1.0)) throw ConfigError("ipm: kappa_sigma must exceed 1");
  if (max_steps < 1) throw ConfigError("ipm: max_steps must be positive");
  if (!(rho0_offset > 0.0)) throw ConfigError("ipm: initial offset from the bound must be positive");
  if (!(krylov_tol > 0.0) || krylov_max_it < 1) throw ConfigError("ipm: bad Krylov settings");
}

ErrorMeasures error_measures(const ModelProblem& problem, const IpmState& s, double mu, double s_max) {
  const KktResiduals r = kkt_residuals(problem, s, mu);
  ErrorMeasures e;
  const double su = problem.dual_norm(r.r_u);
  const double sr = problem.dual_norm(r.r_rho);
  e.e_stat = std::sqrt(su * su + sr * sr);
  e.e_feas = problem.dual_norm(r.r_lambda);
  Vector abs_rz(r.r_z.size());
  for (std::size_t i = 0; i < abs_rz.size(); ++i) abs_rz[i] = std::abs(r.r_z[i]);
  const Vector m_abs = problem.mass() * abs_rz;
  e.e_compl = std::accumulate(m_abs.begin(), m_abs.end(), 0.0);
  const double zn = problem.mass_norm(s.z);
  const double ln = problem.mass_norm(s.lambda);
  e.s_c = std::max(s_max, zn) / s_max;
  e.s_d = std::max(0.5 * ln + 0.5 * zn, s_max) / s_max;
  e.e_total = std::max({e.e_stat / e.s_d, e.e_feas, e.e_compl / e.s_c});
  return e;
}

double barrier_objective(const ModelProblem& problem, const Vector& u, const Vector& rho, double mu) {
  const Vector gap = bound_gap(problem, rho);
  double f = problem.objective(u, rho);
  if (mu == 0.0) return f;
  const Vector& ml = problem.lumped();
  double b = 0.0;
  for (std::size_t i = 0; i < gap.size(); ++i) b += ml[i] * std::log(gap[i]);
  return f - mu * b;
}

std::pair<double, double> fraction_to_boundary(const Vector& gap, const Vector& rho_hat, const Vector& z,
                                               const Vector& z_hat, double mu, double tau_min) {
  const double tau = std::max(tau_min, 1.0 - mu);
  double ap = 1.0, ad = 1.0;
  for (std::size_t i = 0; i < gap.size(); ++i) {
    if (rho_hat[i] < 0.0) ap = std::min(ap, tau * gap[i] / -rho_hat[i]);
    if (z_hat[i] < 0.0) ad = std::min(ad, tau * z[i] / -z_hat[i]);
  }
  return {ap, ad};
}

bool Filter::acceptable(double theta, double phi) const {
  if (!(theta < theta_max_)) return false;
  for (const auto& [t, p] : entries_) {
    if (!(theta <= t || phi <= p)) return false;
  }
  return true;
}

void Filter::add(double theta, double phi) {
  for (const auto& [t, p] : entries_)
    if (t <= theta && p <= phi) return;
  std::erase_if(entries_, [&](const auto& e) { return e.first >= theta && e.second >= phi; });
  entries_.emplace_back(theta, phi);
}

void Filter::reset(double theta_max) {
  theta_max_ = theta_max;
  entries_.clear();
}

namespace {

bool switching_condition(double alpha, double gphid, double theta, const IpmConfig& c) {
  return gphid < 0.0 && alpha * std::pow(-gphid, c.s_phi) > c.delta * std::pow(theta, c.s_theta);
}

bool sufficient_decrease(double theta, double phi, double theta_t, double phi_t, const IpmConfig& c) {
  return theta_t <= (1.0 - c.gamma_theta) * theta || phi_t <= phi - c.gamma_phi * theta;
}

bool armijo(double phi, double phi_t, double alpha, double gphid, const IpmConfig& c) {
  return phi_t <= phi + c.eta_phi * alpha * gphid;
}

}  // namespace

bool audit_accepts(const LineSearchAudit& a, const IpmConfig& cfg) {
  if (!a.filter_at_acceptance.acceptable(a.theta_trial, a.phi_trial)) return false;
  if (a.armijo) {
    return a.theta <= a.theta_min && switching_condition(a.alpha, a.directional_derivative, a.theta, cfg) &&
           armijo(a.phi, a.phi_trial, a.alpha, a.directional_derivative, cfg);
  }
  return sufficient_decrease(a.theta, a.phi, a.theta_trial, a.phi_trial, cfg);
}

std::string records_csv_header() {
  return "step,mu,e_stat,e_feas,e_compl,e_total,alpha_p,alpha_d,krylov_iters,inner_cg_total";
}

void write_records_csv(const std::string& path, const std::vector<ExperimentRecord>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << records_csv_header() << "\n" << std::setprecision(10);
  for (const auto& r : rows) {
    f << r.step << "," << r.mu << "," << r.e_stat << "," << r.e_feas << "," << r.e_compl << "," << r.e_total << ","
      << r.alpha_p << "," << r.alpha_d << "," << r.krylov_iters << "," << r.inner_cg_total << "\n";
  }
}

double IpmResult::mean_krylov() const {
  if (records.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : records) s += r.krylov_iters;
  return s / records.size();
}

IpmState initial_state(const ModelProblem& problem, const IpmConfig& cfg) {
  const int n = problem.n_nodes();
  IpmState s;
  s.mu = cfg.mu0;
  s.u.assign(n, 0.0);
  s.rho.assign(n, problem.config().rho_lower + cfg.rho0_offset);
  s.lambda.assign(n, 0.0);
  s.z.assign(n, cfg.mu0 / cfg.rho0_offset);
  return s;
}

std::pair<KktDirection, KrylovReport> compute_direction(const KktSystem& sys, const IpmConfig& cfg,
                                                        SolveCounters* counters) {
  KktSolver solver(sys, cfg.inner);
  std::pair<KktDirection, KrylovReport> out;
  switch (cfg.solver) {
    case SolverKind::GmresBlockGS:
      out = solver.solve_fullspace_gmres(Preconditioner::BlockGS, cfg.krylov_tol, cfg.krylov_max_it);
      break;
    case SolverKind::GmresCentral:
      out = solver.solve_fullspace_gmres(Preconditioner::Central, cfg.krylov_tol, cfg.krylov_max_it);
      break;
    case SolverKind::GmresConstraint:
      out = solver.solve_fullspace_gmres(Preconditioner::Constraint, cfg.krylov_tol, cfg.krylov_max_it);
      break;
    case SolverKind::CgReduced:
      out = solver.solve_reduced_cg(cfg.krylov_tol, cfg.krylov_max_it);
      break;
  }
  out.first.z = backsub_zhat(sys.z, sys.gap, sys.mu, out.first.rho);
  if (counters) *counters = solver.counters();
  return out;
}

IpmResult outer_loop(const ModelProblem& problem, const IpmConfig& cfg, const KktObserver& observer) {
  cfg.validate();
  IpmResult res;
  IpmState& s = res.state;
  s = initial_state(problem, cfg);
  double mu = cfg.mu0;
  const double mu_floor = cfg.tol / 10.0;

  const double theta0 = problem.dual_norm(problem.constraint(s.u, s.rho));
  const double theta_max = 1e4 * std::max(1.0, theta0);
  const double theta_min = 1e-4 * std::max(1.0, theta0);
  Filter filter(theta_max);

  for (int step = 1;; ++step) {
    s.mu = mu;
    res.final_errors = error_measures(problem, s, 0.0, cfg.s_max);
    if (res.final_errors.e_total <= cfg.tol) {
      res.converged = true;
      return res;
    }
    ErrorMeasures em = error_measures(problem, s, mu, cfg.s_max);
    while (em.e_total <= cfg.kappa_eps * mu && mu > mu_floor) {
      res.mu_at_phase_exit.push_back(mu);
      res.e_total_at_phase_exit.push_back(em.e_total);
      mu = std::max(mu_floor, std::min(cfg.kappa_mu * mu, std::pow(mu, cfg.theta_mu)));
      filter.reset(theta_max);
      s.mu = mu;
      em = error_measures(problem, s, mu, cfg.s_max);
    }
    if (step > cfg.max_steps) {
      throw MaxStepsExceeded("interior-point method did not converge in " + std::to_string(cfg.max_steps) +
                             " steps (e_total = " + std::to_string(res.final_errors.e_total) + ")");
    }

    const KktSystem sys = build_kkt(problem, s);
    if (observer) observer(step, s, sys);
    SolveCounters counters;
    auto [d, rep] = compute_direction(sys, cfg, &counters);

    const Vector& gap = sys.gap;
    auto [ap_max, ad_max] = fraction_to_boundary(gap, d.rho, s.z, d.z, mu, cfg.tau_min);

    // filter line search on the barrier problem
    const double theta = problem.dual_norm(problem.constraint(s.u, s.rho));
    const double phi = barrier_objective(problem, s.u, s.rho, mu);
    Vector grad_rho = problem.grad_rho(s.rho);
    for (std::size_t i = 0; i < gap.size(); ++i) grad_rho[i] -= mu * problem.lumped()[i] / gap[i];
    const double gphid = dot(problem.grad_u(s.u), d.u) + dot(grad_rho, d.rho);

    double alpha = ap_max;
    LineSearchAudit audit;
    bool accepted = false;
    int backtracks = 0;
    Vector ut, rt;
    double theta_t = 0.0, phi_t = 0.0;
    while (!accepted) {
      if (alpha < cfg.alpha_min) {
        throw LineSearchFailure("filter line search failed at step " + std::to_string(step) +
                                    " (alpha below minimum; restoration phase not implemented)",
                                theta, phi, gphid, alpha);
      }
      ut = s.u + alpha * d.u;
      rt = s.rho + alpha * d.rho;
      theta_t = problem.dual_norm(problem.constraint(ut, rt));
      phi_t = barrier_objective(problem, ut, rt, mu);
      bool use_armijo = false;
      if (filter.acceptable(theta_t, phi_t)) {
        if (theta <= theta_min && switching_condition(alpha, gphid, theta, cfg)) {
          use_armijo = true;
          accepted = armijo(phi, phi_t, alpha, gphid, cfg);
        } else {
          accepted = sufficient_decrease(theta, phi, theta_t, phi_t, cfg);
        }
      }
      if (accepted) {
        audit = LineSearchAudit{step, theta, phi, theta_t, phi_t, alpha, ap_max, gphid, theta_min, use_armijo, filter,
                                backtracks};
        if (!use_armijo) filter.add((1.0 - cfg.gamma_theta) * theta, phi - cfg.gamma_phi * theta);
      } else {
        alpha *= 0.5;
        ++backtracks;
      }
    }
    res.audit.push_back(std::move(audit));

    s.u = std::move(ut);
    s.rho = std::move(rt);
    axpy(alpha, d.lambda, s.lambda);
    axpy(ad_max, d.z, s.z);
    const Vector new_gap = bound_gap(problem, s.rho);
    for (std::size_t i = 0; i < s.z.size(); ++i) {
      const double lo = mu / (cfg.kappa_sigma * new_gap[i]);
      const double hi = cfg.kappa_sigma * mu / new_gap[i];
      s.z[i] = std::clamp(s.z[i], lo, hi);
    }

    const ErrorMeasures after = error_measures(problem, s, mu, cfg.s_max);
    ExperimentRecord row;
    row.step = step;
    row.mu = mu;
    row.e_stat = after.e_stat;
    row.e_feas = after.e_feas;
    row.e_compl = after.e_compl;
    row.e_total = after.e_total;
    row.alpha_p = alpha;
    row.alpha_d = ad_max;
    row.krylov_iters = rep.iterations;
    row.inner_cg_total = counters.inner_iterations;
    res.records.push_back(row);
  }
}

}  // namespace ipgn

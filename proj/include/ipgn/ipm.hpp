#pragma once

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ipgn/ipm_state.hpp"
#include "ipgn/kkt.hpp"
#include "ipgn/problem.hpp"

namespace ipgn {

enum class SolverKind { GmresBlockGS, CgReduced, GmresCentral, GmresConstraint };

SolverKind parse_solver(const std::string& name);
std::string to_string(SolverKind s);

struct IpmConfig {
  double mu0 = 1.0;
  double kappa_mu = 0.2;
  double theta_mu = 1.5;
  double kappa_eps = 10.0;
  double tol = 1e-6;
  double tau_min = 0.99;
  double s_max = 100.0;
  double gamma_theta = 1e-5;
  double gamma_phi = 1e-5;
  double s_theta = 1.1;
  double s_phi = 2.3;
  double eta_phi = 1e-4;
  double delta = 1.0;
  double alpha_min = 1e-12;
  double kappa_sigma = 1e10;
  int max_steps = 200;
  double rho0_offset = 0.5;

  SolverKind solver = SolverKind::GmresBlockGS;
  double krylov_tol = 1e-8;
  int krylov_max_it = 300;
  InnerSolveOptions inner;

  void validate() const;
};

struct ErrorMeasures {
  double e_stat = 0.0;
  double e_feas = 0.0;
  double e_compl = 0.0;
  double e_total = 0.0;
  double s_c = 1.0;
  double s_d = 1.0;
};

ErrorMeasures error_measures(const ModelProblem& problem, const IpmState& s, double mu, double s_max = 100.0);

/// f(u, rho) - mu * sum_i (M 1)_i log(rho_i - rho_lower)
double barrier_objective(const ModelProblem& problem, const Vector& u, const Vector& rho, double mu);

/// Largest steps in (0, 1] keeping rho - rho_lower and z above a (1 - tau) fraction of their current values.
std::pair<double, double> fraction_to_boundary(const Vector& gap, const Vector& rho_hat, const Vector& z,
                                               const Vector& z_hat, double mu, double tau_min);

/// Pareto set of (theta, phi) pairs with envelope margins applied on insertion.
class Filter {
 public:
  explicit Filter(double theta_max = std::numeric_limits<double>::infinity()) : theta_max_(theta_max) {}
  /// A pair is acceptable when it improves on every entry in theta or in phi.
  bool acceptable(double theta, double phi) const;
  /// Stores (theta, phi) and removes entries it dominates.
  void add(double theta, double phi);
  void reset(double theta_max);
  const std::vector<std::pair<double, double>>& entries() const { return entries_; }
  double theta_max() const { return theta_max_; }

 private:
  double theta_max_;
  std::vector<std::pair<double, double>> entries_;
};

/// Everything needed to recheck a line-search acceptance after the fact.
struct LineSearchAudit {
  int step = 0;
  double theta = 0.0, phi = 0.0;
  double theta_trial = 0.0, phi_trial = 0.0;
  double alpha = 0.0, alpha_max = 0.0;
  double directional_derivative = 0.0;
  double theta_min = 0.0;
  bool armijo = false;
  Filter filter_at_acceptance;
  int backtracks = 0;
};

/// Re-evaluates the acceptance predicate on a logged step.
bool audit_accepts(const LineSearchAudit& a, const IpmConfig& cfg);

struct ExperimentRecord {
  int step = 0;
  double mu = 0.0;
  double e_stat = 0.0, e_feas = 0.0, e_compl = 0.0, e_total = 0.0;
  double alpha_p = 0.0, alpha_d = 0.0;
  int krylov_iters = 0;
  long inner_cg_total = 0;
};

void write_records_csv(const std::string& path, const std::vector<ExperimentRecord>& rows);
std::string records_csv_header();

/// Called once per step with the assembled system, before the direction is computed.
using KktObserver = std::function<void(int step, const IpmState&, const KktSystem&)>;

struct IpmResult {
  IpmState state;
  std::vector<ExperimentRecord> records;
  std::vector<LineSearchAudit> audit;
  std::vector<double> mu_at_phase_exit;
  std::vector<double> e_total_at_phase_exit;
  bool converged = false;
  ErrorMeasures final_errors;

  int steps() const { return static_cast<int>(records.size()); }
  double mean_krylov() const;
};

IpmState initial_state(const ModelProblem& problem, const IpmConfig& cfg);

/// Computes one search direction (u, rho, lambda, z) with the configured solver.
std::pair<KktDirection, KrylovReport> compute_direction(const KktSystem& sys, const IpmConfig& cfg, SolveCounters* counters = nullptr);

/// Monotone barrier interior-point method with filter line search.
/// Throws LineSearchFailure or MaxStepsExceeded.
IpmResult outer_loop(const ModelProblem& problem, const IpmConfig& cfg, const KktObserver& observer = {});

}  // namespace ipgn

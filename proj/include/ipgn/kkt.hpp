#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "ipgn/ipm_state.hpp"
#include "ipgn/krylov.hpp"
#include "ipgn/multigrid.hpp"
#include "ipgn/problem.hpp"

namespace ipgn {

/// The 3x3 symmetric Gauss-Newton saddle system after eliminating the bound multiplier:
///
///   [ H_uu   0     J_u^T   ] [u]     [b_u]
///   [ 0      W     J_rho^T ] [rho] = [b_rho]
///   [ J_u    J_rho 0       ] [lam]   [b_lam]
///
/// with W = H_rr + M_L diag(z / gap).
struct KktSystem {
  int n = 0;  // nodes per field
  int n_cells = 0;
  SparseMatrix H_uu, H_rr, W, J_u, J_rho, J_rho_T;
  Vector ml, gap, z;
  double mu = 0.0;
  Vector b_u, b_rho, b_lambda;

  int size() const { return 3 * n; }
  Vector rhs() const;
  /// Diagonal of W - H_rr.
  Vector logbar_diagonal() const;
};

KktSystem build_kkt(const ModelProblem& problem, const IpmState& state);

struct KktDirection {
  Vector u, rho, lambda, z;
};

/// z-hat = -[z + (z .* rho_hat - mu) / gap]
Vector backsub_zhat(const Vector& z, const Vector& gap, double mu, const Vector& rho_hat);

enum class Preconditioner { BlockGS, Central, Constraint };

struct InnerSolveOptions {
  double rel_tol = 1e-13;
  int max_it = 500;
};

struct SolveCounters {
  long ju = 0;    // J_u solves
  long jut = 0;   // J_u^T solves
  long w = 0;     // W solves
  long inner_iterations = 0;
  long total() const { return ju + jut + w; }
};

/// Block solves, preconditioners and Krylov drivers for one KktSystem.
class KktSolver {
 public:
  explicit KktSolver(const KktSystem& sys, InnerSolveOptions opts = {});

  const KktSystem& system() const { return sys_; }
  const SolveCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }

  Vector solve_Ju(const Vector& b) const;
  Vector solve_JuT(const Vector& b) const;
  Vector solve_W(const Vector& b) const;

  /// Replaces the W^{-1} action inside the preconditioners (e.g. by an exact Schur complement inverse).
  void set_rho_block_inverse(std::function<Vector(const Vector&)> inv) { rho_inverse_ = std::move(inv); }

  /// Vectors are stacked (u, rho, lambda).
  Vector apply_A(const Vector& x) const;
  Vector apply_blockgs(const Vector& b) const;
  Vector apply_central(const Vector& b) const;
  Vector apply_constraint(const Vector& b) const;
  Vector apply_preconditioner(Preconditioner p, const Vector& b) const;

  /// Gauss-Newton data-misfit Hessian (J_u^{-1} J_rho)^T H_uu (J_u^{-1} J_rho) applied matrix-free.
  Vector apply_Hd(const Vector& x) const;
  /// Reduced Hessian Hd + W.
  Vector apply_Hreduced(const Vector& x) const;
  Vector reduced_rhs() const;
  /// Given rho, recovers u and lambda from the first and third block rows.
  void recover_u_lambda(const Vector& rho, Vector& u, Vector& lambda) const;

  std::pair<KktDirection, KrylovReport> solve_fullspace_gmres(Preconditioner p = Preconditioner::BlockGS,
                                                              double rel_tol = 1e-8, int max_it = 300,
                                                              std::optional<int> restart = std::nullopt) const;
  std::pair<KktDirection, KrylovReport> solve_reduced_cg(double rel_tol = 1e-8, int max_it = 300) const;

 private:
  Vector inner(const MultigridSolver& mg, const Vector& b, const char* block) const;
  Vector rho_block_inverse(const Vector& b) const;

  const KktSystem& sys_;
  InnerSolveOptions opts_;
  std::unique_ptr<MultigridSolver> ju_solver_;
  std::unique_ptr<MultigridSolver> w_solver_;
  std::function<Vector(const Vector&)> rho_inverse_;
  mutable SolveCounters counters_;
};

Preconditioner parse_preconditioner(const std::string& name);
std::string to_string(Preconditioner p);

}  // namespace ipgn

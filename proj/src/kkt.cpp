#include "ipgn/kkt.hpp"

#include <algorithm>
#include <span>

namespace ipgn {

Vector KktSystem::rhs() const {
  Vector b;
  b.reserve(3 * n);
  b.insert(b.end(), b_u.begin(), b_u.end());
  b.insert(b.end(), b_rho.begin(), b_rho.end());
  b.insert(b.end(), b_lambda.begin(), b_lambda.end());
  return b;
}

Vector KktSystem::logbar_diagonal() const {
  Vector d(n);
  for (int i = 0; i < n; ++i) d[i] = ml[i] * z[i] / gap[i];
  return d;
}

KktSystem build_kkt(const ModelProblem& problem, const IpmState& state) {
  KktSystem s;
  s.n = problem.n_nodes();
  s.n_cells = problem.mesh().n();
  s.mu = state.mu;
  s.gap = bound_gap(problem, state.rho);
  s.z = state.z;
  s.ml = problem.lumped();
  s.H_uu = problem.H_uu();
  s.H_rr = problem.H_rr();
  s.W = SparseMatrix::add(1.0, s.H_rr, 1.0, SparseMatrix::diagonal(s.logbar_diagonal()));
  s.J_u = problem.jacobian_u(state.u, state.rho);
  s.J_rho = problem.jacobian_rho(state.u);
  s.J_rho_T = s.J_rho.transpose();
  const KktResiduals r = kkt_residuals(problem, state, state.mu);
  s.b_u = -1.0 * r.r_u;
  s.b_lambda = -1.0 * r.r_lambda;
  s.b_rho.resize(s.n);
  for (int i = 0; i < s.n; ++i) s.b_rho[i] = -(r.r_rho[i] + s.ml[i] * r.r_z[i] / s.gap[i]);
  return s;
}

Vector backsub_zhat(const Vector& z, const Vector& gap, double mu, const Vector& rho_hat) {
  check_same_size(z, gap, "backsub_zhat");
  check_same_size(z, rho_hat, "backsub_zhat");
  Vector zh(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) zh[i] = -(z[i] + (z[i] * rho_hat[i] - mu) / gap[i]);
  return zh;
}

KktSolver::KktSolver(const KktSystem& sys, InnerSolveOptions opts) : sys_(sys), opts_(opts) {
  MultigridOptions mo;
  mo.max_it = opts.max_it;
  ju_solver_ = std::make_unique<MultigridSolver>(sys.J_u, sys.n_cells, mo);
  w_solver_ = std::make_unique<MultigridSolver>(sys.W, sys.n_cells, mo);
}

Vector KktSolver::inner(const MultigridSolver& mg, const Vector& b, const char* block) const {
  auto [x, rep] = mg.solve(b, opts_.rel_tol);
  counters_.inner_iterations += rep.iterations;
  if (!rep.converged) throw InnerSolveError(block, rep.iterations, rep.relative_residual);
  return x;
}

Vector KktSolver::solve_Ju(const Vector& b) const {
  counters_.ju++;
  return inner(*ju_solver_, b, "J_u");
}

// J_u is symmetric for this constraint, so the transpose solve reuses the J_u hierarchy.
Vector KktSolver::solve_JuT(const Vector& b) const {
  counters_.jut++;
  return inner(*ju_solver_, b, "J_u^T");
}

Vector KktSolver::solve_W(const Vector& b) const {
  counters_.w++;
  return inner(*w_solver_, b, "W");
}

Vector KktSolver::rho_block_inverse(const Vector& b) const {
  if (rho_inverse_) return rho_inverse_(b);
  return solve_W(b);
}

namespace {

struct Blocks {
  Vector u, rho, lambda;
};

Blocks split(const Vector& x, int n) {
  if (static_cast<int>(x.size()) != 3 * n) throw ShapeError("KKT vector has wrong length");
  return {Vector(x.begin(), x.begin() + n), Vector(x.begin() + n, x.begin() + 2 * n), Vector(x.begin() + 2 * n, x.end())};
}

Vector join(const Vector& u, const Vector& rho, const Vector& lambda) {
  Vector x;
  x.reserve(u.size() * 3);
  x.insert(x.end(), u.begin(), u.end());
  x.insert(x.end(), rho.begin(), rho.end());
  x.insert(x.end(), lambda.begin(), lambda.end());
  return x;
}

}  // namespace

Vector KktSolver::apply_A(const Vector& x) const {
  const auto b = split(x, sys_.n);
  Vector yu = sys_.H_uu * b.u + sys_.J_u.transpose_times(b.lambda);
  Vector yr = sys_.W * b.rho + sys_.J_rho_T * b.lambda;
  Vector yl = sys_.J_u * b.u + sys_.J_rho * b.rho;
  return join(yu, yr, yl);
}

Vector KktSolver::apply_blockgs(const Vector& rhs) const {
  const auto b = split(rhs, sys_.n);
  Vector xu = solve_Ju(b.lambda);
  Vector xl = solve_JuT(b.u - sys_.H_uu * xu);
  Vector xr = rho_block_inverse(b.rho - sys_.J_rho_T * xl);
  return join(xu, xr, xl);
}

Vector KktSolver::apply_central(const Vector& rhs) const {
  const auto b = split(rhs, sys_.n);
  Vector xr = rho_block_inverse(b.rho);
  Vector xu = solve_Ju(b.lambda);
  Vector xl = solve_JuT(b.u - sys_.H_uu * xu);
  return join(xu, xr, xl);
}

Vector KktSolver::apply_constraint(const Vector& rhs) const {
  const Vector xp = apply_blockgs(rhs);
  auto b = split(xp, sys_.n);
  Vector s = solve_Ju(sys_.J_rho * b.rho);
  Vector t = solve_JuT(sys_.H_uu * s);
  return join(b.u - s, b.rho, b.lambda + t);
}

Vector KktSolver::apply_preconditioner(Preconditioner p, const Vector& b) const {
  switch (p) {
    case Preconditioner::BlockGS:
      return apply_blockgs(b);
    case Preconditioner::Central:
      return apply_central(b);
    case Preconditioner::Constraint:
      return apply_constraint(b);
  }
  throw ConfigError("unknown preconditioner");
}

Vector KktSolver::apply_Hd(const Vector& x) const {
  Vector xu = solve_Ju(sys_.J_rho * x);
  scale(-1.0, xu);
  Vector xl = solve_JuT(sys_.H_uu * xu);
  scale(-1.0, xl);
  return sys_.J_rho_T * xl;
}

Vector KktSolver::apply_Hreduced(const Vector& x) const { return apply_Hd(x) + sys_.W * x; }

Vector KktSolver::reduced_rhs() const {
  Vector v = solve_Ju(sys_.b_lambda);
  Vector w = solve_JuT(sys_.b_u - sys_.H_uu * v);
  return sys_.b_rho - sys_.J_rho_T * w;
}

void KktSolver::recover_u_lambda(const Vector& rho, Vector& u, Vector& lambda) const {
  u = solve_Ju(sys_.b_lambda - sys_.J_rho * rho);
  lambda = solve_JuT(sys_.b_u - sys_.H_uu * u);
}

std::pair<KktDirection, KrylovReport> KktSolver::solve_fullspace_gmres(Preconditioner p, double rel_tol, int max_it,
                                                                       std::optional<int> restart) const {
  LinearOperator a(sys_.size(), [this](std::span<const double> x, std::span<double> y) {
    Vector r = apply_A(Vector(x.begin(), x.end()));
    std::copy(r.begin(), r.end(), y.begin());
  });
  LinearOperator pc(sys_.size(), [this, p](std::span<const double> x, std::span<double> y) {
    Vector r = apply_preconditioner(p, Vector(x.begin(), x.end()));
    std::copy(r.begin(), r.end(), y.begin());
  });
  auto [x, rep] = gmres_solve(a, pc, sys_.rhs(), rel_tol, max_it, restart);
  auto b = split(x, sys_.n);
  KktDirection d{std::move(b.u), std::move(b.rho), std::move(b.lambda), {}};
  return {std::move(d), std::move(rep)};
}

std::pair<KktDirection, KrylovReport> KktSolver::solve_reduced_cg(double rel_tol, int max_it) const {
  const Vector bh = reduced_rhs();
  LinearOperator h(sys_.n, [this](std::span<const double> x, std::span<double> y) {
    Vector r = apply_Hreduced(Vector(x.begin(), x.end()));
    std::copy(r.begin(), r.end(), y.begin());
  });
  LinearOperator pc(sys_.n, [this](std::span<const double> x, std::span<double> y) {
    Vector r = rho_block_inverse(Vector(x.begin(), x.end()));
    std::copy(r.begin(), r.end(), y.begin());
  });
  auto [xr, rep] = cg_solve(h, pc, bh, rel_tol, max_it);
  KktDirection d;
  d.rho = std::move(xr);
  recover_u_lambda(d.rho, d.u, d.lambda);
  return {std::move(d), std::move(rep)};
}

Preconditioner parse_preconditioner(const std::string& name) {
  if (name == "blockgs" || name == "block-gs" || name == "gmres-blockgs") return Preconditioner::BlockGS;
  if (name == "central" || name == "gmres-central") return Preconditioner::Central;
  if (name == "constraint" || name == "gmres-constraint") return Preconditioner::Constraint;
  throw ConfigError("unknown preconditioner '" + name + "'");
}

std::string to_string(Preconditioner p) {
  switch (p) {
    case Preconditioner::BlockGS:
      return "blockgs";
    case Preconditioner::Central:
      return "central";
    case Preconditioner::Constraint:
      return "constraint";
  }
  return "?";
}

}  // namespace ipgn

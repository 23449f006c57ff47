#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ipgn/mesh_fem.hpp"
#include "ipgn/sparse_matrix.hpp"
#include "ipgn/vector_ops.hpp"

namespace ipgn {

struct ProblemConfig {
  double gamma1 = 1e-3;
  double gamma2 = 1e-3;
  double rho_lower = 1.0;
  double noise_level = 0.05;
  double corr_len = 0.25;
  /// Noise operator K = gamma_zeta A + delta_zeta M; gamma_zeta <= 0 selects corr_len^2 / 8.
  double gamma_zeta = -1.0;
  double delta_zeta = 1.0;
  std::uint64_t seed = 0;

  double effective_gamma_zeta() const { return gamma_zeta > 0.0 ? gamma_zeta : corr_len * corr_len / 8.0; }
  void validate() const;
};

namespace exact {
double u_d(double y1, double y2);
double rho_true(double y1, double y2);
std::array<double, 2> grad_u_d(double y1, double y2);
std::array<double, 2> grad_rho_true(double y1, double y2);
/// -div(rho_true grad u_d) + u_d + u_d^3/3
double forcing(double y1, double y2);
}  // namespace exact

struct SyntheticData {
  Vector u_d;      // nodal interpolant of the noise-free state
  Vector zeta;     // noise
  Vector u_dzeta;  // u_d + zeta
  ProblemConfig config;
  int n_cells = 0;

  /// Writes <stem>.vtk with the three fields and <stem>.json with config and seed.
  void save(const std::string& stem) const;
  static SyntheticData load(const std::string& stem);
};

/// Correlated Gaussian noise: K z1 = M xi, K z2 = M z1, scaled to the requested L2 norm
/// relative to the interpolated u_d.
Vector sample_noise(const StructuredMesh& mesh, const ProblemConfig& cfg, std::mt19937_64& rng);

SyntheticData make_synthetic_data(const StructuredMesh& mesh, const ProblemConfig& cfg);

/// The elliptic model problem on a structured mesh: constant operators, data, forcing, and
/// evaluators for the constraint, Jacobians, objective and gradients at a given (u, rho).
class ModelProblem {
 public:
  ModelProblem(int n_cells, const ProblemConfig& cfg);
  ModelProblem(int n_cells, const ProblemConfig& cfg, SyntheticData data);

  const StructuredMesh& mesh() const { return mesh_; }
  const ProblemConfig& config() const { return cfg_; }
  const SyntheticData& data() const { return data_; }
  int n_nodes() const { return mesh_.num_nodes(); }

  const SparseMatrix& mass() const { return m_; }
  const SparseMatrix& stiffness() const { return a_; }
  const Vector& lumped() const { return ml_; }
  const SparseMatrix& H_uu() const { return huu_; }
  const SparseMatrix& H_rr() const { return hrr_; }

  /// Forcing g at every 3x3 quadrature point, cell-major.
  const Vector& forcing_at_quadrature() const { return g_quad_; }

  Vector constraint(const Vector& u, const Vector& rho) const;
  SparseMatrix jacobian_u(const Vector& u, const Vector& rho) const;
  SparseMatrix jacobian_rho(const Vector& u) const;

  double objective(const Vector& u, const Vector& rho) const;
  double misfit(const Vector& u) const;
  Vector grad_u(const Vector& u) const;
  Vector grad_rho(const Vector& rho) const;

  /// Newton iteration for c(u, rho) = 0 from u0. Returns u.
  Vector solve_state(const Vector& rho, Vector u0, double rel_tol = 1e-12, int max_newton = 30) const;

  /// ||v||_{M^{-1}} through the lumped mass.
  double dual_norm(const Vector& v) const;
  /// ||v||_M with the consistent mass.
  double mass_norm(const Vector& v) const;
  /// L2(Omega_left) norm via H_uu.
  double left_norm(const Vector& v) const;

 private:
  void build();

  StructuredMesh mesh_;
  ProblemConfig cfg_;
  SyntheticData data_;
  ElementTables t3_;
  SparseMatrix m_, a_, huu_, hrr_;
  Vector ml_;
  Vector g_quad_;
};

}  // namespace ipgn

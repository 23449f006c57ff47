#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ipgn/kkt.hpp"
#include "ipgn/problem.hpp"

namespace ipgn::spectral {

using Real = long double;
using DMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using DVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

/// Dense copies of every block of the Gauss-Newton saddle system, stacked (u, rho, lambda).
/// The perturbed variants add eps * M to the (u, u) block.
struct DenseKkt {
  int nu = 0;  // unknowns per field
  double mu = 0.0;
  double epsilon = 0.0;
  DMat M, H_uu, H_rr, W, J_u, J_rho;
  DMat A, A_gs, A_cen, A_con;
  DMat Hd, Hhat;
  DMat A_eps, A_gs_eps, Hd_eps;

  int size() const { return 3 * nu; }
};

/// Builds all derived blocks from the primitive ones.
DenseKkt dense_from_blocks(DMat M, DMat H_uu, DMat H_rr, DMat W, DMat J_u, DMat J_rho, double mu, double epsilon);

/// Converts an assembled sparse system (copies, no re-assembly).
DenseKkt dense_from_system(const KktSystem& sys, const SparseMatrix& mass, double epsilon);

struct SnapshotOptions {
  double mu = 1e-2;
  double gamma = 1e-3;
  double rho_offset = 0.1;  // rho = rho_true + offset
  double epsilon = 1e-4;
  bool observe_all = false;  // H_uu = M instead of the left-half mass
};

/// Model-problem state at (rho_true + offset, u solving the state equation, z = mu / gap).
IpmState snapshot_state(const ModelProblem& problem, double mu, double rho_offset);

/// Dense blocks re-assembled from quadrature at the snapshot, independent of the CSR path.
DenseKkt assemble_dense_snapshot(int n_cells, const SnapshotOptions& opt);

struct SpectralReport {
  bool precondition_ok = true;
  std::string precondition_message;
  std::vector<double> eig_real;     // eigenvalues of A_gs^{-1} A, descending real part
  double max_imag = 0.0;
  std::vector<double> eig_hrr;      // H_rr^{-1} Hd, descending
  std::vector<double> eig_w;        // W^{-1} Hd, descending
  int unit_count = 0;
  int expected_unit_count = 0;
  int rank_hd = 0;
  double kappa_y = 0.0;
  std::vector<double> delta;
  bool real_ok = false, lower_ok = false, match_ok = false, upper_ok = false;
  double min_eig = 0.0, match_err = 0.0, upper_excess = 0.0;

  bool passed() const { return precondition_ok && real_ok && lower_ok && match_ok && upper_ok; }
};

SpectralReport verify_prop1(const DenseKkt& d, double tol = 1e-8);

/// Long-form CSV of a report: quantity,index,value.
void write_report_csv(const std::string& path, const SpectralReport& r);

struct OrderingReport {
  int trials = 0;
  int violations = 0;
  double max_excess = 0.0;  // max_k (beta_k - xi_k)
  bool passed() const { return violations == 0; }
};

/// Random generalized eigenproblems A v = beta B v, A v = xi C v with B - C PSD.
OrderingReport verify_eig_ordering(int trials, int dim, std::mt19937_64& rng, double tol = 1e-10);

/// Descending generalized eigenvalues of the symmetric pencil (A, B), B SPD.
std::vector<double> generalized_eigs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct DiagonalizabilityReport {
  // unperturbed
  int algebraic_unit = 0;
  int geometric_unit = 0;
  bool defect_detected() const { return geometric_unit < algebraic_unit; }
  // perturbed
  double off_diagonal = 0.0;  // ||offdiag(Y^{-1} T Y)||_F / max |diag|
  double kappa_y = 0.0;
  int null_dim = 0;   // dim ker(J_rho); those columns of Y carry no X part
  DMat Y;             // permuted basis (u, lambda, rho)
  DVec eigenvalues;   // diagonal of Y^{-1} T Y
};

/// Multiplicity comparison for the unperturbed matrix and the explicit eigenvector basis of the
/// perturbed one. Throws ConfigError when epsilon <= 0.
DiagonalizabilityReport verify_diagonalizability(const DenseKkt& d, double epsilon, double rank_tol = 1e-12);

/// delta_k = prod_{j <= k} l_j / (1 + l_j) for l sorted descending; delta_0 = 1.
std::vector<double> delta_sequence(const std::vector<double>& lambdas);

struct ResidualBoundReport {
  std::vector<double> ratios;  // history[k] / history[0]
  std::vector<double> bounds;  // delta_{k-1} kappa(Y) for k >= 1
  double kappa_y = 0.0;
  int iterations = 0;
  bool holds = true;
  double worst_margin = 0.0;  // max ratio / bound
};

/// Left-preconditioned GMRES on A_eps with A_gs_eps, checked against delta_k kappa(Y).
ResidualBoundReport verify_residual_bound(const DenseKkt& d, const Eigen::VectorXd& rhs, double gmres_tol = 1e-10);

/// GMRES iterations with the exact Schur complement Hd + W in place of W (sparse path, dense Schur inverse).
KrylovReport exact_schur_gmres(const KktSystem& sys, double rel_tol = 1e-10);

struct DecayRow {
  int n_cells = 0;
  double mu = 0.0;
  int index = 0;
  double lambda_hrr = 0.0;
  double lambda_w = 0.0;
};

/// Leading eigenvalues of H_rr^{-1} Hd and W^{-1} Hd at the model snapshot. Dense below 32 cells,
/// Lanczos with full reorthogonalization in the H_rr (resp. W) inner product otherwise.
std::vector<DecayRow> spectrum_decay_study(const std::vector<int>& meshes, const std::vector<double>& mus, int count = 20,
                                           double gamma = 1e-3);

/// Leading eigenvalues of B^{-1} Hd (Hd applied matrix-free) by Lanczos in the B inner product.
std::vector<double> lanczos_leading(const LinearOperator& hd, const LinearOperator& b, const LinearOperator& b_inv,
                                    int count, int steps, std::uint64_t seed = 7);

void write_decay_csv(const std::string& path, const std::vector<DecayRow>& rows);

/// Writes H_uu, H_rr, W, J_u, J_rho and M as Matrix Market files into dir.
void write_kkt_blocks(const std::string& dir, const KktSystem& sys, const SparseMatrix& mass);
/// Reads the files written by write_kkt_blocks.
DenseKkt read_dense_kkt(const std::string& dir, double mu, double epsilon);

Eigen::MatrixXd to_double(const DMat& a);
DMat to_dense(const SparseMatrix& a);

}  // namespace ipgn::spectral

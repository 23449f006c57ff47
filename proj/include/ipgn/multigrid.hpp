#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "ipgn/krylov.hpp"
#include "ipgn/sparse_matrix.hpp"

namespace ipgn {

/// Bilinear interpolation from the (nc+1)^2 node grid to the (2nc+1)^2 node grid.
SparseMatrix bilinear_prolongation(int n_coarse_cells);

/// True when n = 4 * 2^k, i.e. the grid coarsens down to n = 4 by halving.
bool multigrid_compatible(int n_cells_per_side);

struct MultigridOptions {
  int pre_sweeps = 1;
  int post_sweeps = 1;
  int max_it = 500;
};

/// Geometric V-cycle for an SPD operator assembled on a structured square grid, used as a CG
/// preconditioner. Coarse operators are Galerkin products P^T A P down to n = 4, where a dense
/// Cholesky factor is applied. Pre-smoothing is forward Gauss-Seidel and post-smoothing is
/// backward Gauss-Seidel, so one cycle is a symmetric operator.
///
/// Grids that do not coarsen to n = 4 get a single level with no coarse correction, which is
/// symmetric Gauss-Seidel preconditioning (a warning is logged once per process).
class MultigridSolver {
 public:
  MultigridSolver(const SparseMatrix& a, int n_cells_per_side, MultigridOptions opts = {});

  int size() const { return levels_.front().a.rows(); }
  int num_levels() const { return static_cast<int>(levels_.size()); }
  bool is_fallback() const { return fallback_; }
  const SparseMatrix& matrix() const { return levels_.front().a; }

  /// x = V b (one cycle from a zero initial guess).
  void vcycle(std::span<const double> b, std::span<double> x) const;
  LinearOperator as_preconditioner() const;

  /// V-cycle-preconditioned CG to the given relative B^{-1}-norm tolerance.
  std::pair<Vector, KrylovReport> solve(std::span<const double> b, double rel_tol) const;

 private:
  struct Level {
    SparseMatrix a;
    SparseMatrix p;   // prolongation from the next coarser level into this one
    SparseMatrix pt;  // its transpose
    Vector inv_diag;
  };

  void cycle(int level, std::span<const double> b, std::span<double> x) const;
  void gs_forward(const Level& lv, std::span<const double> b, std::span<double> x) const;
  void gs_backward(const Level& lv, std::span<const double> b, std::span<double> x) const;

  std::vector<Level> levels_;
  DenseCholesky coarse_;
  bool fallback_ = false;
  MultigridOptions opts_;
};

}  // namespace ipgn

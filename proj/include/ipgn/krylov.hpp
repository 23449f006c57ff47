#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ipgn/sparse_matrix.hpp"
#include "ipgn/vector_ops.hpp"

namespace ipgn {

/// Matrix-free square linear map y = Op(x).
struct LinearOperator {
  using ApplyFn = std::function<void(std::span<const double>, std::span<double>)>;

  int size = 0;
  ApplyFn apply_fn;

  LinearOperator() = default;
  LinearOperator(int n, ApplyFn fn) : size(n), apply_fn(std::move(fn)) {}

  void apply(std::span<const double> x, std::span<double> y) const;
  Vector operator()(const Vector& x) const;

  static LinearOperator from_matrix(const SparseMatrix& a);
  static LinearOperator identity(int n);
};

struct KrylovReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  std::vector<double> history;
};

/// Preconditioned CG. The monitored quantity is sqrt(r^T B^{-1} r); history[k] is its value
/// after k iterations. Throws IndefiniteOperatorError when p^T A p <= 0.
std::pair<Vector, KrylovReport> cg_solve(const LinearOperator& op, const LinearOperator& precond,
                                         std::span<const double> b, double rel_tol, int max_it);

/// Left-preconditioned GMRES with modified Gram-Schmidt (plus one reorthogonalization pass).
/// The monitored quantity is ||B^{-1} r||_2 from the Arnoldi least-squares problem.
/// `restart` of nullopt means full GMRES.
std::pair<Vector, KrylovReport> gmres_solve(const LinearOperator& op, const LinearOperator& left_precond,
                                            std::span<const double> b, double rel_tol, int max_it,
                                            std::optional<int> restart = std::nullopt);

}  // namespace ipgn

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ipgn/vector_ops.hpp"

namespace ipgn {

struct Triplet {
  int row;
  int col;
  double value;
};

/// Compressed-sparse-row real matrix.
///
/// Column indices are sorted within each row and unique. Every operator block of the
/// optimization problem (mass, stiffness, Jacobians, Hessians) lives in one of these.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols, std::vector<int> row_ptr, std::vector<int> col_idx,
               std::vector<double> values);

  /// Duplicates are summed in input order, so the result is deterministic.
  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets);
  static SparseMatrix identity(int n);
  static SparseMatrix diagonal(std::span<const double> d);
  static SparseMatrix zero(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Entry lookup by binary search; zero if not stored.
  double at(int i, int j) const;

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  /// y = A^T x
  void multiply_transpose(std::span<const double> x, std::span<double> y) const;
  Vector operator*(const Vector& x) const;
  Vector transpose_times(const Vector& x) const;

  Vector diagonal_values() const;
  /// Row sums, i.e. A * 1.
  Vector row_sums() const;

  SparseMatrix transpose() const;
  SparseMatrix scaled(double alpha) const;

  /// alpha * A + beta * B on the union of the two patterns.
  static SparseMatrix add(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b);
  /// A * B (Gustavson, rows processed in order).
  static SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b);

  /// Max |A_ij - A_ji| over stored entries; requires a square matrix.
  double asymmetry() const;

  /// Row-major dense copy, for tests and small dense oracles.
  std::vector<double> to_dense() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

/// x = A^{-1} b for a dense SPD matrix via Cholesky; factors once, solves many.
class DenseCholesky {
 public:
  DenseCholesky() = default;
  explicit DenseCholesky(const SparseMatrix& a);
  void solve(std::span<const double> b, std::span<double> x) const;
  int size() const { return n_; }

 private:
  int n_ = 0;
  std::vector<double> l_;  // row-major lower factor
};

}  // namespace ipgn

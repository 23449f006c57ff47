#include "ipgn/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ipgn {

SparseMatrix::SparseMatrix(int rows, int cols, std::vector<int> row_ptr, std::vector<int> col_idx,
                           std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  if (rows_ < 0 || cols_ < 0) throw ShapeError("SparseMatrix: negative dimension");
  if (static_cast<int>(row_ptr_.size()) != rows_ + 1) throw ShapeError("SparseMatrix: bad row_ptr length");
  if (col_idx_.size() != values_.size()) throw ShapeError("SparseMatrix: col_idx/values length mismatch");
  if (row_ptr_.front() != 0 || row_ptr_.back() != static_cast<int>(values_.size())) {
    throw ShapeError("SparseMatrix: row_ptr does not span the value array");
  }
  for (int i = 0; i < rows_; ++i) {
    if (row_ptr_[i + 1] < row_ptr_[i]) throw ShapeError("SparseMatrix: row_ptr decreasing");
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (col_idx_[k] < 0 || col_idx_[k] >= cols_) throw ShapeError("SparseMatrix: column out of range");
      if (k > row_ptr_[i] && col_idx_[k] <= col_idx_[k - 1]) {
        throw ShapeError("SparseMatrix: columns not strictly increasing in row " + std::to_string(i));
      }
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<int> row_ptr(rows + 1, 0);
  std::vector<int> col_idx;
  std::vector<double> values;
  col_idx.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw ShapeError("from_triplets: index out of range");
    }
    if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
      values.back() += t.value;
      continue;
    }
    col_idx.push_back(t.col);
    values.push_back(t.value);
    row_ptr[t.row + 1]++;
  }
  for (int i = 0; i < rows; ++i) row_ptr[i + 1] += row_ptr[i];
  return SparseMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

SparseMatrix SparseMatrix::identity(int n) {
  Vector ones(n, 1.0);
  return diagonal(ones);
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> d) {
  const int n = static_cast<int>(d.size());
  std::vector<int> row_ptr(n + 1);
  std::vector<int> col_idx(n);
  std::iota(row_ptr.begin(), row_ptr.end(), 0);
  std::iota(col_idx.begin(), col_idx.end(), 0);
  return SparseMatrix(n, n, std::move(row_ptr), std::move(col_idx), std::vector<double>(d.begin(), d.end()));
}

SparseMatrix SparseMatrix::zero(int rows, int cols) {
  return SparseMatrix(rows, cols, std::vector<int>(rows + 1, 0), {}, {});
}

double SparseMatrix::at(int i, int j) const {
  auto first = col_idx_.begin() + row_ptr_[i];
  auto last = col_idx_.begin() + row_ptr_[i + 1];
  auto it = std::lower_bound(first, last, j);
  if (it != last && *it == j) return values_[it - col_idx_.begin()];
  return 0.0;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (static_cast<int>(x.size()) != cols_ || static_cast<int>(y.size()) != rows_) {
    throw ShapeError("spmv: shape mismatch (" + std::to_string(rows_) + "x" + std::to_string(cols_) +
                     " times " + std::to_string(x.size()) + ")");
  }
  for (int i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
    y[i] = s;
  }
}

void SparseMatrix::multiply_transpose(std::span<const double> x, std::span<double> y) const {
  if (static_cast<int>(x.size()) != rows_ || static_cast<int>(y.size()) != cols_) {
    throw ShapeError("spmv transpose: shape mismatch");
  }
  std::fill(y.begin(), y.end(), 0.0);
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) y[col_idx_[k]] += values_[k] * x[i];
  }
}

Vector SparseMatrix::operator*(const Vector& x) const {
  Vector y(rows_);
  multiply(x, y);
  return y;
}

Vector SparseMatrix::transpose_times(const Vector& x) const {
  Vector y(cols_);
  multiply_transpose(x, y);
  return y;
}

Vector SparseMatrix::diagonal_values() const {
  Vector d(std::min(rows_, cols_), 0.0);
  for (int i = 0; i < static_cast<int>(d.size()); ++i) d[i] = at(i, i);
  return d;
}

Vector SparseMatrix::row_sums() const {
  Vector s(rows_, 0.0);
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s[i] += values_[k];
  }
  return s;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<int> row_ptr(cols_ + 1, 0);
  for (int c : col_idx_) row_ptr[c + 1]++;
  for (int j = 0; j < cols_; ++j) row_ptr[j + 1] += row_ptr[j];
  std::vector<int> next(row_ptr.begin(), row_ptr.end() - 1);
  std::vector<int> col_idx(nnz());
  std::vector<double> values(nnz());
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const int dst = next[col_idx_[k]]++;
      col_idx[dst] = i;
      values[dst] = values_[k];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(row_ptr), std::move(col_idx), std::move(values));
}

SparseMatrix SparseMatrix::scaled(double alpha) const {
  SparseMatrix r = *this;
  for (double& v : r.values_) v *= alpha;
  return r;
}

SparseMatrix SparseMatrix::add(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ShapeError("SparseMatrix::add: shape mismatch");
  std::vector<int> row_ptr(a.rows_ + 1, 0);
  std::vector<int> col_idx;
  std::vector<double> values;
  col_idx.reserve(std::max(a.nnz(), b.nnz()));
  values.reserve(std::max(a.nnz(), b.nnz()));
  for (int i = 0; i < a.rows_; ++i) {
    int ka = a.row_ptr_[i];
    int kb = b.row_ptr_[i];
    const int ea = a.row_ptr_[i + 1];
    const int eb = b.row_ptr_[i + 1];
    while (ka < ea || kb < eb) {
      const int ca = ka < ea ? a.col_idx_[ka] : a.cols_;
      const int cb = kb < eb ? b.col_idx_[kb] : b.cols_;
      if (ca == cb) {
        col_idx.push_back(ca);
        values.push_back(alpha * a.values_[ka++] + beta * b.values_[kb++]);
      } else if (ca < cb) {
        col_idx.push_back(ca);
        values.push_back(alpha * a.values_[ka++]);
      } else {
        col_idx.push_back(cb);
        values.push_back(beta * b.values_[kb++]);
      }
    }
    row_ptr[i + 1] = static_cast<int>(col_idx.size());
  }
  return SparseMatrix(a.rows_, a.cols_, std::move(row_ptr), std::move(col_idx), std::move(values));
}

SparseMatrix SparseMatrix::multiply(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.cols_ != b.rows_) throw ShapeError("SparseMatrix::multiply: inner dimension mismatch");
  std::vector<int> row_ptr(a.rows_ + 1, 0);
  std::vector<int> col_idx;
  std::vector<double> values;
  std::vector<double> acc(b.cols_, 0.0);
  std::vector<int> marker(b.cols_, -1);
  std::vector<int> cols_in_row;
  for (int i = 0; i < a.rows_; ++i) {
    cols_in_row.clear();
    for (int ka = a.row_ptr_[i]; ka < a.row_ptr_[i + 1]; ++ka) {
      const int k = a.col_idx_[ka];
      const double av = a.values_[ka];
      for (int kb = b.row_ptr_[k]; kb < b.row_ptr_[k + 1]; ++kb) {
        const int j = b.col_idx_[kb];
        if (marker[j] != i) {
          marker[j] = i;
          acc[j] = 0.0;
          cols_in_row.push_back(j);
        }
        acc[j] += av * b.values_[kb];
      }
    }
    std::sort(cols_in_row.begin(), cols_in_row.end());
    for (int j : cols_in_row) {
      col_idx.push_back(j);
      values.push_back(acc[j]);
    }
    row_ptr[i + 1] = static_cast<int>(col_idx.size());
  }
  return SparseMatrix(a.rows_, b.cols_, std::move(row_ptr), std::move(col_idx), std::move(values));
}

double SparseMatrix::asymmetry() const {
  if (rows_ != cols_) throw ShapeError("asymmetry: matrix not square");
  double m = 0.0;
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      m = std::max(m, std::abs(values_[k] - at(col_idx_[k], i)));
    }
  }
  return m;
}

std::vector<double> SparseMatrix::to_dense() const {
  std::vector<double> d(static_cast<std::size_t>(rows_) * cols_, 0.0);
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      d[static_cast<std::size_t>(i) * cols_ + col_idx_[k]] = values_[k];
    }
  }
  return d;
}

DenseCholesky::DenseCholesky(const SparseMatrix& a) : n_(a.rows()) {
  if (a.rows() != a.cols()) throw ShapeError("DenseCholesky: matrix not square");
  l_ = a.to_dense();
  const int n = n_;
  for (int j = 0; j < n; ++j) {
    double d = l_[j * n + j];
    for (int k = 0; k < j; ++k) d -= l_[j * n + k] * l_[j * n + k];
    if (!(d > 0.0)) throw AssemblyError("DenseCholesky: matrix not positive definite");
    d = std::sqrt(d);
    l_[j * n + j] = d;
    for (int i = j + 1; i < n; ++i) {
      double s = l_[i * n + j];
      for (int k = 0; k < j; ++k) s -= l_[i * n + k] * l_[j * n + k];
      l_[i * n + j] = s / d;
    }
  }
}

void DenseCholesky::solve(std::span<const double> b, std::span<double> x) const {
  const int n = n_;
  if (static_cast<int>(b.size()) != n || static_cast<int>(x.size()) != n) {
    throw ShapeError("DenseCholesky::solve: size mismatch");
  }
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l_[i * n + k] * x[k];
    x[i] = s / l_[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k < n; ++k) s -= l_[k * n + i] * x[k];
    x[i] = s / l_[i * n + i];
  }
}

}  // namespace ipgn

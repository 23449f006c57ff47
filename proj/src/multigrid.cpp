#include "ipgn/multigrid.hpp"

#include <atomic>
#include <iostream>
#include <string>

namespace ipgn {

SparseMatrix bilinear_prolongation(int nc) {
  if (nc < 1) throw ConfigError("bilinear_prolongation: coarse grid needs at least one cell");
  const int nf = 2 * nc;
  const int wc = nc + 1;
  const int wf = nf + 1;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(wf) * wf * 4);
  // 1D weights: fine index i maps to coarse i/2 (even) or the pair (i-1)/2, (i+1)/2 (odd).
  auto stencil = [](int i, int out_idx[2], double out_w[2]) {
    if (i % 2 == 0) {
      out_idx[0] = i / 2;
      out_w[0] = 1.0;
      return 1;
    }
    out_idx[0] = (i - 1) / 2;
    out_idx[1] = (i + 1) / 2;
    out_w[0] = out_w[1] = 0.5;
    return 2;
  };
  for (int i2 = 0; i2 < wf; ++i2) {
    int c2[2];
    double w2[2];
    const int k2 = stencil(i2, c2, w2);
    for (int i1 = 0; i1 < wf; ++i1) {
      int c1[2];
      double w1[2];
      const int k1 = stencil(i1, c1, w1);
      const int row = i2 * wf + i1;
      for (int b = 0; b < k2; ++b) {
        for (int a = 0; a < k1; ++a) t.push_back({row, c2[b] * wc + c1[a], w2[b] * w1[a]});
      }
    }
  }
  return SparseMatrix::from_triplets(wf * wf, wc * wc, std::move(t));
}

bool multigrid_compatible(int n) {
  if (n < 4 || n % 4 != 0) return false;
  int m = n / 4;
  while (m % 2 == 0) m /= 2;
  return m == 1;
}

namespace {

std::atomic<bool> fallback_warned{false};

Vector inverse_diagonal(const SparseMatrix& a) {
  Vector d = a.diagonal_values();
  for (double& v : d) {
    if (!(v > 0.0)) throw AssemblyError("multigrid: nonpositive diagonal entry");
    v = 1.0 / v;
  }
  return d;
}

}  // namespace

MultigridSolver::MultigridSolver(const SparseMatrix& a, int n, MultigridOptions opts) : opts_(opts) {
  if (a.rows() != a.cols() || a.rows() != (n + 1) * (n + 1)) {
    throw ShapeError("MultigridSolver: matrix size does not match an n=" + std::to_string(n) + " grid");
  }
  levels_.push_back({a, {}, {}, inverse_diagonal(a)});
  if (!multigrid_compatible(n)) {
    fallback_ = true;
    if (!fallback_warned.exchange(true)) {
      std::clog << "warning: n=" << n
                << " does not coarsen to n=4 by halving; using symmetric Gauss-Seidel preconditioned CG\n";
    }
    return;
  }
  int nf = n;
  while (nf > 4) {
    const int nc = nf / 2;
    Level& fine = levels_.back();
    fine.p = bilinear_prolongation(nc);
    fine.pt = fine.p.transpose();
    SparseMatrix ap = SparseMatrix::multiply(fine.a, fine.p);
    SparseMatrix ac = SparseMatrix::multiply(fine.pt, ap);
    Vector inv = inverse_diagonal(ac);
    levels_.push_back({std::move(ac), {}, {}, std::move(inv)});
    nf = nc;
  }
  coarse_ = DenseCholesky(levels_.back().a);
}

void MultigridSolver::gs_forward(const Level& lv, std::span<const double> b, std::span<double> x) const {
  const auto& rp = lv.a.row_ptr();
  const auto& ci = lv.a.col_idx();
  const auto& va = lv.a.values();
  const int n = lv.a.rows();
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = rp[i]; k < rp[i + 1]; ++k) {
      if (ci[k] != i) s -= va[k] * x[ci[k]];
    }
    x[i] = s * lv.inv_diag[i];
  }
}

void MultigridSolver::gs_backward(const Level& lv, std::span<const double> b, std::span<double> x) const {
  const auto& rp = lv.a.row_ptr();
  const auto& ci = lv.a.col_idx();
  const auto& va = lv.a.values();
  for (int i = lv.a.rows() - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = rp[i]; k < rp[i + 1]; ++k) {
      if (ci[k] != i) s -= va[k] * x[ci[k]];
    }
    x[i] = s * lv.inv_diag[i];
  }
}

void MultigridSolver::cycle(int l, std::span<const double> b, std::span<double> x) const {
  const Level& lv = levels_[l];
  std::fill(x.begin(), x.end(), 0.0);
  if (fallback_) {
    gs_forward(lv, b, x);
    gs_backward(lv, b, x);
    return;
  }
  if (l + 1 == num_levels()) {
    coarse_.solve(b, x);
    return;
  }
  for (int s = 0; s < opts_.pre_sweeps; ++s) gs_forward(lv, b, x);
  const int n = lv.a.rows();
  Vector r(n);
  lv.a.multiply(x, r);
  for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
  const int nc = lv.p.cols();
  Vector rc(nc), ec(nc);
  lv.pt.multiply(r, rc);
  cycle(l + 1, rc, ec);
  lv.p.multiply(ec, r);
  for (int i = 0; i < n; ++i) x[i] += r[i];
  for (int s = 0; s < opts_.post_sweeps; ++s) gs_backward(lv, b, x);
}

void MultigridSolver::vcycle(std::span<const double> b, std::span<double> x) const {
  if (static_cast<int>(b.size()) != size() || static_cast<int>(x.size()) != size()) {
    throw ShapeError("MultigridSolver::vcycle: size mismatch");
  }
  cycle(0, b, x);
}

LinearOperator MultigridSolver::as_preconditioner() const {
  return LinearOperator(size(), [this](std::span<const double> b, std::span<double> x) { cycle(0, b, x); });
}

std::pair<Vector, KrylovReport> MultigridSolver::solve(std::span<const double> b, double rel_tol) const {
  return cg_solve(LinearOperator::from_matrix(levels_.front().a), as_preconditioner(), b, rel_tol, opts_.max_it);
}

}  // namespace ipgn

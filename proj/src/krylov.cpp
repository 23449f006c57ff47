#include "ipgn/krylov.hpp"

#include <cmath>
#include <string>

namespace ipgn {

void LinearOperator::apply(std::span<const double> x, std::span<double> y) const {
  if (static_cast<int>(x.size()) != size || static_cast<int>(y.size()) != size) {
    throw ShapeError("LinearOperator: expected vectors of length " + std::to_string(size));
  }
  apply_fn(x, y);
}

Vector LinearOperator::operator()(const Vector& x) const {
  Vector y(size);
  apply(x, y);
  return y;
}

LinearOperator LinearOperator::from_matrix(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("LinearOperator::from_matrix: matrix not square");
  return LinearOperator(a.rows(), [&a](std::span<const double> x, std::span<double> y) { a.multiply(x, y); });
}

LinearOperator LinearOperator::identity(int n) {
  return LinearOperator(n, [](std::span<const double> x, std::span<double> y) {
    std::copy(x.begin(), x.end(), y.begin());
  });
}

std::pair<Vector, KrylovReport> cg_solve(const LinearOperator& op, const LinearOperator& precond,
                                         std::span<const double> b, double rel_tol, int max_it) {
  const int n = op.size;
  if (static_cast<int>(b.size()) != n || precond.size != n) throw ShapeError("cg_solve: size mismatch");
  KrylovReport rep;
  Vector x(n, 0.0);
  Vector r(b.begin(), b.end());
  Vector z(n), p(n), q(n);
  precond.apply(r, z);
  double rz = dot(r, z);
  if (rz < 0.0) throw IndefiniteOperatorError("cg_solve: preconditioner is not positive definite", x, 0);
  const double r0 = std::sqrt(rz);
  rep.history.push_back(r0);
  if (r0 == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  p = z;
  for (int k = 0; k < max_it; ++k) {
    op.apply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) {
      throw IndefiniteOperatorError("cg_solve: nonpositive curvature p^T A p = " + std::to_string(pq), x, k);
    }
    const double alpha = rz / pq;
    axpy(alpha, p, x);
    axpy(-alpha, q, r);
    precond.apply(r, z);
    const double rz_new = dot(r, z);
    const double m = std::sqrt(std::max(rz_new, 0.0));
    rep.history.push_back(m);
    rep.iterations = k + 1;
    rep.relative_residual = m / r0;
    if (rep.relative_residual <= rel_tol) {
      rep.converged = true;
      return {x, rep};
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return {x, rep};
}

namespace {

void givens(double a, double b, double& c, double& s) {
  if (b == 0.0) {
    c = 1.0;
    s = 0.0;
  } else if (std::abs(b) > std::abs(a)) {
    const double t = a / b;
    s = 1.0 / std::sqrt(1.0 + t * t);
    c = s * t;
  } else {
    const double t = b / a;
    c = 1.0 / std::sqrt(1.0 + t * t);
    s = c * t;
  }
}

}  // namespace

std::pair<Vector, KrylovReport> gmres_solve(const LinearOperator& op, const LinearOperator& left_precond,
                                            std::span<const double> b, double rel_tol, int max_it,
                                            std::optional<int> restart) {
  const int n = op.size;
  if (static_cast<int>(b.size()) != n || left_precond.size != n) throw ShapeError("gmres_solve: size mismatch");
  if (restart && *restart < 1) throw ConfigError("gmres_solve: restart must be positive");
  KrylovReport rep;
  Vector x(n, 0.0);
  Vector w(n), tmp(n);

  Vector r(n);
  left_precond.apply(b, r);
  double beta = norm2(r);
  const double r0 = beta;
  rep.history.push_back(beta);
  if (r0 == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  const int m_max = restart ? std::min(*restart, max_it) : max_it;

  while (rep.iterations < max_it) {
    std::vector<Vector> v;
    v.reserve(m_max + 1);
    v.push_back((1.0 / beta) * r);
    std::vector<std::vector<double>> h;  // h[j] holds column j, length j+2
    std::vector<double> cs, sn;
    std::vector<double> g{beta};
    int j = 0;
    bool done = false;
    for (; j < m_max && rep.iterations < max_it; ++j) {
      op.apply(v[j], tmp);
      left_precond.apply(tmp, w);
      std::vector<double> col(j + 2, 0.0);
      const double w_before = norm2(w);
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const double hij = dot(w, v[i]);
          col[i] += hij;
          axpy(-hij, v[i], w);
        }
      }
      col[j + 1] = norm2(w);
      const double subdiag = col[j + 1];
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * col[i] + sn[i] * col[i + 1];
        col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
        col[i] = t;
      }
      double c, s;
      givens(col[j], col[j + 1], c, s);
      col[j] = c * col[j] + s * col[j + 1];
      col[j + 1] = 0.0;
      cs.push_back(c);
      sn.push_back(s);
      g.push_back(-s * g[j]);
      g[j] = c * g[j];
      h.push_back(std::move(col));
      rep.iterations++;
      const double res = std::abs(g[j + 1]);
      rep.history.push_back(res);
      rep.relative_residual = res / r0;
      const bool happy = subdiag <= 1e-14 * w_before;
      if (rep.relative_residual <= rel_tol || happy) {
        done = true;
        ++j;
        break;
      }
      v.push_back((1.0 / subdiag) * w);
    }
    // back substitution on the j x j triangle
    std::vector<double> y(j, 0.0);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= h[k][i] * y[k];
      y[i] = s / h[i][i];
    }
    for (int i = 0; i < j; ++i) axpy(y[i], v[i], x);
    if (done) {
      rep.converged = true;
      return {x, rep};
    }
    if (rep.iterations >= max_it) break;
    op.apply(x, tmp);
    for (int i = 0; i < n; ++i) tmp[i] = b[i] - tmp[i];
    left_precond.apply(tmp, r);
    beta = norm2(r);
    rep.relative_residual = beta / r0;
    if (rep.relative_residual <= rel_tol) {
      rep.converged = true;
      return {x, rep};
    }
  }
  return {x, rep};
}

}  // namespace ipgn

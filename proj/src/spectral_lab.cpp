#include "ipgn/spectral_lab.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "ipgn/errors.hpp"
#include "ipgn/ipm_state.hpp"
#include "ipgn/matrix_market.hpp"
#include "ipgn/multigrid.hpp"

namespace ipgn::spectral {

namespace {

DMat symmetric_part(const DMat& a) { return (a + a.transpose()) / 2; }

/// Descending eigenvalues of the pencil (a, b) with b SPD, in extended precision.
std::vector<double> pencil_eigs(const DMat& a, const DMat& b) {
  Eigen::LLT<DMat> llt(symmetric_part(b));
  if (llt.info() != Eigen::Success) throw AssemblyError("pencil: second matrix is not positive definite");
  const DMat l = llt.matrixL();
  DMat c = l.triangularView<Eigen::Lower>().solve(symmetric_part(a));
  c = l.triangularView<Eigen::Lower>().solve(c.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<DMat> es(symmetric_part(c), Eigen::EigenvaluesOnly);
  std::vector<double> out(es.eigenvalues().size());
  for (int i = 0; i < es.eigenvalues().size(); ++i) out[i] = static_cast<double>(es.eigenvalues()[i]);
  std::sort(out.rbegin(), out.rend());
  return out;
}

Real min_eig(const DMat& a) {
  Eigen::SelfAdjointEigenSolver<DMat> es(symmetric_part(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

DMat block3(const DMat& a11, const DMat& a12, const DMat& a13, const DMat& a21, const DMat& a22, const DMat& a23,
            const DMat& a31, const DMat& a32, const DMat& a33) {
  const Eigen::Index n = a11.rows();
  DMat out(3 * n, 3 * n);
  out << a11, a12, a13, a21, a22, a23, a31, a32, a33;
  return out;
}

struct Gauss3 {
  Real x[3], w[3];
  Gauss3() {
    const Real s = std::sqrt(Real(15)) / 10;
    x[0] = Real(0.5) - s, x[1] = Real(0.5), x[2] = Real(0.5) + s;
    w[0] = Real(5) / 18, w[1] = Real(8) / 18, w[2] = Real(5) / 18;
  }
};

std::vector<std::pair<double, double>> complex_sorted(const DMat& t, double& max_imag) {
  Eigen::EigenSolver<DMat> es(t, false);
  if (es.info() != Eigen::Success) throw AssemblyError("nonsymmetric eigensolver failed");
  std::vector<std::pair<double, double>> ev;
  max_imag = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const auto z = es.eigenvalues()[i];
    ev.emplace_back(static_cast<double>(z.real()), static_cast<double>(z.imag()));
    max_imag = std::max(max_imag, std::abs(static_cast<double>(z.imag())));
  }
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return a.first > b.first; });
  return ev;
}

Real kappa2(const DMat& y) {
  Eigen::BDCSVD<DMat> svd(y);
  const auto& s = svd.singularValues();
  return s(0) / s(s.size() - 1);
}

}  // namespace

Eigen::MatrixXd to_double(const DMat& a) { return a.cast<double>(); }

DMat to_dense(const SparseMatrix& a) {
  DMat d = DMat::Zero(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) d(i, a.col_idx()[k]) += a.values()[k];
  return d;
}

DenseKkt dense_from_blocks(DMat M, DMat H_uu, DMat H_rr, DMat W, DMat J_u, DMat J_rho, double mu, double epsilon) {
  const Eigen::Index n = M.rows();
  for (const DMat* b : {&H_uu, &H_rr, &W, &J_u, &J_rho})
    if (b->rows() != n || b->cols() != n) throw ShapeError("dense KKT blocks must be square and equal-sized");
  DenseKkt d;
  d.nu = static_cast<int>(n);
  d.mu = mu;
  d.epsilon = epsilon;
  const DMat Z = DMat::Zero(n, n);
  d.A = block3(H_uu, Z, J_u.transpose(), Z, W, J_rho.transpose(), J_u, J_rho, Z);
  d.A_gs = block3(H_uu, Z, J_u.transpose(), Z, W, J_rho.transpose(), J_u, Z, Z);
  d.A_cen = block3(H_uu, Z, J_u.transpose(), Z, W, Z, J_u, Z, Z);

  Eigen::PartialPivLU<DMat> ju(J_u);
  const DMat S = ju.solve(J_rho);  // J_u^{-1} J_rho
  d.Hd = S.transpose() * H_uu * S;
  d.Hhat = d.Hd + W;
  d.A_con = block3(H_uu, Z, J_u.transpose(), Z, W - d.Hd, J_rho.transpose(), J_u, J_rho, Z);

  const DMat H_eps = H_uu + Real(epsilon) * M;
  d.A_eps = block3(H_eps, Z, J_u.transpose(), Z, W, J_rho.transpose(), J_u, J_rho, Z);
  d.A_gs_eps = block3(H_eps, Z, J_u.transpose(), Z, W, J_rho.transpose(), J_u, Z, Z);
  d.Hd_eps = S.transpose() * H_eps * S;

  d.M = std::move(M);
  d.H_uu = std::move(H_uu);
  d.H_rr = std::move(H_rr);
  d.W = std::move(W);
  d.J_u = std::move(J_u);
  d.J_rho = std::move(J_rho);
  return d;
}

DenseKkt dense_from_system(const KktSystem& sys, const SparseMatrix& mass, double epsilon) {
  if (sys.size() > 6000) throw ConfigError("dense KKT limited to small meshes");
  return dense_from_blocks(to_dense(mass), to_dense(sys.H_uu), to_dense(sys.H_rr), to_dense(sys.W), to_dense(sys.J_u),
                           to_dense(sys.J_rho), sys.mu, epsilon);
}

IpmState snapshot_state(const ModelProblem& problem, double mu, double rho_offset) {
  const auto& mesh = problem.mesh();
  IpmState s;
  s.mu = mu;
  s.rho = interpolate(mesh, [&](double x, double y) { return exact::rho_true(x, y) + rho_offset; }, Space::Parameter).values;
  s.u = problem.solve_state(s.rho, Vector(problem.n_nodes(), 0.0));
  s.lambda.assign(problem.n_nodes(), 0.0);
  const Vector gap = bound_gap(problem, s.rho);
  s.z.resize(gap.size());
  for (std::size_t i = 0; i < gap.size(); ++i) s.z[i] = mu / gap[i];
  return s;
}

DenseKkt assemble_dense_snapshot(int n_cells, const SnapshotOptions& opt) {
  ProblemConfig cfg;
  cfg.gamma1 = cfg.gamma2 = opt.gamma;
  cfg.noise_level = 0.0;
  ModelProblem problem(n_cells, cfg);
  const IpmState st = snapshot_state(problem, opt.mu, opt.rho_offset);

  const int np = n_cells + 1;
  const int nn = np * np;
  const Real h = Real(1) / n_cells;
  const Gauss3 g;
  DMat M = DMat::Zero(nn, nn), A = M, Hl = M, Ju = M, Jr = M;
  for (int c2 = 0; c2 < n_cells; ++c2) {
    for (int c1 = 0; c1 < n_cells; ++c1) {
      const int nodes[4] = {c2 * np + c1, c2 * np + c1 + 1, (c2 + 1) * np + c1, (c2 + 1) * np + c1 + 1};
      const bool left = (c1 + Real(0.5)) * h < Real(0.5);
      for (int qi = 0; qi < 3; ++qi) {
        for (int qj = 0; qj < 3; ++qj) {
          const Real xi = g.x[qi], eta = g.x[qj], wq = g.w[qi] * g.w[qj] * h * h;
          const Real phi[4] = {(1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta};
          const Real dx[4] = {-(1 - eta) / h, (1 - eta) / h, -eta / h, eta / h};
          const Real dy[4] = {-(1 - xi) / h, -xi / h, (1 - xi) / h, xi / h};
          Real uq = 0, rq = 0, ux = 0, uy = 0;
          for (int a = 0; a < 4; ++a) {
            uq += st.u[nodes[a]] * phi[a];
            rq += st.rho[nodes[a]] * phi[a];
            ux += st.u[nodes[a]] * dx[a];
            uy += st.u[nodes[a]] * dy[a];
          }
          for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
              const Real mm = wq * phi[a] * phi[b];
              const Real kk = wq * (dx[a] * dx[b] + dy[a] * dy[b]);
              M(nodes[a], nodes[b]) += mm;
              A(nodes[a], nodes[b]) += kk;
              if (left) Hl(nodes[a], nodes[b]) += mm;
              Ju(nodes[a], nodes[b]) += rq * kk + (1 + uq * uq) * mm;
              Jr(nodes[a], nodes[b]) += wq * (dx[a] * ux + dy[a] * uy) * phi[b];
            }
          }
        }
      }
    }
  }
  const DMat Huu = opt.observe_all ? M : Hl;
  const DMat Hrr = Real(opt.gamma) * M + Real(opt.gamma) * A;
  const DVec ml = M.rowwise().sum();
  DMat W = Hrr;
  const Real rl = Real(cfg.rho_lower);
  for (int i = 0; i < nn; ++i) {
    const Real gap = Real(st.rho[i]) - rl;
    W(i, i) += ml(i) * Real(st.z[i]) / gap;
  }
  return dense_from_blocks(M, Huu, Hrr, W, Ju, Jr, opt.mu, opt.epsilon);
}

SpectralReport verify_prop1(const DenseKkt& d, double tol) {
  SpectralReport r;
  const int n = d.nu;
  const Real scale_w = d.W.cwiseAbs().maxCoeff();
  Eigen::LLT<DMat> wl(symmetric_part(d.W));
  if (wl.info() != Eigen::Success || d.W.diagonal().minCoeff() <= 0) {
    r.precondition_ok = false;
    r.precondition_message = "W is not positive definite";
    return r;
  }
  if (min_eig(d.H_uu) < -Real(1e-12) * std::max<Real>(1, d.H_uu.cwiseAbs().maxCoeff())) {
    r.precondition_ok = false;
    r.precondition_message = "H_uu is not positive semidefinite";
    return r;
  }
  if (min_eig(d.W - d.H_rr) < -Real(1e-12) * std::max<Real>(1, scale_w)) {
    r.precondition_ok = false;
    r.precondition_message = "W - H_rr is not positive semidefinite";
    return r;
  }

  const DMat t = d.A_gs.partialPivLu().solve(d.A);
  const auto ev = complex_sorted(t, r.max_imag);
  for (const auto& e : ev) r.eig_real.push_back(e.first);
  r.eig_hrr = pencil_eigs(d.Hd, d.H_rr);
  r.eig_w = pencil_eigs(d.Hd, d.W);

  r.real_ok = r.max_imag <= tol;
  r.min_eig = *std::min_element(r.eig_real.begin(), r.eig_real.end());
  r.lower_ok = r.min_eig >= 1.0 - tol;

  r.match_err = 0.0;
  r.upper_excess = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < 3 * n; ++j) {
    const double target = j < n ? 1.0 + r.eig_w[j] : 1.0;
    r.match_err = std::max(r.match_err, std::abs(r.eig_real[j] - target) / std::max(1.0, target));
    const double upper = j < n ? 1.0 + r.eig_hrr[j] : 1.0;
    r.upper_excess = std::max(r.upper_excess, (r.eig_real[j] - upper) / std::max(1.0, upper));
  }
  r.match_ok = r.match_err <= tol;
  r.upper_ok = r.upper_excess <= tol;

  r.rank_hd = static_cast<int>(std::count_if(r.eig_w.begin(), r.eig_w.end(), [&](double l) { return l > tol; }));
  r.expected_unit_count = 3 * n - r.rank_hd;
  r.unit_count = static_cast<int>(std::count_if(r.eig_real.begin(), r.eig_real.end(), [&](double l) { return std::abs(l - 1.0) <= tol; }));
  return r;
}

void write_report_csv(const std::string& path, const SpectralReport& r) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << std::setprecision(17) << "quantity,index,value\n";
  auto put = [&](const char* name, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out << name << ',' << i << ',' << v[i] << '\n';
  };
  put("eig_precond", r.eig_real);
  put("eig_hrr_hd", r.eig_hrr);
  put("eig_w_hd", r.eig_w);
  put("delta", r.delta);
  out << "unit_count,0," << r.unit_count << '\n';
  out << "expected_unit_count,0," << r.expected_unit_count << '\n';
  out << "kappa_y,0," << r.kappa_y << '\n';
  out << "max_imag,0," << r.max_imag << '\n';
  out << "passed,0," << (r.passed() ? 1 : 0) << '\n';
}

std::vector<double> generalized_eigs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, b, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw AssemblyError("generalized eigensolver failed");
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.rbegin(), out.rend());
  return out;
}

OrderingReport verify_eig_ordering(int trials, int dim, std::mt19937_64& rng, double tol) {
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> rank_dist(1, dim);
  auto random = [&](int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
  };
  OrderingReport rep;
  rep.max_excess = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const Eigen::MatrixXd ra = random(dim, rank_dist(rng));
    const Eigen::MatrixXd a = ra * ra.transpose();
    const Eigen::MatrixXd rc = random(dim, dim);
    const Eigen::MatrixXd c = rc * rc.transpose() + 0.1 * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd rp = random(dim, rank_dist(rng));
    const Eigen::MatrixXd b = c + rp * rp.transpose();
    const auto beta = generalized_eigs(a, b);
    const auto xi = generalized_eigs(a, c);
    bool bad = false;
    for (int k = 0; k < dim; ++k) {
      const double excess = beta[k] - xi[k];
      rep.max_excess = std::max(rep.max_excess, excess);
      if (excess > tol * std::max(1.0, std::abs(xi[k]))) bad = true;
    }
    rep.violations += bad ? 1 : 0;
    rep.trials++;
  }
  return rep;
}

DiagonalizabilityReport verify_diagonalizability(const DenseKkt& d, double epsilon, double rank_tol) {
  if (!(epsilon > 0.0)) throw ConfigError("perturbation must be positive");
  DiagonalizabilityReport rep;
  const int n = d.nu;
  const int N = 3 * n;

  {
    // Algebraic multiplicity of 1 is 2n + dim ker(W^{-1} Hd) by the eigenvalue relation; the symmetric pencil
    // resolves that kernel cleanly, unlike eigenvalues of the nonsymmetric matrix near a Jordan block.
    const auto lw = pencil_eigs(d.Hd, d.W);
    const double top = std::max(lw.front(), 1e-300);
    rep.algebraic_unit = 2 * n + static_cast<int>(std::count_if(lw.begin(), lw.end(), [&](double l) { return l <= 1e-14 * top; }));
    const DMat t = d.A_gs.partialPivLu().solve(d.A);
    Eigen::BDCSVD<DMat> svd(t - DMat::Identity(N, N));
    const auto& s = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < s.size(); ++i)
      if (s(i) > Real(rank_tol) * s(0)) ++rank;
    rep.geometric_unit = N - rank;
  }

  DenseKkt pe = d;
  if (epsilon != d.epsilon) pe = dense_from_blocks(d.M, d.H_uu, d.H_rr, d.W, d.J_u, d.J_rho, d.mu, epsilon);

  // Permuted basis (u, lambda, rho): U_eps = [[H_eps, J_u^T], [J_u, 0]], V = [0, J_rho^T].
  const DMat H_eps = pe.H_uu + Real(epsilon) * pe.M;
  DMat U = DMat::Zero(2 * n, 2 * n);
  U.topLeftCorner(n, n) = H_eps;
  U.topRightCorner(n, n) = pe.J_u.transpose();
  U.bottomLeftCorner(n, n) = pe.J_u;
  DMat V = DMat::Zero(n, 2 * n);
  V.rightCols(n) = pe.J_rho.transpose();

  Eigen::SelfAdjointEigenSolver<DMat> we(symmetric_part(pe.W));
  if (we.eigenvalues().minCoeff() <= 0) throw AssemblyError("W is not positive definite");
  const DMat w_mhalf = we.eigenvectors() * we.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * we.eigenvectors().transpose();
  Eigen::PartialPivLU<DMat> ulu(U);
  const DMat uvt = ulu.solve(V.transpose());  // U^{-1} V^T
  const DMat s = -(w_mhalf * V * uvt * w_mhalf);
  Eigen::SelfAdjointEigenSolver<DMat> se(symmetric_part(s));
  const DMat& q = se.eigenvectors();
  const DVec& lam = se.eigenvalues();  // ascending
  // Directions in ker(J_rho) have lambda = 0 and are eigenvectors (0, W^{-1/2} q) on their own.
  Eigen::BDCSVD<DMat> jsvd(pe.J_rho);
  const auto& js = jsvd.singularValues();
  int null_dim = 0;
  for (int i = 0; i < js.size(); ++i)
    if (js(i) <= Real(1e-12) * js(0)) ++null_dim;
  rep.null_dim = null_dim;
  DVec lam_inv = DVec::Zero(n);
  for (int i = null_dim; i < n; ++i) {
    if (lam(i) <= 0) throw AssemblyError("perturbed data-misfit Hessian has an unexpected null direction");
    lam_inv(i) = 1 / lam(i);
  }

  const DMat x = uvt * w_mhalf * q * lam_inv.asDiagonal();
  DMat y = DMat::Zero(N, N);
  y.topLeftCorner(2 * n, 2 * n) = DMat::Identity(2 * n, 2 * n);
  y.topRightCorner(2 * n, n) = x;
  y.bottomRightCorner(n, n) = w_mhalf * q;
  // Unit columns: any eigenvector scaling diagonalizes, and this one keeps kappa(Y) finite in extended precision.
  for (int j = 2 * n; j < N; ++j) y.col(j) /= y.col(j).norm();

  DMat ap = DMat::Zero(N, N), agp = DMat::Zero(N, N);
  ap.topLeftCorner(2 * n, 2 * n) = U;
  ap.topRightCorner(2 * n, n) = V.transpose();
  ap.bottomLeftCorner(n, 2 * n) = V;
  ap.bottomRightCorner(n, n) = pe.W;
  agp = ap;
  agp.topRightCorner(2 * n, n).setZero();
  const DMat tp = agp.partialPivLu().solve(ap);
  const DMat dmat = y.partialPivLu().solve(tp * y);
  DMat off = dmat;
  off.diagonal().setZero();
  rep.eigenvalues = dmat.diagonal();
  rep.off_diagonal = static_cast<double>(off.norm() / std::max<Real>(1, dmat.diagonal().cwiseAbs().maxCoeff()));
  rep.kappa_y = static_cast<double>(kappa2(y));
  rep.Y = std::move(y);
  return rep;
}

std::vector<double> delta_sequence(const std::vector<double>& lambdas) {
  std::vector<double> l = lambdas;
  std::sort(l.rbegin(), l.rend());
  std::vector<double> delta{1.0};
  for (double v : l) {
    const double f = std::max(v, 0.0) / (1.0 + std::max(v, 0.0));
    delta.push_back(delta.back() * f);
  }
  return delta;
}

ResidualBoundReport verify_residual_bound(const DenseKkt& d, const Eigen::VectorXd& rhs, double gmres_tol) {
  if (rhs.size() != d.size()) throw ShapeError("residual bound: rhs length");
  ResidualBoundReport rep;
  const auto diag = verify_diagonalizability(d, d.epsilon);
  rep.kappa_y = diag.kappa_y;
  const auto delta = delta_sequence(pencil_eigs(d.Hd_eps, d.H_rr));

  const Eigen::MatrixXd a = to_double(d.A_eps);
  const Eigen::PartialPivLU<Eigen::MatrixXd> p(to_double(d.A_gs_eps));
  const int N = d.size();
  LinearOperator op(N, [&](std::span<const double> x, std::span<double> y) {
    Eigen::Map<Eigen::VectorXd>(y.data(), N) = a * Eigen::Map<const Eigen::VectorXd>(x.data(), N);
  });
  LinearOperator pc(N, [&](std::span<const double> x, std::span<double> y) {
    Eigen::Map<Eigen::VectorXd>(y.data(), N) = p.solve(Eigen::Map<const Eigen::VectorXd>(x.data(), N));
  });
  const auto [sol, kr] = gmres_solve(op, pc, std::span<const double>(rhs.data(), N), gmres_tol, N);
  rep.iterations = kr.iterations;
  const double h0 = kr.history.front();
  for (std::size_t k = 0; k < kr.history.size(); ++k) {
    const double ratio = kr.history[k] / h0;
    const double bound = k == 0 ? rep.kappa_y : delta[std::min(k - 1, delta.size() - 1)] * rep.kappa_y;
    rep.ratios.push_back(ratio);
    rep.bounds.push_back(bound);
    rep.worst_margin = std::max(rep.worst_margin, ratio / bound);
    if (ratio > bound * (1.0 + 1e-6)) rep.holds = false;
  }
  return rep;
}

KrylovReport exact_schur_gmres(const KktSystem& sys, double rel_tol) {
  const Eigen::MatrixXd ju = to_double(to_dense(sys.J_u));
  const Eigen::MatrixXd jr = to_double(to_dense(sys.J_rho));
  const Eigen::MatrixXd huu = to_double(to_dense(sys.H_uu));
  const Eigen::MatrixXd s = ju.partialPivLu().solve(jr);
  const Eigen::MatrixXd hhat = s.transpose() * huu * s + to_double(to_dense(sys.W));
  auto llt = std::make_shared<Eigen::LDLT<Eigen::MatrixXd>>(hhat);
  KktSolver solver(sys);
  solver.set_rho_block_inverse([llt](const Vector& b) {
    Eigen::VectorXd x = llt->solve(Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())));
    return Vector(x.data(), x.data() + x.size());
  });
  return solver.solve_fullspace_gmres(Preconditioner::BlockGS, rel_tol, 20).second;
}

std::vector<double> lanczos_leading(const LinearOperator& hd, const LinearOperator& b, const LinearOperator& b_inv,
                                    int count, int steps, std::uint64_t seed) {
  const int n = hd.size;
  steps = std::min(steps, n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Vector v(n);
  for (double& x : v) x = nd(rng);
  std::vector<Vector> basis, bbasis;  // v_j and B v_j
  std::vector<double> alpha, beta;
  auto bnorm = [&](const Vector& x, Vector& bx) {
    bx = b(x);
    return std::sqrt(std::max(0.0, dot(x, bx)));
  };
  Vector bv;
  double nv = bnorm(v, bv);
  scale(1.0 / nv, v);
  scale(1.0 / nv, bv);
  for (int j = 0; j < steps; ++j) {
    basis.push_back(v);
    bbasis.push_back(bv);
    const Vector hv = hd(v);
    Vector w = b_inv(hv);
    alpha.push_back(dot(v, hv));
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < basis.size(); ++i) axpy(-dot(bbasis[i], w), basis[i], w);
    }
    Vector bw;
    const double nb = bnorm(w, bw);
    if (j + 1 == steps || nb < 1e-14 * std::abs(alpha.front())) break;
    beta.push_back(nb);
    v = std::move(w);
    bv = std::move(bw);
    scale(1.0 / nb, v);
    scale(1.0 / nb, bv);
  }
  const int m = static_cast<int>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + m);
  std::sort(out.rbegin(), out.rend());
  out.resize(std::min(count, m));
  return out;
}

std::vector<DecayRow> spectrum_decay_study(const std::vector<int>& meshes, const std::vector<double>& mus, int count,
                                           double gamma) {
  std::vector<DecayRow> rows;
  for (int n : meshes) {
    ProblemConfig cfg;
    cfg.gamma1 = cfg.gamma2 = gamma;
    cfg.noise_level = 0.0;
    ModelProblem problem(n, cfg);
    for (double mu : mus) {
      const IpmState st = snapshot_state(problem, mu, 0.1);
      const KktSystem sys = build_kkt(problem, st);
      std::vector<double> lh, lw;
      if (n < 32) {
        const DenseKkt d = dense_from_system(sys, problem.mass(), 0.0);
        lh = pencil_eigs(d.Hd, d.H_rr);
        lw = pencil_eigs(d.Hd, d.W);
      } else {
        KktSolver solver(sys);
        MultigridSolver hrr(sys.H_rr, n), w(sys.W, n);
        LinearOperator hd(sys.n, [&](std::span<const double> x, std::span<double> y) {
          const Vector r = solver.apply_Hd(Vector(x.begin(), x.end()));
          std::copy(r.begin(), r.end(), y.begin());
        });
        auto inverse = [](const MultigridSolver& mg) {
          return LinearOperator(mg.size(), [&mg](std::span<const double> x, std::span<double> y) {
            auto [r, rep] = mg.solve(Vector(x.begin(), x.end()), 1e-13);
            std::copy(r.begin(), r.end(), y.begin());
          });
        };
        const int steps = 3 * count + 20;
        lh = lanczos_leading(hd, LinearOperator::from_matrix(sys.H_rr), inverse(hrr), count, steps);
        lw = lanczos_leading(hd, LinearOperator::from_matrix(sys.W), inverse(w), count, steps);
      }
      const int k = std::min<int>(count, static_cast<int>(std::min(lh.size(), lw.size())));
      for (int i = 0; i < k; ++i) rows.push_back({n, mu, i, lh[i], lw[i]});
    }
  }
  return rows;
}

void write_decay_csv(const std::string& path, const std::vector<DecayRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << std::setprecision(17) << "n,mu,index,lambda_hrr_hd,lambda_w_hd\n";
  for (const auto& r : rows) out << r.n_cells << ',' << r.mu << ',' << r.index << ',' << r.lambda_hrr << ',' << r.lambda_w << '\n';
}

void write_kkt_blocks(const std::string& dir, const KktSystem& sys, const SparseMatrix& mass) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path p(dir);
  write_matrix_market((p / "H_uu.mtx").string(), sys.H_uu, "H_uu");
  write_matrix_market((p / "H_rr.mtx").string(), sys.H_rr, "H_rr");
  write_matrix_market((p / "W.mtx").string(), sys.W, "W");
  write_matrix_market((p / "J_u.mtx").string(), sys.J_u, "J_u");
  write_matrix_market((p / "J_rho.mtx").string(), sys.J_rho, "J_rho");
  write_matrix_market((p / "M.mtx").string(), mass, "M");
}

DenseKkt read_dense_kkt(const std::string& dir, double mu, double epsilon) {
  const std::filesystem::path p(dir);
  auto rd = [&](const char* name) { return to_dense(read_matrix_market((p / name).string())); };
  return dense_from_blocks(rd("M.mtx"), rd("H_uu.mtx"), rd("H_rr.mtx"), rd("W.mtx"), rd("J_u.mtx"), rd("J_rho.mtx"), mu,
                           epsilon);
}

}  // namespace ipgn::spectral

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "ipgn/krylov.hpp"
#include "ipgn/matrix_market.hpp"
#include "ipgn/mesh_fem.hpp"
#include "ipgn/multigrid.hpp"
#include "ipgn/sparse_matrix.hpp"

using namespace ipgn;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& a) {
  Eigen::MatrixXd d(a.rows(), a.cols());
  const auto v = a.to_dense();
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) d(i, j) = v[i * a.cols() + j];
  return d;
}

SparseMatrix from_dense(const Eigen::MatrixXd& d) {
  std::vector<Triplet> t;
  for (int i = 0; i < d.rows(); ++i)
    for (int j = 0; j < d.cols(); ++j)
      if (d(i, j) != 0.0) t.push_back({i, j, d(i, j)});
  return SparseMatrix::from_triplets(d.rows(), d.cols(), t);
}

Eigen::VectorXd ev(const Vector& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

Vector random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(SparseMatrix, IdentityAndZeroProducts) {
  Vector x{1.0, -2.0, 3.5};
  EXPECT_EQ(SparseMatrix::identity(3) * x, x);
  EXPECT_EQ(SparseMatrix::zero(3, 3) * x, Vector(3, 0.0));
}

TEST(SparseMatrix, RandomProductMatchesDense) {
  std::mt19937_64 rng(1);
  Eigen::MatrixXd d = Eigen::MatrixXd::Random(5, 5);
  d(1, 2) = d(3, 0) = 0.0;
  SparseMatrix a = from_dense(d);
  Vector x = random_vector(5, rng);
  Eigen::VectorXd y = d * ev(x);
  Vector ys = a * x;
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(ys[i], y(i), 1e-14);
  Vector yt = a.transpose_times(x);
  Eigen::VectorXd ytd = d.transpose() * ev(x);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(yt[i], ytd(i), 1e-14);
}

TEST(SparseMatrix, ShapeMismatchThrows) {
  SparseMatrix a = SparseMatrix::identity(3);
  EXPECT_THROW(a * Vector(4, 1.0), ShapeError);
  EXPECT_THROW(SparseMatrix::add(1.0, a, 1.0, SparseMatrix::identity(2)), ShapeError);
}

TEST(SparseMatrix, TripletsSumDuplicatesAndSortColumns) {
  SparseMatrix a = SparseMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 2, 0.5}, {1, 0, -1.0}});
  EXPECT_EQ(a.nnz(), 3u);
  EXPECT_DOUBLE_EQ(a.at(1, 2), 1.5);
  EXPECT_DOUBLE_EQ(a.at(1, 0), -1.0);
  EXPECT_DOUBLE_EQ(a.at(0, 0), 0.0);
  for (int i = 0; i < a.rows(); ++i)
    for (int k = a.row_ptr()[i] + 1; k < a.row_ptr()[i + 1]; ++k) EXPECT_LT(a.col_idx()[k - 1], a.col_idx()[k]);
}

TEST(SparseMatrix, AlgebraMatchesDense) {
  Eigen::MatrixXd da = Eigen::MatrixXd::Random(6, 4);
  Eigen::MatrixXd db = Eigen::MatrixXd::Random(4, 5);
  Eigen::MatrixXd dc = Eigen::MatrixXd::Random(6, 4);
  da(2, 3) = 0.0;
  SparseMatrix a = from_dense(da), b = from_dense(db), c = from_dense(dc);
  EXPECT_LT((dense(SparseMatrix::multiply(a, b)) - da * db).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((dense(SparseMatrix::add(2.0, a, -0.5, c)) - (2.0 * da - 0.5 * dc)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ((dense(a.transpose()) - da.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LinearOperator, LinearityProbe) {
  std::mt19937_64 rng(3);
  SparseMatrix m = assemble_mass(build_mesh(4));
  LinearOperator op = LinearOperator::from_matrix(m);
  Vector x = random_vector(op.size, rng), y = random_vector(op.size, rng);
  const double a = 0.7, b = -1.3;
  Vector lhs = op(a * x + b * y);
  Vector rhs = a * op(x) + b * op(y);
  for (int i = 0; i < op.size; ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-10);
}

TEST(Cg, IdentityConvergesInOneIteration) {
  Vector b{1.0, 2.0, -3.0};
  auto [x, rep] = cg_solve(LinearOperator::identity(3), LinearOperator::identity(3), b, 1e-12, 10);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterations, 1);
  EXPECT_EQ(rep.history.size(), 2u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(x[i], b[i], 1e-15);
}

TEST(Cg, TwoByTwoDiagonal) {
  Vector d{1.0, 4.0};
  SparseMatrix a = SparseMatrix::diagonal(d);
  auto [x, rep] = cg_solve(LinearOperator::from_matrix(a), LinearOperator::identity(2), Vector{1.0, 1.0}, 1e-14, 10);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(rep.iterations, 2);
  EXPECT_NEAR(x[0], 1.0, 1e-14);
  EXPECT_NEAR(x[1], 0.25, 1e-14);
}

TEST(Cg, RandomSpdMatchesDenseAndAnormErrorDecreases) {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd r = Eigen::MatrixXd::Random(10, 10);
  Eigen::MatrixXd spd = r * r.transpose() + 0.5 * Eigen::MatrixXd::Identity(10, 10);
  SparseMatrix a = from_dense(spd);
  Vector b = random_vector(10, rng);
  Eigen::VectorXd xs = spd.llt().solve(ev(b));
  auto [x, rep] = cg_solve(LinearOperator::from_matrix(a), LinearOperator::identity(10), b, 1e-12, 100);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE((ev(x) - xs).norm() / xs.norm(), 1e-10);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= rep.iterations; ++k) {
    auto [xk, rk] = cg_solve(LinearOperator::from_matrix(a), LinearOperator::identity(10), b, 0.0, k);
    Eigen::VectorXd e = ev(xk) - xs;
    const double anorm = std::sqrt(e.dot(spd * e));
    EXPECT_LE(anorm, prev * (1 + 1e-12) + 1e-14);
    prev = anorm;
  }
}

TEST(Cg, IndefiniteOperatorThrowsWithIterate) {
  SparseMatrix a = SparseMatrix::diagonal(Vector{1.0, -1.0});
  try {
    cg_solve(LinearOperator::from_matrix(a), LinearOperator::identity(2), Vector{0.0, 1.0}, 1e-12, 10);
    FAIL() << "expected IndefiniteOperatorError";
  } catch (const IndefiniteOperatorError& e) {
    EXPECT_EQ(e.iterate().size(), 2u);
    EXPECT_EQ(e.iteration(), 0);
  }
}

TEST(Cg, MaxItGivesNonConvergedReport) {
  Vector d{1.0, 2.0, 3.0, 4.0};
  auto [x, rep] = cg_solve(LinearOperator::from_matrix(SparseMatrix::diagonal(d)), LinearOperator::identity(4),
                           Vector(4, 1.0), 1e-14, 1);
  EXPECT_FALSE(rep.converged);
  EXPECT_EQ(rep.iterations, 1);
}

TEST(Gmres, IdentityOneIteration) {
  auto [x, rep] = gmres_solve(LinearOperator::identity(4), LinearOperator::identity(4), Vector{1, 2, 3, 4}, 1e-12, 10);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterations, 1);
  EXPECT_NEAR(x[3], 4.0, 1e-14);
}

TEST(Gmres, IdentityPlusRankOneTwoIterations) {
  std::mt19937_64 rng(11);
  const int n = 15;
  Vector u = random_vector(n, rng), v = random_vector(n, rng), b = random_vector(n, rng);
  LinearOperator op(n, [&](std::span<const double> x, std::span<double> y) {
    const double s = dot(v, x);
    for (int i = 0; i < n; ++i) y[i] = x[i] + u[i] * s;
  });
  auto [x, rep] = gmres_solve(op, LinearOperator::identity(n), b, 1e-12, 10);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(rep.iterations, 2);
}

TEST(Gmres, RandomNonsymmetricMatchesDenseAndHistoryMonotone) {
  std::mt19937_64 rng(13);
  Eigen::MatrixXd d = Eigen::MatrixXd::Random(20, 20) + 4.0 * Eigen::MatrixXd::Identity(20, 20);
  SparseMatrix a = from_dense(d);
  Vector b = random_vector(20, rng);
  Eigen::VectorXd xs = d.partialPivLu().solve(ev(b));
  auto [x, rep] = gmres_solve(LinearOperator::from_matrix(a), LinearOperator::identity(20), b, 1e-12, 40);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE((ev(x) - xs).norm() / xs.norm(), 1e-10);
  EXPECT_EQ(rep.history.size(), static_cast<std::size_t>(rep.iterations + 1));
  for (std::size_t k = 1; k < rep.history.size(); ++k) EXPECT_LE(rep.history[k], rep.history[k - 1] * (1 + 1e-14));
  Vector r = b - a * x;
  EXPECT_NEAR(norm2(r) / norm2(b), rep.relative_residual, 1e-10);
}

TEST(Gmres, LeftPreconditionedMonitorsPreconditionedResidual) {
  std::mt19937_64 rng(17);
  Eigen::MatrixXd d = Eigen::MatrixXd::Random(12, 12) + 3.0 * Eigen::MatrixXd::Identity(12, 12);
  SparseMatrix a = from_dense(d);
  Vector dinv(12);
  for (int i = 0; i < 12; ++i) dinv[i] = 1.0 / (1.0 + i);
  SparseMatrix p = SparseMatrix::diagonal(dinv);
  Vector b = random_vector(12, rng);
  auto [x, rep] = gmres_solve(LinearOperator::from_matrix(a), LinearOperator::from_matrix(p), b, 1e-6, 3);
  Vector pr = p * (b - a * x);
  EXPECT_NEAR(norm2(pr), rep.history.back(), 1e-10 * rep.history.front());
}

TEST(Gmres, RestartedStillConverges) {
  std::mt19937_64 rng(19);
  Eigen::MatrixXd d = Eigen::MatrixXd::Random(30, 30) + 6.0 * Eigen::MatrixXd::Identity(30, 30);
  SparseMatrix a = from_dense(d);
  Vector b = random_vector(30, rng);
  auto [x, rep] = gmres_solve(LinearOperator::from_matrix(a), LinearOperator::identity(30), b, 1e-10, 300, 5);
  EXPECT_TRUE(rep.converged);
  Eigen::VectorXd xs = d.partialPivLu().solve(ev(b));
  EXPECT_LE((ev(x) - xs).norm() / xs.norm(), 1e-8);
}

TEST(Multigrid, CompatibilityRule) {
  EXPECT_TRUE(multigrid_compatible(4));
  EXPECT_TRUE(multigrid_compatible(64));
  EXPECT_FALSE(multigrid_compatible(44));
  EXPECT_FALSE(multigrid_compatible(6));
}

TEST(Multigrid, ProlongationPreservesBilinearFunctions) {
  SparseMatrix p = bilinear_prolongation(4);
  StructuredMesh coarse(4), fine(8);
  auto f = [](double x, double y) { return 1.0 + 2.0 * x - 3.0 * y + 0.5 * x * y; };
  Vector vc = interpolate(coarse, f).values;
  Vector vf = p * vc;
  Vector ref = interpolate(fine, f).values;
  for (std::size_t i = 0; i < vf.size(); ++i) EXPECT_NEAR(vf[i], ref[i], 1e-14);
}

TEST(Multigrid, CoarsestLevelMatchesDense) {
  StructuredMesh mesh(4);
  SparseMatrix k = SparseMatrix::add(1.0, assemble_weighted_stiffness(mesh, 1.0), 1.0, assemble_mass(mesh));
  MultigridSolver mg(k, 4);
  EXPECT_EQ(mg.num_levels(), 1);
  std::mt19937_64 rng(5);
  Vector b = random_vector(k.rows(), rng);
  Vector x(b.size());
  mg.vcycle(b, x);
  Eigen::VectorXd xs = dense(k).llt().solve(ev(b));
  EXPECT_LE((ev(x) - xs).cwiseAbs().maxCoeff(), 1e-12 * xs.cwiseAbs().maxCoeff());
}

TEST(Multigrid, PoissonPlusMassN32) {
  StructuredMesh mesh(32);
  SparseMatrix k = SparseMatrix::add(1.0, assemble_weighted_stiffness(mesh, 1.0), 1.0, assemble_mass(mesh));
  MultigridSolver mg(k, 32);
  std::mt19937_64 rng(6);
  Vector b = random_vector(k.rows(), rng);
  auto [x, rep] = mg.solve(b, 1e-13);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(rep.iterations, 25);
  Vector r = b - k * x;
  EXPECT_LE(norm2(r) / norm2(b), 1e-10);
}

TEST(Multigrid, VcycleIsSymmetric) {
  for (int n : {16, 12}) {
    StructuredMesh mesh(n);
    SparseMatrix k = SparseMatrix::add(1e-3, assemble_weighted_stiffness(mesh, 1.0), 1e-3, assemble_mass(mesh));
    MultigridSolver mg(k, n);
    std::mt19937_64 rng(n);
    Vector x = random_vector(k.rows(), rng), y = random_vector(k.rows(), rng);
    Vector vx(x.size()), vy(y.size());
    mg.vcycle(x, vx);
    mg.vcycle(y, vy);
    EXPECT_NEAR(dot(vx, y), dot(x, vy), 1e-10 * std::abs(dot(vx, y)));
  }
}

TEST(Multigrid, MeshIndependentIterations) {
  auto iters = [](int n) {
    StructuredMesh mesh(n);
    SparseMatrix k = SparseMatrix::add(1e-3, assemble_weighted_stiffness(mesh, 1.0), 1e-3, assemble_mass(mesh));
    MultigridSolver mg(k, n);
    std::mt19937_64 rng(21);
    auto [x, rep] = mg.solve(random_vector(k.rows(), rng), 1e-13);
    EXPECT_TRUE(rep.converged);
    return rep.iterations;
  };
  const int i32 = iters(32), i128 = iters(128);
  EXPECT_LE(std::abs(i32 - i128), 5) << i32 << " vs " << i128;
}

TEST(Multigrid, BarrierDiagonalDoesNotHurt) {
  const int n = 32;
  StructuredMesh mesh(n);
  SparseMatrix k = SparseMatrix::add(1e-3, assemble_weighted_stiffness(mesh, 1.0), 1e-3, assemble_mass(mesh));
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  Vector d(k.rows());
  for (double& v : d) v = std::pow(10.0, u(rng));
  SparseMatrix kd = SparseMatrix::add(1.0, k, 1.0, SparseMatrix::diagonal(d));
  Vector b = random_vector(k.rows(), rng);
  auto [x0, r0] = MultigridSolver(k, n).solve(b, 1e-13);
  auto [x1, r1] = MultigridSolver(kd, n).solve(b, 1e-13);
  EXPECT_TRUE(r0.converged);
  EXPECT_TRUE(r1.converged);
  EXPECT_LE(r1.iterations, r0.iterations + 2);
}

TEST(Multigrid, FallbackOnNonDyadicMesh) {
  const int n = 44;
  StructuredMesh mesh(n);
  SparseMatrix k = SparseMatrix::add(1.0, assemble_weighted_stiffness(mesh, 1.0), 1.0, assemble_mass(mesh));
  MultigridSolver mg(k, n);
  EXPECT_TRUE(mg.is_fallback());
  std::mt19937_64 rng(29);
  Vector b = random_vector(k.rows(), rng);
  auto [x, rep] = mg.solve(b, 1e-12);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(norm2(b - k * x) / norm2(b), 1e-9);
}

TEST(MatrixMarket, RoundTripGeneral) {
  SparseMatrix a = SparseMatrix::from_triplets(3, 4, {{0, 0, 1.0 / 3.0}, {2, 3, -2.5e-17}, {1, 1, 7.0}});
  std::stringstream ss;
  write_matrix_market(ss, a, "test");
  SparseMatrix b = read_matrix_market(ss);
  EXPECT_EQ(b.rows(), 3);
  EXPECT_EQ(b.cols(), 4);
  EXPECT_EQ(b.values(), a.values());
  EXPECT_EQ(b.col_idx(), a.col_idx());
}

TEST(MatrixMarket, SymmetricExpandsBothTriangles) {
  std::stringstream ss("%%MatrixMarket matrix coordinate real symmetric\n% c\n3 3 3\n1 1 2.0\n3 1 -1.0\n2 2 4\n");
  SparseMatrix a = read_matrix_market(ss);
  EXPECT_DOUBLE_EQ(a.at(0, 2), -1.0);
  EXPECT_DOUBLE_EQ(a.at(2, 0), -1.0);
  EXPECT_EQ(a.nnz(), 4u);
}

TEST(MatrixMarket, RejectsArrayFormat) {
  std::stringstream ss("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
  EXPECT_THROW(read_matrix_market(ss), std::runtime_error);
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "ipgn/problem.hpp"
#include "oracles.hpp"

using namespace ipgn;
using std::numbers::pi;

namespace {

Vector random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (double& x : v) x = scale * g(rng);
  return v;
}

ProblemConfig quiet_config() {
  ProblemConfig c;
  c.noise_level = 0.05;
  c.seed = 42;
  return c;
}

double dual_norm(const ModelProblem& p, const Vector& v) { return p.dual_norm(v); }

}  // namespace

TEST(ExactFields, PointValues) {
  for (double y2 : {0.0, 0.3, 1.0}) EXPECT_NEAR(exact::u_d(0.5, y2), 0.0, 1e-16);
  EXPECT_DOUBLE_EQ(exact::rho_true(0, 0), 1.0);
  EXPECT_NEAR(exact::rho_true(1, 1), 1.0 + std::exp(-1.0), 1e-15);
  EXPECT_NEAR(exact::rho_true(1, 1), 1.36788, 1e-5);
}

TEST(ExactFields, ForcingMatchesSymbolicOracle) {
  // values from symbolic differentiation of -div(rho grad u) + u + u^3/3
  EXPECT_NEAR(exact::forcing(0.0, 0.0), 2 * pi * pi + 4.0 / 3.0, 1e-13);
  EXPECT_NEAR(exact::forcing(0.0, 0.0), 21.072542135512050571, 1e-13);
  EXPECT_NEAR(exact::forcing(0.5, 0.5), 0.0, 1e-14);
  EXPECT_NEAR(exact::forcing(0.3, 0.7), -9.6031231019292252310, 1e-13);
  EXPECT_NEAR(exact::forcing(0.9, 0.2), -18.367336435976571138, 1e-13);
  EXPECT_NEAR(exact::forcing(1.0, 1.0), 28.334191238823972434, 1e-13);
}

TEST(Config, Validation) {
  ProblemConfig c;
  c.gamma1 = c.gamma2 = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ProblemConfig{};
  c.noise_level = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ProblemConfig{};
  c.corr_len = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ProblemConfig{};
  c.gamma_zeta = 0.0;
  c.corr_len = 1e-300;
  c.delta_zeta = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_DOUBLE_EQ(ProblemConfig{}.effective_gamma_zeta(), 0.25 * 0.25 / 8.0);
}

TEST(Noise, ZeroLevelGivesZero) {
  StructuredMesh m(8);
  ProblemConfig c;
  c.noise_level = 0.0;
  std::mt19937_64 rng(1);
  EXPECT_EQ(sample_noise(m, c, rng), Vector(m.num_nodes(), 0.0));
}

TEST(Noise, DeterministicAndScaled) {
  StructuredMesh m(16);
  ProblemConfig c = quiet_config();
  std::mt19937_64 r1(7), r2(7);
  Vector z1 = sample_noise(m, c, r1);
  Vector z2 = sample_noise(m, c, r2);
  EXPECT_EQ(z1, z2);
  SparseMatrix mm = assemble_mass(m);
  Vector ud = interpolate(m, exact::u_d).values;
  const double ratio = std::sqrt(dot(z1, mm * z1)) / std::sqrt(dot(ud, mm * ud));
  EXPECT_NEAR(ratio, c.noise_level, 1e-12);
}

TEST(Noise, CorrelationLengthMonteCarlo) {
  const int n = 64;
  StructuredMesh m(n);
  ProblemConfig c = quiet_config();
  std::mt19937_64 rng(2024);
  const int w = n + 1;
  const int max_shift = n / 2;
  std::vector<double> cov(max_shift + 1, 0.0);
  std::vector<double> cnt(max_shift + 1, 0.0);
  for (int s = 0; s < 100; ++s) {
    Vector z = sample_noise(m, c, rng);
    for (int i2 = 0; i2 < w; ++i2)
      for (int i1 = 0; i1 < w; ++i1)
        for (int k = 0; k <= max_shift; ++k) {
          if (i1 + k < w) {
            cov[k] += z[i2 * w + i1] * z[i2 * w + i1 + k];
            cnt[k] += 1;
          }
          if (i2 + k < w) {
            cov[k] += z[i2 * w + i1] * z[(i2 + k) * w + i1];
            cnt[k] += 1;
          }
        }
  }
  std::vector<double> corr(max_shift + 1);
  for (int k = 0; k <= max_shift; ++k) corr[k] = (cov[k] / cnt[k]) / (cov[0] / cnt[0]);
  double half = -1.0;
  for (int k = 1; k <= max_shift; ++k) {
    if (corr[k] <= 0.5) {
      const double t = (corr[k - 1] - 0.5) / (corr[k - 1] - corr[k]);
      half = (k - 1 + t) * m.h();
      break;
    }
  }
  EXPECT_GE(half, 0.15);
  EXPECT_LE(half, 0.35);
}

TEST(SyntheticData, SaveLoadRoundTrip) {
  ProblemConfig c = quiet_config();
  StructuredMesh m(8);
  SyntheticData d = make_synthetic_data(m, c);
  const auto stem = (std::filesystem::temp_directory_path() / "ipgn_synth").string();
  d.save(stem);
  SyntheticData e = SyntheticData::load(stem);
  EXPECT_EQ(e.n_cells, 8);
  EXPECT_EQ(e.u_dzeta, d.u_dzeta);
  EXPECT_EQ(e.zeta, d.zeta);
  EXPECT_EQ(e.config.seed, c.seed);
  EXPECT_DOUBLE_EQ(e.config.gamma1, c.gamma1);
  std::filesystem::remove(stem + ".vtk");
  std::filesystem::remove(stem + ".json");
}

TEST(Constraint, ZeroStateIndependentOfRho) {
  ModelProblem p(8, quiet_config());
  Vector u(p.n_nodes(), 0.0);
  Vector r1(p.n_nodes(), 1.5), r2(p.n_nodes(), 3.0);
  Vector c1 = p.constraint(u, r1), c2 = p.constraint(u, r2);
  for (int i = 0; i < p.n_nodes(); ++i) EXPECT_NEAR(c1[i], c2[i], 1e-15);
}

TEST(Constraint, ForcingLoadMatchesOracle) {
  const int n = 4;
  ModelProblem p(n, quiet_config());
  Vector c = p.constraint(Vector(p.n_nodes(), 0.0), Vector(p.n_nodes(), 1.0));
  for (int i : {0, 7, 12, 24}) {
    const double ref =
        -oracle::integrate(n, [&](double x, double y) { return exact::forcing(x, y) * oracle::hat(n, i, x, y).value; });
    EXPECT_NEAR(c[i], ref, 2e-4 * std::max(1.0, std::abs(ref)));
  }
}

TEST(Constraint, ManufacturedResidualDecaysSecondOrder) {
  std::vector<double> r;
  for (int n : {8, 16, 32}) {
    ModelProblem p(n, quiet_config());
    Vector u = interpolate(p.mesh(), exact::u_d).values;
    Vector rho = interpolate(p.mesh(), exact::rho_true).values;
    r.push_back(dual_norm(p, p.constraint(u, rho)));
  }
  for (int k = 1; k < 3; ++k) EXPECT_GT(std::log2(r[k - 1] / r[k]), 1.7) << r[k - 1] << " " << r[k];
}

TEST(Jacobian, StateJacobianAtZeroIsStiffnessPlusMass) {
  ModelProblem p(6, quiet_config());
  std::mt19937_64 rng(3);
  Vector rho = random_vector(p.n_nodes(), rng, 0.1);
  for (double& v : rho) v += 2.0;
  SparseMatrix ju = p.jacobian_u(Vector(p.n_nodes(), 0.0), rho);
  SparseMatrix ref = SparseMatrix::add(1.0, assemble_weighted_stiffness(p.mesh(), rho), 1.0, p.mass());
  SparseMatrix d = SparseMatrix::add(1.0, ju, -1.0, ref);
  EXPECT_LE(max_abs(d.values()), 1e-14);
  EXPECT_EQ(ju.asymmetry(), 0.0);
}

TEST(Jacobian, ParameterJacobianVanishesForConstantState) {
  ModelProblem p(6, quiet_config());
  SparseMatrix jr = p.jacobian_rho(Vector(p.n_nodes(), 0.7));
  EXPECT_LE(max_abs(jr.values()), 1e-14);
}

TEST(Jacobian, StateDirectionalFiniteDifference) {
  ModelProblem p(16, quiet_config());
  std::mt19937_64 rng(5);
  Vector u = interpolate(p.mesh(), exact::u_d).values;
  Vector rho = interpolate(p.mesh(), exact::rho_true).values;
  Vector v = random_vector(p.n_nodes(), rng);
  const Vector c0 = p.constraint(u, rho);
  const Vector jv = p.jacobian_u(u, rho) * v;
  std::vector<double> err;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    Vector up = u;
    axpy(eps, v, up);
    Vector d = p.constraint(up, rho) - c0;
    scale(1.0 / eps, d);
    err.push_back(norm2(d - jv) / norm2(jv));
  }
  EXPECT_NEAR(err[0] / err[1], 10.0, 1.0);
  EXPECT_NEAR(err[1] / err[2], 10.0, 1.0);
}

TEST(Jacobian, ConstraintIsExactlyLinearInRho) {
  ModelProblem p(8, quiet_config());
  std::mt19937_64 rng(6);
  Vector u = random_vector(p.n_nodes(), rng);
  Vector rho = random_vector(p.n_nodes(), rng);
  Vector w = random_vector(p.n_nodes(), rng);
  Vector d = p.constraint(u, rho + w) - p.constraint(u, rho);
  Vector jw = p.jacobian_rho(u) * w;
  EXPECT_LE(max_abs(d - jw), 1e-12 * max_abs(jw));
}

TEST(Jacobian, ParameterJacobianMatchesOracle) {
  const int n = 4;
  ModelProblem p(n, quiet_config());
  Vector u = interpolate(p.mesh(), [](double x, double y) { return std::sin(2 * x) + x * y * y; }).values;
  SparseMatrix jr = p.jacobian_rho(u);
  for (int i : {0, 6, 12}) {
    for (int j : {0, 1, 6, 7, 11, 12, 13}) {
      const double ref = oracle::integrate(n, [&](double x, double y) {
        auto hi = oracle::hat(n, i, x, y);
        auto ue = oracle::q1_eval(u, n, x, y);
        return oracle::hat(n, j, x, y).value * (ue.dx * hi.dx + ue.dy * hi.dy);
      });
      EXPECT_NEAR(jr.at(i, j), ref, 1e-13);
    }
  }
}

TEST(Objective, GradientsAndHessians) {
  ModelProblem p(8, quiet_config());
  const Vector& d = p.data().u_dzeta;
  EXPECT_LE(max_abs(p.grad_u(d)), 0.0);
  EXPECT_EQ(p.misfit(d), 0.0);
  EXPECT_EQ(p.grad_rho(Vector(p.n_nodes(), 0.0)), Vector(p.n_nodes(), 0.0));
  SparseMatrix ref = SparseMatrix::add(p.config().gamma1, p.mass(), p.config().gamma2, p.stiffness());
  EXPECT_LE(max_abs(SparseMatrix::add(1.0, p.H_rr(), -1.0, ref).values()), 0.0);
  EXPECT_EQ(p.H_uu().asymmetry(), 0.0);
}

TEST(Objective, FiniteDifferenceSlope) {
  ModelProblem p(16, quiet_config());
  std::mt19937_64 rng(8);
  Vector u = random_vector(p.n_nodes(), rng);
  Vector rho = random_vector(p.n_nodes(), rng);
  Vector du = random_vector(p.n_nodes(), rng), dr = random_vector(p.n_nodes(), rng);
  const double f0 = p.objective(u, rho);
  const double gu = dot(p.grad_u(u), du), gr = dot(p.grad_rho(rho), dr);
  std::vector<double> su, sr;
  for (double eps : {1e-3, 1e-4, 1e-5}) {
    su.push_back((p.objective(u + eps * du, rho) - f0 - eps * gu) / (eps * eps));
    sr.push_back((p.objective(u, rho + eps * dr) - f0 - eps * gr) / (eps * eps));
  }
  const double cu = 0.5 * dot(du, p.H_uu() * du), cr = 0.5 * dot(dr, p.H_rr() * dr);
  for (double s : su) EXPECT_NEAR(s, cu, 1e-3 * cu);
  for (double s : sr) EXPECT_NEAR(s, cr, 1e-3 * cr);
}

TEST(StateSolve, ReachesFeasibility) {
  ModelProblem p(16, quiet_config());
  Vector rho = interpolate(p.mesh(), exact::rho_true).values;
  Vector u = p.solve_state(rho, {});
  EXPECT_LE(p.dual_norm(p.constraint(u, rho)), 1e-10);
  Vector ud = interpolate(p.mesh(), exact::u_d).values;
  EXPECT_LE(p.mass_norm(u - ud) / p.mass_norm(ud), 0.02);
}

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "ipgn/errors.hpp"
#include "ipgn/ipm.hpp"

using namespace ipgn;

namespace {

ProblemConfig quiet() {
  ProblemConfig c;
  c.noise_level = 0.0;
  return c;
}

IpmState random_state(const ModelProblem& p, std::mt19937_64& rng, double mu) {
  std::uniform_real_distribution<double> uni(0.2, 1.5);
  std::normal_distribution<double> g;
  IpmState s;
  s.mu = mu;
  const int n = p.n_nodes();
  s.u.resize(n);
  s.rho.resize(n);
  s.lambda.resize(n);
  s.z.resize(n);
  for (int i = 0; i < n; ++i) {
    s.u[i] = 0.3 * g(rng);
    s.rho[i] = p.config().rho_lower + uni(rng);
    s.lambda[i] = 0.1 * g(rng);
    s.z[i] = uni(rng);
  }
  return s;
}

// Central differences of a scalar functional in one block of variables.
Vector fd_gradient(const std::function<double(const Vector&)>& f, Vector x, double h = 1e-5) {
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// Fields with zero normal derivative, so that all residuals are L2 functions.
IpmState smooth_state(const ModelProblem& p) {
  const auto& mesh = p.mesh();
  const double pi = std::acos(-1.0);
  IpmState s;
  s.mu = 0.01;
  s.u = interpolate(mesh, [pi](double x, double y) { return std::cos(pi * x) * std::cos(pi * y); }).values;
  s.rho = interpolate(mesh, [pi](double x, double y) { return 1.5 + 0.3 * std::cos(pi * x) * std::cos(2 * pi * y); },
                      Space::Parameter).values;
  s.lambda = interpolate(mesh, [pi](double x, double) { return 0.1 * std::cos(pi * x); }).values;
  s.z = interpolate(mesh, [](double x, double) { return 0.2 + x; }, Space::Parameter).values;
  return s;
}

double relerr(const Vector& a, const Vector& b) { return norm2(a - b) / std::max(norm2(b), 1e-300); }

double consistent_dual_norm(const ModelProblem& p, const Vector& v) {
  const auto d = p.mass().to_dense();
  const int n = p.n_nodes();
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(d.data(), n, n);
  const Eigen::Map<const Eigen::VectorXd> x(v.data(), n);
  return std::sqrt(x.dot(m.llt().solve(x)));
}

}  // namespace

TEST(BarrierObjective, ZeroMuIsObjective) {
  ModelProblem p(4, ProblemConfig{});
  std::mt19937_64 rng(1);
  const IpmState s = random_state(p, rng, 0.1);
  EXPECT_EQ(barrier_objective(p, s.u, s.rho, 0.0), p.objective(s.u, s.rho));
}

TEST(BarrierObjective, UnitGapHasNoBarrierTerm) {
  ModelProblem p(4, ProblemConfig{});
  std::mt19937_64 rng(2);
  IpmState s = random_state(p, rng, 0.1);
  std::fill(s.rho.begin(), s.rho.end(), p.config().rho_lower + 1.0);
  EXPECT_DOUBLE_EQ(barrier_objective(p, s.u, s.rho, 0.7), p.objective(s.u, s.rho));
}

TEST(BarrierObjective, GapEIsMinusMu) {
  ModelProblem p(2, ProblemConfig{});
  const Vector u(p.n_nodes(), 0.2);
  const Vector rho(p.n_nodes(), p.config().rho_lower + std::exp(1.0));
  const double mu = 0.37;
  EXPECT_NEAR(barrier_objective(p, u, rho, mu) - p.objective(u, rho), -mu, 1e-14);
}

TEST(BarrierObjective, RejectsBoundaryPoint) {
  ModelProblem p(2, ProblemConfig{});
  Vector rho(p.n_nodes(), 2.0);
  rho[4] = p.config().rho_lower;
  EXPECT_THROW(barrier_objective(p, Vector(p.n_nodes(), 0.0), rho, 0.1), InteriorViolation);
}

TEST(KktResiduals, CentralComplementarity) {
  ModelProblem p(4, ProblemConfig{});
  std::mt19937_64 rng(3);
  IpmState s = random_state(p, rng, 0.2);
  std::fill(s.lambda.begin(), s.lambda.end(), 0.0);
  for (int i = 0; i < p.n_nodes(); ++i) s.z[i] = s.mu / (s.rho[i] - p.config().rho_lower);
  const KktResiduals r = kkt_residuals(p, s, s.mu);
  EXPECT_LT(max_abs(r.r_z), 1e-15);
}

TEST(KktResiduals, MatchLagrangianDifferences) {
  ModelProblem p(4, ProblemConfig{});
  std::mt19937_64 rng(4);
  const IpmState s = random_state(p, rng, 0.05);
  const KktResiduals r = kkt_residuals(p, s, s.mu);
  const auto lag_u = [&](const Vector& u) { return p.objective(u, s.rho) + dot(s.lambda, p.constraint(u, s.rho)); };
  const auto lag_r = [&](const Vector& rho) { return p.objective(s.u, rho) + dot(s.lambda, p.constraint(s.u, rho)); };
  EXPECT_LT(relerr(r.r_u, fd_gradient(lag_u, s.u)), 1e-7);
  Vector gr = fd_gradient(lag_r, s.rho);
  for (int i = 0; i < p.n_nodes(); ++i) gr[i] -= p.lumped()[i] * s.z[i];
  EXPECT_LT(relerr(r.r_rho, gr), 1e-7);
  EXPECT_LT(relerr(r.r_lambda, p.constraint(s.u, s.rho)), 1e-15);
  for (int i = 0; i < p.n_nodes(); ++i)
    EXPECT_NEAR(r.r_z[i], s.z[i] * (s.rho[i] - p.config().rho_lower) - s.mu, 1e-15);
}

TEST(ErrorMeasures, TotalIsScaledMaximum) {
  ModelProblem p(8, ProblemConfig{});
  std::mt19937_64 rng(5);
  const IpmState s = random_state(p, rng, 0.05);
  const ErrorMeasures e = error_measures(p, s, s.mu);
  EXPECT_DOUBLE_EQ(e.e_total, std::max({e.e_stat / e.s_d, e.e_feas, e.e_compl / e.s_c}));
  EXPECT_EQ(e.s_c, 1.0);
  EXPECT_EQ(e.s_d, 1.0);
}

TEST(ErrorMeasures, ScalingActivatesForLargeDuals) {
  ModelProblem p(8, ProblemConfig{});
  std::mt19937_64 rng(6);
  IpmState s = random_state(p, rng, 0.05);
  for (double& z : s.z) z *= 1e3;
  const ErrorMeasures e = error_measures(p, s, s.mu, 100.0);
  EXPECT_NEAR(e.s_c, p.mass_norm(s.z) / 100.0, 1e-12);
  EXPECT_GT(e.s_d, 1.0);
}

TEST(ErrorMeasures, ComplementarityVanishesOnCentralPath) {
  ModelProblem p(8, ProblemConfig{});
  std::mt19937_64 rng(7);
  IpmState s = random_state(p, rng, 0.05);
  for (int i = 0; i < p.n_nodes(); ++i) s.z[i] = s.mu / (s.rho[i] - p.config().rho_lower);
  EXPECT_LT(error_measures(p, s, s.mu).e_compl, 1e-15);
}

TEST(ErrorMeasures, LumpedDualNormsCloseToConsistent) {
  ModelProblem p(16, quiet());
  const IpmState s = smooth_state(p);
  const KktResiduals r = kkt_residuals(p, s, s.mu);
  for (const Vector* v : {&r.r_u, &r.r_rho, &r.r_lambda}) {
    const double lumped = p.dual_norm(*v), full = consistent_dual_norm(p, *v);
    EXPECT_NEAR(lumped / full, 1.0, 0.15);
  }
}

TEST(ErrorMeasures, MeshConsistent) {
  auto fields = [](const ModelProblem& p) {
    const IpmState s = smooth_state(p);
    return error_measures(p, s, s.mu);
  };
  const ErrorMeasures a = fields(ModelProblem(16, quiet())), b = fields(ModelProblem(32, quiet()));
  EXPECT_NEAR(a.e_stat / b.e_stat, 1.0, 0.10);
  EXPECT_NEAR(a.e_feas / b.e_feas, 1.0, 0.10);
  EXPECT_NEAR(a.e_compl / b.e_compl, 1.0, 0.10);
}

TEST(FractionToBoundary, OutwardStepIsFull) {
  const auto [ap, ad] = fraction_to_boundary({0.5, 1.0}, {0.0, 3.0}, {1.0, 2.0}, {1.0, 0.0}, 0.1, 0.99);
  EXPECT_EQ(ap, 1.0);
  EXPECT_EQ(ad, 1.0);
}

TEST(FractionToBoundary, SingleComponentClosedForm) {
  const auto [ap, ad] = fraction_to_boundary({1.0}, {-2.0}, {1.0}, {0.0}, 0.5, 0.99);
  EXPECT_DOUBLE_EQ(ap, 0.495);
  EXPECT_EQ(ad, 1.0);
}

TEST(FractionToBoundary, TauFollowsMu) {
  const auto [ap, ad] = fraction_to_boundary({1.0}, {-2.0}, {1.0}, {-4.0}, 1e-4, 0.9);
  EXPECT_NEAR(ap, (1 - 1e-4) / 2, 1e-15);
  EXPECT_NEAR(ad, (1 - 1e-4) / 4, 1e-15);
}

TEST(FractionToBoundary, MatchesBisection) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(0.01, 2.0);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    const int n = 20;
    Vector gap(n), rh(n), z(n), zh(n);
    for (int i = 0; i < n; ++i) gap[i] = pos(rng), z[i] = pos(rng), rh[i] = 3 * g(rng), zh[i] = 3 * g(rng);
    const double mu = std::pow(10.0, -4 * pos(rng));
    const double tau = std::max(0.99, 1 - mu);
    const auto [ap, ad] = fraction_to_boundary(gap, rh, z, zh, mu, 0.99);
    auto largest = [&](const Vector& base, const Vector& step) {
      auto ok = [&](double a) {
        for (int i = 0; i < n; ++i)
          if (base[i] + a * step[i] < (1 - tau) * base[i]) return false;
        return true;
      };
      if (ok(1.0)) return 1.0;
      double lo = 0.0, hi = 1.0;
      for (int k = 0; k < 200; ++k) {
        const double m = 0.5 * (lo + hi);
        (ok(m) ? lo : hi) = m;
      }
      return lo;
    };
    EXPECT_NEAR(ap, largest(gap, rh), 1e-12);
    EXPECT_NEAR(ad, largest(z, zh), 1e-12);
  }
}

TEST(Filter, DominatedTrialRejected) {
  Filter f;
  f.add(1.0, 1.0);
  EXPECT_FALSE(f.acceptable(2.0, 2.0));
  EXPECT_TRUE(f.acceptable(0.5, 2.0));
  EXPECT_TRUE(f.acceptable(2.0, 0.5));
}

TEST(Filter, ThetaMaxBounds) {
  Filter f(10.0);
  EXPECT_FALSE(f.acceptable(10.0, -1e9));
  EXPECT_TRUE(f.acceptable(9.0, 1e9));
}

TEST(Filter, InsertPrunesDominated) {
  Filter f;
  f.add(3.0, 1.0);
  f.add(1.0, 3.0);
  f.add(2.0, 2.0);
  f.add(0.5, 0.5);
  ASSERT_EQ(f.entries().size(), 1u);
  EXPECT_EQ(f.entries()[0], std::make_pair(0.5, 0.5));
}

TEST(Filter, EntriesStayPareto) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Filter f;
  for (int k = 0; k < 300; ++k) {
    f.add(uni(rng), uni(rng));
    for (const auto& a : f.entries())
      for (const auto& b : f.entries())
        if (&a != &b) EXPECT_FALSE(a.first >= b.first && a.second >= b.second);
  }
}

TEST(IpmConfig, RejectsBadConstants) {
  IpmConfig c;
  c.kappa_mu = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.theta_mu = 2.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.tol = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.tau_min = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(IpmConfig{}.validate());
}

TEST(InitialState, ComplementarityHolds) {
  ModelProblem p(8, ProblemConfig{});
  const IpmState s = initial_state(p, IpmConfig{});
  EXPECT_LT(max_abs(kkt_residuals(p, s, s.mu).r_z), 1e-15);
}

class OuterLoop : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    problem_ = new ModelProblem(16, ProblemConfig{});
    result_ = new IpmResult(outer_loop(*problem_, IpmConfig{}));
  }
  static void TearDownTestSuite() {
    delete result_;
    delete problem_;
  }
  static ModelProblem* problem_;
  static IpmResult* result_;
};
ModelProblem* OuterLoop::problem_ = nullptr;
IpmResult* OuterLoop::result_ = nullptr;

TEST_F(OuterLoop, Converges) {
  EXPECT_TRUE(result_->converged);
  EXPECT_LE(result_->final_errors.e_total, 1e-6);
  EXPECT_LE(result_->steps(), 45);
}

TEST_F(OuterLoop, FinalIterateInterior) {
  const auto& s = result_->state;
  for (int i = 0; i < problem_->n_nodes(); ++i) {
    EXPECT_GT(s.rho[i] - problem_->config().rho_lower, 0.0);
    EXPECT_GT(s.z[i], 0.0);
  }
}

TEST_F(OuterLoop, MuMonotoneOverFourDecades) {
  const auto& r = result_->records;
  ASSERT_FALSE(r.empty());
  for (std::size_t k = 1; k < r.size(); ++k) EXPECT_LE(r[k].mu, r[k - 1].mu);
  EXPECT_GE(r.front().mu / r.back().mu, 1e4);
}

TEST_F(OuterLoop, PhaseExitWithinTolerance) {
  ASSERT_FALSE(result_->mu_at_phase_exit.empty());
  for (std::size_t k = 0; k < result_->mu_at_phase_exit.size(); ++k)
    EXPECT_LE(result_->e_total_at_phase_exit[k], IpmConfig{}.kappa_eps * result_->mu_at_phase_exit[k]);
}

TEST_F(OuterLoop, AcceptedStepsPassAudit) {
  ASSERT_EQ(result_->audit.size(), result_->records.size());
  for (const auto& a : result_->audit) {
    EXPECT_TRUE(audit_accepts(a, IpmConfig{})) << "step " << a.step;
    EXPECT_TRUE(a.filter_at_acceptance.acceptable(a.theta_trial, a.phi_trial));
    EXPECT_GT(a.alpha, 0.0);
    EXPECT_LE(a.alpha, a.alpha_max);
  }
}

TEST_F(OuterLoop, RecordsOnePerStep) {
  for (std::size_t k = 0; k < result_->records.size(); ++k) {
    const auto& r = result_->records[k];
    EXPECT_EQ(r.step, static_cast<int>(k) + 1);
    EXPECT_GT(r.krylov_iters, 0);
    EXPECT_GT(r.alpha_p, 0.0);
    EXPECT_LE(r.alpha_p, 1.0);
  }
}

TEST_F(OuterLoop, ReducedCgPathAgrees) {
  IpmConfig c;
  c.solver = SolverKind::CgReduced;
  const IpmResult cg = outer_loop(*problem_, c);
  ASSERT_TRUE(cg.converged);
  EXPECT_LT(relerr(cg.state.rho, result_->state.rho), 1e-4);
  EXPECT_NEAR(cg.steps(), result_->steps(), 3);
}

TEST(OuterLoopErrors, LineSearchFailureCarriesDiagnostics) {
  ModelProblem p(8, ProblemConfig{});
  IpmConfig c;
  c.alpha_min = 2.0;
  try {
    outer_loop(p, c);
    FAIL() << "expected a line-search failure";
  } catch (const LineSearchFailure& e) {
    EXPECT_GT(e.last_alpha, 0.0);
    EXPECT_NE(std::string(e.what()).find("restoration"), std::string::npos);
  }
}

TEST(OuterLoopErrors, MaxSteps) {
  ModelProblem p(8, ProblemConfig{});
  IpmConfig c;
  c.max_steps = 2;
  EXPECT_THROW(outer_loop(p, c), MaxStepsExceeded);
}

TEST(Records, CsvHeader) {
  EXPECT_EQ(records_csv_header(), "step,mu,e_stat,e_feas,e_compl,e_total,alpha_p,alpha_d,krylov_iters,inner_cg_total");
}

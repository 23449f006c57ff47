#include "ipgn/problem.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "ipgn/multigrid.hpp"

namespace ipgn {

using std::numbers::pi;

void ProblemConfig::validate() const {
  if (gamma1 < 0.0 || gamma2 < 0.0 || (gamma1 == 0.0 && gamma2 == 0.0)) {
    throw ConfigError("problem: gamma1 and gamma2 must be nonnegative and not both zero");
  }
  if (!std::isfinite(rho_lower)) throw ConfigError("problem: rho_lower must be finite");
  if (noise_level < 0.0) throw ConfigError("problem: noise level must be nonnegative");
  if (!(corr_len > 0.0)) throw ConfigError("problem: correlation length must be positive");
  if (delta_zeta < 0.0) throw ConfigError("problem: delta_zeta must be nonnegative");
  if (delta_zeta == 0.0 && !(effective_gamma_zeta() > 0.0)) {
    throw ConfigError("problem: noise operator is singular (gamma_zeta = delta_zeta = 0)");
  }
}

namespace exact {

double u_d(double y1, double y2) { return std::cos(pi * y1) * std::cos(pi * y2); }

double rho_true(double y1, double y2) { return 1.0 + y2 * std::exp(-y1 * y1); }

std::array<double, 2> grad_u_d(double y1, double y2) {
  return {-pi * std::sin(pi * y1) * std::cos(pi * y2), -pi * std::cos(pi * y1) * std::sin(pi * y2)};
}

std::array<double, 2> grad_rho_true(double y1, double y2) {
  const double e = std::exp(-y1 * y1);
  return {-2.0 * y1 * y2 * e, e};
}

double forcing(double y1, double y2) {
  const double u = u_d(y1, y2);
  const auto gu = grad_u_d(y1, y2);
  const auto gr = grad_rho_true(y1, y2);
  return 2.0 * pi * pi * rho_true(y1, y2) * u - (gr[0] * gu[0] + gr[1] * gu[1]) + u + u * u * u / 3.0;
}

}  // namespace exact

namespace {

nlohmann::json config_to_json(const ProblemConfig& c) {
  return {{"gamma1", c.gamma1},         {"gamma2", c.gamma2},         {"rho_lower", c.rho_lower},
          {"noise_level", c.noise_level}, {"corr_len", c.corr_len},   {"gamma_zeta", c.effective_gamma_zeta()},
          {"delta_zeta", c.delta_zeta}, {"seed", c.seed}};
}

ProblemConfig config_from_json(const nlohmann::json& j) {
  ProblemConfig c;
  c.gamma1 = j.at("gamma1");
  c.gamma2 = j.at("gamma2");
  c.rho_lower = j.at("rho_lower");
  c.noise_level = j.at("noise_level");
  c.corr_len = j.at("corr_len");
  c.gamma_zeta = j.at("gamma_zeta");
  c.delta_zeta = j.at("delta_zeta");
  c.seed = j.at("seed");
  return c;
}

}  // namespace

void SyntheticData::save(const std::string& stem) const {
  StructuredMesh mesh(n_cells);
  write_vtk(stem + ".vtk", mesh, {{"u_d", u_d}, {"zeta", zeta}, {"u_dzeta", u_dzeta}}, "synthetic data");
  nlohmann::json j;
  j["n_cells"] = n_cells;
  j["config"] = config_to_json(config);
  j["vtk"] = stem + ".vtk";
  std::ofstream f(stem + ".json");
  f << j.dump(2) << "\n";
}

SyntheticData SyntheticData::load(const std::string& stem) {
  std::ifstream f(stem + ".json");
  if (!f) throw std::runtime_error("SyntheticData::load: cannot open " + stem + ".json");
  nlohmann::json j = nlohmann::json::parse(f);
  SyntheticData d;
  d.n_cells = j.at("n_cells");
  d.config = config_from_json(j.at("config"));
  auto [n, fields] = read_vtk(stem + ".vtk");
  if (n != d.n_cells) throw std::runtime_error("SyntheticData::load: VTK grid does not match sidecar");
  d.u_d = fields.at("u_d");
  d.zeta = fields.at("zeta");
  d.u_dzeta = fields.at("u_dzeta");
  return d;
}

Vector sample_noise(const StructuredMesh& mesh, const ProblemConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const int nn = mesh.num_nodes();
  if (cfg.noise_level == 0.0) return Vector(nn, 0.0);
  const SparseMatrix m = assemble_mass(mesh);
  const SparseMatrix a = assemble_weighted_stiffness(mesh, 1.0);
  const SparseMatrix k = SparseMatrix::add(cfg.effective_gamma_zeta(), a, cfg.delta_zeta, m);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(nn);
  for (double& v : xi) v = normal(rng);
  MultigridSolver solver(k, mesh.n());
  auto [z1, r1] = solver.solve(m * xi, 1e-12);
  auto [z2, r2] = solver.solve(m * z1, 1e-12);
  if (!r1.converged || !r2.converged) throw InnerSolveError("noise", r2.iterations, r2.relative_residual);
  const Vector ud = interpolate(mesh, exact::u_d).values;
  const double target = cfg.noise_level * std::sqrt(dot(ud, m * ud));
  const double current = std::sqrt(dot(z2, m * z2));
  scale(target / current, z2);
  return z2;
}

SyntheticData make_synthetic_data(const StructuredMesh& mesh, const ProblemConfig& cfg) {
  SyntheticData d;
  d.n_cells = mesh.n();
  d.config = cfg;
  d.u_d = interpolate(mesh, exact::u_d).values;
  std::mt19937_64 rng(cfg.seed);
  d.zeta = sample_noise(mesh, cfg, rng);
  d.u_dzeta = d.u_d + d.zeta;
  return d;
}

ModelProblem::ModelProblem(int n_cells, const ProblemConfig& cfg)
    : mesh_(n_cells), cfg_(cfg), t3_(QuadratureRule::gauss(3)) {
  cfg_.validate();
  data_ = make_synthetic_data(mesh_, cfg_);
  build();
}

ModelProblem::ModelProblem(int n_cells, const ProblemConfig& cfg, SyntheticData data)
    : mesh_(n_cells), cfg_(cfg), data_(std::move(data)), t3_(QuadratureRule::gauss(3)) {
  cfg_.validate();
  if (static_cast<int>(data_.u_dzeta.size()) != mesh_.num_nodes()) throw ShapeError("ModelProblem: data size");
  build();
}

void ModelProblem::build() {
  m_ = assemble_mass(mesh_);
  a_ = assemble_weighted_stiffness(mesh_, 1.0);
  ml_ = lumped_mass(m_).diagonal_values();
  huu_ = assemble_left_half_mass(mesh_);
  hrr_ = SparseMatrix::add(cfg_.gamma1, m_, cfg_.gamma2, a_);
  const int nq = static_cast<int>(t3_.rule.weights.size());
  g_quad_.resize(static_cast<std::size_t>(mesh_.num_cells()) * nq);
  const double h = mesh_.h();
  for (int c = 0; c < mesh_.num_cells(); ++c) {
    const auto o = mesh_.cell_origin(c);
    for (int q = 0; q < nq; ++q) {
      g_quad_[c * nq + q] = exact::forcing(o[0] + h * t3_.rule.points[q][0], o[1] + h * t3_.rule.points[q][1]);
    }
  }
}

Vector ModelProblem::constraint(const Vector& u, const Vector& rho) const {
  const int nn = n_nodes();
  if (static_cast<int>(u.size()) != nn || static_cast<int>(rho.size()) != nn) throw ShapeError("constraint: sizes");
  Vector c(nn, 0.0);
  const double area = mesh_.h() * mesh_.h();
  const int nq = static_cast<int>(t3_.rule.weights.size());
  for (int cell = 0; cell < mesh_.num_cells(); ++cell) {
    const auto nodes = mesh_.cell_nodes(cell);
    for (int q = 0; q < nq; ++q) {
      const auto& phi = t3_.phi[q];
      const auto& dphi = t3_.dphi[q];
      double uq = 0.0, rq = 0.0, gx = 0.0, gy = 0.0;
      for (int a = 0; a < 4; ++a) {
        uq += u[nodes[a]] * phi[a];
        rq += rho[nodes[a]] * phi[a];
        gx += u[nodes[a]] * dphi[a][0];
        gy += u[nodes[a]] * dphi[a][1];
      }
      const double w = t3_.rule.weights[q];
      const double react = (uq + uq * uq * uq / 3.0 - g_quad_[cell * nq + q]) * area;
      for (int a = 0; a < 4; ++a) {
        // grad phi_a . grad u picks up 1/h^2, cancelled by the h^2 Jacobian
        c[nodes[a]] += w * (rq * (dphi[a][0] * gx + dphi[a][1] * gy) + phi[a] * react);
      }
    }
  }
  return c;
}

SparseMatrix ModelProblem::jacobian_u(const Vector& u, const Vector& rho) const {
  const double area = mesh_.h() * mesh_.h();
  const int nq = static_cast<int>(t3_.rule.weights.size());
  CellAssembler asm_(mesh_);
  for (int cell = 0; cell < mesh_.num_cells(); ++cell) {
    const auto nodes = mesh_.cell_nodes(cell);
    std::array<std::array<double, 4>, 4> local{};
    for (int q = 0; q < nq; ++q) {
      const auto& phi = t3_.phi[q];
      const auto& dphi = t3_.dphi[q];
      double uq = 0.0, rq = 0.0;
      for (int a = 0; a < 4; ++a) {
        uq += u[nodes[a]] * phi[a];
        rq += rho[nodes[a]] * phi[a];
      }
      const double w = t3_.rule.weights[q];
      const double react = (1.0 + uq * uq) * area;
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          local[a][b] += w * (rq * (dphi[a][0] * dphi[b][0] + dphi[a][1] * dphi[b][1]) + react * phi[a] * phi[b]);
        }
      }
    }
    asm_.add(nodes, local);
  }
  return asm_.finish();
}

SparseMatrix ModelProblem::jacobian_rho(const Vector& u) const {
  const int nq = static_cast<int>(t3_.rule.weights.size());
  CellAssembler asm_(mesh_);
  for (int cell = 0; cell < mesh_.num_cells(); ++cell) {
    const auto nodes = mesh_.cell_nodes(cell);
    std::array<std::array<double, 4>, 4> local{};
    for (int q = 0; q < nq; ++q) {
      const auto& phi = t3_.phi[q];
      const auto& dphi = t3_.dphi[q];
      double gx = 0.0, gy = 0.0;
      for (int a = 0; a < 4; ++a) {
        gx += u[nodes[a]] * dphi[a][0];
        gy += u[nodes[a]] * dphi[a][1];
      }
      const double w = t3_.rule.weights[q];
      for (int a = 0; a < 4; ++a) {
        const double s = w * (dphi[a][0] * gx + dphi[a][1] * gy);
        for (int b = 0; b < 4; ++b) local[a][b] += s * phi[b];
      }
    }
    asm_.add(nodes, local);
  }
  return asm_.finish();
}

double ModelProblem::misfit(const Vector& u) const {
  const Vector r = u - data_.u_dzeta;
  return 0.5 * dot(r, huu_ * r);
}

double ModelProblem::objective(const Vector& u, const Vector& rho) const {
  return misfit(u) + 0.5 * dot(rho, hrr_ * rho);
}

Vector ModelProblem::grad_u(const Vector& u) const { return huu_ * (u - data_.u_dzeta); }

Vector ModelProblem::grad_rho(const Vector& rho) const { return hrr_ * rho; }

Vector ModelProblem::solve_state(const Vector& rho, Vector u, double rel_tol, int max_newton) const {
  if (u.empty()) u.assign(n_nodes(), 0.0);
  Vector c = constraint(u, rho);
  const double c0 = std::max(dual_norm(c), 1e-300);
  for (int it = 0; it < max_newton; ++it) {
    if (dual_norm(c) <= rel_tol * c0 || dual_norm(c) < 1e-14) return u;
    MultigridSolver solver(jacobian_u(u, rho), mesh_.n());
    auto [du, rep] = solver.solve(c, 1e-13);
    axpy(-1.0, du, u);
    c = constraint(u, rho);
  }
  if (dual_norm(c) <= rel_tol * c0 || dual_norm(c) < 1e-14) return u;
  throw InnerSolveError("state Newton", max_newton, dual_norm(c) / c0);
}

double ModelProblem::dual_norm(const Vector& v) const {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * v[i] / ml_[i];
  return std::sqrt(s);
}

double ModelProblem::mass_norm(const Vector& v) const { return std::sqrt(std::max(0.0, dot(v, m_ * v))); }

double ModelProblem::left_norm(const Vector& v) const { return std::sqrt(std::max(0.0, dot(v, huu_ * v))); }

}  // namespace ipgn

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>

#include "ipgn/errors.hpp"
#include "ipgn/experiments.hpp"
#include "ipgn/ipm.hpp"
#include "ipgn/spectral_lab.hpp"

namespace py = pybind11;
using namespace ipgn;

namespace {

py::array_t<double> arr(const Vector& v) { return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data()); }

Vector vec(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw ShapeError("expected a one-dimensional array");
  return Vector(a.data(), a.data() + a.size());
}

py::dict errors_dict(const ErrorMeasures& e) {
  py::dict d;
  d["e_stat"] = e.e_stat;
  d["e_feas"] = e.e_feas;
  d["e_compl"] = e.e_compl;
  d["e_total"] = e.e_total;
  return d;
}

py::dict solve(int n_cells, const ProblemConfig& pc, const IpmConfig& ic) {
  experiments::RunConfig rc;
  rc.mesh = n_cells;
  rc.problem = pc;
  rc.ipm = ic;
  rc.validate();
  const experiments::SolveSummary s = experiments::run_solve(rc, n_cells);
  py::dict d;
  d["converged"] = s.result.converged;
  d["error"] = s.error;
  d["steps"] = s.result.steps();
  d["mean_krylov"] = s.result.mean_krylov();
  d["final_errors"] = errors_dict(s.result.final_errors);
  d["misfit_left"] = s.misfit_left;
  d["noise_left"] = s.noise_left;
  d["rho_rel_error"] = s.rho_rel_error;
  d["u"] = arr(s.result.state.u);
  d["rho"] = arr(s.result.state.rho);
  d["lambda"] = arr(s.result.state.lambda);
  d["z"] = arr(s.result.state.z);
  py::list recs;
  for (const auto& r : s.result.records) {
    py::dict x;
    x["step"] = r.step;
    x["mu"] = r.mu;
    x["e_total"] = r.e_total;
    x["alpha_p"] = r.alpha_p;
    x["alpha_d"] = r.alpha_d;
    x["krylov_iters"] = r.krylov_iters;
    recs.append(x);
  }
  d["records"] = recs;
  return d;
}

py::dict prop1(int n_cells, double mu, double tol) {
  spectral::SnapshotOptions o;
  o.mu = mu;
  const auto r = spectral::verify_prop1(spectral::assemble_dense_snapshot(n_cells, o), tol);
  py::dict d;
  d["passed"] = r.passed();
  d["precondition_ok"] = r.precondition_ok;
  d["eigenvalues"] = r.eig_real;
  d["eig_hrr"] = r.eig_hrr;
  d["eig_w"] = r.eig_w;
  d["unit_count"] = r.unit_count;
  d["expected_unit_count"] = r.expected_unit_count;
  d["match_err"] = r.match_err;
  d["max_imag"] = r.max_imag;
  return d;
}

py::dict diagonalizability(int n_cells, double epsilon, bool observe_all) {
  spectral::SnapshotOptions o;
  o.epsilon = epsilon;
  o.observe_all = observe_all;
  const auto r = spectral::verify_diagonalizability(spectral::assemble_dense_snapshot(n_cells, o), epsilon);
  py::dict d;
  d["algebraic_unit"] = r.algebraic_unit;
  d["geometric_unit"] = r.geometric_unit;
  d["defect_detected"] = r.defect_detected();
  d["off_diagonal"] = r.off_diagonal;
  d["kappa_y"] = r.kappa_y;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ipgn, m) {
  m.doc() = "Interior-point Gauss-Newton solver for a bound-constrained elliptic inverse problem";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InteriorViolation>(m, "InteriorViolation", PyExc_ValueError);

  py::class_<ProblemConfig>(m, "ProblemConfig")
      .def(py::init<>())
      .def_readwrite("gamma1", &ProblemConfig::gamma1)
      .def_readwrite("gamma2", &ProblemConfig::gamma2)
      .def_readwrite("rho_lower", &ProblemConfig::rho_lower)
      .def_readwrite("noise_level", &ProblemConfig::noise_level)
      .def_readwrite("corr_len", &ProblemConfig::corr_len)
      .def_readwrite("seed", &ProblemConfig::seed)
      .def("validate", &ProblemConfig::validate);

  py::class_<IpmConfig>(m, "IpmConfig")
      .def(py::init<>())
      .def_readwrite("mu0", &IpmConfig::mu0)
      .def_readwrite("kappa_mu", &IpmConfig::kappa_mu)
      .def_readwrite("theta_mu", &IpmConfig::theta_mu)
      .def_readwrite("kappa_eps", &IpmConfig::kappa_eps)
      .def_readwrite("tol", &IpmConfig::tol)
      .def_readwrite("max_steps", &IpmConfig::max_steps)
      .def_readwrite("krylov_tol", &IpmConfig::krylov_tol)
      .def_property(
          "solver", [](const IpmConfig& c) { return to_string(c.solver); },
          [](IpmConfig& c, const std::string& s) { c.solver = parse_solver(s); })
      .def("validate", &IpmConfig::validate);

  py::class_<ModelProblem>(m, "ModelProblem")
      .def(py::init<int, const ProblemConfig&>(), py::arg("n_cells"), py::arg("config") = ProblemConfig{})
      .def_property_readonly("n_nodes", &ModelProblem::n_nodes)
      .def_property_readonly("u_d", [](const ModelProblem& p) { return arr(p.data().u_d); })
      .def_property_readonly("u_dzeta", [](const ModelProblem& p) { return arr(p.data().u_dzeta); })
      .def_property_readonly("lumped_mass", [](const ModelProblem& p) { return arr(p.lumped()); })
      .def("objective", [](const ModelProblem& p, py::array_t<double> u, py::array_t<double> rho) {
        return p.objective(vec(u), vec(rho));
      })
      .def("constraint", [](const ModelProblem& p, py::array_t<double> u, py::array_t<double> rho) {
        return arr(p.constraint(vec(u), vec(rho)));
      })
      .def("solve_state", [](const ModelProblem& p, py::array_t<double> rho) {
        return arr(p.solve_state(vec(rho), Vector(p.n_nodes(), 0.0)));
      })
      .def("barrier_objective", [](const ModelProblem& p, py::array_t<double> u, py::array_t<double> rho, double mu) {
        return barrier_objective(p, vec(u), vec(rho), mu);
      });

  m.def("solve", &solve, py::arg("n_cells"), py::arg("problem") = ProblemConfig{}, py::arg("ipm") = IpmConfig{},
        "Runs the interior-point method and returns fields, error measures and per-step records.");
  m.def("fraction_to_boundary",
        [](py::array_t<double> gap, py::array_t<double> rho_hat, py::array_t<double> z, py::array_t<double> z_hat,
           double mu, double tau_min) {
          return fraction_to_boundary(vec(gap), vec(rho_hat), vec(z), vec(z_hat), mu, tau_min);
        },
        py::arg("gap"), py::arg("rho_hat"), py::arg("z"), py::arg("z_hat"), py::arg("mu"), py::arg("tau_min") = 0.99);

  auto sp = m.def_submodule("spectral", "dense spectral checks on small meshes");
  sp.def("prop1", &prop1, py::arg("n_cells") = 4, py::arg("mu") = 1e-2, py::arg("tol") = 1e-8);
  sp.def("diagonalizability", &diagonalizability, py::arg("n_cells") = 6, py::arg("epsilon") = 1e-4,
         py::arg("observe_all") = false);
  sp.def(
      "eig_ordering",
      [](int trials, int dim, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const auto r = spectral::verify_eig_ordering(trials, dim, rng);
        return py::make_tuple(r.violations, r.max_excess);
      },
      py::arg("trials") = 200, py::arg("dim") = 12, py::arg("seed") = 0);
  sp.def("delta_sequence", &spectral::delta_sequence);
}

#include "ipgn/mesh_fem.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ipgn {

StructuredMesh::StructuredMesh(int n) : n_(n), h_(0.0) {
  if (n < 2 || n % 2 != 0) {
    throw ConfigError("mesh: cells per side must be an even integer >= 2, got " + std::to_string(n));
  }
  h_ = 1.0 / n;
}

std::array<double, 2> StructuredMesh::node_coords(int node) const {
  const int w = n_ + 1;
  return {(node % w) * h_, (node / w) * h_};
}

std::array<int, 4> StructuredMesh::cell_nodes(int cell) const {
  const int c1 = cell % n_;
  const int c2 = cell / n_;
  const int base = node_index(c1, c2);
  return {base, base + 1, base + n_ + 1, base + n_ + 2};
}

std::array<double, 2> StructuredMesh::cell_origin(int cell) const {
  return {(cell % n_) * h_, (cell / n_) * h_};
}

StructuredMesh build_mesh(int n) { return StructuredMesh(n); }

QuadratureRule QuadratureRule::gauss(int p) {
  std::vector<double> x, w;
  switch (p) {
    case 1:
      x = {0.5};
      w = {1.0};
      break;
    case 2: {
      const double d = 0.5 / std::sqrt(3.0);
      x = {0.5 - d, 0.5 + d};
      w = {0.5, 0.5};
      break;
    }
    case 3: {
      const double d = 0.5 * std::sqrt(0.6);
      x = {0.5 - d, 0.5, 0.5 + d};
      w = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
      break;
    }
    default:
      throw ConfigError("QuadratureRule::gauss: supported orders are 1, 2, 3");
  }
  QuadratureRule r;
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < p; ++i) {
      r.points.push_back({x[i], x[j]});
      r.weights.push_back(w[i] * w[j]);
    }
  }
  return r;
}

ElementTables::ElementTables(QuadratureRule r) : rule(std::move(r)) {
  for (const auto& pt : rule.points) {
    const double xi = pt[0];
    const double eta = pt[1];
    phi.push_back({(1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta});
    dphi.push_back({{{-(1 - eta), -(1 - xi)}, {(1 - eta), -xi}, {-eta, (1 - xi)}, {eta, xi}}});
  }
}

CellAssembler::CellAssembler(const StructuredMesh& mesh) : n_nodes_(mesh.num_nodes()) {
  triplets_.reserve(static_cast<std::size_t>(mesh.num_cells()) * 16);
}

void CellAssembler::add(const std::array<int, 4>& nodes, const std::array<std::array<double, 4>, 4>& local) {
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) triplets_.push_back({nodes[a], nodes[b], local[a][b]});
  }
}

SparseMatrix CellAssembler::finish() { return SparseMatrix::from_triplets(n_nodes_, n_nodes_, std::move(triplets_)); }

namespace {

const ElementTables& tables2() {
  static const ElementTables t(QuadratureRule::gauss(2));
  return t;
}

SparseMatrix mass_on(const StructuredMesh& mesh, const std::function<bool(int)>& use_cell) {
  const auto& t = tables2();
  const double area = mesh.h() * mesh.h();
  std::array<std::array<double, 4>, 4> local{};
  for (std::size_t q = 0; q < t.rule.weights.size(); ++q) {
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) local[a][b] += t.rule.weights[q] * area * t.phi[q][a] * t.phi[q][b];
    }
  }
  CellAssembler asm_(mesh);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    if (use_cell(c)) asm_.add(mesh.cell_nodes(c), local);
  }
  return asm_.finish();
}

}  // namespace

SparseMatrix assemble_mass(const StructuredMesh& mesh) {
  return mass_on(mesh, [](int) { return true; });
}

SparseMatrix assemble_subdomain_mass(const StructuredMesh& mesh, const std::function<bool(double, double)>& inside) {
  const double hh = 0.5 * mesh.h();
  return mass_on(mesh, [&](int c) {
    const auto o = mesh.cell_origin(c);
    return inside(o[0] + hh, o[1] + hh);
  });
}

SparseMatrix assemble_left_half_mass(const StructuredMesh& mesh) {
  return assemble_subdomain_mass(mesh, [](double y1, double) { return y1 < 0.5; });
}

SparseMatrix assemble_weighted_stiffness(const StructuredMesh& mesh, std::span<const double> coeff) {
  if (static_cast<int>(coeff.size()) != mesh.num_nodes()) throw ShapeError("weighted stiffness: coefficient length");
  const auto& t = tables2();
  CellAssembler asm_(mesh);
  // Reference gradients scale by 1/h and the Jacobian by h^2, so h drops out in 2D.
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    std::array<std::array<double, 4>, 4> local{};
    for (std::size_t q = 0; q < t.rule.weights.size(); ++q) {
      double k = 0.0;
      for (int a = 0; a < 4; ++a) k += coeff[nodes[a]] * t.phi[q][a];
      const double w = t.rule.weights[q] * k;
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          local[a][b] += w * (t.dphi[q][a][0] * t.dphi[q][b][0] + t.dphi[q][a][1] * t.dphi[q][b][1]);
        }
      }
    }
    asm_.add(nodes, local);
  }
  return asm_.finish();
}

SparseMatrix assemble_weighted_stiffness(const StructuredMesh& mesh, double coeff) {
  Vector k(mesh.num_nodes(), coeff);
  return assemble_weighted_stiffness(mesh, k);
}

SparseMatrix lumped_mass(const SparseMatrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("lumped_mass: matrix not square");
  Vector d = m.row_sums();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) throw AssemblyError("lumped_mass: nonpositive row sum at row " + std::to_string(i));
  }
  return SparseMatrix::diagonal(d);
}

NodalField interpolate(const StructuredMesh& mesh, const PointFunction& fn, Space space) {
  NodalField f{Vector(mesh.num_nodes()), space};
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const auto p = mesh.node_coords(i);
    f.values[i] = fn(p[0], p[1]);
  }
  return f;
}

void write_vtk(const std::string& path, const StructuredMesh& mesh,
               const std::vector<std::pair<std::string, Vector>>& fields, const std::string& title) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_vtk: cannot open " + path);
  const int w = mesh.nodes_per_side();
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << w << " " << w << " 1\n";
  out << "ORIGIN 0 0 0\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "SPACING " << mesh.h() << " " << mesh.h() << " 1\n";
  out << "POINT_DATA " << mesh.num_nodes() << "\n";
  for (const auto& [name, v] : fields) {
    if (static_cast<int>(v.size()) != mesh.num_nodes()) throw ShapeError("write_vtk: field " + name + " has wrong length");
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double x : v) out << x << "\n";
  }
}

std::pair<int, std::map<std::string, Vector>> read_vtk(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_vtk: cannot open " + path);
  std::string tok;
  int nx = 0, ny = 0, nz = 0;
  long npts = -1;
  std::map<std::string, Vector> fields;
  while (in >> tok) {
    if (tok == "DIMENSIONS") {
      in >> nx >> ny >> nz;
    } else if (tok == "POINT_DATA") {
      in >> npts;
    } else if (tok == "SCALARS") {
      std::string name, type, rest;
      in >> name >> type;
      std::getline(in, rest);
      in >> tok;
      if (tok != "LOOKUP_TABLE") throw std::runtime_error("read_vtk: expected LOOKUP_TABLE");
      in >> tok;
      if (npts < 0) throw std::runtime_error("read_vtk: SCALARS before POINT_DATA");
      Vector v(npts);
      for (long i = 0; i < npts; ++i) {
        if (!(in >> v[i])) throw std::runtime_error("read_vtk: truncated field " + name);
      }
      fields[name] = std::move(v);
    }
  }
  if (nx < 2 || nx != ny) throw std::runtime_error("read_vtk: not a square structured grid");
  return {nx - 1, std::move(fields)};
}

}  // namespace ipgn

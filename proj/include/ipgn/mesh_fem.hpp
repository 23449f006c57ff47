#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ipgn/sparse_matrix.hpp"
#include "ipgn/vector_ops.hpp"

namespace ipgn {

/// Uniform n x n grid of square cells on (0,1)^2, nodes numbered with y1 fastest.
class StructuredMesh {
 public:
  explicit StructuredMesh(int n_cells_per_side);

  int n() const { return n_; }
  double h() const { return h_; }
  int nodes_per_side() const { return n_ + 1; }
  int num_nodes() const { return (n_ + 1) * (n_ + 1); }
  int num_cells() const { return n_ * n_; }

  int node_index(int i1, int i2) const { return i2 * (n_ + 1) + i1; }
  std::array<double, 2> node_coords(int node) const;
  /// Local order: (0,0), (1,0), (0,1), (1,1) corners of the cell.
  std::array<int, 4> cell_nodes(int cell) const;
  /// Lower-left corner of the cell.
  std::array<double, 2> cell_origin(int cell) const;

 private:
  int n_;
  double h_;
};

StructuredMesh build_mesh(int n_cells_per_side);

enum class Space { State, Parameter };

struct NodalField {
  Vector values;
  Space space = Space::State;
};

/// Tensor Gauss rule on the reference cell [0,1]^2; weights sum to 1.
struct QuadratureRule {
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;

  static QuadratureRule gauss(int points_per_direction);
};

/// Bilinear shape values and reference gradients tabulated at the points of a rule.
struct ElementTables {
  QuadratureRule rule;
  std::vector<std::array<double, 4>> phi;
  std::vector<std::array<std::array<double, 2>, 4>> dphi;  // d/dxi, d/deta on the reference cell

  explicit ElementTables(QuadratureRule r);
};

using PointFunction = std::function<double(double, double)>;

SparseMatrix assemble_mass(const StructuredMesh& mesh);
SparseMatrix assemble_weighted_stiffness(const StructuredMesh& mesh, std::span<const double> coeff);
SparseMatrix assemble_weighted_stiffness(const StructuredMesh& mesh, double coeff);
/// Mass matrix restricted to cells whose center satisfies the predicate.
SparseMatrix assemble_subdomain_mass(const StructuredMesh& mesh, const std::function<bool(double, double)>& inside);
/// Cells left of y1 = 0.5.
SparseMatrix assemble_left_half_mass(const StructuredMesh& mesh);
SparseMatrix lumped_mass(const SparseMatrix& m);

NodalField interpolate(const StructuredMesh& mesh, const PointFunction& fn, Space space = Space::State);

/// Finite-element triplet sink for per-cell 4x4 blocks.
class CellAssembler {
 public:
  explicit CellAssembler(const StructuredMesh& mesh);
  void add(const std::array<int, 4>& nodes, const std::array<std::array<double, 4>, 4>& local);
  SparseMatrix finish();

 private:
  int n_nodes_;
  std::vector<Triplet> triplets_;
};

/// Legacy ASCII VTK STRUCTURED_POINTS file with one scalar array per field.
void write_vtk(const std::string& path, const StructuredMesh& mesh,
               const std::vector<std::pair<std::string, Vector>>& fields, const std::string& title = "ipgn");
/// Reads a file written by write_vtk; returns the cells-per-side and the named fields.
std::pair<int, std::map<std::string, Vector>> read_vtk(const std::string& path);

}  // namespace ipgn

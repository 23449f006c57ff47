#pragma once

#include <iosfwd>
#include <string>

#include "ipgn/sparse_matrix.hpp"

namespace ipgn {

/// Reads "%%MatrixMarket matrix coordinate real|integer|pattern general|symmetric|skew-symmetric".
/// Symmetric storage is expanded to both triangles.
SparseMatrix read_matrix_market(std::istream& in);
SparseMatrix read_matrix_market(const std::string& path);

/// Writes coordinate real general, full precision.
void write_matrix_market(std::ostream& out, const SparseMatrix& a, const std::string& comment = "");
void write_matrix_market(const std::string& path, const SparseMatrix& a, const std::string& comment = "");

}  // namespace ipgn

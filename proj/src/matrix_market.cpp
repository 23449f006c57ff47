#include "ipgn/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ipgn {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

SparseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("matrix market: empty input");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket" || lower(object) != "matrix") {
    throw std::runtime_error("matrix market: missing %%MatrixMarket matrix banner");
  }
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (format != "coordinate") throw std::runtime_error("matrix market: only coordinate format is supported");
  if (field != "real" && field != "integer" && field != "pattern" && field != "double") {
    throw std::runtime_error("matrix market: unsupported field '" + field + "'");
  }
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric") {
    throw std::runtime_error("matrix market: unsupported symmetry '" + symmetry + "'");
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  long rows = 0, cols = 0, entries = 0;
  {
    std::istringstream hdr(line);
    if (!(hdr >> rows >> cols >> entries) || rows < 0 || cols < 0 || entries < 0) {
      throw std::runtime_error("matrix market: bad size line '" + line + "'");
    }
  }
  std::vector<Triplet> t;
  t.reserve(symmetry == "general" ? entries : 2 * entries);
  for (long k = 0; k < entries; ++k) {
    long i, j;
    double v = 1.0;
    if (!(in >> i >> j)) throw std::runtime_error("matrix market: truncated entry list");
    if (field != "pattern" && !(in >> v)) throw std::runtime_error("matrix market: missing value");
    if (i < 1 || i > rows || j < 1 || j > cols) throw std::runtime_error("matrix market: index out of range");
    t.push_back({static_cast<int>(i - 1), static_cast<int>(j - 1), v});
    if (i != j && symmetry == "symmetric") t.push_back({static_cast<int>(j - 1), static_cast<int>(i - 1), v});
    if (i != j && symmetry == "skew-symmetric") t.push_back({static_cast<int>(j - 1), static_cast<int>(i - 1), -v});
  }
  return SparseMatrix::from_triplets(static_cast<int>(rows), static_cast<int>(cols), std::move(t));
}

SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("matrix market: cannot open " + path);
  return read_matrix_market(f);
}

void write_matrix_market(std::ostream& out, const SparseMatrix& a, const std::string& comment) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  if (!comment.empty()) out << "% " << comment << "\n";
  out << a.rows() << " " << a.cols() << " " << a.nnz() << "\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
      out << i + 1 << " " << a.col_idx()[k] + 1 << " " << a.values()[k] << "\n";
    }
  }
}

void write_matrix_market(const std::string& path, const SparseMatrix& a, const std::string& comment) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("matrix market: cannot write " + path);
  write_matrix_market(f, a, comment);
}

}  // namespace ipgn

#include "qnode/matrix.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qnode {

bool valid_dim(Eigen::Index dim) { return dim == 2 || dim == 4; }

bool is_finite(const CMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag()))
        return false;
  return true;
}

bool is_hermitian(const CMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

void write_matrix(std::ostream& os, const CMatrix& m) {
  if (!valid_dim(m.rows()) || m.rows() != m.cols())
    throw std::invalid_argument("write_matrix: dimension must be 2 or 4");
  if (!is_finite(m))
    throw std::invalid_argument("write_matrix: entries must be finite");
  os << m.rows() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g", m(i, j).real(),
                    m(i, j).imag());
      os << buf << '\n';
    }
  }
}

std::string serialize_matrix(const CMatrix& m) {
  std::ostringstream os;
  write_matrix(os, m);
  return os.str();
}

CMatrix parse_matrix(std::istream& is) {
  Eigen::Index dim = 0;
  if (!(is >> dim) || !valid_dim(dim))
    throw std::invalid_argument("parse_matrix: bad dimension header");
  CMatrix m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      double re = 0.0, im = 0.0;
      if (!(is >> re >> im))
        throw std::invalid_argument("parse_matrix: truncated entry list");
      m(i, j) = Complex(re, im);
    }
  }
  if (!is_finite(m))
    throw std::invalid_argument("parse_matrix: entries must be finite");
  return m;
}

CMatrix parse_matrix(const std::string& text) {
  std::istringstream is(text);
  return parse_matrix(is);
}

}  // namespace qnode

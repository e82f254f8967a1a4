#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <string>

namespace qnode {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Supported Hilbert space dimensions: single time-bin qubit and qubit pair.
bool valid_dim(Eigen::Index dim);

bool is_finite(const CMatrix& m);
bool is_hermitian(const CMatrix& m, double tol);

// Kronecker product with the left factor acting on the idler qubit and the
// right factor on the signal qubit (basis order e_i e_s, e_i l_s, l_i e_s,
// l_i l_s).
CMatrix kron(const CMatrix& a, const CMatrix& b);

// Text form: first line the dimension, then dim^2 lines of "re im" in
// row-major order, 17 significant digits (lossless for IEEE doubles).
std::string serialize_matrix(const CMatrix& m);
void write_matrix(std::ostream& os, const CMatrix& m);
CMatrix parse_matrix(std::istream& is);
CMatrix parse_matrix(const std::string& text);

}  // namespace qnode

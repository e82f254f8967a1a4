#include "qnode/density_matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace qnode {

namespace {

constexpr double kHermitianTol = 1e-10;
constexpr double kTraceTol = 1e-10;
constexpr double kEigenFloor = -1e-10;

Eigen::SelfAdjointEigenSolver<CMatrix> eig(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed");
  return solver;
}

}  // namespace

DensityMatrix::DensityMatrix(CMatrix m) : m_(std::move(m)) {
  if (!valid_dim(m_.rows()) || m_.rows() != m_.cols())
    throw std::invalid_argument("DensityMatrix: dimension must be 2 or 4");
  if (!is_finite(m_))
    throw std::invalid_argument("DensityMatrix: entries must be finite");
  if (!is_hermitian(m_, kHermitianTol))
    throw std::invalid_argument("DensityMatrix: not Hermitian within 1e-10");
  if (std::abs(m_.trace().real() - 1.0) > kTraceTol ||
      std::abs(m_.trace().imag()) > kTraceTol)
    throw std::invalid_argument("DensityMatrix: trace must be 1 within 1e-10");
  auto solver = eig(m_);
  if (solver.eigenvalues().minCoeff() < kEigenFloor)
    throw std::invalid_argument(
        "DensityMatrix: negative eigenvalue beyond -1e-10");
}

CMatrix pauli_i() { return CMatrix::Identity(2, 2); }

CMatrix pauli_x() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

CMatrix pauli_y() {
  CMatrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}

CMatrix pauli_z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

DensityMatrix ket_phi_plus() {
  CMatrix m = CMatrix::Zero(4, 4);
  m(0, 0) = m(0, 3) = m(3, 0) = m(3, 3) = 0.5;
  return DensityMatrix(m);
}

DensityMatrix werner_state(double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0))
    throw std::domain_error("werner_state: visibility must lie in [0, 1]");
  CMatrix m = visibility * ket_phi_plus().mat() +
              (1.0 - visibility) * 0.25 * CMatrix::Identity(4, 4);
  return DensityMatrix(m);
}

DensityMatrix dephased_phi_plus(double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0))
    throw std::domain_error(
        "dephased_phi_plus: visibility must lie in [0, 1]");
  CMatrix m = CMatrix::Zero(4, 4);
  m(0, 0) = m(3, 3) = 0.5;
  m(0, 3) = m(3, 0) = 0.5 * visibility;
  return DensityMatrix(m);
}

double fidelity(const DensityMatrix& rho, const DensityMatrix& target_pure) {
  if (rho.dim() != target_pure.dim())
    throw std::invalid_argument("fidelity: dimension mismatch");
  auto solver = eig(target_pure.mat());
  Eigen::Index top;
  solver.eigenvalues().maxCoeff(&top);
  if (solver.eigenvalues()(top) < 1.0 - 1e-8)
    throw std::invalid_argument("fidelity: target state is not pure");
  CVector psi = solver.eigenvectors().col(top);
  return std::real((psi.adjoint() * rho.mat() * psi)(0, 0));
}

DensityMatrix project_to_physical(const CMatrix& hermitian_estimate) {
  if (!valid_dim(hermitian_estimate.rows()) ||
      hermitian_estimate.rows() != hermitian_estimate.cols())
    throw std::invalid_argument(
        "project_to_physical: dimension must be 2 or 4");
  if (!is_hermitian(hermitian_estimate, 1e-8))
    throw std::invalid_argument(
        "project_to_physical: input not Hermitian within 1e-8");
  CMatrix sym = 0.5 * (hermitian_estimate + hermitian_estimate.adjoint());
  auto solver = eig(sym);
  Eigen::VectorXd lam = solver.eigenvalues();

  // Clip-and-spread until nonnegative; each pass conserves the total weight.
  for (;;) {
    double clipped = 0.0;
    int positive = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      if (lam(i) < 0.0) {
        clipped += lam(i);
        lam(i) = 0.0;
      } else if (lam(i) > 0.0) {
        ++positive;
      }
    }
    if (clipped == 0.0) break;
    if (positive == 0)
      throw std::domain_error(
          "project_to_physical: estimate has no positive weight");
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      if (lam(i) > 0.0) lam(i) += clipped / positive;
    if (lam.minCoeff() >= 0.0) break;
  }

  double total = lam.sum();
  if (total <= 0.0)
    throw std::domain_error(
        "project_to_physical: estimate has no positive weight");
  lam /= total;
  CMatrix out = solver.eigenvectors() * lam.asDiagonal() *
                solver.eigenvectors().adjoint();
  return DensityMatrix(0.5 * (out + out.adjoint()));
}

double uhlmann_fidelity(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("uhlmann_fidelity: dimension mismatch");
  auto sa = eig(a.mat());
  Eigen::VectorXd lam = sa.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -1e-10)
      throw std::invalid_argument("uhlmann_fidelity: input not positive");
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  CMatrix sqrt_a =
      sa.eigenvectors() * lam.asDiagonal() * sa.eigenvectors().adjoint();
  CMatrix inner = sqrt_a * b.mat() * sqrt_a;
  auto si = eig(CMatrix(0.5 * (inner + inner.adjoint())));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < si.eigenvalues().size(); ++i)
    sum += std::sqrt(std::max(si.eigenvalues()(i), 0.0));
  return sum * sum;
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  auto solver = eig(CMatrix(a.mat() - b.mat()));
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

}  // namespace qnode

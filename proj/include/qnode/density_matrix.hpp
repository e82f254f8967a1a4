#pragma once

#include "qnode/matrix.hpp"

namespace qnode {

// Validated quantum state. Construction enforces Hermiticity (1e-10),
// unit trace (1e-10) and eigenvalues >= -1e-10; instances are immutable.
class DensityMatrix {
 public:
  explicit DensityMatrix(CMatrix m);

  Eigen::Index dim() const { return m_.rows(); }
  const CMatrix& mat() const { return m_; }

 private:
  CMatrix m_;
};

// Pauli operators in the {e, l} time-bin basis.
CMatrix pauli_i();
CMatrix pauli_x();
CMatrix pauli_y();
CMatrix pauli_z();

// (|e_i e_s> + |l_i l_s>)/sqrt(2) as a density matrix: value 1/2 at the four
// corners of the 4x4 matrix.
DensityMatrix ket_phi_plus();

// V * |phi+><phi+| + (1 - V) * I/4. V outside [0, 1] -> std::domain_error.
// Fidelity to |phi+> is (1 + 3V)/4.
DensityMatrix werner_state(double visibility);

// Pure dephasing of the e_i e_s / l_i l_s coherence, the ensemble produced by
// a pump with interferometric visibility V: V |phi+><phi+| +
// (1-V)(|ee><ee| + |ll><ll|)/2. Fidelity to |phi+> is (1 + V)/2.
DensityMatrix dephased_phi_plus(double visibility);

// <psi|rho|psi> for a pure target (largest eigenvalue >= 1 - 1e-8, enforced).
// Invariant under the target's global phase by construction.
double fidelity(const DensityMatrix& rho, const DensityMatrix& target_pure);

// Nearest-physical-state repair of a Hermitian estimate: eigendecompose,
// clip negative eigenvalues to zero spreading the clipped weight uniformly
// over the remaining positive ones (repeated until all are nonnegative),
// then renormalize the trace. Idempotent on valid states.
DensityMatrix project_to_physical(const CMatrix& hermitian_estimate);

// Uhlmann fidelity (tr sqrt(sqrt(a) b sqrt(a)))^2 with eigenvalues clipped at
// -1e-10. Coincides with fidelity() when b is pure.
double uhlmann_fidelity(const DensityMatrix& a, const DensityMatrix& b);

// (1/2) tr |a - b|.
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

}  // namespace qnode

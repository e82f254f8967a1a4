#pragma once

#include <string>
#include <vector>

#include "qnode/density_matrix.hpp"
#include "qnode/matrix.hpp"

namespace qnode {

// Detection time slot after an unbalanced interferometer.
enum class SlotLabel { early, central, late, none };

std::string to_string(SlotLabel slot);

// Single measurement effect. Construction enforces positive semidefiniteness
// (eigenvalues >= -1e-10) and effect <= I.
struct PovmElement {
  PovmElement(CMatrix effect_in, SlotLabel slot_in);

  CMatrix effect;
  SlotLabel slot;
};

// Complete measurement: the labeled elements plus the no-click remainder.
// Construction enforces sum(effects) + no_click == I within 1e-9.
class PovmSet {
 public:
  PovmSet(std::vector<PovmElement> elements, CMatrix no_click);

  const std::vector<PovmElement>& elements() const { return elements_; }
  const CMatrix& no_click() const { return no_click_; }
  Eigen::Index dim() const { return no_click_.rows(); }

 private:
  std::vector<PovmElement> elements_;
  CMatrix no_click_;
};

// Outcome probabilities tr(rho E_i); the last entry is the no-click
// probability. The result sums to 1 within 1e-9 (enforced).
std::vector<double> born_probabilities(const DensityMatrix& rho,
                                       const PovmSet& povm);

}  // namespace qnode

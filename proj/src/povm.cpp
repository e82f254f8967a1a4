#include "qnode/povm.hpp"

#include <cmath>
#include <stdexcept>

namespace qnode {

namespace {

void require_effect_bounds(const CMatrix& effect, const char* what) {
  if (!valid_dim(effect.rows()) || effect.rows() != effect.cols())
    throw std::invalid_argument(std::string(what) +
                                ": dimension must be 2 or 4");
  if (!is_hermitian(effect, 1e-10))
    throw std::domain_error(std::string(what) + ": effect not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMatrix> low(effect);
  if (low.eigenvalues().minCoeff() < -1e-10)
    throw std::domain_error(std::string(what) + ": effect not positive");
  Eigen::SelfAdjointEigenSolver<CMatrix> high(
      CMatrix(CMatrix::Identity(effect.rows(), effect.cols()) - effect));
  if (high.eigenvalues().minCoeff() < -1e-10)
    throw std::domain_error(std::string(what) + ": effect exceeds identity");
}

}  // namespace

std::string to_string(SlotLabel slot) {
  switch (slot) {
    case SlotLabel::early:
      return "early";
    case SlotLabel::central:
      return "central";
    case SlotLabel::late:
      return "late";
    case SlotLabel::none:
      return "none";
  }
  return "?";
}

PovmElement::PovmElement(CMatrix effect_in, SlotLabel slot_in)
    : effect(std::move(effect_in)), slot(slot_in) {
  require_effect_bounds(effect, "PovmElement");
}

PovmSet::PovmSet(std::vector<PovmElement> elements, CMatrix no_click)
    : elements_(std::move(elements)), no_click_(std::move(no_click)) {
  if (elements_.empty()) throw std::invalid_argument("PovmSet: no elements");
  require_effect_bounds(no_click_, "PovmSet no_click");
  CMatrix sum = no_click_;
  for (const auto& e : elements_) {
    if (e.effect.rows() != no_click_.rows())
      throw std::invalid_argument("PovmSet: mixed dimensions");
    sum += e.effect;
  }
  CMatrix gap = sum - CMatrix::Identity(sum.rows(), sum.cols());
  if (gap.cwiseAbs().maxCoeff() > 1e-9)
    throw std::domain_error("PovmSet: effects do not sum to identity");
}

std::vector<double> born_probabilities(const DensityMatrix& rho,
                                       const PovmSet& povm) {
  if (rho.dim() != povm.dim())
    throw std::invalid_argument("born_probabilities: dimension mismatch");
  std::vector<double> probs;
  probs.reserve(povm.elements().size() + 1);
  double total = 0.0;
  for (const auto& e : povm.elements()) {
    double p = std::real((rho.mat() * e.effect).trace());
    p = std::max(p, 0.0);
    probs.push_back(p);
    total += p;
  }
  double p_none = std::real((rho.mat() * povm.no_click()).trace());
  p_none = std::max(p_none, 0.0);
  probs.push_back(p_none);
  total += p_none;
  if (std::abs(total - 1.0) > 1e-9)
    throw std::domain_error("born_probabilities: probabilities do not sum to 1");
  return probs;
}

}  // namespace qnode

#include "qnode/memory.hpp"

#include <cmath>
#include <stdexcept>

namespace qnode {

std::string to_string(MemoryMode mode) {
  return mode == MemoryMode::afc ? "afc" : "transparency";
}

MemoryMode memory_mode_from_string(const std::string& name) {
  if (name == "afc") return MemoryMode::afc;
  if (name == "transparency") return MemoryMode::transparency;
  throw std::invalid_argument("memory mode must be 'afc' or 'transparency', got '" +
                              name + "'");
}

void AfcParams::validate() const {
  if (mode == MemoryMode::afc &&
      (!std::isfinite(comb_period_delta) || comb_period_delta <= 0))
    throw std::invalid_argument(
        "memory.comb_period_delta must be positive in afc mode");
  auto unit = [](double x) { return std::isfinite(x) && x >= 0 && x <= 1; };
  if (!unit(eta0))
    throw std::invalid_argument("memory.eta0 must lie in [0, 1]");
  if (!unit(device_transmission))
    throw std::invalid_argument("memory.device_transmission must lie in [0, 1]");
  if (!unit(extra_insertion_loss))
    throw std::invalid_argument(
        "memory.extra_insertion_loss must lie in [0, 1]");
  if (!std::isfinite(t2_eff) || t2_eff <= 0)
    throw std::invalid_argument("memory.t2_eff must be positive");
}

double afc_delay(double comb_period_delta) {
  if (!std::isfinite(comb_period_delta) || comb_period_delta <= 0)
    throw std::domain_error("afc delay requires a positive comb period");
  return 1.0 / comb_period_delta;
}

double afc_efficiency(double tau, double eta0, double t2_eff) {
  if (!std::isfinite(tau) || tau < 0)
    throw std::domain_error("afc efficiency requires a non-negative delay");
  if (!std::isfinite(eta0) || eta0 < 0 || eta0 > 1)
    throw std::domain_error("afc efficiency requires eta0 in [0, 1]");
  if (!std::isfinite(t2_eff) || t2_eff <= 0)
    throw std::domain_error("afc efficiency requires positive t2_eff");
  return eta0 * std::exp(-4.0 * tau / t2_eff);
}

double end_to_end_efficiency(const AfcParams& p) {
  p.validate();
  double passive = p.device_transmission * p.extra_insertion_loss;
  if (p.mode == MemoryMode::transparency) return passive;
  return afc_efficiency(afc_delay(p.comb_period_delta), p.eta0, p.t2_eff) *
         passive;
}

MemoryAnalyticResult apply_memory_analytic(const DensityMatrix& rho,
                                           const AfcParams& p) {
  return MemoryAnalyticResult{rho, end_to_end_efficiency(p)};
}

std::vector<TimeTag> apply_memory_events(const std::vector<TimeTag>& signal,
                                         const AfcParams& p, Rng& rng) {
  p.validate();
  validate_tags(signal);
  double passive = p.device_transmission * p.extra_insertion_loss;
  double stored = end_to_end_efficiency(p);
  double shift =
      p.mode == MemoryMode::afc ? afc_delay(p.comb_period_delta) : 0.0;
  std::vector<TimeTag> out;
  out.reserve(signal.size());
  for (const auto& tag : signal) {
    bool in_comb = tag.kind == TagKind::pair;
    if (p.mode == MemoryMode::afc && in_comb) {
      if (!rng.bernoulli(stored)) continue;
      TimeTag echoed = tag;
      echoed.time += shift;
      out.push_back(echoed);
    } else {
      if (!rng.bernoulli(passive)) continue;
      out.push_back(tag);
    }
  }
  sort_by_time(out);
  return out;
}

}  // namespace qnode

#include "qnode/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qnode/matrix.hpp"

namespace qnode {

void MzParams::validate() const {
  if (!std::isfinite(delay) || delay <= 0)
    throw std::invalid_argument("analyzer.delay must be positive");
  if (!std::isfinite(phase))
    throw std::invalid_argument("analyzer.phase must be finite");
  auto unit = [](double x) { return std::isfinite(x) && x >= 0 && x <= 1; };
  if (!unit(t_short))
    throw std::invalid_argument("analyzer.t_short must lie in [0, 1]");
  if (!unit(t_long))
    throw std::invalid_argument("analyzer.t_long must lie in [0, 1]");
}

PovmSet mz_povm(const MzParams& p) {
  p.validate();
  CMatrix e_early = CMatrix::Zero(2, 2);
  e_early(0, 0) = p.t_short / 4.0;
  CMatrix e_late = CMatrix::Zero(2, 2);
  e_late(1, 1) = p.t_long / 4.0;
  CVector chi(2);
  chi(0) = std::sqrt(p.t_long) * std::polar(1.0, p.phase);
  chi(1) = std::sqrt(p.t_short);
  CMatrix e_central = 0.25 * (chi * chi.adjoint());
  CMatrix no_click = CMatrix::Identity(2, 2) - e_early - e_central - e_late;
  return PovmSet({PovmElement(e_early, SlotLabel::early),
                  PovmElement(e_central, SlotLabel::central),
                  PovmElement(e_late, SlotLabel::late)},
                 no_click);
}

double visibility_from_imbalance(double ratio) {
  if (!std::isfinite(ratio) || ratio < 0)
    throw std::domain_error("imbalance ratio must be non-negative");
  return 2.0 * std::sqrt(ratio) / (1.0 + ratio);
}

Eigen::Matrix4d joint_franson_probability(const DensityMatrix& rho,
                                          const PovmSet& idler_povm,
                                          const PovmSet& signal_povm) {
  if (rho.dim() != 4)
    throw std::domain_error("joint outcome table requires a two-qubit state");
  if (idler_povm.dim() != 2 || signal_povm.dim() != 2)
    throw std::domain_error("joint outcome table requires qubit analyzers");
  if (idler_povm.elements().size() != 3 || signal_povm.elements().size() != 3)
    throw std::domain_error("joint outcome table requires three-slot analyzers");

  auto effect = [](const PovmSet& povm, int k) -> const CMatrix& {
    return k < 3 ? povm.elements()[static_cast<size_t>(k)].effect
                 : povm.no_click();
  };
  Eigen::Matrix4d table;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      Complex tr =
          (rho.mat() * kron(effect(idler_povm, a), effect(signal_povm, b)))
              .trace();
      double p = tr.real();
      if (p < 0 && p > -1e-12) p = 0;
      if (p < 0)
        throw std::domain_error("joint outcome table: negative probability");
      table(a, b) = p;
    }
  }
  double sum = table.sum();
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::domain_error("joint outcome table does not sum to one");
  return table;
}

std::pair<SlotLabel, SlotLabel> sample_joint_slots(
    const Eigen::Matrix4d& table, Rng& rng) {
  static constexpr SlotLabel kSlots[4] = {SlotLabel::early, SlotLabel::central,
                                          SlotLabel::late, SlotLabel::none};
  double weights[16];
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) weights[a * 4 + b] = table(a, b);
  size_t idx = rng.pick(std::span<const double>(weights, 16));
  return {kSlots[idx / 4], kSlots[idx % 4]};
}

double slot_time_shift(SlotLabel slot, double delay) {
  switch (slot) {
    case SlotLabel::early:
      return 0.0;
    case SlotLabel::central:
      return delay;
    case SlotLabel::late:
      return 2.0 * delay;
    case SlotLabel::none:
      break;
  }
  throw std::invalid_argument("no arrival time for a no-click outcome");
}

void DetectorParams::validate() const {
  if (!std::isfinite(efficiency) || efficiency < 0 || efficiency > 1)
    throw std::invalid_argument("detector.efficiency must lie in [0, 1]");
  if (!std::isfinite(dark_rate) || dark_rate < 0)
    throw std::invalid_argument("detector.dark_rate must be non-negative");
  if (!std::isfinite(jitter_sigma) || jitter_sigma < 0)
    throw std::invalid_argument("detector.jitter_sigma must be non-negative");
  if (!std::isfinite(dead_time) || dead_time < 0)
    throw std::invalid_argument("detector.dead_time must be non-negative");
}

std::vector<TimeTag> apply_analyzer_events(const std::vector<TimeTag>& tags,
                                           const std::vector<QubitMeta>& metas,
                                           const MzParams& p, Rng& rng) {
  p.validate();
  validate_tags(tags);
  if (metas.size() != tags.size())
    throw std::invalid_argument("analyzer: metadata must parallel tags");
  PovmSet povm = mz_povm(p);
  std::vector<TimeTag> out;
  out.reserve(tags.size());
  for (size_t i = 0; i < tags.size(); ++i) {
    const QubitMeta& m = metas[i];
    double norm2 = std::norm(m.amp_e) + std::norm(m.amp_l);
    if (!(std::abs(norm2 - 1.0) < 1e-9))
      throw std::invalid_argument("analyzer: qubit amplitudes not normalized");
    CVector psi(2);
    psi << m.amp_e, m.amp_l;
    CMatrix rho = psi * psi.adjoint();
    auto probs = born_probabilities(DensityMatrix(rho), povm);
    size_t k = rng.pick(probs);
    if (k == 3) continue;  // no click
    TimeTag t = tags[i];
    t.slot = povm.elements()[k].slot;
    t.time += slot_time_shift(t.slot, p.delay);
    out.push_back(t);
  }
  sort_by_time(out);
  return out;
}

std::vector<TimeTag> apply_detector(const std::vector<TimeTag>& tags,
                                    const DetectorParams& p, double duration,
                                    std::uint16_t channel, Rng& rng) {
  p.validate();
  validate_tags(tags);
  if (!std::isfinite(duration) || duration < 0)
    throw std::invalid_argument("detector: duration must be non-negative");
  std::vector<TimeTag> out;
  out.reserve(tags.size());
  for (const auto& tag : tags) {
    if (!rng.bernoulli(p.efficiency)) continue;
    TimeTag t = tag;
    if (p.jitter_sigma > 0) {
      t.time += rng.normal(0.0, p.jitter_sigma);
      if (t.time < 0) t.time = 0;
    }
    out.push_back(t);
  }
  if (p.dark_rate > 0) {
    double t = 0.0;
    while (true) {
      t += rng.exponential(p.dark_rate);
      if (t >= duration) break;
      TimeTag dark;
      dark.time = t;
      dark.channel = channel;
      dark.kind = TagKind::dark;
      out.push_back(dark);
    }
  }
  sort_by_time(out);
  if (p.dead_time > 0) {
    std::vector<TimeTag> alive;
    alive.reserve(out.size());
    double last_accept = -1.0;
    for (const auto& tag : out) {
      if (!alive.empty() && tag.time - last_accept < p.dead_time) continue;
      alive.push_back(tag);
      last_accept = tag.time;
    }
    out = std::move(alive);
  }
  return out;
}

}  // namespace qnode

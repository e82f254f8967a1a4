#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "qnode/density_matrix.hpp"
#include "qnode/povm.hpp"
#include "qnode/rng.hpp"
#include "qnode/timetag.hpp"

namespace qnode {

// Unbalanced Mach-Zehnder analyzer: 50/50 couplers, a phase dial on the long
// arm, and independent short/long arm transmissions. The dial advances the
// central-slot fringe as cos(phase + qubit phase): the long arm contributes
// e^{-i phase} to the outcome amplitude.
struct MzParams {
  double delay = 420e-9;   // long-arm excess delay, seconds
  double phase = 0.0;      // radians
  double t_short = 1.0;    // short-arm intensity transmission
  double t_long = 1.0;     // long-arm intensity transmission

  void validate() const;  // throws std::invalid_argument when out of range
};

// Three-slot POVM on the {|early>, |late>} qubit seen at one output port:
//   E_early = (t_short/4) |e><e|
//   E_late  = (t_long/4)  |l><l|
//   E_central = (1/4) |chi><chi|,  |chi> = sqrt(t_long) e^{i phase} |e>
//                                        + sqrt(t_short) |l>
// plus the no-click remainder.
PovmSet mz_povm(const MzParams& p);

// Interference-visibility ceiling from a long/short transmission ratio:
// V = 2 sqrt(r) / (1 + r).
double visibility_from_imbalance(double ratio);

// Joint outcome probabilities p(a, b) = tr(rho (E_a x E_b)) for a two-qubit
// state measured by one analyzer per arm. Rows index the idler outcome,
// columns the signal outcome, in order {early, central, late, no_click}.
Eigen::Matrix4d joint_franson_probability(const DensityMatrix& rho,
                                          const PovmSet& idler_povm,
                                          const PovmSet& signal_povm);

// Draws one joint outcome from a probability table; SlotLabel::none stands
// for no click on that arm.
std::pair<SlotLabel, SlotLabel> sample_joint_slots(
    const Eigen::Matrix4d& table, Rng& rng);

// Slot arrival-time shift through the analyzer: early 0, central +delay,
// late +2*delay.
double slot_time_shift(SlotLabel slot, double delay);

struct DetectorParams {
  double efficiency = 1.0;
  double dark_rate = 0.0;     // counts per second
  double jitter_sigma = 0.0;  // seconds
  double dead_time = 0.0;     // seconds

  void validate() const;  // throws std::invalid_argument when out of range
  bool operator==(const DetectorParams&) const = default;
};

// Event tier of mz_povm for independent (product-state) photons: each tag's
// qubit amplitudes pick a slot via the Born rule; surviving tags shift by
// slot_time_shift and keep their metadata-free fields. metas must parallel
// tags. Output sorted by time.
std::vector<TimeTag> apply_analyzer_events(const std::vector<TimeTag>& tags,
                                           const std::vector<QubitMeta>& metas,
                                           const MzParams& p, Rng& rng);

// Detection chain: efficiency thinning, Poisson dark counts over
// [0, duration), Gaussian time jitter, then dead-time pruning per channel.
// Dark tags copy the channel of the input stream (single-channel streams
// expected). Output sorted by time.
std::vector<TimeTag> apply_detector(const std::vector<TimeTag>& tags,
                                    const DetectorParams& p, double duration,
                                    std::uint16_t channel, Rng& rng);

}  // namespace qnode

#pragma once

#include <string>
#include <vector>

#include "qnode/density_matrix.hpp"
#include "qnode/rng.hpp"
#include "qnode/timetag.hpp"

namespace qnode {

enum class MemoryMode { transparency, afc };

std::string to_string(MemoryMode mode);
MemoryMode memory_mode_from_string(const std::string& name);

// Atomic-frequency-comb storage channel. An absorbed photon re-emerges as an
// echo after 1/comb_period_delta; in transparency mode the medium is a
// passive transmission element.
struct AfcParams {
  double comb_period_delta = 1.0 / 3.0e-6;  // Hz, echo delay = 1/delta
  double eta0 = 0.2275;            // zero-delay internal efficiency
  double t2_eff = 27e-6;           // effective coherence time, seconds
  double device_transmission = 0.25;
  double extra_insertion_loss = 0.8;  // multiplicative factor, 1 = lossless
  MemoryMode mode = MemoryMode::afc;

  void validate() const;  // throws std::invalid_argument when out of range
  bool operator==(const AfcParams&) const = default;
};

// Echo delay 1/delta. Throws std::domain_error unless delta > 0.
double afc_delay(double comb_period_delta);

// Internal storage efficiency eta0 * exp(-4 tau / t2_eff) at delay tau.
double afc_efficiency(double tau, double eta0, double t2_eff);

// Survival probability of a stored photon through the whole device:
// internal efficiency times device transmission times extra insertion loss.
// Transparency mode drops the internal-efficiency factor.
double end_to_end_efficiency(const AfcParams& p);

struct MemoryAnalyticResult {
  DensityMatrix state;
  double heralding_efficiency = 0.0;
};

// Phase-preserving loss channel: the post-selected (photon survived) state
// equals the input, and heralding_efficiency = end_to_end_efficiency(p).
MemoryAnalyticResult apply_memory_analytic(const DensityMatrix& rho,
                                           const AfcParams& p);

// Event tier. Stored photons (pair photons, inside the comb acceptance)
// survive with end_to_end_efficiency and shift by +1/delta in afc mode;
// broadband tags (in-comb flag false) pass with the passive transmission and
// no shift. Output is sorted by time.
std::vector<TimeTag> apply_memory_events(const std::vector<TimeTag>& signal,
                                         const AfcParams& p, Rng& rng);

}  // namespace qnode

#pragma once

#include <cstdint>
#include <vector>

#include "qnode/rng.hpp"

namespace qnode {

// Continuous-wave cavity-enhanced pair source plus the broadband background
// reaching each detection arm.
struct SourceParams {
  double pair_rate = 5.0e4;          // detected-band pairs per second
  double correlation_time = 8.84e-8; // double-exponential signal-idler scale
  double pump_visibility = 1.0;      // fraction of pairs with coherent phase
  double depolarized_fraction = 0.0; // fraction replaced by white noise
  double idler_noise_rate = 0.0;     // broadband photons/s on the idler arm
  double signal_noise_rate = 0.0;    // broadband photons/s on the signal arm
  // Fraction of the signal-arm broadband rate that is emitted alongside a
  // pair (filter leakage of the partner mode) rather than as a stationary
  // background. Correlated partners arrive within ~prompt_spread of the pair.
  double herald_correlated_fraction = 0.0;
  double prompt_spread = 1.0e-9;

  void validate() const;  // throws std::invalid_argument when out of range
  bool operator==(const SourceParams&) const = default;
};

struct PairEvent {
  double idler_time = 0.0;
  double signal_time = 0.0;   // idler_time + double-exponential offset
  double pair_phase = 0.0;    // relative phase of the |ll> component
  std::int64_t id = 0;
  bool coherent = true;       // false: phase drawn uniformly (pump dephased)
  bool depolarized = false;   // true: pair behaves as two independent photons
};

// Pairs over [0, duration) with exponential waiting times. Times are sorted
// by idler_time; ids are sequential from id_offset.
std::vector<PairEvent> sample_pairs(double duration, const SourceParams& p,
                                    Rng& rng, std::int64_t id_offset = 0);

// Stationary Poisson background times over [t0, t0 + duration), sorted.
std::vector<double> sample_background(double t0, double duration, double rate,
                                      Rng& rng);

// Per-pair count of herald-correlated broadband partners is Poisson with
// this mean.
double correlated_partner_mean(const SourceParams& p);

// Cross-correlation of an ideal Poissonian pair source,
// g2 = 1 + 1/(pair_rate * window), for a window wide enough to capture the
// whole correlation peak.
double analytic_cross_g2(double pairs_per_window);

}  // namespace qnode

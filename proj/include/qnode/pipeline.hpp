#pragma once

#include <cstdint>
#include <vector>

#include "qnode/density_matrix.hpp"
#include "qnode/scenario.hpp"
#include "qnode/timetag.hpp"

namespace qnode {

// Event-tier simulation output: one time-sorted tag stream per physical
// channel. signal_b is populated only in heralded-g2 mode, where the signal
// arm feeds a 50/50 fibre splitter.
struct PipelineResult {
  std::vector<TimeTag> idler;
  std::vector<TimeTag> signal_a;
  std::vector<TimeTag> signal_b;
  double duration = 0.0;
};

// Runs the full chain: pair source -> storage device (signal arm) ->
// analyzers or splitter -> detectors. The output is a pure function of
// (scenario, seed); shard count and thread count never change a byte.
PipelineResult run_pipeline(const Scenario& sc, std::uint64_t seed);
PipelineResult run_pipeline(const Scenario& sc);  // uses sc.run.seed

// Two-qubit state emitted by the source ensemble: pump dephasing shrinks
// the |ee><ll| coherence to pump_visibility, the depolarized fraction mixes
// in I/4.
DensityMatrix analytic_source_state(const SourceParams& p);

// Displacement between signal and idler arrival times for true pairs after
// the storage stage: the echo delay in afc mode, zero in transparency mode.
// Coincidence analysis centres its windows here.
double analysis_base_offset(const Scenario& sc);

// Herald-normalized echo-efficiency estimate. `end_to_end` is background-
// subtracted coincidences per idler click; `internal` divides out the static
// chain (signal detection efficiency, passive transmission, analyzer click
// probability, correlation-tail capture) so it estimates the storage
// efficiency alone. `analytic_internal` is the closed-form value for the
// scenario's storage settings (1 in transparency mode).
struct EfficiencyEstimate {
  double window = 0.0;             // coincidence window used, seconds
  double coincidences = 0.0;       // counts in the echo window
  double accidental_mean = 0.0;    // mean counts over displaced windows
  double end_to_end = 0.0;
  double sigma_end_to_end = 0.0;
  double divisor = 1.0;            // static-chain factor divided out
  double internal = 0.0;
  double sigma_internal = 0.0;
  double analytic_internal = 1.0;
};

EfficiencyEstimate estimate_efficiency(const Scenario& sc,
                                       const std::vector<TimeTag>& idler,
                                       const std::vector<TimeTag>& signal,
                                       double base_offset);

}  // namespace qnode

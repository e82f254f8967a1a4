#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "qnode/analyzer.hpp"
#include "qnode/memory.hpp"
#include "qnode/source.hpp"

namespace qnode {

// Analyzer settings as configured: the phase is stored in units of pi so a
// serialize/load round trip is bit-exact.
struct ScenarioAnalyzer {
  double delay = 420e-9;
  double phase_over_pi = 0.0;
  double t_short = 1.0;
  double t_long = 1.0;

  MzParams to_mz() const;
  bool operator==(const ScenarioAnalyzer&) const = default;
};

struct RunParams {
  double duration = 1.0;       // seconds of simulated acquisition
  std::uint64_t seed = 1;
  int shards = 1;              // parallelism hint; results shard-invariant

  bool operator==(const RunParams&) const = default;
};

// bare: no analyzers, one detector per arm. franson: one analyzer per arm.
// heralded-g2: no analyzers, signal split onto two detectors.
enum class AnalysisMode { bare, franson, heralded_g2 };

std::string to_string(AnalysisMode mode);
AnalysisMode analysis_mode_from_string(const std::string& name);

struct AnalysisParams {
  AnalysisMode mode = AnalysisMode::franson;
  double coincidence_window = 400e-9;
  double slot_window = 200e-9;
  // Displacements (added to the echo offset) of the windows that estimate
  // the accidental-coincidence floor.
  std::vector<double> accidental_offsets = {6e-6,  8e-6,  10e-6, 12e-6,
                                            14e-6, 16e-6, 18e-6, 20e-6,
                                            22e-6, 24e-6};
  std::string tomography_settings = "default";

  bool operator==(const AnalysisParams&) const = default;
};

struct Scenario {
  SourceParams source;
  AfcParams memory;
  ScenarioAnalyzer analyzer_idler;
  ScenarioAnalyzer analyzer_signal{420e-9, 0.0, 1.0, 0.5};
  DetectorParams detector_idler{0.8, 50.0, 1e-9, 50e-9};
  DetectorParams detector_signal{0.5, 100.0, 1e-9, 50e-9};
  RunParams run;
  AnalysisParams analysis;

  // Throws std::invalid_argument naming the offending field path.
  void validate() const;
  bool operator==(const Scenario&) const = default;
};

// Parses the INI-like scenario text. Parse failures report line and column;
// unknown sections or keys suggest the nearest known name; the result is
// validated. `origin` names the source in error messages.
Scenario parse_scenario(std::string_view text, std::string_view origin = "");

Scenario load_scenario(const std::string& path);

// Exact textual form: parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const Scenario& s);

// Default scenario with every key documented by a comment line.
std::string annotated_default_scenario();

}  // namespace qnode

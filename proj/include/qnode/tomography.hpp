#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "qnode/analyzer.hpp"
#include "qnode/coincidence.hpp"
#include "qnode/decay_fit.hpp"
#include "qnode/density_matrix.hpp"

namespace qnode {

struct TomographySetting {
  double phase_idler = 0.0;   // radians
  double phase_signal = 0.0;  // radians
  std::string label;
};

// The 4-setting grid (phi_i, phi_s) in {0, pi/2}^2. Central-cell fringes
// carry the XX/XY/YX/YY information; corner cells carry populations.
std::vector<TomographySetting> default_settings();

struct SettingCounts {
  TomographySetting setting;
  FransonCounts cells;        // slot-grid counts for this setting
  FransonCounts accidentals;  // expected accidental counts per cell
  double duration = 0.0;      // seconds of acquisition
};

struct TomographyCounts {
  std::vector<SettingCounts> settings;
};

// Linear inversion: least-squares estimate of the Pauli expectations from
// all slot-grid cells (balanced-analyzer response model), assembled into
// rho = (1/4) sum <P x Q> P x Q and projected to the physical set.
// Throws std::invalid_argument on fewer than 4 settings and
// std::domain_error when the design matrix is singular.
DensityMatrix reconstruct_two_qubit(const TomographyCounts& counts);

// Optional iterative maximum-likelihood refinement. Maximizes the
// per-setting multinomial likelihood of the slot-grid counts (cell counts
// conditioned on a coincidence, balanced-analyzer response model) by damped
// positive-map steps; counts that exactly match a state leave it fixed.
DensityMatrix mle_refine(const TomographyCounts& counts,
                         const DensityMatrix& rho0, int max_iter = 500,
                         double tol = 1e-8);

struct OneQubitSettingCounts {
  double phase_signal = 0.0;  // radians
  double early = 0.0;
  double central = 0.0;
  double late = 0.0;
};

// Bloch-vector estimate for a heralded signal qubit from slot counts at
// phi_s = 0 and pi/2; physical projection applied. Throws
// std::invalid_argument unless both phases are present with positive totals.
DensityMatrix reconstruct_one_qubit(
    std::span<const OneQubitSettingCounts> counts);

// Subtracts expected accidentals per cell (floored at zero), then maps the
// counts to their balanced-analyzer equivalents. Every slot fixes the
// interferometer arm a time-bin pair component travelled (early = short,
// late = long, central pairs with the bin its partner slot selects), so
// corner cells rescale by their arm-transmission product and central cells
// are re-leveled onto the rebalanced corners with the interference
// modulation rescaled by the geometric-mean amplitude damping.
TomographyCounts correct_counts(const TomographyCounts& counts,
                                const MzParams& idler, const MzParams& signal);

struct BasisVisibilities {
  double v_z = 0.0;  // signed corner-correlation imbalance
  double v_x = 0.0;  // central-cell fringe modulation, idler phase 0
  double v_y = 0.0;  // central-cell fringe modulation, idler phase pi/2
};

// Conditional visibilities of the heralded signal qubit extracted from the
// 4-setting slot grids; the fringe estimators are quadrature sums, hence
// insensitive to a static analyzer phase offset.
BasisVisibilities conditional_visibilities(const TomographyCounts& counts);

// Mean over the three bases of (1 + V_b) / 2.
double average_one_qubit_fidelity(const BasisVisibilities& v);

// Uhlmann fidelity between the corrected input state and the retrieved
// state.
double input_output_fidelity(const DensityMatrix& rho_in_corrected,
                             const DensityMatrix& rho_out);

struct FitResult {
  double eta0 = 0.0;
  double t2_eff = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Weighted fit of eta0 * exp(-4 tau / t2_eff); requires at least 3 points.
FitResult fit_exponential_decay(std::span<const double> tau,
                                std::span<const double> eta,
                                std::span<const double> sigma);

// Flat key-value export of a fit result, one "key = value" per line.
std::string serialize_fit_result(const FitResult& fit);

}  // namespace qnode

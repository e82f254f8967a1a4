#pragma once

#include <span>

namespace qnode {

// Exponential storage-efficiency decay eta(tau) = eta0 * exp(-4 tau / t2).
struct DecayFitResult {
  double eta0 = 0.0;
  double t2 = 0.0;
  double eta0_err = 0.0;
  double t2_err = 0.0;
  double cov_eta0_t2 = 0.0;
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Weighted least squares via Gauss-Newton with backtracking. Initial guess
// comes from a weighted linear fit of ln(eta) against tau. Parameter errors
// are sqrt of the diagonal of (J^T J)^-1 with sigma-whitened residuals.
DecayFitResult fit_efficiency_decay(std::span<const double> tau,
                                    std::span<const double> eta,
                                    std::span<const double> sigma);

struct TwoPointDecay {
  double eta0 = 0.0;
  double t2 = 0.0;
};

// Closed-form solution through two efficiency points; requires genuine decay
// (tau2 > tau1, eta1 > eta2 > 0).
TwoPointDecay two_point_decay(double tau1, double eta1, double tau2,
                              double eta2);

}  // namespace qnode

#include "qnode/decay_fit.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace qnode {

namespace {

double model(double tau, double eta0, double t2) {
  return eta0 * std::exp(-4.0 * tau / t2);
}

double chi_square(std::span<const double> tau, std::span<const double> eta,
                  std::span<const double> sigma, double eta0, double t2) {
  double sum = 0.0;
  for (size_t i = 0; i < tau.size(); ++i) {
    double r = (model(tau[i], eta0, t2) - eta[i]) / sigma[i];
    sum += r * r;
  }
  return sum;
}

}  // namespace

DecayFitResult fit_efficiency_decay(std::span<const double> tau,
                                    std::span<const double> eta,
                                    std::span<const double> sigma) {
  const size_t n = tau.size();
  if (eta.size() != n || sigma.size() != n)
    throw std::invalid_argument("decay fit: mismatched array lengths");
  if (n < 2) throw std::invalid_argument("decay fit: need at least two points");
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(tau[i]) || !std::isfinite(eta[i]) ||
        !std::isfinite(sigma[i]))
      throw std::invalid_argument("decay fit: non-finite input");
    if (tau[i] < 0) throw std::invalid_argument("decay fit: negative delay");
    if (eta[i] <= 0)
      throw std::invalid_argument("decay fit: efficiencies must be positive");
    if (sigma[i] <= 0)
      throw std::invalid_argument("decay fit: uncertainties must be positive");
  }
  bool distinct = false;
  for (size_t i = 1; i < n && !distinct; ++i) distinct = tau[i] != tau[0];
  if (!distinct)
    throw std::invalid_argument("decay fit: all delays are identical");

  // Weighted linear regression of ln(eta) on tau; var(ln eta) ~ (sigma/eta)^2.
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    double w = (eta[i] / sigma[i]) * (eta[i] / sigma[i]);
    double y = std::log(eta[i]);
    sw += w;
    sx += w * tau[i];
    sy += w * y;
    sxx += w * tau[i] * tau[i];
    sxy += w * tau[i] * y;
  }
  double det = sw * sxx - sx * sx;
  if (det <= 0) throw std::invalid_argument("decay fit: degenerate design");
  double slope = (sw * sxy - sx * sy) / det;
  double intercept = (sxx * sy - sx * sxy) / det;
  if (slope >= 0) slope = -1e-3 / (tau[n - 1] - tau[0] + 1e-300);

  double eta0 = std::exp(intercept);
  double t2 = -4.0 / slope;

  DecayFitResult out;
  double chi2 = chi_square(tau, eta, sigma, eta0, t2);
  Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
  const int max_iter = 100;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    jtj.setZero();
    for (size_t i = 0; i < n; ++i) {
      double e = std::exp(-4.0 * tau[i] / t2);
      double j0 = e / sigma[i];
      double j1 = eta0 * e * 4.0 * tau[i] / (t2 * t2) / sigma[i];
      double r = (eta0 * e - eta[i]) / sigma[i];
      jtj(0, 0) += j0 * j0;
      jtj(0, 1) += j0 * j1;
      jtj(1, 1) += j1 * j1;
      jtr(0) += j0 * r;
      jtr(1) += j1 * r;
    }
    jtj(1, 0) = jtj(0, 1);
    Eigen::Vector2d step = jtj.ldlt().solve(-jtr);
    if (!step.allFinite()) break;

    // Backtrack until chi2 improves and parameters stay positive.
    double scale = 1.0;
    double new_eta0 = eta0, new_t2 = t2, new_chi2 = chi2;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt, scale *= 0.5) {
      double c_eta0 = eta0 + scale * step(0);
      double c_t2 = t2 + scale * step(1);
      if (c_eta0 <= 0 || c_t2 <= 0) continue;
      double c = chi_square(tau, eta, sigma, c_eta0, c_t2);
      if (c <= chi2 + 1e-14) {
        new_eta0 = c_eta0;
        new_t2 = c_t2;
        new_chi2 = c;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    double rel = std::max(std::abs(new_eta0 - eta0) / eta0,
                          std::abs(new_t2 - t2) / t2);
    eta0 = new_eta0;
    t2 = new_t2;
    chi2 = new_chi2;
    if (rel < 1e-10) {
      out.converged = true;
      ++iter;
      break;
    }
  }

  out.eta0 = eta0;
  out.t2 = t2;
  out.chi2 = chi2;
  out.iterations = iter;
  if (iter == max_iter) out.converged = false;

  // Covariance at the optimum; jtj is from the last evaluated iterate, so
  // recompute at the final parameters.
  jtj.setZero();
  for (size_t i = 0; i < n; ++i) {
    double e = std::exp(-4.0 * tau[i] / t2);
    double j0 = e / sigma[i];
    double j1 = eta0 * e * 4.0 * tau[i] / (t2 * t2) / sigma[i];
    jtj(0, 0) += j0 * j0;
    jtj(0, 1) += j0 * j1;
    jtj(1, 1) += j1 * j1;
  }
  jtj(1, 0) = jtj(0, 1);
  Eigen::Matrix2d cov = jtj.inverse();
  if (cov.allFinite() && cov(0, 0) >= 0 && cov(1, 1) >= 0) {
    out.eta0_err = std::sqrt(cov(0, 0));
    out.t2_err = std::sqrt(cov(1, 1));
    out.cov_eta0_t2 = cov(0, 1);
  }
  return out;
}

TwoPointDecay two_point_decay(double tau1, double eta1, double tau2,
                              double eta2) {
  if (!std::isfinite(tau1) || !std::isfinite(tau2) || !std::isfinite(eta1) ||
      !std::isfinite(eta2))
    throw std::domain_error("two-point decay: non-finite input");
  if (!(tau2 > tau1))
    throw std::domain_error("two-point decay: delays must increase");
  if (!(eta1 > eta2) || eta2 <= 0)
    throw std::domain_error("two-point decay: efficiencies must decay");
  TwoPointDecay out;
  out.t2 = 4.0 * (tau2 - tau1) / std::log(eta1 / eta2);
  out.eta0 = eta1 * std::exp(4.0 * tau1 / out.t2);
  return out;
}

}  // namespace qnode

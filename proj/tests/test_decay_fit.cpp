#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qnode/decay_fit.hpp"
#include "qnode/rng.hpp"

using namespace qnode;

TEST_CASE("noiseless decay data is recovered essentially exactly") {
  const double eta0 = 0.21, t2 = 25e-6;
  std::vector<double> tau, eta, sig;
  for (double t : {1e-6, 3e-6, 5e-6, 8e-6, 12e-6, 18e-6}) {
    tau.push_back(t);
    eta.push_back(eta0 * std::exp(-4.0 * t / t2));
    sig.push_back(1e-3);
  }
  auto fit = fit_efficiency_decay(tau, eta, sig);
  CHECK(fit.converged);
  CHECK(fit.eta0 == doctest::Approx(eta0).epsilon(1e-8));
  CHECK(fit.t2 == doctest::Approx(t2).epsilon(1e-8));
  CHECK(fit.chi2 < 1e-12);
}

TEST_CASE("noisy fits recover truth within quoted uncertainties") {
  const double eta0 = 0.18, t2 = 27e-6;
  Rng rng(2026);
  int cover_t2 = 0;
  const int reps = 300;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<double> tau, eta, sig;
    for (double t : {2e-6, 4e-6, 6e-6, 9e-6, 13e-6, 20e-6, 26e-6}) {
      double truth = eta0 * std::exp(-4.0 * t / t2);
      double s = 0.04 * truth;
      tau.push_back(t);
      eta.push_back(std::max(1e-6, truth + rng.normal(0, s)));
      sig.push_back(s);
    }
    auto fit = fit_efficiency_decay(tau, eta, sig);
    REQUIRE(fit.converged);
    if (std::abs(fit.t2 - t2) <= fit.t2_err) ++cover_t2;
    CHECK(std::abs(fit.t2 - t2) < 6.0 * fit.t2_err);
  }
  // 1-sigma interval should cover truth ~68% of the time.
  double frac = static_cast<double>(cover_t2) / reps;
  CHECK(frac > 0.57);
  CHECK(frac < 0.79);
}

TEST_CASE("two-point closed form inverts the decay model") {
  // Forward-generate from known parameters, invert, compare.
  const double eta0 = 0.2275, t2 = 23.7e-6;
  double tau1 = 3e-6, tau2 = 10e-6;
  double e1 = eta0 * std::exp(-4 * tau1 / t2);
  double e2 = eta0 * std::exp(-4 * tau2 / t2);
  auto tp = two_point_decay(tau1, e1, tau2, e2);
  CHECK(tp.t2 == doctest::Approx(t2).epsilon(1e-12));
  CHECK(tp.eta0 == doctest::Approx(eta0).epsilon(1e-12));
}

TEST_CASE("two-point solution matches the reference efficiency pair") {
  // 13.7% at 3 us and 4.2% at 10 us pin the lifetime near 23.7 us and the
  // zero-delay efficiency near 22.8%.
  auto tp = two_point_decay(3e-6, 0.137, 10e-6, 0.042);
  CHECK(tp.t2 == doctest::Approx(23.68e-6).epsilon(2e-3));
  CHECK(tp.eta0 == doctest::Approx(0.2275).epsilon(2e-3));
}

TEST_CASE("decay fit input validation") {
  std::vector<double> tau{1e-6, 2e-6}, eta{0.1, 0.08}, sig{0.01, 0.01};
  CHECK_NOTHROW(fit_efficiency_decay(tau, eta, sig));
  CHECK_THROWS_AS(fit_efficiency_decay(tau, eta, std::vector<double>{0.01}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      fit_efficiency_decay(std::vector<double>{1e-6}, std::vector<double>{0.1},
                           std::vector<double>{0.01}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      fit_efficiency_decay(tau, std::vector<double>{0.1, -0.08}, sig),
      std::invalid_argument);
  CHECK_THROWS_AS(
      fit_efficiency_decay(tau, eta, std::vector<double>{0.01, 0.0}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      fit_efficiency_decay(std::vector<double>{2e-6, 2e-6}, eta, sig),
      std::invalid_argument);
  CHECK_THROWS_AS(two_point_decay(3e-6, 0.042, 10e-6, 0.137),
                  std::domain_error);
  CHECK_THROWS_AS(two_point_decay(10e-6, 0.137, 3e-6, 0.042),
                  std::domain_error);
}

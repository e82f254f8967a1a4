#include "qnode/source.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qnode {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0; }

}  // namespace

void SourceParams::validate() const {
  require(std::isfinite(pair_rate) && pair_rate > 0,
          "source.pair_rate must be positive");
  require(std::isfinite(correlation_time) && correlation_time > 0,
          "source.correlation_time must be positive");
  require(std::isfinite(pump_visibility) && pump_visibility >= 0 &&
              pump_visibility <= 1,
          "source.pump_visibility must lie in [0, 1]");
  require(std::isfinite(depolarized_fraction) && depolarized_fraction >= 0 &&
              depolarized_fraction <= 1,
          "source.depolarized_fraction must lie in [0, 1]");
  require(finite_nonneg(idler_noise_rate),
          "source.idler_noise_rate must be non-negative");
  require(finite_nonneg(signal_noise_rate),
          "source.signal_noise_rate must be non-negative");
  require(std::isfinite(herald_correlated_fraction) &&
              herald_correlated_fraction >= 0 &&
              herald_correlated_fraction <= 1,
          "source.herald_correlated_fraction must lie in [0, 1]");
  require(std::isfinite(prompt_spread) && prompt_spread > 0,
          "source.prompt_spread must be positive");
}

std::vector<PairEvent> sample_pairs(double duration, const SourceParams& p,
                                    Rng& rng, std::int64_t id_offset) {
  p.validate();
  if (!std::isfinite(duration) || duration < 0)
    throw std::invalid_argument("source: duration must be non-negative");
  std::vector<PairEvent> out;
  out.reserve(static_cast<size_t>(duration * p.pair_rate * 1.1) + 16);
  double t = 0.0;
  std::int64_t id = id_offset;
  while (true) {
    t += rng.exponential(p.pair_rate);
    if (t >= duration) break;
    PairEvent ev;
    ev.idler_time = t;
    // Double-exponential (Laplace) arrival-time difference.
    double u = rng.uniform();
    double mag = rng.exponential(1.0 / p.correlation_time);
    ev.signal_time = t + (u < 0.5 ? -mag : mag);
    ev.id = id++;
    ev.coherent = rng.bernoulli(p.pump_visibility);
    ev.pair_phase =
        ev.coherent ? 0.0 : rng.uniform(0.0, 2.0 * std::numbers::pi);
    ev.depolarized = rng.bernoulli(p.depolarized_fraction);
    out.push_back(ev);
  }
  return out;
}

std::vector<double> sample_background(double t0, double duration, double rate,
                                      Rng& rng) {
  if (!finite_nonneg(rate))
    throw std::invalid_argument("source: background rate must be non-negative");
  if (!std::isfinite(duration) || duration < 0)
    throw std::invalid_argument("source: duration must be non-negative");
  std::vector<double> out;
  if (rate == 0) return out;
  out.reserve(static_cast<size_t>(duration * rate * 1.1) + 16);
  double t = t0;
  double end = t0 + duration;
  while (true) {
    t += rng.exponential(rate);
    if (t >= end) break;
    out.push_back(t);
  }
  return out;
}

double correlated_partner_mean(const SourceParams& p) {
  p.validate();
  return p.herald_correlated_fraction * p.signal_noise_rate / p.pair_rate;
}

double analytic_cross_g2(double pairs_per_window) {
  if (!std::isfinite(pairs_per_window) || pairs_per_window <= 0)
    throw std::domain_error("cross g2: pairs per window must be positive");
  return 1.0 + 1.0 / pairs_per_window;
}

}  // namespace qnode

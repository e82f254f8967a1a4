#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace qnode {

// Deterministic splitmix64-based generator.
//
// Every stochastic stage of the simulator draws from a stream derived from
// (master seed, structural indices) rather than from one shared sequential
// generator, so results are invariant under re-chunking and thread count.
// Variates are produced by inverse-CDF / Box-Muller on raw 53-bit uniforms;
// no std::<distribution> is used, keeping byte-identical output across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(0x9E3779B97F4A7C15ull, seed)) {}

  // Independent child stream addressed by up to four structural indices
  // (stage tag, chunk, per-event counter, ...).
  [[nodiscard]] Rng derive(std::uint64_t a, std::uint64_t b = 0,
                           std::uint64_t c = 0, std::uint64_t d = 0) const {
    std::uint64_t s = state_;
    s = mix(s, a);
    s = mix(s, b);
    s = mix(s, c);
    s = mix(s, d);
    return Rng(s, Tag{});
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Exponential with the given rate; log1p keeps the draw finite for u -> 1.
  double exponential(double rate) {
    if (rate <= 0.0) throw std::domain_error("exponential: rate must be > 0");
    return -std::log1p(-uniform()) / rate;
  }

  double normal(double mean = 0.0, double sigma = 1.0) {
    // Box-Muller; the second variate is intentionally discarded so that the
    // draw count per call is fixed.
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Exact Poisson sampler. Knuth's product method, splitting large means into
  // bounded-mean chunks (a sum of Poissons is Poisson).
  std::uint64_t poisson(double mean) {
    if (mean < 0.0) throw std::domain_error("poisson: mean must be >= 0");
    std::uint64_t total = 0;
    while (mean > 16.0) {
      total += poisson_knuth(16.0);
      mean -= 16.0;
    }
    return total + poisson_knuth(mean);
  }

  // Index into a discrete distribution; probabilities need not be normalized.
  std::size_t pick(std::span<const double> weights) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    double x = uniform() * sum;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (x < acc) return i;
    }
    return weights.size() - 1;
  }

 private:
  struct Tag {};
  Rng(std::uint64_t raw_state, Tag) : state_(raw_state) {}

  static std::uint64_t mix(std::uint64_t s, std::uint64_t v) {
    std::uint64_t z = s ^ (v + 0x9E3779B97F4A7C15ull + (s << 6) + (s >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t poisson_knuth(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  std::uint64_t state_;
};

// Stage tags for derived streams. Values are part of the reproducibility
// contract: changing them changes every seeded output.
namespace rng_stage {
inline constexpr std::uint64_t source = 0x01;
inline constexpr std::uint64_t memory = 0x02;
inline constexpr std::uint64_t analyzer_idler = 0x03;
inline constexpr std::uint64_t analyzer_signal = 0x04;
inline constexpr std::uint64_t detector = 0x05;
inline constexpr std::uint64_t splitter = 0x06;
inline constexpr std::uint64_t collapse = 0x07;
inline constexpr std::uint64_t noise = 0x08;
}  // namespace rng_stage

}  // namespace qnode

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "virodyne/core.hpp"

namespace virodyne {

/// Deterministic random stream keyed by (seed, stream_id).
///
/// Each logical consumer (an agent, a Monte-Carlo trial, a replicate) owns its
/// own stream id, so results never depend on how work is split across
/// threads. Variate transforms are written out here rather than taken from
/// <random> distributions, whose algorithms are implementation-defined.
class RngStream {
 public:
  RngStream(Seed seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                      0x76697264u};
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  /// Poisson variate. Multiplicative inversion for small means; large means
  /// are split into halves, which keeps the draw exact.
  std::uint64_t poisson(double mean) {
    std::uint64_t total = 0;
    while (mean > 30.0) {
      mean *= 0.5;
      total += poisson(mean);
    }
    const double limit = std::exp(-mean);
    double prod = uniform_pos();
    std::uint64_t k = 0;
    while (prod > limit) {
      ++k;
      prod *= uniform_pos();
    }
    return total + k;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection keeps the result unbiased.
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline RngStream rng_stream(Seed seed, std::uint64_t stream_id) { return RngStream(seed, stream_id); }

}  // namespace virodyne

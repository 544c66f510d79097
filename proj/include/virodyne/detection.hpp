#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "virodyne/channel.hpp"
#include "virodyne/error.hpp"
#include "virodyne/parallel.hpp"
#include "virodyne/rng.hpp"

namespace virodyne {

/// Expected received concentration for a single emitted "1" at the current
/// symbol (tap 0) and the following symbol intervals (taps 1..L-1).
struct ChannelImpulseResponse {
  std::vector<double> taps;
  double symbol_interval = 1.0;

  void validate() const {
    if (taps.empty()) throw Error(ErrorKind::InvalidArgument, "impulse response needs at least one tap");
    for (double h : taps)
      if (!(h >= 0.0) || !std::isfinite(h)) throw Error(ErrorKind::InvalidArgument, "taps must be finite and >= 0");
    if (!(symbol_interval > 0.0)) throw Error(ErrorKind::InvalidArgument, "symbol interval must be positive");
  }
};

/// Samples the channel at the end of each symbol interval after an instant
/// release of `mass` from `tx` at t = 0.
inline ChannelImpulseResponse cir_from_channel(const Environment& env, const Position& tx, const Position& rx,
                                               double mass, double symbol_interval, std::size_t length) {
  ChannelImpulseResponse cir;
  cir.symbol_interval = symbol_interval;
  const auto src = SourceSpec::instant(tx, mass, 0.0);
  for (std::size_t k = 0; k < length; ++k)
    cir.taps.push_back(concentration_instant(src, env, rx, TimePoint(symbol_interval * static_cast<double>(k + 1))));
  return cir;
}

struct GaussianNoise {
  double sigma = 1.0;
};

/// Particle counting: alpha particles per unit concentration; the observed
/// sample is count / alpha with count ~ Poisson(alpha * mean).
struct PoissonNoise {
  double alpha = 1.0;
};

using NoiseModel = std::variant<GaussianNoise, PoissonNoise>;

inline void validate(const NoiseModel& noise) {
  if (const auto* g = std::get_if<GaussianNoise>(&noise); g && !(g->sigma > 0.0))
    throw Error(ErrorKind::InvalidArgument, "Gaussian sigma must be positive");
  if (const auto* p = std::get_if<PoissonNoise>(&noise); p && !(p->alpha > 0.0))
    throw Error(ErrorKind::InvalidArgument, "Poisson alpha must be positive");
}

struct ReceivedFrame {
  std::vector<double> samples;
  NoiseModel noise{GaussianNoise{}};
};

/// y[n] >= threshold decides 1. Without a threshold the midpoint of the mean
/// 0/1 levels under the impulse response is used.
struct SymbolThreshold {
  std::optional<double> threshold{};
};

/// Maximum-likelihood sequence detection over `memory` taps (0 = all taps).
struct SequenceML {
  std::size_t memory = 0;
};

/// Decides on y[n] - y[n-1] >= threshold; needs no channel model.
struct NonCoherentDifference {
  std::optional<double> threshold{};
};

struct DetectorConfig {
  std::variant<SymbolThreshold, SequenceML, NonCoherentDifference> mode{SymbolThreshold{}};
  double prior_one = 0.5;

  void validate() const {
    if (!(prior_one >= 0.0 && prior_one <= 1.0)) throw Error(ErrorKind::InvalidArgument, "prior must be in [0, 1]");
    if (const auto* s = std::get_if<SymbolThreshold>(&mode); s && s->threshold && !(*s->threshold >= 0.0))
      throw Error(ErrorKind::InvalidArgument, "threshold must be >= 0");
  }
};

struct DetectionReport {
  std::vector<std::uint8_t> bits;
  /// Log-likelihood (up to bit-independent constants) of the decided sequence,
  /// when a channel model is available.
  std::optional<double> log_likelihood;
  /// Per-symbol decision statistic minus threshold (threshold modes only).
  std::vector<double> margins;
};

/// Linear convolution of the bit sequence with the taps (length N + L - 1).
inline std::vector<double> modulate(std::span<const std::uint8_t> bits, const ChannelImpulseResponse& cir) {
  cir.validate();
  if (bits.empty()) return {};
  std::vector<double> out(bits.size() + cir.taps.size() - 1, 0.0);
  for (std::size_t n = 0; n < bits.size(); ++n) {
    if (bits[n] > 1) throw Error(ErrorKind::InvalidArgument, "bits must be 0 or 1");
    if (bits[n] == 0) continue;
    for (std::size_t k = 0; k < cir.taps.size(); ++k) out[n + k] += cir.taps[k];
  }
  return out;
}

/// Draws a noisy observation of the expected samples.
inline std::vector<double> add_noise(std::span<const double> expected, const NoiseModel& noise, RngStream& rng) {
  validate(noise);
  std::vector<double> out(expected.size());
  if (const auto* g = std::get_if<GaussianNoise>(&noise)) {
    for (std::size_t i = 0; i < expected.size(); ++i) out[i] = expected[i] + g->sigma * rng.normal();
  } else {
    const double alpha = std::get<PoissonNoise>(noise).alpha;
    for (std::size_t i = 0; i < expected.size(); ++i)
      out[i] = static_cast<double>(rng.poisson(alpha * expected[i])) / alpha;
  }
  return out;
}

namespace detail {

inline double log_likelihood(double y, double mean, const NoiseModel& noise) {
  if (const auto* g = std::get_if<GaussianNoise>(&noise)) {
    const double e = (y - mean) / g->sigma;
    return -0.5 * e * e;
  }
  const double alpha = std::get<PoissonNoise>(noise).alpha;
  const double count = std::round(alpha * y);
  const double lambda = std::max(alpha * mean, 1e-300);
  return count * std::log(lambda) - lambda - std::lgamma(count + 1.0);
}

inline double log_prior(std::uint8_t bit, double p1) {
  const double p = bit ? p1 : 1.0 - p1;
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

inline double sequence_log_likelihood(std::span<const std::uint8_t> bits, std::span<const double> samples,
                                      std::span<const double> taps, const NoiseModel& noise) {
  double ll = 0.0;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    double mean = 0.0;
    for (std::size_t k = 0; k < taps.size() && k <= n; ++k)
      if (n - k < bits.size() && bits[n - k]) mean += taps[k];
    ll += log_likelihood(samples[n], mean, noise);
  }
  return ll;
}

inline double sequence_metric(std::span<const std::uint8_t> bits, std::span<const double> samples,
                              std::span<const double> taps, const NoiseModel& noise, double p1) {
  double m = sequence_log_likelihood(bits, samples, taps, noise);
  for (auto b : bits) m += log_prior(b, p1);
  return m;
}

}  // namespace detail

/// Midpoint between the mean received levels of a 0 and a 1, counting ISI
/// from earlier symbols at the prior rate.
inline double default_threshold(const ChannelImpulseResponse& cir, double p1) {
  double isi = 0.0;
  for (std::size_t k = 1; k < cir.taps.size(); ++k) isi += cir.taps[k];
  return 0.5 * cir.taps[0] + p1 * isi;
}

/// Exhaustive maximum a-posteriori sequence search; n_bits <= 24.
inline std::vector<std::uint8_t> sequence_ml_exhaustive(std::span<const double> samples, std::size_t n_bits,
                                                        std::span<const double> taps, const NoiseModel& noise,
                                                        double p1) {
  if (n_bits > 24) throw Error(ErrorKind::InvalidArgument, "exhaustive search limited to 24 bits");
  std::vector<std::uint8_t> bits(n_bits), best(n_bits);
  double best_metric = -std::numeric_limits<double>::infinity();
  const std::uint64_t count = 1ull << n_bits;
  for (std::uint64_t code = 0; code < count; ++code) {
    for (std::size_t n = 0; n < n_bits; ++n) bits[n] = static_cast<std::uint8_t>((code >> n) & 1u);
    const double m = detail::sequence_metric(bits, samples, taps, noise, p1);
    if (m > best_metric) {
      best_metric = m;
      best = bits;
    }
  }
  return best;
}

/// Viterbi trellis over the last (memory - 1) bits.
inline std::vector<std::uint8_t> sequence_ml_viterbi(std::span<const double> samples, std::size_t n_bits,
                                                     std::span<const double> taps, const NoiseModel& noise,
                                                     double p1) {
  const std::size_t memory = taps.size();
  if (memory > 20) throw Error(ErrorKind::InvalidArgument, "trellis memory limited to 20 taps");
  std::vector<std::uint8_t> bits(n_bits, 0);
  if (memory == 1) {
    // Memoryless channel: symbol-by-symbol MAP.
    for (std::size_t n = 0; n < n_bits; ++n) {
      const double l1 = detail::log_likelihood(samples[n], taps[0], noise) + detail::log_prior(1, p1);
      const double l0 = detail::log_likelihood(samples[n], 0.0, noise) + detail::log_prior(0, p1);
      bits[n] = l1 > l0 ? 1 : 0;
    }
    return bits;
  }
  const std::size_t n_states = std::size_t{1} << (memory - 1);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  // State bit j holds b[n-1-j].
  std::vector<double> metric(n_states, neg_inf), next(n_states);
  metric[0] = 0.0;
  std::vector<std::vector<std::uint32_t>> from(samples.size(), std::vector<std::uint32_t>(n_states, 0));
  const std::size_t mask = n_states - 1;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    std::fill(next.begin(), next.end(), neg_inf);
    const bool forced_zero = n >= n_bits;
    for (std::size_t s = 0; s < n_states; ++s) {
      if (metric[s] == neg_inf) continue;
      for (std::uint8_t b = 0; b <= (forced_zero ? 0 : 1); ++b) {
        double mean = b ? taps[0] : 0.0;
        for (std::size_t k = 1; k < memory; ++k)
          if ((s >> (k - 1)) & 1u) mean += taps[k];
        double m = metric[s] + detail::log_likelihood(samples[n], mean, noise);
        if (!forced_zero) m += detail::log_prior(b, p1);
        const std::size_t ns = ((s << 1) | b) & mask;
        // Ties resolve toward the numerically smaller predecessor.
        if (m > next[ns]) {
          next[ns] = m;
          from[n][ns] = static_cast<std::uint32_t>(s);
        }
      }
    }
    metric.swap(next);
  }
  std::size_t state = static_cast<std::size_t>(std::max_element(metric.begin(), metric.end()) - metric.begin());
  for (std::size_t n = samples.size(); n-- > 0;) {
    if (n < n_bits) bits[n] = static_cast<std::uint8_t>(state & 1u);
    state = from[n][state];
  }
  return bits;
}

/// Decides the transmitted bits of a frame. `cir` may be null only for the
/// non-coherent detector.
inline DetectionReport detect(const ReceivedFrame& frame, const ChannelImpulseResponse* cir,
                              const DetectorConfig& config) {
  config.validate();
  validate(frame.noise);
  DetectionReport report;
  const auto& y = frame.samples;

  std::visit(
      [&](const auto& mode) {
        using T = std::decay_t<decltype(mode)>;
        if constexpr (std::is_same_v<T, NonCoherentDifference>) {
          const std::size_t n_bits = cir ? y.size() + 1 - std::min(y.size(), cir->taps.size()) : y.size();
          double theta = 0.0;
          if (mode.threshold) theta = *mode.threshold;
          else if (cir) theta = 0.5 * cir->taps[0];
          else throw Error(ErrorKind::MissingChannelModel, "non-coherent detector needs a threshold or a channel model");
          double prev = 0.0;
          for (std::size_t n = 0; n < n_bits; ++n) {
            const double stat = y[n] - prev;
            prev = y[n];
            report.margins.push_back(stat - theta);
            report.bits.push_back(stat >= theta ? 1 : 0);
          }
        } else {
          if (cir == nullptr) throw Error(ErrorKind::MissingChannelModel, "detector needs the channel impulse response");
          cir->validate();
          if (y.size() + 1 < cir->taps.size()) throw Error(ErrorKind::InvalidArgument, "frame shorter than the channel memory");
          const std::size_t n_bits = y.size() + 1 - cir->taps.size();
          if constexpr (std::is_same_v<T, SymbolThreshold>) {
            const double theta = mode.threshold ? *mode.threshold : default_threshold(*cir, config.prior_one);
            for (std::size_t n = 0; n < n_bits; ++n) {
              report.margins.push_back(y[n] - theta);
              report.bits.push_back(y[n] >= theta ? 1 : 0);
            }
          } else {
            const std::size_t memory =
                mode.memory == 0 ? cir->taps.size() : std::min(mode.memory, cir->taps.size());
            const std::span<const double> taps(cir->taps.data(), memory);
            report.bits = sequence_ml_viterbi(y, n_bits, taps, frame.noise, config.prior_one);
          }
        }
      },
      config.mode);
  if (cir != nullptr)
    report.log_likelihood = detail::sequence_log_likelihood(report.bits, y, cir->taps, frame.noise);
  return report;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Counts indexed [sent][decided].
using JointCounts = std::vector<std::vector<std::uint64_t>>;

/// Plug-in estimate of I(X;Y) in bits from a contingency table.
inline double mutual_information(const JointCounts& joint) {
  std::uint64_t total = 0;
  std::size_t cols = 0;
  for (const auto& row : joint) {
    cols = std::max(cols, row.size());
    for (auto c : row) total += c;
  }
  if (total == 0) throw Error(ErrorKind::EmptyObservation, "no observations");
  std::vector<double> px(joint.size(), 0.0), py(cols, 0.0);
  const double n = static_cast<double>(total);
  for (std::size_t i = 0; i < joint.size(); ++i)
    for (std::size_t j = 0; j < joint[i].size(); ++j) {
      px[i] += static_cast<double>(joint[i][j]) / n;
      py[j] += static_cast<double>(joint[i][j]) / n;
    }
  double mi = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i)
    for (std::size_t j = 0; j < joint[i].size(); ++j) {
      if (joint[i][j] == 0) continue;
      const double pxy = static_cast<double>(joint[i][j]) / n;
      mi += pxy * std::log2(pxy / (px[i] * py[j]));
    }
  return std::max(0.0, mi);
}

/// 95% Wilson score interval for k successes out of n.
inline std::pair<double, double> wilson_interval(std::uint64_t k, std::uint64_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct MonteCarloSpec {
  ChannelImpulseResponse cir;
  NoiseModel noise{GaussianNoise{}};
  DetectorConfig detector{};
  std::size_t bits_per_frame = 1;
  std::size_t trials = 1;
  /// Inverts every decision; a sanity hook for the metrics.
  bool invert_decisions = false;
};

struct ErrorReport {
  std::uint64_t errors = 0;
  std::uint64_t bits = 0;
  double ber = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  JointCounts joint{{0, 0}, {0, 0}};
  double mi_bits = 0.0;
  std::size_t trials = 0;
  Seed seed = 0;
};

/// Monte-Carlo bit error rate. Trial i uses stream (seed, i); per-trial counts
/// are summed in trial order, so the result is thread-count independent.
inline ErrorReport error_probability(const MonteCarloSpec& spec, Seed seed) {
  if (spec.trials < 1) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
  spec.cir.validate();
  validate(spec.noise);
  spec.detector.validate();
  std::vector<std::array<std::uint64_t, 4>> per_trial(spec.trials);
  parallel_for(spec.trials, [&](std::size_t t) {
    RngStream rng(seed, t);
    std::vector<std::uint8_t> bits(spec.bits_per_frame);
    for (auto& b : bits) b = rng.bernoulli(spec.detector.prior_one) ? 1 : 0;
    const auto expected = modulate(bits, spec.cir);
    ReceivedFrame frame{add_noise(expected, spec.noise, rng), spec.noise};
    auto decided = detect(frame, &spec.cir, spec.detector).bits;
    std::array<std::uint64_t, 4> counts{};
    for (std::size_t n = 0; n < bits.size(); ++n) {
      const std::uint8_t d = spec.invert_decisions ? static_cast<std::uint8_t>(1 - decided[n]) : decided[n];
      ++counts[2 * bits[n] + d];
    }
    per_trial[t] = counts;
  });
  ErrorReport rep;
  for (const auto& c : per_trial) {
    rep.joint[0][0] += c[0];
    rep.joint[0][1] += c[1];
    rep.joint[1][0] += c[2];
    rep.joint[1][1] += c[3];
  }
  rep.errors = rep.joint[0][1] + rep.joint[1][0];
  rep.bits = rep.errors + rep.joint[0][0] + rep.joint[1][1];
  rep.ber = static_cast<double>(rep.errors) / static_cast<double>(rep.bits);
  std::tie(rep.ci_low, rep.ci_high) = wilson_interval(rep.errors, rep.bits);
  rep.mi_bits = mutual_information(rep.joint);
  rep.trials = spec.trials;
  rep.seed = seed;
  return rep;
}

}  // namespace virodyne

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "virodyne/error.hpp"
#include "virodyne/genetic_code.hpp"
#include "virodyne/seqstat.hpp"

namespace virodyne {

/// Kimura two-parameter substitution probabilities per site and generation.
///
/// Convention: the transition partner (A<->G, C<->T) receives probability q,
/// each of the two transversion partners receives gamma * q, and the base is
/// kept with probability 1 - q (1 + 2 gamma). Other conventions map onto this
/// one by rescaling q and gamma.
struct KimuraParams {
  double q = 0.0;
  double gamma = 0.0;

  void validate() const {
    if (!(q >= 0.0) || !(gamma >= 0.0) || !std::isfinite(q) || !std::isfinite(gamma))
      throw Error(ErrorKind::InvalidParams, "q and gamma must be finite and >= 0");
    if (q * (1.0 + 2.0 * gamma) > 1.0)
      throw Error(ErrorKind::InvalidParams, "q (1 + 2 gamma) must not exceed 1");
  }
};

/// Restricts which substitutions may occur. The probability of some mutation
/// happening is unchanged; it is redistributed over the allowed targets.
enum class MutationMode { Full, TransitionsOnly, TransversionsOnly };

enum class Level { Base, Codon, AminoAcid };

inline const char* to_string(MutationMode m) {
  switch (m) {
    case MutationMode::Full: return "full";
    case MutationMode::TransitionsOnly: return "ts";
    case MutationMode::TransversionsOnly: return "tv";
  }
  return "full";
}

inline const char* to_string(Level l) {
  switch (l) {
    case Level::Base: return "base";
    case Level::Codon: return "codon";
    case Level::AminoAcid: return "aa";
  }
  return "base";
}

/// Row-stochastic matrix P(from -> to) with state labels.
struct SubstitutionMatrix {
  Level level = Level::Base;
  Eigen::MatrixXd p;
  std::vector<std::string> labels;

  std::size_t states() const { return static_cast<std::size_t>(p.rows()); }
  double operator()(std::size_t from, std::size_t to) const {
    return p(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
  }

  double max_row_sum_error() const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) worst = std::max(worst, std::abs(p.row(i).sum() - 1.0));
    return worst;
  }
};

inline SubstitutionMatrix kimura_base_matrix(const KimuraParams& params, MutationMode mode = MutationMode::Full) {
  params.validate();
  SubstitutionMatrix m;
  m.level = Level::Base;
  m.p = Eigen::MatrixXd::Zero(4, 4);
  for (char c : kBaseSymbols) m.labels.emplace_back(1, c);
  const double mutate = params.q * (1.0 + 2.0 * params.gamma);
  for (int i = 0; i < 4; ++i) {
    const auto from = static_cast<Base>(i);
    double allowed = 0.0;
    for (int j = 0; j < 4; ++j) {
      const auto to = static_cast<Base>(j);
      if (i == j) continue;
      double v = is_transition(from, to) ? params.q : params.gamma * params.q;
      if (mode == MutationMode::TransitionsOnly && !is_transition(from, to)) v = 0.0;
      if (mode == MutationMode::TransversionsOnly && !is_transversion(from, to)) v = 0.0;
      m.p(i, j) = v;
      allowed += v;
    }
    if (allowed > 0.0 && mode != MutationMode::Full) m.p.row(i) *= mutate / allowed;
    m.p(i, i) = 1.0 - m.p.row(i).sum();
  }
  return m;
}

/// Independent per-site substitution: P(c -> c') is the product of the three
/// per-position base probabilities (the threefold Kronecker product).
inline SubstitutionMatrix codon_matrix(const SubstitutionMatrix& base) {
  if (base.level != Level::Base || base.states() != 4)
    throw Error(ErrorKind::InvalidArgument, "codon_matrix needs a 4x4 base matrix");
  SubstitutionMatrix m;
  m.level = Level::Codon;
  m.p.resize(64, 64);
  for (std::size_t c = 0; c < 64; ++c) m.labels.push_back(Codon::from_index(c).str());
  for (std::size_t a = 0; a < 64; ++a) {
    const Codon from = Codon::from_index(a);
    for (std::size_t b = 0; b < 64; ++b) {
      const Codon to = Codon::from_index(b);
      double v = 1.0;
      for (std::size_t k = 0; k < 3; ++k)
        v *= base(static_cast<std::size_t>(from.bases[k]), static_cast<std::size_t>(to.bases[k]));
      m.p(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
    }
  }
  return m;
}

/// Weight of each codon among the synonyms of its amino acid; the weights of
/// every amino acid (and of STOP) sum to 1.
using CodonWeights = std::array<double, 64>;

inline CodonWeights uniform_synonymous_weights() {
  const auto& code = GeneticCode::standard();
  CodonWeights w{};
  for (std::size_t c = 0; c < 64; ++c) w[c] = 1.0 / static_cast<double>(code.codons_of(code.amino_of(c)).size());
  return w;
}

inline void validate_weights(const CodonWeights& w) {
  const auto& code = GeneticCode::standard();
  for (std::size_t aa = 0; aa < kAminoStates; ++aa) {
    double sum = 0.0;
    for (std::size_t c : code.codons_of(aa)) {
      if (!(w[c] >= 0.0)) throw Error(ErrorKind::InvalidWeights, "codon weights must be >= 0");
      sum += w[c];
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error(ErrorKind::InvalidWeights,
                  "codon weights of " + std::string(kAminoNames[aa]) + " sum to " + std::to_string(sum));
  }
}

/// Amino-acid level channel (20 amino acids + STOP):
/// P(a -> b) = sum over codons c of a of w(c) * sum over codons c' of b of P(c -> c').
inline SubstitutionMatrix amino_matrix(const SubstitutionMatrix& codon, const CodonWeights& weights) {
  if (codon.level != Level::Codon || codon.states() != 64)
    throw Error(ErrorKind::InvalidArgument, "amino_matrix needs a 64x64 codon matrix");
  validate_weights(weights);
  const auto& code = GeneticCode::standard();
  SubstitutionMatrix m;
  m.level = Level::AminoAcid;
  m.p = Eigen::MatrixXd::Zero(kAminoStates, kAminoStates);
  for (char c : kAminoSymbols) m.labels.emplace_back(1, c);
  for (std::size_t from = 0; from < 64; ++from) {
    const double w = weights[from];
    if (w == 0.0) continue;
    const auto a = static_cast<Eigen::Index>(code.amino_of(from));
    for (std::size_t to = 0; to < 64; ++to)
      m.p(a, static_cast<Eigen::Index>(code.amino_of(to))) += w * codon(from, to);
  }
  return m;
}

/// Drops STOP and renormalizes each row over the 20 amino acids.
inline SubstitutionMatrix without_stop(const SubstitutionMatrix& aa) {
  if (aa.level != Level::AminoAcid || aa.states() != kAminoStates)
    throw Error(ErrorKind::InvalidArgument, "without_stop needs a 21-state amino matrix");
  SubstitutionMatrix m;
  m.level = Level::AminoAcid;
  m.p = aa.p.topLeftCorner(20, 20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const double s = m.p.row(i).sum();
    if (s > 0.0) m.p.row(i) /= s;
  }
  m.labels.assign(aa.labels.begin(), aa.labels.begin() + 20);
  return m;
}

// ---------------------------------------------------------------------------
// Mutation direction at an alignment position
// ---------------------------------------------------------------------------

struct DirectionOptions {
  Level level = Level::AminoAcid;
  MutationMode mode = MutationMode::Full;
  /// Overrides the codon usage inferred from the alignment.
  std::optional<CodonWeights> codon_weights{};
  /// Report over the 20 amino acids only (rows renormalized without STOP).
  bool exclude_stop = false;
};

struct RankedState {
  std::string label;
  std::string name;
  double probability;
};

struct DirectionReport {
  Level level = Level::AminoAcid;
  MutationMode mode = MutationMode::Full;
  std::size_t position = 0;
  std::size_t n_effective = 0;
  std::vector<RankedState> source;   // observed distribution, non-zero states
  std::vector<RankedState> targets;  // ranked, self-transitions excluded
};

namespace detail {

inline std::string state_name(Level level, const std::string& label) {
  if (level != Level::AminoAcid) return label;
  return std::string(kAminoNames[amino_index(label[0])]);
}

/// Ordering key with 12 significant digits so values that agree to rounding
/// noise tie and fall back to state order.
inline double rank_key(double p) {
  if (p <= 0.0) return 0.0;
  const double scale = std::pow(10.0, 11.0 - std::floor(std::log10(p)));
  return std::round(p * scale) / scale;
}

struct CodonColumn {
  std::array<double, 64> counts{};
  std::size_t n = 0;
};

inline CodonColumn codon_column(const AlignmentMatrix& m, std::size_t codon_position) {
  if (m.alphabet != Alphabet::Nucleotide)
    throw Error(ErrorKind::InvalidArgument, "codon level needs a nucleotide alignment");
  if (codon_position < 1 || 3 * codon_position > m.length)
    throw Error(ErrorKind::OutOfRange, "codon position outside alignment");
  CodonColumn col;
  const std::size_t c0 = 3 * (codon_position - 1);
  for (std::size_t r = 0; r < m.size(); ++r) {
    const auto b0 = m.state(r, c0), b1 = m.state(r, c0 + 1), b2 = m.state(r, c0 + 2);
    if (!b0 || !b1 || !b2) continue;
    col.counts[16 * *b0 + 4 * *b1 + *b2] += 1.0;
    ++col.n;
  }
  return col;
}

}  // namespace detail

/// Where the residues observed at `position` are most likely to mutate to:
/// the column distribution is pushed through the level's substitution matrix,
/// staying put is excluded, and targets are sorted by probability (ties by
/// state order).
///
/// Positions are 1-based columns for base level and for protein alignments;
/// for codon and amino-acid level on nucleotide alignments they count codons.
inline DirectionReport mutation_direction(const AlignmentMatrix& alignment, std::size_t position,
                                          const KimuraParams& params, const DirectionOptions& opt) {
  const auto& code = GeneticCode::standard();
  DirectionReport rep;
  rep.level = opt.level;
  rep.mode = opt.mode;
  rep.position = position;

  std::vector<double> source;
  SubstitutionMatrix matrix;
  const SubstitutionMatrix base = kimura_base_matrix(params, opt.mode);

  switch (opt.level) {
    case Level::Base: {
      if (alignment.alphabet != Alphabet::Nucleotide)
        throw Error(ErrorKind::InvalidArgument, "base level needs a nucleotide alignment");
      const auto d = column_distribution(alignment, position);
      if (!d) throw Error(ErrorKind::NoData, "column has no unmasked residues");
      source = d->probabilities;
      rep.n_effective = d->n_effective;
      matrix = base;
      break;
    }
    case Level::Codon: {
      const auto col = detail::codon_column(alignment, position);
      if (col.n == 0) throw Error(ErrorKind::NoData, "codon column has no complete codons");
      source.assign(64, 0.0);
      for (std::size_t c = 0; c < 64; ++c) source[c] = col.counts[c] / static_cast<double>(col.n);
      rep.n_effective = col.n;
      matrix = codon_matrix(base);
      break;
    }
    case Level::AminoAcid: {
      CodonWeights weights = uniform_synonymous_weights();
      source.assign(kAminoStates, 0.0);
      if (alignment.alphabet == Alphabet::AminoAcid) {
        const auto d = column_distribution(alignment, position);
        if (!d) throw Error(ErrorKind::NoData, "column has no unmasked residues");
        for (std::size_t k = 0; k < 20; ++k) source[k] = d->probabilities[k];
        rep.n_effective = d->n_effective;
      } else {
        const auto col = detail::codon_column(alignment, position);
        if (col.n == 0) throw Error(ErrorKind::NoData, "codon column has no complete codons");
        rep.n_effective = col.n;
        std::array<double, kAminoStates> per_aa{};
        for (std::size_t c = 0; c < 64; ++c) {
          source[code.amino_of(c)] += col.counts[c] / static_cast<double>(col.n);
          per_aa[code.amino_of(c)] += col.counts[c];
        }
        // Observed codon usage; amino acids not seen keep uniform synonyms.
        for (std::size_t c = 0; c < 64; ++c) {
          const std::size_t aa = code.amino_of(c);
          if (per_aa[aa] > 0.0) weights[c] = col.counts[c] / per_aa[aa];
        }
      }
      if (opt.codon_weights) weights = *opt.codon_weights;
      matrix = amino_matrix(codon_matrix(base), weights);
      if (opt.exclude_stop) {
        matrix = without_stop(matrix);
        const double stop_mass = source[kStopIndex];
        source.resize(20);
        if (stop_mass >= 1.0) throw Error(ErrorKind::NoData, "column holds only STOP");
        for (double& v : source) v /= 1.0 - stop_mass;
      }
      break;
    }
  }

  const std::size_t n = matrix.states();
  std::vector<double> target(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (source[i] == 0.0) continue;
    rep.source.push_back({matrix.labels[i], detail::state_name(opt.level, matrix.labels[i]), source[i]});
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) target[j] += source[i] * matrix(i, j);
  }
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < n; ++j)
    if (target[j] > 0.0) order.push_back(j);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detail::rank_key(target[a]) > detail::rank_key(target[b]);
  });
  for (std::size_t j : order)
    rep.targets.push_back({matrix.labels[j], detail::state_name(opt.level, matrix.labels[j]), target[j]});
  return rep;
}

}  // namespace virodyne

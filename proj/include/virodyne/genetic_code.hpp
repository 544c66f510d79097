#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "virodyne/error.hpp"

namespace virodyne {

/// DNA bases in the library-wide state order A, C, G, T.
enum class Base : std::uint8_t { A = 0, C = 1, G = 2, T = 3 };

inline constexpr std::array<char, 4> kBaseSymbols = {'A', 'C', 'G', 'T'};

/// Parses one nucleotide; U (RNA) is folded onto T, lowercase accepted.
inline Base parse_base(char c) {
  switch (c) {
    case 'A': case 'a': return Base::A;
    case 'C': case 'c': return Base::C;
    case 'G': case 'g': return Base::G;
    case 'T': case 't': case 'U': case 'u': return Base::T;
    default: break;
  }
  throw Error(ErrorKind::InvalidResidue, std::string("invalid nucleotide '") + c + "'");
}

inline constexpr char symbol(Base b) { return kBaseSymbols[static_cast<std::size_t>(b)]; }

inline constexpr bool is_purine(Base b) { return b == Base::A || b == Base::G; }

/// A<->G and C<->T.
inline constexpr bool is_transition(Base from, Base to) {
  return from != to && is_purine(from) == is_purine(to);
}

inline constexpr bool is_transversion(Base from, Base to) {
  return is_purine(from) != is_purine(to);
}

/// 20 amino acids in alphabetical one-letter order, then STOP as the 21st state.
inline constexpr std::string_view kAminoSymbols = "ACDEFGHIKLMNPQRSTVWY*";
inline constexpr std::size_t kAminoStates = 21;
inline constexpr std::size_t kStopIndex = 20;

inline constexpr std::array<std::string_view, kAminoStates> kAminoNames = {
    "Ala", "Cys", "Asp", "Glu", "Phe", "Gly", "His", "Ile", "Lys", "Leu", "Met",
    "Asn", "Pro", "Gln", "Arg", "Ser", "Thr", "Val", "Trp", "Tyr", "STOP"};

/// Index into kAminoSymbols; std::string_view::npos if not one of the 21 states.
inline constexpr std::size_t amino_index(char c) {
  const char upper = (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
  return kAminoSymbols.find(upper);
}

/// Codons are indexed 16*b1 + 4*b2 + b3 over the A,C,G,T order.
struct Codon {
  std::array<Base, 3> bases;

  constexpr std::size_t index() const {
    return 16 * static_cast<std::size_t>(bases[0]) + 4 * static_cast<std::size_t>(bases[1]) +
           static_cast<std::size_t>(bases[2]);
  }

  static constexpr Codon from_index(std::size_t i) {
    return Codon{{static_cast<Base>((i >> 4) & 3), static_cast<Base>((i >> 2) & 3),
                  static_cast<Base>(i & 3)}};
  }

  std::string str() const { return {symbol(bases[0]), symbol(bases[1]), symbol(bases[2])}; }
};

inline Codon parse_codon(std::string_view triple) {
  if (triple.size() != 3)
    throw Error(ErrorKind::InvalidResidue, "codon must have exactly three nucleotides");
  return Codon{{parse_base(triple[0]), parse_base(triple[1]), parse_base(triple[2])}};
}

namespace detail {
// Standard code laid out in the textbook T,C,A,G order for each position.
inline constexpr std::string_view kStandardCodeTCAG =
    "FFLLSSSSYY**CC*WLLLLPPPPHHQQRRRRIIIMTTTTNNKKSSRRVVVVAAAADDEEGGGG";

inline constexpr std::size_t tcag_rank(Base b) {
  switch (b) {
    case Base::T: return 0;
    case Base::C: return 1;
    case Base::A: return 2;
    case Base::G: return 3;
  }
  return 0;
}

inline constexpr std::array<std::uint8_t, 64> build_codon_table() {
  std::array<std::uint8_t, 64> table{};
  for (std::size_t i = 0; i < 64; ++i) {
    const Codon c = Codon::from_index(i);
    const std::size_t tcag =
        16 * tcag_rank(c.bases[0]) + 4 * tcag_rank(c.bases[1]) + tcag_rank(c.bases[2]);
    table[i] = static_cast<std::uint8_t>(amino_index(kStandardCodeTCAG[tcag]));
  }
  return table;
}
}  // namespace detail

/// Standard genetic code, codon index -> amino state index (20 == STOP).
class GeneticCode {
 public:
  static const GeneticCode& standard() {
    static const GeneticCode code;
    return code;
  }

  std::size_t amino_of(std::size_t codon_index) const { return table_.at(codon_index); }
  std::size_t amino_of(const Codon& c) const { return table_[c.index()]; }

  /// Codon indices (ascending) that encode the given amino state.
  const std::vector<std::size_t>& codons_of(std::size_t amino) const { return synonyms_.at(amino); }

 private:
  GeneticCode() : table_(detail::build_codon_table()) {
    for (std::size_t i = 0; i < 64; ++i) synonyms_[table_[i]].push_back(i);
  }

  std::array<std::uint8_t, 64> table_;
  std::array<std::vector<std::size_t>, kAminoStates> synonyms_;
};

/// Translates a nucleotide triple to its one-letter amino acid, '*' for STOP.
inline char translate(std::string_view triple) {
  return kAminoSymbols[GeneticCode::standard().amino_of(parse_codon(triple))];
}

}  // namespace virodyne

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "virodyne/error.hpp"
#include "virodyne/format.hpp"
#include "virodyne/genetic_code.hpp"
#include "virodyne/parallel.hpp"

namespace virodyne {

enum class Alphabet { Nucleotide, AminoAcid, Auto };

inline const char* to_string(Alphabet a) {
  switch (a) {
    case Alphabet::Nucleotide: return "nucleotide";
    case Alphabet::AminoAcid: return "amino";
    case Alphabet::Auto: return "auto";
  }
  return "auto";
}

/// Residue symbols counted by the entropy (gaps and ambiguity codes excluded).
inline std::string_view counted_symbols(Alphabet a) {
  return a == Alphabet::Nucleotide ? std::string_view("ACGT") : kAminoSymbols.substr(0, 20);
}

namespace detail {

inline bool is_gap(char c) { return c == '-' || c == '.'; }

inline bool is_nucleotide_ambiguity(char c) { return std::string_view("NRYKMSWBDHV").find(c) != std::string_view::npos; }

inline bool is_amino_ambiguity(char c) { return std::string_view("XBZJUO*").find(c) != std::string_view::npos; }

/// Normalized symbol, or '\0' if `c` is not legal in the alphabet.
inline char normalize_residue(char c, Alphabet a) {
  const char u = (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
  if (is_gap(u)) return '-';
  if (a == Alphabet::Nucleotide) {
    if (u == 'U') return 'T';
    if (u == 'A' || u == 'C' || u == 'G' || u == 'T' || is_nucleotide_ambiguity(u)) return u;
    return '\0';
  }
  if (amino_index(u) < 20 || is_amino_ambiguity(u)) return u;
  return '\0';
}

inline Alphabet guess_alphabet(std::string_view text) {
  bool in_header = false;
  bool line_start = true;
  for (char c : text) {
    if (line_start) in_header = c == '>';
    line_start = c == '\n';
    if (in_header || c == '\n' || c == '\r' || c == ' ' || c == '\t') continue;
    const char u = (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
    if (std::string_view("ACGTUN-.").find(u) == std::string_view::npos) return Alphabet::AminoAcid;
  }
  return Alphabet::Nucleotide;
}

}  // namespace detail

struct FastaRecord {
  std::string id;
  std::string sequence;

  friend bool operator==(const FastaRecord&, const FastaRecord&) = default;
};

/// Parses FASTA text. Residues are uppercased, U becomes T for nucleotide
/// input, and gaps/ambiguity codes are kept verbatim (they are masked later).
/// Whitespace inside sequence lines is ignored. `Auto` picks nucleotide when
/// every residue is one of ACGTUN, gaps included.
inline std::vector<FastaRecord> parse_fasta(std::string_view text, Alphabet alphabet = Alphabet::Auto) {
  if (alphabet == Alphabet::Auto) alphabet = detail::guess_alphabet(text);
  std::vector<FastaRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '>') {
      std::string_view header = line.substr(1);
      const std::size_t ws = header.find_first_of(" \t");
      records.push_back({std::string(header.substr(0, ws)), {}});
      if (records.back().id.empty()) throw ParseError(line_no, 2, "empty sequence identifier");
      continue;
    }
    if (line.front() == ';') continue;  // old-style comment
    if (records.empty()) throw ParseError(line_no, 1, "sequence data before the first '>' header");
    for (std::size_t col = 0; col < line.size(); ++col) {
      const char c = line[col];
      if (c == ' ' || c == '\t') continue;
      const char n = detail::normalize_residue(c, alphabet);
      if (n == '\0')
        throw ParseError(line_no, col + 1,
                         std::string("invalid ") + to_string(alphabet) + " residue '" + std::string(1, c) + "'");
      records.back().sequence.push_back(n);
    }
  }
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "no FASTA records");
  for (const auto& r : records)
    if (r.sequence.empty()) throw Error(ErrorKind::ParseError, "record '" + r.id + "' has no sequence");
  return records;
}

inline std::vector<FastaRecord> parse_fasta(std::istream& in, Alphabet alphabet = Alphabet::Auto) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_fasta(text, alphabet);
}

inline void write_fasta(std::ostream& out, const std::vector<FastaRecord>& records, std::size_t width = 60) {
  for (const auto& r : records) {
    out << '>' << r.id << '\n';
    for (std::size_t i = 0; i < r.sequence.size(); i += width) out << r.sequence.substr(i, width) << '\n';
  }
}

/// Equal-length rows over one alphabet.
struct AlignmentMatrix {
  Alphabet alphabet = Alphabet::Nucleotide;
  std::vector<std::string> ids;
  std::vector<std::string> rows;
  std::size_t length = 0;
  std::size_t truncated = 0;  // rows shortened in non-strict mode

  std::size_t size() const { return rows.size(); }

  /// State index of residue (row, col) within counted_symbols, or nullopt if
  /// the cell is a gap or ambiguity code.
  std::optional<std::size_t> state(std::size_t row, std::size_t col) const {
    const char c = rows[row][col];
    const std::size_t k = counted_symbols(alphabet).find(c);
    if (k == std::string_view::npos) return std::nullopt;
    return k;
  }

  bool masked(std::size_t row, std::size_t col) const { return !state(row, col).has_value(); }
};

/// Stacks records into a matrix. In strict mode every row must have the
/// same length; otherwise rows are cut to the shortest and `truncated` counts
/// the rows that lost residues.
inline AlignmentMatrix build_alignment(const std::vector<FastaRecord>& records, Alphabet alphabet,
                                       bool strict_length = true) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "no sequences");
  if (alphabet == Alphabet::Auto) {
    std::string all;
    for (const auto& r : records) all += r.sequence;
    alphabet = detail::guess_alphabet(all);
  }
  AlignmentMatrix m;
  m.alphabet = alphabet;
  std::size_t min_len = records.front().sequence.size();
  std::vector<std::string> offenders;
  for (const auto& r : records) {
    min_len = std::min(min_len, r.sequence.size());
    if (r.sequence.size() != records.front().sequence.size()) offenders.push_back(r.id);
  }
  if (strict_length && !offenders.empty()) throw LengthMismatch(offenders);
  m.length = min_len;
  for (const auto& r : records) {
    for (char c : r.sequence)
      if (detail::normalize_residue(c, alphabet) != c)
        throw Error(ErrorKind::InvalidResidue, "record '" + r.id + "' has residue '" + std::string(1, c) +
                                                   "' outside the " + to_string(alphabet) + " alphabet");
    m.ids.push_back(r.id);
    m.rows.push_back(r.sequence.substr(0, min_len));
    if (r.sequence.size() > min_len) ++m.truncated;
  }
  return m;
}

struct PositionDistribution {
  std::size_t position = 0;  // 1-based
  std::vector<double> probabilities;
  std::size_t n_effective = 0;
};

/// Residue frequencies of column `position` (1-based) with additive smoothing:
/// P_k = (count_k + pc) / (n + pc |N|). nullopt when no row has a counted
/// residue there.
inline std::optional<PositionDistribution> column_distribution(const AlignmentMatrix& m, std::size_t position,
                                                               double pseudocount = 0.0) {
  if (position < 1 || position > m.length) throw Error(ErrorKind::OutOfRange, "position outside alignment");
  const std::size_t states = counted_symbols(m.alphabet).size();
  std::vector<double> counts(states, 0.0);
  std::size_t n = 0;
  for (std::size_t r = 0; r < m.size(); ++r) {
    if (auto s = m.state(r, position - 1)) {
      counts[*s] += 1.0;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  PositionDistribution d;
  d.position = position;
  d.n_effective = n;
  const double denom = static_cast<double>(n) + pseudocount * static_cast<double>(states);
  d.probabilities.resize(states);
  for (std::size_t k = 0; k < states; ++k) d.probabilities[k] = (counts[k] + pseudocount) / denom;
  return d;
}

/// Shannon entropy in bits with 0 log 0 = 0.
inline double entropy_bits(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log2(v);
  return std::max(0.0, h);
}

struct EntropyProfile {
  Alphabet alphabet = Alphabet::Nucleotide;
  std::vector<std::optional<double>> entropy;  // index i holds position i + 1
  std::vector<std::size_t> n_effective;

  std::size_t length() const { return entropy.size(); }
};

inline EntropyProfile positional_entropy(const AlignmentMatrix& m, double pseudocount = 0.0) {
  if (pseudocount < 0.0) throw Error(ErrorKind::InvalidArgument, "pseudocount must be >= 0");
  EntropyProfile prof;
  prof.alphabet = m.alphabet;
  prof.entropy.resize(m.length);
  prof.n_effective.resize(m.length, 0);
  parallel_for(m.length, [&](std::size_t col) {
    if (auto d = column_distribution(m, col + 1, pseudocount)) {
      prof.entropy[col] = entropy_bits(d->probabilities);
      prof.n_effective[col] = d->n_effective;
    }
  });
  return prof;
}

struct TopK {
  std::size_t k = 1;
};

struct MinEntropy {
  double bits = 0.0;
};

using HotspotSelection = std::variant<TopK, MinEntropy>;

struct Hotspot {
  std::size_t position;  // 1-based
  double entropy_bits;
};

/// Positions ranked by entropy (descending, ties by ascending position).
/// Columns without data never qualify; k beyond the profile length is clipped.
inline std::vector<Hotspot> hotspots(const EntropyProfile& prof, const HotspotSelection& sel) {
  std::vector<Hotspot> all;
  for (std::size_t i = 0; i < prof.length(); ++i)
    if (prof.entropy[i]) all.push_back({i + 1, *prof.entropy[i]});
  std::stable_sort(all.begin(), all.end(), [](const Hotspot& a, const Hotspot& b) {
    return a.entropy_bits > b.entropy_bits;
  });
  if (const auto* top = std::get_if<TopK>(&sel)) {
    all.resize(std::min(top->k, all.size()));
  } else {
    const double h_min = std::get<MinEntropy>(sel).bits;
    std::erase_if(all, [&](const Hotspot& h) { return h.entropy_bits < h_min || h.entropy_bits == 0.0; });
  }
  return all;
}

/// CSV `position,entropy_bits,n_effective`; columns without data print NA.
inline void write_profile_csv(std::ostream& out, const EntropyProfile& prof) {
  out << "position,entropy_bits,n_effective\n";
  for (std::size_t i = 0; i < prof.length(); ++i) {
    out << (i + 1) << ',' << (prof.entropy[i] ? format_double(*prof.entropy[i]) : std::string("NA")) << ','
        << prof.n_effective[i] << '\n';
  }
}

inline EntropyProfile read_profile_csv(std::istream& in) {
  EntropyProfile prof;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "position,entropy_bits,n_effective") throw ParseError(line_no, 1, "expected profile header");
      header = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw ParseError(line_no, 1, "expected 3 fields");
    double pos = 0, h = 0, n = 0;
    if (!parse_double(std::string_view(line).substr(0, c1), pos) || pos != static_cast<double>(prof.length() + 1))
      throw ParseError(line_no, 1, "positions must run 1, 2, 3, ...");
    const std::string_view hs = std::string_view(line).substr(c1 + 1, c2 - c1 - 1);
    if (hs == "NA") prof.entropy.emplace_back();
    else if (parse_double(hs, h)) prof.entropy.emplace_back(h);
    else throw ParseError(line_no, c1 + 2, "bad entropy value");
    if (!parse_double(std::string_view(line).substr(c2 + 1), n)) throw ParseError(line_no, c2 + 2, "bad count");
    prof.n_effective.push_back(static_cast<std::size_t>(n));
  }
  return prof;
}

}  // namespace virodyne

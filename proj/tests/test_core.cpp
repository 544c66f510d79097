#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "virodyne/core.hpp"
#include "virodyne/genetic_code.hpp"
#include "virodyne/parallel.hpp"
#include "virodyne/rng.hpp"

using namespace virodyne;

namespace {

// Standard code transcribed per amino acid (one-letter code: codons).
const std::map<char, std::vector<std::string>>& reference_code() {
  static const std::map<char, std::vector<std::string>> table = {
      {'A', {"GCT", "GCC", "GCA", "GCG"}},
      {'R', {"CGT", "CGC", "CGA", "CGG", "AGA", "AGG"}},
      {'N', {"AAT", "AAC"}},
      {'D', {"GAT", "GAC"}},
      {'C', {"TGT", "TGC"}},
      {'Q', {"CAA", "CAG"}},
      {'E', {"GAA", "GAG"}},
      {'G', {"GGT", "GGC", "GGA", "GGG"}},
      {'H', {"CAT", "CAC"}},
      {'I', {"ATT", "ATC", "ATA"}},
      {'L', {"TTA", "TTG", "CTT", "CTC", "CTA", "CTG"}},
      {'K', {"AAA", "AAG"}},
      {'M', {"ATG"}},
      {'F', {"TTT", "TTC"}},
      {'P', {"CCT", "CCC", "CCA", "CCG"}},
      {'S', {"TCT", "TCC", "TCA", "TCG", "AGT", "AGC"}},
      {'T', {"ACT", "ACC", "ACA", "ACG"}},
      {'W', {"TGG"}},
      {'Y', {"TAT", "TAC"}},
      {'V', {"GTT", "GTC", "GTA", "GTG"}},
      {'*', {"TAA", "TAG", "TGA"}},
  };
  return table;
}

}  // namespace

TEST(Units, RejectNonFinite) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(Position(nan, 0, 0), Error);
  EXPECT_THROW(Position(0, inf, 0), Error);
  EXPECT_THROW(Velocity(0, 0, nan), Error);
  EXPECT_THROW(TimePoint{-1.0}, Error);
  EXPECT_THROW(TimePoint{inf}, Error);
  EXPECT_THROW(Diffusivity(0.0), Error);
  EXPECT_THROW(Diffusivity(-3.0), Error);
  EXPECT_THROW(Diffusivity{nan}, Error);
  EXPECT_NO_THROW(TimePoint(0.0));
  EXPECT_DOUBLE_EQ(Diffusivity(40.0).value(), 40.0);
}

TEST(Units, Geometry) {
  const Position a(1, 2, 3), b(4, 6, 3);
  EXPECT_DOUBLE_EQ(distance(a, b), 5.0);
  EXPECT_EQ(a + (b - a), b);
  EXPECT_DOUBLE_EQ(Velocity(3, 4, 0).speed(), 5.0);
}

TEST(GeneticCode, Examples) {
  EXPECT_EQ(translate("CAA"), 'Q');
  EXPECT_EQ(translate("TAA"), '*');
  EXPECT_EQ(translate("ATG"), 'M');
  EXPECT_EQ(translate("cag"), 'Q');
  EXPECT_EQ(translate("UGG"), 'W');
}

TEST(GeneticCode, MatchesReferenceTable) {
  const auto& code = GeneticCode::standard();
  std::size_t seen = 0;
  for (const auto& [aa, codons] : reference_code()) {
    for (const auto& c : codons) {
      EXPECT_EQ(translate(c), aa) << c;
      ++seen;
    }
    EXPECT_EQ(code.codons_of(amino_index(aa)).size(), codons.size()) << aa;
  }
  EXPECT_EQ(seen, 64u);
}

TEST(GeneticCode, ImageHas21Symbols) {
  const auto& code = GeneticCode::standard();
  std::set<std::size_t> image;
  std::size_t stops = 0;
  for (std::size_t i = 0; i < 64; ++i) {
    image.insert(code.amino_of(i));
    if (code.amino_of(i) == kStopIndex) ++stops;
    EXPECT_EQ(Codon::from_index(i).index(), i);
  }
  EXPECT_EQ(image.size(), 21u);
  EXPECT_EQ(stops, 3u);
}

TEST(GeneticCode, InvalidResidue) {
  try {
    translate("CAN");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidResidue);
  }
  EXPECT_THROW(translate("CA"), Error);
  EXPECT_THROW(translate("XYZ"), Error);
}

TEST(GeneticCode, TransitionClasses) {
  EXPECT_TRUE(is_transition(Base::A, Base::G));
  EXPECT_TRUE(is_transition(Base::C, Base::T));
  EXPECT_TRUE(is_transversion(Base::A, Base::C));
  EXPECT_TRUE(is_transversion(Base::G, Base::T));
  EXPECT_FALSE(is_transition(Base::A, Base::A));
  EXPECT_FALSE(is_transversion(Base::A, Base::A));
}

TEST(Rng, SameStreamSameDraws) {
  RngStream a(0, 0), b(0, 0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DistinctStreamsDiffer) {
  RngStream a(0, 0), b(0, 1);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  EXPECT_LT(same, 2);
}

TEST(Rng, ThreadCountIndependent) {
  auto draw_all = [](unsigned threads) {
    set_thread_count(threads);
    std::vector<std::vector<double>> out(64);
    parallel_for(out.size(), [&](std::size_t k) {
      RngStream r(7, k);
      for (int i = 0; i < 50; ++i) out[k].push_back(r.normal());
    });
    set_thread_count(0);
    return out;
  };
  EXPECT_EQ(draw_all(1), draw_all(8));
}

TEST(Rng, Moments) {
  RngStream r(42, 3);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0, se = 0, sp = 0;
  for (int i = 0; i < n; ++i) {
    su += r.uniform();
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
    se += r.exponential(2.0);
    sp += static_cast<double>(r.poisson(3.5));
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.01);
  EXPECT_NEAR(se / n, 0.5, 0.005);
  EXPECT_NEAR(sp / n, 3.5, 0.02);
}

TEST(Rng, PoissonLargeMean) {
  RngStream r(1, 1);
  const int n = 20000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double k = static_cast<double>(r.poisson(2500.0));
    s += k;
    s2 += k * k;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 2500.0, 2.0);
  EXPECT_NEAR(s2 / n - mean * mean, 2500.0, 150.0);
}

TEST(Parallel, PropagatesExceptions) {
  set_thread_count(4);
  EXPECT_THROW(parallel_for(100, [](std::size_t i) {
                 if (i == 37) throw Error(ErrorKind::InvalidArgument, "boom");
               }),
               Error);
  set_thread_count(0);
}

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "virodyne/channel.hpp"
#include "virodyne/fd_solver.hpp"
#include "virodyne/rng.hpp"

using namespace virodyne;
using Fd = FiniteDifferenceSolver;

namespace {

Fd::Grid cube(double half, std::size_t n, double z0 = -1e300) {
  Fd::Grid g;
  const double h = 2.0 * half / static_cast<double>(n - 1);
  g.origin = Position(-half, -half, z0 == -1e300 ? -half : z0);
  g.spacing = h;
  g.nx = g.ny = g.nz = n;
  return g;
}

Environment env_with(double D, Velocity wind = {}, Boundary b = FreeSpace{}) {
  Environment e;
  e.diffusivity = Diffusivity(D);
  e.wind = wind;
  e.boundary = b;
  return e;
}

struct Probe {
  std::size_t i, j, k;
};

// Interior nodes (away from walls) holding at least `floor_frac` of the peak.
std::vector<Probe> significant_nodes(const Fd& fd, std::size_t margin, double floor_frac) {
  const auto& g = fd.grid();
  double peak = 0.0;
  for (std::size_t k = 0; k < g.nz; ++k)
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) peak = std::max(peak, fd.at(i, j, k));
  std::vector<Probe> out;
  for (std::size_t k = margin; k + margin < g.nz; ++k)
    for (std::size_t j = margin; j + margin < g.ny; ++j)
      for (std::size_t i = margin; i + margin < g.nx; ++i)
        if (fd.at(i, j, k) >= floor_frac * peak) out.push_back({i, j, k});
  return out;
}

}  // namespace

TEST(FiniteDifference, ConservesMassAwayFromWalls) {
  Fd fd(cube(15.0, 61), 1.0);
  fd.add_blob({0.3, -0.2, 0.1}, 2.0, 1.5);
  EXPECT_NEAR(fd.total_mass(), 2.0, 1e-12);
  fd.advance_to(1.0);
  EXPECT_NEAR(fd.total_mass(), 2.0, 1e-6);
}

TEST(FiniteDifference, InstantReleaseMatchesGreenFunction) {
  const double D = 1.0, sigma = 1.5;
  Fd fd(cube(10.0, 41), D);
  const Position p(0.5, 0.0, -0.5);
  fd.add_blob(p, 1.0, sigma);
  fd.set_time(fd.blob_age(sigma));
  fd.advance_to(3.0);
  const auto src = SourceSpec::instant(p, 1.0);
  const auto probes = significant_nodes(fd, 4, 0.05);
  ASSERT_GT(probes.size(), 100u);
  for (const auto& q : probes) {
    const double exact = concentration_instant(src, env_with(D), fd.grid().node(q.i, q.j, q.k), TimePoint(3.0));
    EXPECT_NEAR(fd.at(q.i, q.j, q.k), exact, 0.03 * exact);
  }
}

TEST(FiniteDifference, UniformWindMatchesDriftedGreenFunction) {
  const double D = 1.0, sigma = 1.5;
  const Velocity v(0.15, -0.1, 0.0);
  Fd fd(cube(10.0, 41), D, [v](const Position&, double) { return v; });
  const Position p(-1.0, 0.5, 0.0);
  fd.add_blob(p, 1.0, sigma);
  fd.set_time(fd.blob_age(sigma));
  fd.advance_to(4.0, v.speed());
  // The blob is the field of a release made upwind, age seconds earlier.
  const auto src = SourceSpec::instant(p + (-fd.blob_age(sigma)) * v, 1.0);
  // First-order upwinding adds numerical diffusion |v| h / 2 (about 4% of D
  // here), which bounds the attainable agreement in the tails.
  for (const auto& q : significant_nodes(fd, 4, 0.2)) {
    const double exact = concentration_instant(src, env_with(D, v), fd.grid().node(q.i, q.j, q.k), TimePoint(4.0));
    EXPECT_NEAR(fd.at(q.i, q.j, q.k), exact, 0.05 * exact);
  }
}

TEST(FiniteDifference, ReflectingFloorMatchesHalfSpaceImages) {
  const double D = 1.0, sigma = 1.0;
  Fd fd(cube(8.0, 41, 0.0), D, {}, Fd::Walls::ReflectingFloor);
  const Position p(0.0, 0.0, 1.2);
  fd.add_blob(p, 1.0, sigma);
  fd.set_time(fd.blob_age(sigma));
  fd.advance_to(2.5);
  const auto src = SourceSpec::instant(p, 1.0);
  const Environment env = env_with(D, {}, HalfSpaceReflecting{});
  std::size_t checked = 0;
  for (const auto& q : significant_nodes(fd, 0, 0.1)) {
    const auto& g = fd.grid();
    if (q.i < 4 || q.j < 4 || q.i + 4 >= g.nx || q.j + 4 >= g.ny || q.k + 4 >= g.nz) continue;
    const double exact = concentration_instant(src, env, g.node(q.i, q.j, q.k), TimePoint(2.5));
    EXPECT_NEAR(fd.at(q.i, q.j, q.k), exact, 0.05 * exact);
    ++checked;
  }
  EXPECT_GT(checked, 50u);
}

// Three fixed emitters switched on at t = 0. A blob injected at time s is a
// point release at s - age, so the FD field at t is the closed-form field of
// sources emitting over [0, t - age]: C(t; start 0) - C(t; start t - age).
TEST(FiniteDifference, ThreeRandomSourcesMatchClosedForm) {
  const double D = 1.0, sigma = 1.5, t_end = 4.0;
  Fd fd(cube(10.0, 41), D);
  const double age = fd.blob_age(sigma);
  RngStream rng(2024, 0);
  std::vector<Position> where;
  std::vector<double> rate;
  for (int s = 0; s < 3; ++s) {
    where.emplace_back(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    rate.push_back(rng.uniform(0.5, 2.0));
    const Position p = where.back();
    const double q = rate.back();
    fd.add_emitter({[p](double) { return p; }, [q](double) { return q; }, sigma});
  }
  fd.set_time(age);
  fd.advance_to(t_end);

  const Environment env = env_with(D);
  auto exact = [&](const Position& r) {
    double c = 0.0;
    for (int s = 0; s < 3; ++s) {
      c += concentration_continuous(SourceSpec::continuous(where[s], rate[s], 0.0), env, r, TimePoint(t_end));
      c -= concentration_continuous(SourceSpec::continuous(where[s], rate[s], t_end - age), env, r,
                                    TimePoint(t_end));
    }
    return c;
  };
  const auto probes = significant_nodes(fd, 4, 0.05);
  ASSERT_GT(probes.size(), 200u);
  RngStream pick(2024, 1);
  for (int n = 0; n < 50; ++n) {
    const auto& q = probes[pick.below(probes.size())];
    const Position r = fd.grid().node(q.i, q.j, q.k);
    const double e = exact(r);
    EXPECT_NEAR(fd.at(q.i, q.j, q.k), e, 0.05 * e);
  }
}

TEST(FiniteDifference, StableStepShrinksWithWind) {
  Fd fd(cube(5.0, 21), 2.0);
  EXPECT_LT(fd.stable_step(3.0), fd.stable_step(0.0));
  EXPECT_NEAR(fd.stable_step(0.0), 0.25 / 12.0, 1e-15);
}

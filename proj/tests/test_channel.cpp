#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "virodyne/channel.hpp"
#include "virodyne/parallel.hpp"
#include "virodyne/quadrature.hpp"

using namespace virodyne;

namespace {

Environment free_env(double D, Velocity wind = {}) {
  Environment env;
  env.diffusivity = Diffusivity(D);
  env.wind = wind;
  return env;
}

// Composite Simpson rule with n (even) panels.
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Direct Gaussian kernel, written independently of the library.
double kernel(double D, const Velocity& v, const Position& src, const Position& r, double tau) {
  const double dx = r.x - src.x - v.vx * tau, dy = r.y - src.y - v.vy * tau, dz = r.z - src.z - v.vz * tau;
  return std::exp(-(dx * dx + dy * dy + dz * dz) / (4 * D * tau)) / std::pow(4 * std::numbers::pi * D * tau, 1.5);
}

// Emission history integral with substitution s = t - u^2, which removes the
// near-field stiffness at small lag.
template <typename Src>
double history_oracle(double D, const Velocity& v, Src&& src_at, double rate, const Position& r, double t0,
                      double t) {
  const double umax = std::sqrt(t - t0);
  return simpson(
      [&](double u) {
        if (u == 0.0) return 0.0;
        const double s = t - u * u;
        return 2.0 * u * rate * kernel(D, v, src_at(s), r, u * u);
      },
      0.0, umax, 40000);
}

}  // namespace

TEST(Instant, ZeroStrengthIsZero) {
  const auto src = SourceSpec::instant({0, 0, 0}, 0.0);
  EXPECT_EQ(concentration_instant(src, free_env(1.0), {0.3, 0, 0}, TimePoint(2.0)), 0.0);
}

TEST(Instant, PeakValueAtReleasePoint) {
  const auto src = SourceSpec::instant({1, 2, 3}, 1.0);
  const double tau = 1.0 / (4.0 * std::numbers::pi);
  EXPECT_NEAR(concentration_instant(src, free_env(1.0), {1, 2, 3}, TimePoint(tau)), 1.0, 1e-14);
}

TEST(Instant, RadialSymmetry) {
  const auto src = SourceSpec::instant({0, 0, 0}, 2.5);
  const auto env = free_env(3.0);
  const double a = concentration_instant(src, env, {3, 4, 0}, TimePoint(1.5));
  const double b = concentration_instant(src, env, {0, 0, -5}, TimePoint(1.5));
  EXPECT_NEAR(a, b, 1e-15 * a);
}

TEST(Instant, BeforeReleaseIsZero) {
  const auto src = SourceSpec::instant({0, 0, 0}, 1.0, 5.0);
  EXPECT_EQ(concentration_instant(src, free_env(1.0), {1, 0, 0}, TimePoint(5.0)), 0.0);
  EXPECT_EQ(concentration_instant(src, free_env(1.0), {1, 0, 0}, TimePoint(1.0)), 0.0);
}

TEST(Instant, GalileanShift) {
  const Velocity v(2.0, -1.0, 0.5);
  const auto src = SourceSpec::instant({0, 0, 0}, 1.0);
  const double tau = 3.0;
  const Position r(4, -1, 2);
  const double with_wind = concentration_instant(src, free_env(2.0, v), r, TimePoint(tau));
  const double shifted = concentration_instant(src, free_env(2.0), r + (-tau) * v, TimePoint(tau));
  EXPECT_NEAR(with_wind, shifted, 1e-15);
}

TEST(Instant, MassConservedInHalfSpace) {
  Environment env = free_env(1.0);
  env.boundary = HalfSpaceReflecting{};
  const auto src = SourceSpec::instant({0, 0, 1.0}, 2.0);
  const double sigma = std::sqrt(2.0);
  const double h = sigma / 4;
  double total = 0.0;
  for (int i = -40; i < 40; ++i)
    for (int j = -40; j < 40; ++j)
      for (int k = 0; k < 60; ++k)
        total += concentration_instant(src, env, {(i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h}, TimePoint(1.0));
  EXPECT_NEAR(total * h * h * h, 2.0, 2e-3);
}

TEST(Instant, ReflectingFloorHasZeroFlux) {
  Environment env = free_env(1.5, {0.3, 0, 0});
  env.boundary = HalfSpaceReflecting{};
  const auto src = SourceSpec::instant({0, 0, 0.7}, 1.0);
  const double h = 1e-4;
  for (double x : {-1.0, 0.2, 1.3}) {
    const double up = concentration_instant(src, env, {x, 0.4, h}, TimePoint(0.8));
    const double dn = concentration_instant(src, env, {x, 0.4, -h}, TimePoint(0.8));
    const double mid = concentration_instant(src, env, {x, 0.4, 0.0}, TimePoint(0.8));
    EXPECT_LE(std::abs(up - dn) / (2 * h), 1e-6 * mid);
  }
}

TEST(Instant, DuctWallsHaveZeroFlux) {
  Environment env = free_env(1.0);
  env.boundary = RectangularDuctReflecting{2.0, 3.0, 10};
  const auto src = SourceSpec::instant({0, 0.5, 1.0}, 1.0);
  const double h = 1e-4;
  const TimePoint t(2.0);
  auto c = [&](double y, double z) { return concentration_instant(src, env, {0.5, y, z}, t); };
  EXPECT_LE(std::abs(c(h, 1.2) - c(-h, 1.2)) / (2 * h), 1e-6 * c(0, 1.2));
  EXPECT_LE(std::abs(c(2.0 + h, 1.2) - c(2.0 - h, 1.2)) / (2 * h), 1e-6 * c(2.0, 1.2));
  EXPECT_LE(std::abs(c(1.0, 3.0 + h) - c(1.0, 3.0 - h)) / (2 * h), 1e-6 * c(1.0, 3.0));
}

TEST(Instant, DuctConservesMass) {
  Environment env = free_env(1.0);
  env.boundary = RectangularDuctReflecting{2.0, 1.0, 10};
  const auto src = SourceSpec::instant({0, 0.3, 0.8}, 1.0);
  // Long enough that mass has reached every wall several times.
  const TimePoint t(3.0);
  const double hx = 0.5, hy = 2.0 / 20, hz = 1.0 / 10;
  double total = 0.0;
  for (int i = -30; i < 30; ++i)
    for (int j = 0; j < 20; ++j)
      for (int k = 0; k < 10; ++k)
        total += concentration_instant(src, env, {(i + 0.5) * hx, (j + 0.5) * hy, (k + 0.5) * hz}, t);
  EXPECT_NEAR(total * hx * hy * hz, 1.0, 1e-3);
}

TEST(Continuous, MatchesTimeIntegralOfInstant) {
  const double D = 40.0;
  const Position r0(0, 0, 0), r(6, 8, 0);
  const auto src = SourceSpec::continuous(r0, 1.0);
  for (double t : {0.5, 3.0, 50.0}) {
    const double closed = concentration_continuous(src, free_env(D), r, TimePoint(t));
    const double oracle = history_oracle(D, {}, [&](double) { return r0; }, 1.0, r, 0.0, t);
    EXPECT_NEAR(closed, oracle, 1e-7 * oracle) << t;
  }
}

TEST(Continuous, WithWindMatchesTimeIntegral) {
  const double D = 2.0;
  const Velocity v(1.5, 0.5, 0.0);
  const Position r0(0, 0, 0);
  const auto src = SourceSpec::continuous(r0, 0.7, 1.0);
  for (const Position& r : {Position(3, 1, 0), Position(-2, 0.5, 1), Position(0.4, -0.3, 0.2)}) {
    const double closed = concentration_continuous(src, free_env(D, v), r, TimePoint(9.0));
    const double oracle = history_oracle(D, v, [&](double) { return r0; }, 0.7, r, 1.0, 9.0);
    EXPECT_NEAR(closed, oracle, 1e-7 * oracle);
  }
}

TEST(Continuous, SteadyLimit) {
  const auto src = SourceSpec::continuous({0, 0, 0}, 1.0);
  const double limit = 1.0 / (1600.0 * std::numbers::pi);
  EXPECT_NEAR(concentration_steady({0, 0, 0}, 1.0, free_env(40.0), {10, 0, 0}), limit, 1e-18);
  const double late = concentration_continuous(src, free_env(40.0), {10, 0, 0}, TimePoint(1e9));
  EXPECT_NEAR(late, limit, 1e-4 * limit);
  double prev = 0.0;
  for (double t : {1.0, 10.0, 100.0, 1e3, 1e4, 1e5}) {
    const double c = concentration_continuous(src, free_env(40.0), {10, 0, 0}, TimePoint(t));
    EXPECT_GE(c, prev);
    EXPECT_LT(c, limit);
    prev = c;
  }
}

TEST(Continuous, SteadyWithWindMatchesLateTime) {
  const Velocity v(0.5, 0, 0);
  const auto src = SourceSpec::continuous({0, 0, 0}, 1.0);
  for (const Position& r : {Position(5, 0, 0), Position(-5, 0, 0), Position(0, 5, 0)}) {
    const double steady = concentration_steady({0, 0, 0}, 1.0, free_env(1.0, v), r);
    const double late = concentration_continuous(src, free_env(1.0, v), r, TimePoint(1e4));
    EXPECT_NEAR(late, steady, 1e-9 * steady);
  }
}

TEST(Continuous, AtStartIsZero) {
  const auto src = SourceSpec::continuous({0, 0, 0}, 1.0, 2.0);
  EXPECT_EQ(concentration_continuous(src, free_env(1.0), {1, 0, 0}, TimePoint(2.0)), 0.0);
}

TEST(Continuous, SourcePositionIsSingular) {
  const auto src = SourceSpec::continuous({1, 1, 1}, 1.0);
  try {
    concentration_continuous(src, free_env(1.0), {1, 1, 1}, TimePoint(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularPoint);
  }
}

TEST(Moving, StationaryTrajectoryMatchesContinuous) {
  const Position p(0, 0, 25);
  const auto moving = SourceSpec::moving(Trajectory::stationary(p, 0.0, 100.0), 1.0);
  const auto fixed = SourceSpec::continuous(p, 1.0);
  const ChannelOptions opt{1e-8, 20};
  for (double t : {1.0, 17.0, 60.0}) {
    const Position r(35, 0, 20);
    const double a = concentration_moving_source(moving, free_env(40.0), r, TimePoint(t), opt);
    const double b = concentration_continuous(fixed, free_env(40.0), r, TimePoint(t));
    EXPECT_NEAR(a, b, 1e-6 * b) << t;
  }
}

TEST(Moving, LinearPathMatchesDirectIntegral) {
  const double D = 4.0;
  const Velocity u(2.0, 0.0, 0.5);
  const Position start(0, 0, 1);
  const auto src = SourceSpec::moving(Trajectory::linear(start, u, 0.0, 20.0), 1.0);
  for (const Position& r : {Position(10, 3, 2), Position(-4, 0, 0), Position(6, 0.5, 2.4)}) {
    const double t = 5.0;
    const double q = concentration_moving_source(src, free_env(D), r, TimePoint(t), {1e-9, 25});
    const double oracle = history_oracle(D, {}, [&](double s) { return start + s * u; }, 1.0, r, 0.0, t);
    EXPECT_NEAR(q, oracle, 1e-6 * oracle);
  }
}

TEST(Moving, TimeVaryingRate) {
  const double D = 1.0;
  const Position p(0, 0, 0), r(1.5, 0, 0);
  auto src = SourceSpec::moving(Trajectory::stationary(p, 0.0, 10.0), 1.0);
  src.rate_profile = [](double s) { return s < 2.0 ? 1.0 : 0.0; };
  const double q = concentration_moving_source(src, free_env(D), r, TimePoint(4.0), {1e-9, 25});
  const double oracle = simpson([&](double s) { return kernel(D, {}, p, r, 4.0 - s); }, 0.0, 2.0, 20000);
  EXPECT_NEAR(q, oracle, 1e-7 * oracle);
}

TEST(Moving, ObserverOnCurrentSourceIsSingular) {
  const auto src = SourceSpec::moving(Trajectory::linear({0, 0, 0}, {1, 0, 0}, 0.0, 10.0), 1.0);
  try {
    concentration_moving_source(src, free_env(1.0), {3, 0, 0}, TimePoint(3.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularPoint);
  }
  // After the source has passed, the point is regular.
  EXPECT_GT(concentration_moving_source(src, free_env(1.0), {3, 0, 0}, TimePoint(4.0)), 0.0);
}

TEST(Moving, TrajectoryMustCoverEmission) {
  const auto src = SourceSpec::moving(Trajectory::linear({0, 0, 0}, {1, 0, 0}, 0.0, 2.0), 1.0);
  try {
    concentration_moving_source(src, free_env(1.0), {0, 3, 0}, TimePoint(5.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfRange);
  }
}

TEST(Moving, QuadratureFailureCarriesEstimate) {
  const auto src = SourceSpec::moving(Trajectory::linear({0, 0, 0}, {1, 0, 0}, 0.0, 100.0), 1.0);
  try {
    concentration_moving_source(src, free_env(1.0), {50, 0.01, 0}, TimePoint(60.0), {1e-14, 1});
    FAIL();
  } catch (const QuadratureFailure& e) {
    EXPECT_EQ(e.kind(), ErrorKind::QuadratureFailure);
    EXPECT_GT(e.estimate(), 0.0);
    EXPECT_GT(e.error_bound(), 0.0);
  }
}

TEST(MultiSource, Linearity) {
  const auto env = free_env(2.0);
  const auto a = SourceSpec::continuous({0, 0, 0}, 1.0);
  const auto b = SourceSpec::instant({1, 1, 0}, 3.0, 0.5);
  const Position r(2, -1, 1);
  const TimePoint t(4.0);
  EXPECT_EQ(concentration_multi_source({a}, env, r, t), concentration(a, env, r, t));
  EXPECT_EQ(concentration_multi_source({a, a}, env, r, t), 2.0 * concentration(a, env, r, t));
  EXPECT_NEAR(concentration_multi_source({a, b}, env, r, t), concentration(a, env, r, t) + concentration(b, env, r, t),
              1e-16);
}

TEST(Field, EmptyQuery) {
  Scenario sc{free_env(1.0), {SourceSpec::continuous({0, 0, 0}, 1.0)}, {}};
  EXPECT_TRUE(evaluate_field(FieldQuery{}, sc).empty());
}

TEST(Field, PermutationAndThreadInvariance) {
  Scenario sc{free_env(3.0), {SourceSpec::continuous({0, 0, 0}, 1.0), SourceSpec::instant({1, 0, 0}, 2.0)}, {}};
  FieldQuery q;
  for (int i = 0; i < 30; ++i) q.points.push_back({Position(0.3 * i - 4, 0.5, 0.1 * i), TimePoint(0.2 * i + 0.1)});
  set_thread_count(1);
  const auto base = evaluate_field(q, sc);
  set_thread_count(8);
  const auto threaded = evaluate_field(q, sc);
  FieldQuery rev{std::vector<FieldPoint>(q.points.rbegin(), q.points.rend())};
  const auto reversed = evaluate_field(rev, sc);
  set_thread_count(0);
  EXPECT_EQ(base, threaded);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_EQ(base[i], reversed[base.size() - 1 - i]);
  for (double c : base) EXPECT_GE(c, 0.0);
}

TEST(Field, ErrorsAreCollectedWithIndices) {
  Scenario sc{free_env(1.0), {SourceSpec::continuous({0, 0, 0}, 1.0)}, {}};
  FieldQuery q{{{Position(1, 0, 0), TimePoint(1)}, {Position(0, 0, 0), TimePoint(1)}, {Position(2, 0, 0), TimePoint(1)},
                {Position(0, 0, 0), TimePoint(2)}}};
  try {
    evaluate_field(q, sc);
    FAIL();
  } catch (const BatchError& e) {
    ASSERT_EQ(e.errors().size(), 2u);
    EXPECT_EQ(e.errors()[0].index, 1u);
    EXPECT_EQ(e.errors()[1].index, 3u);
    EXPECT_EQ(e.errors()[0].kind, ErrorKind::SingularPoint);
  }
}

TEST(Quadrature, PolynomialAndSingularIntegrands) {
  const auto r = integrate_adaptive([](double x) { return x * x * x; }, {0.0, 2.0}, {});
  EXPECT_NEAR(r.value, 4.0, 1e-13);
  const auto s = integrate_adaptive([](double x) { return std::sqrt(x); }, {0.0, 1.0}, {1e-10, 0.0, 30, 20000});
  EXPECT_NEAR(s.value, 2.0 / 3.0, 1e-9);
}

TEST(Quadrature, UnreachableToleranceReportsEstimate) {
  try {
    integrate_adaptive([](double x) { return 1.0 / std::sqrt(x); }, {0.0, 1.0}, {1e-12, 0.0, 20, 20000});
    FAIL();
  } catch (const QuadratureFailure& e) {
    EXPECT_NEAR(e.estimate(), 2.0, 1e-2);
  }
}

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "virodyne/core.hpp"
#include "virodyne/localization.hpp"
#include "virodyne/rng.hpp"

using namespace virodyne;

namespace {

Environment env_d(double d) {
  Environment env;
  env.diffusivity = Diffusivity(d);
  return env;
}

std::vector<Position> cube(const Position& lo, double side) {
  std::vector<Position> out;
  for (int i = 0; i < 8; ++i)
    out.emplace_back(lo.x + side * (i & 1), lo.y + side * ((i >> 1) & 1), lo.z + side * ((i >> 2) & 1));
  return out;
}

// independent steady free-space oracle: Q / (4 pi D r)
std::vector<SensorReading> steady_readings(const std::vector<Position>& sensors, const Position& src, double q,
                                           double d) {
  std::vector<SensorReading> out;
  for (const auto& s : sensors) out.push_back({s, 0.0, q / (4.0 * std::numbers::pi * d * distance(s, src)), 1.0});
  return out;
}

LocalizationConfig cfg_box(const Position& lo, const Position& hi) {
  LocalizationConfig cfg;
  cfg.domain = Box{lo, hi};
  return cfg;
}

}  // namespace

TEST(Localize, NoiselessRecovery) {
  const auto sensors = cube({0, 0, 0}, 10);
  const Position truth(3.2, 6.1, 4.7);
  const auto readings = steady_readings(sensors, truth, 2.5, 1.0);
  const auto est = localize(readings, env_d(1.0), cfg_box({0, 0, 0}, {10, 10, 10}));
  EXPECT_TRUE(est.converged);
  EXPECT_LE(distance(est.position, truth), 1e-3);
  EXPECT_NEAR(est.rate / 2.5, 1.0, 1e-3);
}

TEST(Localize, InstantModelRecovery) {
  const auto sensors = cube({0, 0, 0}, 10);
  const Position truth(6.0, 2.5, 5.5);
  const double mass = 4.0, d = 2.0;
  std::vector<SensorReading> readings;
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const double t = 3.0 + 0.5 * static_cast<double>(i);
    const double r2 = squared_norm(sensors[i] - truth);
    readings.push_back({sensors[i], t, mass * std::exp(-r2 / (4 * d * t)) / std::pow(4 * std::numbers::pi * d * t, 1.5), 1e-3});
  }
  auto cfg = cfg_box({0, 0, 0}, {10, 10, 10});
  cfg.model = ForwardModel::Instant;
  const auto est = localize(readings, env_d(d), cfg);
  EXPECT_LE(distance(est.position, truth), 1e-3);
  EXPECT_NEAR(est.rate / mass, 1.0, 1e-3);
}

TEST(Localize, FixedPointAtTruth) {
  const auto sensors = cube({0, 0, 0}, 10);
  const Position truth(4, 5, 6);
  auto cfg = cfg_box({0, 0, 0}, {10, 10, 10});
  cfg.initial_guess = truth;
  const auto readings = steady_readings(sensors, truth, 1.0, 1.0);
  const auto est = localize(readings, env_d(1.0), cfg);
  EXPECT_EQ(est.iterations, 0u);
  EXPECT_EQ(est.position, truth);
  EXPECT_LT(est.residual_norm, 1e-12);
}

TEST(Localize, TranslationEquivariance) {
  const Position truth(3.2, 6.1, 4.7);
  const Velocity shift(-20.0, 7.5, 13.0);
  const auto a = localize(steady_readings(cube({0, 0, 0}, 10), truth, 1.0, 1.0), env_d(1.0),
                          cfg_box({0, 0, 0}, {10, 10, 10}));
  const auto b = localize(steady_readings(cube(Position(0, 0, 0) + shift, 10), truth + shift, 1.0, 1.0), env_d(1.0),
                          cfg_box(Position(0, 0, 0) + shift, Position(10, 10, 10) + shift));
  EXPECT_LE(distance(b.position, a.position + shift), 1e-3);
  EXPECT_NEAR(a.rate, b.rate, 1e-3 * a.rate);
}

TEST(Localize, RefineNeverWorseThanGrid) {
  RngStream rng(21, 0);
  const auto sensors = cube({0, 0, 0}, 10);
  const Position truth(7.0, 2.0, 3.0);
  auto readings = steady_readings(sensors, truth, 1.0, 1.0);
  for (auto& r : readings) {
    r.sigma = 0.002;
    r.value += r.sigma * rng.normal();
  }
  auto cfg = cfg_box({0, 0, 0}, {10, 10, 10});
  cfg.grid_points = 8;
  const auto est = localize(readings, env_d(1.0), cfg);
  double grid_best = 1e300;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      for (int k = 0; k < 8; ++k) {
        const Position p(1.25 * i + 0.625, 1.25 * j + 0.625, 1.25 * k + 0.625);
        grid_best = std::min(grid_best, detail::profile_rate(env_d(1.0), cfg.model, p, readings).residual);
      }
  EXPECT_LE(est.residual_norm * est.residual_norm, grid_best);
}

TEST(Localize, MedianErrorGrowsWithNoise) {
  const auto sensors = cube({0, 0, 0}, 10);
  const Position truth(3.2, 6.1, 4.7);
  const auto clean = steady_readings(sensors, truth, 1.0, 1.0);
  double peak = 0.0;
  for (const auto& r : clean) peak = std::max(peak, r.value);
  auto cfg = cfg_box({0, 0, 0}, {10, 10, 10});
  cfg.grid_points = 8;
  double prev = -1.0;
  for (double frac : {0.01, 0.05, 0.2}) {
    std::vector<double> errs;
    for (std::uint64_t rep = 0; rep < 30; ++rep) {
      RngStream rng(5, rep);
      auto readings = clean;
      for (auto& r : readings) {
        r.sigma = frac * peak;
        r.value += r.sigma * rng.normal();
      }
      try {
        errs.push_back(distance(localize(readings, env_d(1.0), cfg).position, truth));
      } catch (const LocalizationNotConverged& e) {
        errs.push_back(distance(e.best().position, truth));
      }
    }
    std::nth_element(errs.begin(), errs.begin() + 15, errs.end());
    EXPECT_GE(errs[15], prev) << frac;
    prev = errs[15];
  }
}

TEST(Localize, Errors) {
  const auto env = env_d(1.0);
  const auto cfg = cfg_box({0, 0, 0}, {10, 10, 10});
  auto kind_of = [&](const std::vector<SensorReading>& r) {
    try {
      localize(r, env, cfg);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  auto zeros = steady_readings(cube({0, 0, 0}, 10), {5, 5, 5}, 1.0, 1.0);
  for (auto& r : zeros) r.value = 0.0;
  EXPECT_EQ(kind_of(zeros), ErrorKind::Unidentifiable);
  std::vector<Position> planar;
  for (int i = 0; i < 6; ++i) planar.emplace_back(i, i * i % 5, 0.0);
  EXPECT_EQ(kind_of(steady_readings(planar, {5, 5, 5}, 1.0, 1.0)), ErrorKind::Unidentifiable);
  auto few = steady_readings(cube({0, 0, 0}, 10), {5, 5, 5}, 1.0, 1.0);
  few.resize(3);
  EXPECT_EQ(kind_of(few), ErrorKind::Unidentifiable);

  auto capped = cfg;
  capped.max_iterations = 2;
  try {
    localize(steady_readings(cube({0, 0, 0}, 10), {3.3, 4.4, 5.5}, 1.0, 1.0), env, capped);
    FAIL();
  } catch (const LocalizationNotConverged& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotConverged);
    EXPECT_GE(e.best().rate, 0.0);
  }
}

TEST(Identifiability, Diagnostics) {
  const auto env = env_d(1.0);
  const auto good = crlb_diagnostics(steady_readings(cube({0, 0, 0}, 10), {4, 5, 6}, 1.0, 1.0), env,
                                     ForwardModel::SteadyContinuous, {4, 5, 6}, 1.0);
  EXPECT_FALSE(good.flagged);
  EXPECT_TRUE(std::isfinite(good.condition_number));
  EXPECT_EQ(good.geometry_rank, 3);

  std::vector<Position> planar;
  for (int i = 0; i < 6; ++i) planar.emplace_back(i, i * i % 5, 0.0);
  EXPECT_TRUE(crlb_diagnostics(steady_readings(planar, {4, 5, 6}, 1.0, 1.0), env, ForwardModel::SteadyContinuous,
                               {4, 5, 6}, 1.0)
                  .flagged);

  auto dup = cube({0, 0, 0}, 10);
  dup[7] = dup[6];
  const auto rep = crlb_diagnostics(steady_readings(dup, {4, 5, 6}, 1.0, 1.0), env, ForwardModel::SteadyContinuous,
                                    {4, 5, 6}, 1.0);
  EXPECT_TRUE(rep.duplicate_sensors);
  EXPECT_TRUE(rep.flagged);
}

TEST(Readings, Csv) {
  std::istringstream in("# note\nx,y,z,t,c,sigma\n1,2,3,0,0.5,0.1\n4,5,6,1,0.25,0.2\n");
  const auto r = read_readings_csv(in);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].position, Position(4, 5, 6));
  EXPECT_EQ(r[1].sigma, 0.2);
  std::istringstream bad("x,y,z,t,c\n1,2,3,0,0.5\n");
  EXPECT_THROW(read_readings_csv(bad), ParseError);
  std::istringstream empty("x,y,z,t,c,sigma\n");
  EXPECT_THROW(read_readings_csv(empty), Error);
}

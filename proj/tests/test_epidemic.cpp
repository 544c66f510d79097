#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "virodyne/epidemic.hpp"
#include "virodyne/parallel.hpp"

using namespace virodyne;

namespace {

Environment env_d(double D) {
  Environment e;
  e.diffusivity = Diffusivity(D);
  return e;
}

Agent static_agent(std::uint32_t id, const Position& p, double horizon, double emission, bool infected) {
  Agent a;
  a.id = id;
  a.trajectory = Trajectory::stationary(p, 0.0, horizon);
  a.emission_rate = emission;
  if (infected) a.infected_since = 0.0;
  return a;
}

}  // namespace

TEST(Dose, NoInfectedGivesZero) {
  const Agent a = static_agent(0, {0, 0, 0}, 10, 0, false);
  EXPECT_EQ(accumulate_dose(a, {}, env_d(1.0), 0.0, 5.0), 0.0);
}

TEST(Dose, LinearInEmission) {
  const Agent a = static_agent(0, {2, 0, 0}, 10, 0, false);
  const Trajectory path = Trajectory::linear({0, 0, 0}, {0.1, 0.2, 0}, 0.0, 10.0);
  std::vector<SourceSpec> one{SourceSpec::moving(path, 1.0)};
  std::vector<SourceSpec> two{SourceSpec::moving(path, 2.0)};
  const double d1 = accumulate_dose(a, one, env_d(1.0), 1.0, 6.0);
  const double d2 = accumulate_dose(a, two, env_d(1.0), 1.0, 6.0);
  EXPECT_GT(d1, 0.0);
  EXPECT_NEAR(d2, 2.0 * d1, 1e-12 * d2);
}

TEST(Dose, SteadyStateIncrement) {
  const double D = 40.0, d = 10.0, Q = 1.0, t0 = 1e6, t1 = t0 + 10.0;
  const Agent a = static_agent(0, {d, 0, 0}, t1, 0, false);
  std::vector<SourceSpec> src{SourceSpec::continuous({0, 0, 0}, Q)};
  const double inc = accumulate_dose(a, src, env_d(D), t0, t1);
  const double expected = (t1 - t0) * Q / (4.0 * std::numbers::pi * D * d);
  EXPECT_NEAR(inc, expected, 1e-3 * expected);
}

TEST(Dose, DecreasesWithDistance) {
  std::vector<SourceSpec> src{SourceSpec::continuous({0, 0, 0}, 1.0)};
  double prev = INFINITY;
  for (double d : {1.0, 2.0, 4.0, 8.0}) {
    const Agent a = static_agent(0, {d, 0, 0}, 20, 0, false);
    const double inc = accumulate_dose(a, src, env_d(1.0), 0.0, 20.0);
    EXPECT_LT(inc, prev);
    prev = inc;
  }
}

TEST(Dose, RejectsEmptyInterval) {
  const Agent a = static_agent(0, {1, 0, 0}, 10, 0, false);
  EXPECT_THROW(accumulate_dose(a, {}, env_d(1.0), 2.0, 2.0), Error);
}

TEST(Epidemic, NoInfectedStaysClean) {
  std::vector<Agent> pop{static_agent(0, {0, 0, 0}, 50, 1.0, false), static_agent(1, {1, 0, 0}, 50, 1.0, false)};
  EpidemicConfig cfg{10.0, 0.0, 1.0, 50.0, {}};
  const auto st = run(pop, cfg, env_d(1.0), 3);
  for (const auto& s : st.series) EXPECT_EQ(s.infected_count(), 0u);
}

TEST(Epidemic, ZeroDoseResponseNeverInfects) {
  std::vector<Agent> pop{static_agent(0, {0, 0, 0}, 50, 1.0, true), static_agent(1, {1, 0, 0}, 50, 1.0, false)};
  EpidemicConfig cfg{0.0, 0.0, 1.0, 50.0, {}};
  const auto st = run(pop, cfg, env_d(1.0), 3);
  EXPECT_EQ(st.current().infected_count(), 1u);
  EXPECT_GT(st.current().cumulative_dose[1], 0.0);
}

TEST(Epidemic, InfectedCountIsMonotone) {
  PopulationSpec spec;
  spec.size = 30;
  spec.initially_infected = 3;
  spec.emission_rate = 1.0;
  spec.mobility.kind = RandomWaypoint{0.5, 1.5, 2.0};
  spec.mobility.domain = Box{{0, 0, 1.5}, {20, 20, 1.5}};
  spec.mobility.planar = true;
  auto agents = make_population(spec, 60.0, 11);
  EpidemicConfig cfg{2.0, 5.0, 2.0, 60.0, {}};
  const auto st = run(agents, cfg, env_d(0.5), 11);
  std::size_t prev = 0;
  for (const auto& s : st.series) {
    EXPECT_GE(s.infected_count(), prev);
    prev = s.infected_count();
  }
  EXPECT_EQ(st.series.front().infected_count(), 3u);
  EXPECT_DOUBLE_EQ(st.current().t, 60.0);
}

TEST(Epidemic, LatencyDelaysEmission) {
  // 0 infects 1 quickly; 2 sits next to 1 and far from 0.
  const double H = 40.0;
  auto make = [&] {
    std::vector<Agent> pop{static_agent(0, {0, 0, 0}, H, 1.0, true), static_agent(1, {0.5, 0, 0}, H, 1.0, false),
                           static_agent(2, {20.5, 0, 0}, H, 1.0, false)};
    pop[1].infected_since = 1.0;  // already infected, not yet contagious for a long latency
    return pop;
  };
  EpidemicConfig slow{0.0, 1000.0, 1.0, H, {}};
  EpidemicConfig fast{0.0, 0.0, 1.0, H, {}};
  const auto a = run(make(), slow, env_d(1.0), 1);
  const auto b = run(make(), fast, env_d(1.0), 1);
  EXPECT_EQ(a.current().cumulative_dose[2], 0.0);
  EXPECT_GT(b.current().cumulative_dose[2], 0.0);
}

TEST(Epidemic, TwoAgentMeanInfectionTime) {
  const double D = 1.0, d = 1.0, Q = 1.0, horizon = 300.0, dt = 1.0;
  const double k = 0.05 / (Q / (4.0 * std::numbers::pi * D * d));
  const EpidemicConfig cfg{k, 0.0, dt, horizon, {}};

  // Oracle: survival exp(-k Dose(t)) with Dose(t) = integral of the
  // closed-form continuous field, by fine Simpson integration.
  auto conc = [&](double t) { return t <= 0 ? 0.0 : Q / (4 * std::numbers::pi * D * d) * std::erfc(d / std::sqrt(4 * D * t)); };
  auto dose = [&](double t) {
    const int n = 2000;
    const double h = t / n;
    double s = conc(0) + conc(t);
    for (int i = 1; i < n; ++i) s += conc(i * h) * (i % 2 ? 4 : 2);
    return s * h / 3;
  };
  double mean_oracle = 0.0, prev_survival = 1.0;
  for (int n = 1; n <= static_cast<int>(horizon / dt); ++n) {
    const double s = std::exp(-k * dose(n * dt));
    mean_oracle += n * dt * (prev_survival - s);
    prev_survival = s;
  }
  mean_oracle /= 1.0 - prev_survival;

  const std::size_t runs = 10000;
  std::vector<double> when(runs, -1.0);
  parallel_for(runs, [&](std::size_t r) {
    std::vector<Agent> pop{static_agent(0, {0, 0, 0}, horizon, Q, true), static_agent(1, {d, 0, 0}, horizon, Q, false)};
    std::vector<RngStream> streams{RngStream(r, 0), RngStream(r, 1)};
    EpidemicSnapshot s = initial_snapshot(pop);
    while (s.t < horizon && !s.infected(1)) s = step(pop, s, cfg, env_d(D), streams);
    if (s.infected(1)) when[r] = *s.infected_since[1];
  });
  double sum = 0.0;
  std::size_t n = 0;
  for (double w : when)
    if (w >= 0) sum += w, ++n;
  EXPECT_NEAR(sum / n, mean_oracle, 0.02 * mean_oracle);
}

TEST(Epidemic, ThreadCountDoesNotChangeOutput) {
  PopulationSpec spec;
  spec.size = 20;
  spec.initially_infected = 2;
  spec.emission_rate = 1.0;
  spec.mobility.kind = RandomDirection{1.0, 5.0};
  spec.mobility.domain = Box{{0, 0, 0}, {15, 15, 3}};
  auto once = [&](unsigned threads) {
    set_thread_count(threads);
    auto agents = make_population(spec, 30.0, 5);
    const auto st = run(agents, EpidemicConfig{5.0, 3.0, 1.0, 30.0, {}}, env_d(0.5), 5);
    std::ostringstream out;
    write_epidemic_csv(out, st);
    set_thread_count(0);
    return out.str();
  };
  const std::string a = once(1);
  EXPECT_EQ(a, once(8));
  EXPECT_EQ(a.substr(0, a.find('\n')), "t,agent_id,state,cumulative_dose");
}

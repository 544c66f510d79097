#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "virodyne/channel.hpp"
#include "virodyne/core.hpp"
#include "virodyne/format.hpp"
#include "virodyne/mobility.hpp"
#include "virodyne/parallel.hpp"
#include "virodyne/rng.hpp"
#include "virodyne/trajectory.hpp"

namespace virodyne {

struct Agent {
  std::uint32_t id = 0;
  /// Time of infection; empty while susceptible.
  std::optional<double> infected_since{};
  Trajectory trajectory;
  double emission_rate = 0.0;  // kg/s once contagious
  double breathing_rate = 1.0;  // concentration samples per second for dose integration

  bool infected() const { return infected_since.has_value(); }
};

struct EpidemicConfig {
  double dose_response = 0.0;  // k, per (kg s / m^3)
  double latency = 0.0;        // seconds from infection to contagiousness (coherence time)
  double step = 1.0;
  double horizon = 0.0;
  ChannelOptions channel{};

  void validate() const {
    if (!(dose_response >= 0.0)) throw Error(ErrorKind::InvalidArgument, "dose_response must be >= 0");
    if (!(latency >= 0.0)) throw Error(ErrorKind::InvalidArgument, "latency must be >= 0");
    if (!(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "step must be > 0");
    if (!(horizon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be >= 0");
  }
};

/// Infection status of the whole population at one instant, plus the dose
/// each agent has inhaled so far. Indexed like the agent list.
struct EpidemicSnapshot {
  double t = 0.0;
  std::vector<std::optional<double>> infected_since;
  std::vector<double> cumulative_dose;

  bool infected(std::size_t i) const { return infected_since[i].has_value(); }

  std::size_t infected_count() const {
    return static_cast<std::size_t>(std::count_if(infected_since.begin(), infected_since.end(),
                                                  [](const auto& s) { return s.has_value(); }));
  }
};

struct EpidemicState {
  std::vector<Agent> agents;
  std::vector<EpidemicSnapshot> series;

  const EpidemicSnapshot& current() const { return series.back(); }
};

inline EpidemicSnapshot initial_snapshot(std::span<const Agent> agents) {
  EpidemicSnapshot s;
  for (const auto& a : agents) s.infected_since.push_back(a.infected_since);
  s.cumulative_dose.assign(agents.size(), 0.0);
  return s;
}

/// Emitters active during a coherence window starting at t0: every agent
/// whose latency has elapsed by t0. The set is held fixed until the next step.
inline std::vector<SourceSpec> contagious_sources(std::span<const Agent> agents, const EpidemicSnapshot& state,
                                                  double latency) {
  std::vector<SourceSpec> sources;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    if (!state.infected(i) || a.emission_rate <= 0.0) continue;
    const double from = *state.infected_since[i] + latency;
    if (from > state.t) continue;
    sources.push_back(SourceSpec::moving(a.trajectory, a.emission_rate, from));
  }
  return sources;
}

/// Inhaled dose over [t0, t1]: trapezoid rule on the summed concentration at
/// the agent's position, sampled at its breathing rate.
inline double accumulate_dose(const Agent& agent, std::span<const SourceSpec> infected, const Environment& env,
                              double t0, double t1, const ChannelOptions& opt = {}) {
  if (!(t1 > t0)) throw Error(ErrorKind::InvalidArgument, "dose interval must satisfy t1 > t0");
  if (infected.empty()) return 0.0;
  const auto samples =
      static_cast<std::size_t>(std::max(1.0, std::ceil((t1 - t0) * agent.breathing_rate - 1e-9)));
  const double h = (t1 - t0) / static_cast<double>(samples);
  auto conc = [&](double t) {
    const Position p = agent.trajectory.position_at(t);
    double c = 0.0;
    for (const auto& s : infected) c += concentration(s, env, p, TimePoint(t), opt);
    return c;
  };
  double sum = 0.5 * (conc(t0) + conc(t1));
  for (std::size_t i = 1; i < samples; ++i) sum += conc(t0 + h * static_cast<double>(i));
  return sum * h;
}

/// Advances one step. Each susceptible draws once from its own stream, so the
/// outcome is independent of thread count.
inline EpidemicSnapshot step(std::span<const Agent> agents, const EpidemicSnapshot& state,
                             const EpidemicConfig& config, const Environment& env, std::span<RngStream> streams) {
  const double t0 = state.t;
  double t1 = t0 + config.step;
  if (config.horizon > t0 && t1 > config.horizon) t1 = config.horizon;
  const auto sources = contagious_sources(agents, state, config.latency);

  std::vector<double> increments(agents.size(), 0.0);
  parallel_for(agents.size(), [&](std::size_t i) {
    if (state.infected(i)) return;
    increments[i] = accumulate_dose(agents[i], sources, env, t0, t1, config.channel);
  });

  EpidemicSnapshot next = state;
  next.t = t1;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (next.infected(i)) continue;
    next.cumulative_dose[i] += increments[i];
    const double p = -std::expm1(-config.dose_response * increments[i]);
    if (streams[i].uniform() < p) next.infected_since[i] = t1;
  }
  return next;
}

/// Repeated step() from t = 0 to the horizon; records every snapshot.
inline EpidemicState run(std::vector<Agent> population, const EpidemicConfig& config, const Environment& env,
                         Seed seed) {
  config.validate();
  std::vector<RngStream> streams;
  streams.reserve(population.size());
  for (const auto& a : population) streams.emplace_back(seed, a.id);

  EpidemicState state;
  state.agents = std::move(population);
  state.series.push_back(initial_snapshot(state.agents));
  while (state.series.back().t < config.horizon - 1e-9 * config.step)
    state.series.push_back(step(state.agents, state.series.back(), config, env, streams));
  return state;
}

struct PopulationSpec {
  std::size_t size = 0;
  std::size_t initially_infected = 0;
  double emission_rate = 0.0;
  double breathing_rate = 1.0;
  MobilityModel mobility{};
};

/// Agents with uniform start points and sampled paths. Mobility streams are
/// kept apart from the infection streams used by run().
inline std::vector<Agent> make_population(const PopulationSpec& spec, double horizon, Seed seed) {
  std::vector<Agent> agents(spec.size);
  constexpr std::uint64_t kMobilityStreamBase = 1ull << 32;
  parallel_for(spec.size, [&](std::size_t i) {
    RngStream rng(seed, kMobilityStreamBase + i);
    const Box& b = spec.mobility.domain;
    const double z = spec.mobility.planar ? b.lo.z : rng.uniform(b.lo.z, b.hi.z);
    const Position start(rng.uniform(b.lo.x, b.hi.x), rng.uniform(b.lo.y, b.hi.y), z);
    Agent& a = agents[i];
    a.id = static_cast<std::uint32_t>(i);
    a.trajectory = sample_trajectory(spec.mobility, start, horizon, rng);
    a.emission_rate = spec.emission_rate;
    a.breathing_rate = spec.breathing_rate;
    if (i < spec.initially_infected) a.infected_since = 0.0;
  });
  return agents;
}

/// CSV `t,agent_id,state,cumulative_dose` with state S or I.
inline void write_epidemic_csv(std::ostream& out, const EpidemicState& state) {
  out << "t,agent_id,state,cumulative_dose\n";
  for (const auto& snap : state.series) {
    for (std::size_t i = 0; i < state.agents.size(); ++i) {
      out << format_double(snap.t) << ',' << state.agents[i].id << ',' << (snap.infected(i) ? 'I' : 'S') << ','
          << format_double(snap.cumulative_dose[i]) << '\n';
    }
  }
}

}  // namespace virodyne

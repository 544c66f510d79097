#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "virodyne/channel.hpp"
#include "virodyne/detection.hpp"
#include "virodyne/epidemic.hpp"
#include "virodyne/error.hpp"
#include "virodyne/format.hpp"
#include "virodyne/localization.hpp"
#include "virodyne/mobility.hpp"

namespace virodyne {

/// Malformed configuration; names the offending key (or section) and line.
class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, std::string key, const std::string& what)
      : Error(ErrorKind::Config, "config line " + std::to_string(line) + (key.empty() ? "" : ", key '" + key + "'") +
                                     ": " + what),
        line_(line),
        key_(std::move(key)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

enum class ValueKind { Number, Integer, Vector3, NumberList, Word, Bool };

/// One documented key. `unit` is the only suffix accepted (empty: none);
/// values written without a suffix are read in that unit.
struct KeySpec {
  std::string_view section;
  std::string_view key;
  ValueKind kind;
  std::string_view unit;
  std::string_view fallback;  // default in config syntax; empty means "required or unset"
  std::string_view choices;   // '|'-separated words for ValueKind::Word
};

// Units: m (metre), s (second), m2s (m^2/s), kg, kgs (kg/s), mps (m/s), hz (1/s).
inline constexpr std::array kConfigSchema = {
    KeySpec{"run", "seed", ValueKind::Integer, "", "1", ""},

    KeySpec{"environment", "diffusivity", ValueKind::Number, "m2s", "1", ""},
    KeySpec{"environment", "wind", ValueKind::Vector3, "mps", "0 0 0", ""},
    KeySpec{"environment", "boundary", ValueKind::Word, "", "free", "free|half_space|duct"},
    KeySpec{"environment", "duct_width", ValueKind::Number, "m", "", ""},
    KeySpec{"environment", "duct_height", ValueKind::Number, "m", "", ""},
    KeySpec{"environment", "image_order", ValueKind::Integer, "", "10", ""},

    KeySpec{"source", "kind", ValueKind::Word, "", "continuous", "continuous|instant"},
    KeySpec{"source", "position", ValueKind::Vector3, "m", "", ""},
    KeySpec{"source", "rate", ValueKind::Number, "kgs", "", ""},
    KeySpec{"source", "mass", ValueKind::Number, "kg", "", ""},
    KeySpec{"source", "start", ValueKind::Number, "s", "0", ""},
    KeySpec{"source", "speed", ValueKind::Number, "mps", "0", ""},
    KeySpec{"source", "heading", ValueKind::Vector3, "", "1 0 0", ""},

    KeySpec{"grid", "x", ValueKind::NumberList, "m", "0 0 1", ""},
    KeySpec{"grid", "y", ValueKind::NumberList, "m", "0 0 1", ""},
    KeySpec{"grid", "z", ValueKind::NumberList, "m", "0 0 1", ""},
    KeySpec{"grid", "time", ValueKind::NumberList, "s", "", ""},

    KeySpec{"solver", "quadrature_tol", ValueKind::Number, "", "1e-06", ""},
    KeySpec{"solver", "max_refinement", ValueKind::Integer, "", "20", ""},

    KeySpec{"population", "agents", ValueKind::Integer, "", "", ""},
    KeySpec{"population", "infected", ValueKind::Integer, "", "1", ""},
    KeySpec{"population", "emission_rate", ValueKind::Number, "kgs", "", ""},
    KeySpec{"population", "breathing_rate", ValueKind::Number, "hz", "1", ""},
    KeySpec{"population", "model", ValueKind::Word, "", "random_waypoint",
            "random_walk|random_waypoint|random_direction"},
    KeySpec{"population", "domain_lo", ValueKind::Vector3, "m", "", ""},
    KeySpec{"population", "domain_hi", ValueKind::Vector3, "m", "", ""},
    KeySpec{"population", "planar", ValueKind::Bool, "", "false", ""},
    KeySpec{"population", "boundary_policy", ValueKind::Word, "", "reflect", "reflect|wrap_to_waypoint"},
    KeySpec{"population", "step_len", ValueKind::Number, "m", "1", ""},
    KeySpec{"population", "step_dt", ValueKind::Number, "s", "1", ""},
    KeySpec{"population", "speed_min", ValueKind::Number, "mps", "0.5", ""},
    KeySpec{"population", "speed_max", ValueKind::Number, "mps", "1.5", ""},
    KeySpec{"population", "pause", ValueKind::Number, "s", "0", ""},
    KeySpec{"population", "speed", ValueKind::Number, "mps", "1", ""},
    KeySpec{"population", "epoch", ValueKind::Number, "s", "10", ""},

    KeySpec{"epidemic", "dose_response", ValueKind::Number, "", "", ""},
    KeySpec{"epidemic", "latency", ValueKind::Number, "s", "0", ""},
    KeySpec{"epidemic", "step", ValueKind::Number, "s", "1", ""},
    KeySpec{"epidemic", "horizon", ValueKind::Number, "s", "", ""},

    KeySpec{"detection", "taps", ValueKind::NumberList, "", "", ""},
    KeySpec{"detection", "tx", ValueKind::Vector3, "m", "", ""},
    KeySpec{"detection", "rx", ValueKind::Vector3, "m", "", ""},
    KeySpec{"detection", "mass", ValueKind::Number, "kg", "1", ""},
    KeySpec{"detection", "taps_count", ValueKind::Integer, "", "3", ""},
    KeySpec{"detection", "symbol_interval", ValueKind::Number, "s", "1", ""},
    KeySpec{"detection", "noise", ValueKind::Word, "", "gaussian", "gaussian|poisson"},
    KeySpec{"detection", "sigma", ValueKind::Number, "", "1", ""},
    KeySpec{"detection", "alpha", ValueKind::Number, "", "1", ""},
    KeySpec{"detection", "detector", ValueKind::Word, "", "threshold", "threshold|sequence_ml|noncoherent"},
    KeySpec{"detection", "threshold", ValueKind::Number, "", "", ""},
    KeySpec{"detection", "memory", ValueKind::Integer, "", "0", ""},
    KeySpec{"detection", "prior_one", ValueKind::Number, "", "0.5", ""},
    KeySpec{"detection", "bits_per_frame", ValueKind::Integer, "", "16", ""},
    KeySpec{"detection", "trials", ValueKind::Integer, "", "10000", ""},

    KeySpec{"localization", "model", ValueKind::Word, "", "steady", "steady|transient|instant"},
    KeySpec{"localization", "domain_lo", ValueKind::Vector3, "m", "", ""},
    KeySpec{"localization", "domain_hi", ValueKind::Vector3, "m", "", ""},
    KeySpec{"localization", "grid_points", ValueKind::Integer, "", "16", ""},
    KeySpec{"localization", "simplex_tol", ValueKind::Number, "", "1e-08", ""},
    KeySpec{"localization", "max_iterations", ValueKind::Integer, "", "5000", ""},
};

inline constexpr std::array<std::string_view, 9> kConfigSections = {
    "run", "environment", "source", "grid", "solver", "population", "epidemic", "detection", "localization"};

/// `source` may appear several times, one block per emitter.
inline bool repeatable_section(std::string_view s) { return s == "source"; }

inline const KeySpec* find_key(std::string_view section, std::string_view key) {
  for (const auto& k : kConfigSchema)
    if (k.section == section && k.key == key) return &k;
  return nullptr;
}

struct ConfigValue {
  std::vector<double> numbers;
  std::string word;
};

struct ConfigEntry {
  std::string key;
  std::size_t line = 0;
  ConfigValue value;
};

struct ConfigSection {
  std::string name;
  std::size_t line = 0;
  std::vector<ConfigEntry> entries;

  const ConfigEntry* find(std::string_view key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline ConfigValue parse_value(const KeySpec& spec, std::string_view text, std::size_t line) {
  const std::string key(spec.key);
  auto toks = tokens(text);
  if (toks.empty()) throw ConfigError(line, key, "missing value");
  ConfigValue v;
  if (spec.kind == ValueKind::Word || spec.kind == ValueKind::Bool) {
    if (toks.size() != 1) throw ConfigError(line, key, "expected a single word");
    v.word = std::string(toks[0]);
    if (spec.kind == ValueKind::Bool) {
      if (v.word != "true" && v.word != "false") throw ConfigError(line, key, "expected true or false");
      return v;
    }
    std::string_view rest = spec.choices;
    while (!rest.empty()) {
      const std::size_t bar = rest.find('|');
      if (rest.substr(0, bar) == v.word) return v;
      rest = bar == std::string_view::npos ? std::string_view{} : rest.substr(bar + 1);
    }
    throw ConfigError(line, key, "'" + v.word + "' is not one of " + std::string(spec.choices));
  }
  double probe = 0.0;
  if (!parse_double(toks.back(), probe)) {
    const std::string_view unit = toks.back();
    if (unit != spec.unit)
      throw ConfigError(line, key,
                        "unit '" + std::string(unit) + "' does not match " +
                            (spec.unit.empty() ? std::string("a dimensionless value") : "'" + std::string(spec.unit) + "'"));
    toks.pop_back();
  }
  for (auto t : toks) {
    double d = 0.0;
    if (!parse_double(t, d) || !std::isfinite(d)) throw ConfigError(line, key, "'" + std::string(t) + "' is not a number");
    v.numbers.push_back(d);
  }
  const std::size_t n = v.numbers.size();
  switch (spec.kind) {
    case ValueKind::Number:
      if (n != 1) throw ConfigError(line, key, "expected one number");
      break;
    case ValueKind::Integer:
      if (n != 1 || v.numbers[0] != std::floor(v.numbers[0]) || v.numbers[0] < 0.0)
        throw ConfigError(line, key, "expected a non-negative integer");
      break;
    case ValueKind::Vector3:
      if (n != 3) throw ConfigError(line, key, "expected three numbers");
      break;
    case ValueKind::NumberList:
      if (n == 0) throw ConfigError(line, key, "expected at least one number");
      break;
    default: break;
  }
  return v;
}

inline std::string format_value(const KeySpec& spec, const ConfigValue& v) {
  if (spec.kind == ValueKind::Word || spec.kind == ValueKind::Bool) return v.word;
  std::string s;
  for (std::size_t i = 0; i < v.numbers.size(); ++i) {
    if (i) s += ' ';
    if (spec.kind == ValueKind::Integer)
      s += std::to_string(static_cast<std::uint64_t>(v.numbers[i]));
    else
      s += format_double(v.numbers[i]);
  }
  if (!spec.unit.empty()) s += " " + std::string(spec.unit);
  return s;
}

inline std::size_t section_rank(std::string_view name) {
  return static_cast<std::size_t>(std::find(kConfigSections.begin(), kConfigSections.end(), name) -
                                  kConfigSections.begin());
}

inline std::size_t key_rank(std::string_view section, std::string_view key) {
  std::size_t r = 0;
  for (const auto& k : kConfigSchema) {
    if (k.section == section && k.key == key) return r;
    ++r;
  }
  return r;
}

}  // namespace detail

/// Parsed configuration text: sections with typed values, in canonical order
/// (schema section order, repeated sections in file order, keys in schema
/// order). Keys before the first header belong to [run].
struct ConfigDocument {
  std::vector<ConfigSection> sections;

  const ConfigSection* section(std::string_view name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }

  std::vector<const ConfigSection*> all(std::string_view name) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections)
      if (s.name == name) out.push_back(&s);
    return out;
  }
};

inline ConfigDocument parse_config(std::string_view text) {
  ConfigDocument doc;
  std::vector<ConfigSection> raw;
  raw.push_back({"run", 0, {}});
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "", "unterminated section header");
      const std::string name(detail::trim(line.substr(1, line.size() - 2)));
      if (detail::section_rank(name) == kConfigSections.size())
        throw ConfigError(line_no, "", "unknown section [" + name + "]");
      if (!repeatable_section(name))
        for (const auto& s : raw)
          if (s.name == name && (s.line != 0 || !s.entries.empty()))
            throw ConfigError(line_no, "", "section [" + name + "] appears twice");
      raw.push_back({name, line_no, {}});
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, std::string(line), "expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    auto& sec = raw.back();
    const KeySpec* spec = find_key(sec.name, key);
    if (!spec) throw ConfigError(line_no, key, "unknown key in [" + sec.name + "]");
    if (sec.find(key)) throw ConfigError(line_no, key, "duplicate key");
    sec.entries.push_back({key, line_no, detail::parse_value(*spec, line.substr(eq + 1), line_no)});
  }
  for (auto& s : raw) {
    if (s.name == "run" && s.line == 0 && s.entries.empty()) continue;
    std::stable_sort(s.entries.begin(), s.entries.end(), [&](const ConfigEntry& a, const ConfigEntry& b) {
      return detail::key_rank(s.name, a.key) < detail::key_rank(s.name, b.key);
    });
    doc.sections.push_back(std::move(s));
  }
  std::stable_sort(doc.sections.begin(), doc.sections.end(), [](const ConfigSection& a, const ConfigSection& b) {
    return detail::section_rank(a.name) < detail::section_rank(b.name);
  });
  return doc;
}

/// Canonical text: comments and blank lines dropped, one space around '=',
/// numbers in shortest round-trip form with their unit.
inline std::string dump(const ConfigDocument& doc) {
  std::string out;
  for (const auto& s : doc.sections) {
    if (!out.empty()) out += '\n';
    out += "[" + s.name + "]\n";
    for (const auto& e : s.entries) out += e.key + " = " + detail::format_value(*find_key(s.name, e.key), e.value) + "\n";
  }
  return out;
}

inline std::string normalize(std::string_view text) { return dump(parse_config(text)); }

inline std::uint64_t config_hash(const ConfigDocument& doc) { return fnv1a64(dump(doc)); }

/// Typed view of one section with schema defaults.
class SectionReader {
 public:
  SectionReader(const ConfigSection* section, std::string_view name) : section_(section), name_(name) {}

  bool present() const { return section_ != nullptr; }
  bool has(std::string_view key) const { return section_ && section_->find(key); }

  ConfigValue value(std::string_view key) const {
    const KeySpec* spec = find_key(name_, key);
    if (section_)
      if (const auto* e = section_->find(key)) return e->value;
    if (!spec || spec->fallback.empty())
      throw ConfigError(section_ ? section_->line : 0, std::string(key),
                        "required in [" + std::string(name_) + "]");
    return detail::parse_value(*spec, spec->fallback, 0);
  }

  double number(std::string_view key) const { return value(key).numbers.at(0); }
  std::size_t integer(std::string_view key) const { return static_cast<std::size_t>(number(key)); }
  std::string word(std::string_view key) const { return value(key).word; }
  bool flag(std::string_view key) const { return word(key) == "true"; }
  std::vector<double> list(std::string_view key) const { return value(key).numbers; }
  Position position(std::string_view key) const {
    const auto n = value(key).numbers;
    return {n[0], n[1], n[2]};
  }
  Velocity vector(std::string_view key) const {
    const auto n = value(key).numbers;
    return {n[0], n[1], n[2]};
  }
  std::size_t line(std::string_view key) const {
    if (section_)
      if (const auto* e = section_->find(key)) return e->line;
    return section_ ? section_->line : 0;
  }

  /// Keys of this section that fell back to their defaults, in schema order.
  std::vector<std::string> defaulted() const {
    std::vector<std::string> out;
    for (const auto& k : kConfigSchema)
      if (k.section == name_ && !k.fallback.empty() && !has(k.key))
        out.push_back(std::string(name_) + "." + std::string(k.key) + " = " +
                      detail::format_value(k, detail::parse_value(k, k.fallback, 0)));
    return out;
  }

 private:
  const ConfigSection* section_;
  std::string_view name_;
};

// ---------------------------------------------------------------------------
// Typed scenario
// ---------------------------------------------------------------------------

/// Source as configured; a moving source is expanded into a trajectory once
/// the evaluation horizon is known.
struct SourceBlock {
  SourceKind kind = SourceKind::Continuous;
  Position position;
  double strength = 0.0;
  double start = 0.0;
  double speed = 0.0;
  Velocity heading{1.0, 0.0, 0.0};

  SourceSpec to_spec(double horizon) const {
    if (kind == SourceKind::Instant || speed == 0.0) {
      return kind == SourceKind::Instant ? SourceSpec::instant(position, strength, start)
                                         : SourceSpec::continuous(position, strength, start);
    }
    const double norm = heading.speed();
    const Velocity v = (speed / norm) * heading;
    const double end = std::max(horizon, start + 1.0);
    return SourceSpec::moving(Trajectory::linear(position, v, start, end), strength, start);
  }
};

struct GridBlock {
  std::array<std::vector<double>, 3> axes;  // node coordinates per axis
  std::vector<double> times;
};

struct ScenarioConfig {
  ConfigDocument document;
  Seed seed = 1;
  Environment environment;
  ChannelOptions solver;
  std::vector<SourceBlock> sources;
  std::optional<GridBlock> grid;
  std::optional<PopulationSpec> population;
  std::optional<EpidemicConfig> epidemic;
  std::optional<MonteCarloSpec> detection;
  std::optional<LocalizationConfig> localization;
  std::vector<std::string> defaults;  // "section.key = value" for every default applied

  std::uint64_t hash() const { return config_hash(document); }
};

namespace detail {

inline std::vector<double> axis_nodes(const SectionReader& r, std::string_view key) {
  const auto v = r.list(key);
  if (v.size() != 3 || v[2] < 1.0 || v[2] != std::floor(v[2]))
    throw ConfigError(r.line(key), std::string(key), "expected 'lo hi count' with integer count >= 1");
  const auto n = static_cast<std::size_t>(v[2]);
  if (n > 1 && !(v[1] > v[0])) throw ConfigError(r.line(key), std::string(key), "expected hi > lo");
  std::vector<double> nodes(n);
  for (std::size_t i = 0; i < n; ++i)
    nodes[i] = n == 1 ? v[0] : v[0] + (v[1] - v[0]) * static_cast<double>(i) / static_cast<double>(n - 1);
  return nodes;
}

template <typename F>
void checked(const SectionReader& r, std::string_view key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(r.line(key), std::string(key), e.what());
  }
}

}  // namespace detail

/// Builds and validates the typed scenario. Blocks absent from the file stay
/// empty; commands that need them report the missing section.
inline ScenarioConfig build_scenario(ConfigDocument doc) {
  ScenarioConfig cfg;
  auto note_defaults = [&](const SectionReader& r) {
    const auto d = r.defaulted();
    cfg.defaults.insert(cfg.defaults.end(), d.begin(), d.end());
  };

  const SectionReader run(doc.section("run"), "run");
  cfg.seed = run.integer("seed");
  note_defaults(run);

  const SectionReader env(doc.section("environment"), "environment");
  detail::checked(env, "diffusivity", [&] { cfg.environment.diffusivity = Diffusivity(env.number("diffusivity")); });
  cfg.environment.wind = env.vector("wind");
  const std::string boundary = env.word("boundary");
  if (boundary == "free") {
    cfg.environment.boundary = FreeSpace{};
  } else if (boundary == "half_space") {
    cfg.environment.boundary = HalfSpaceReflecting{};
  } else {
    cfg.environment.boundary =
        RectangularDuctReflecting{env.number("duct_width"), env.number("duct_height"), static_cast<int>(env.integer("image_order"))};
  }
  detail::checked(env, "boundary", [&] { cfg.environment.validate(); });
  note_defaults(env);

  const SectionReader solver(doc.section("solver"), "solver");
  cfg.solver.quadrature_tol = solver.number("quadrature_tol");
  cfg.solver.max_refinement = solver.integer("max_refinement");
  if (!(cfg.solver.quadrature_tol > 0.0))
    throw ConfigError(solver.line("quadrature_tol"), "quadrature_tol", "must be positive");
  note_defaults(solver);

  for (const ConfigSection* s : doc.all("source")) {
    const SectionReader src(s, "source");
    SourceBlock b;
    b.kind = src.word("kind") == "instant" ? SourceKind::Instant : SourceKind::Continuous;
    b.position = src.position("position");
    if (b.kind == SourceKind::Instant) {
      if (src.has("rate")) throw ConfigError(src.line("rate"), "rate", "instant sources take 'mass'");
      b.strength = src.number("mass");
    } else {
      if (src.has("mass")) throw ConfigError(src.line("mass"), "mass", "continuous sources take 'rate'");
      b.strength = src.number("rate");
    }
    b.start = src.number("start");
    b.speed = src.number("speed");
    b.heading = src.vector("heading");
    if (b.strength < 0.0) throw ConfigError(s->line, b.kind == SourceKind::Instant ? "mass" : "rate", "must be >= 0");
    if (b.start < 0.0) throw ConfigError(src.line("start"), "start", "must be >= 0");
    if (b.speed < 0.0) throw ConfigError(src.line("speed"), "speed", "must be >= 0");
    if (b.kind == SourceKind::Instant && b.speed != 0.0)
      throw ConfigError(src.line("speed"), "speed", "instant sources cannot move");
    if (b.heading.speed() == 0.0) throw ConfigError(src.line("heading"), "heading", "must be non-zero");
    cfg.sources.push_back(b);
    note_defaults(src);
  }

  if (const auto* g = doc.section("grid")) {
    const SectionReader grid(g, "grid");
    GridBlock b;
    b.axes[0] = detail::axis_nodes(grid, "x");
    b.axes[1] = detail::axis_nodes(grid, "y");
    b.axes[2] = detail::axis_nodes(grid, "z");
    if (grid.has("time")) {
      b.times = grid.list("time");
      for (double t : b.times)
        if (t < 0.0) throw ConfigError(grid.line("time"), "time", "must be >= 0");
    }
    cfg.grid = b;
    note_defaults(grid);
  }

  if (const auto* p = doc.section("population")) {
    const SectionReader pop(p, "population");
    PopulationSpec spec;
    spec.size = pop.integer("agents");
    spec.initially_infected = pop.integer("infected");
    spec.emission_rate = pop.number("emission_rate");
    spec.breathing_rate = pop.number("breathing_rate");
    if (spec.initially_infected > spec.size)
      throw ConfigError(pop.line("infected"), "infected", "exceeds the number of agents");
    if (!(spec.breathing_rate > 0.0))
      throw ConfigError(pop.line("breathing_rate"), "breathing_rate", "must be positive");
    MobilityModel& m = spec.mobility;
    const std::string model = pop.word("model");
    if (model == "random_walk")
      m.kind = RandomWalk{pop.number("step_len"), pop.number("step_dt")};
    else if (model == "random_waypoint")
      m.kind = RandomWaypoint{pop.number("speed_min"), pop.number("speed_max"), pop.number("pause")};
    else
      m.kind = RandomDirection{pop.number("speed"), pop.number("epoch")};
    m.domain = Box{pop.position("domain_lo"), pop.position("domain_hi")};
    m.planar = pop.flag("planar");
    m.boundary = pop.word("boundary_policy") == "reflect" ? BoundaryPolicy::Reflect : BoundaryPolicy::WrapToWaypoint;
    detail::checked(pop, "model", [&] { m.validate(); });
    cfg.population = spec;
    note_defaults(pop);
  }

  if (const auto* e = doc.section("epidemic")) {
    const SectionReader epi(e, "epidemic");
    EpidemicConfig c;
    c.dose_response = epi.number("dose_response");
    c.latency = epi.number("latency");
    c.step = epi.number("step");
    c.horizon = epi.number("horizon");
    c.channel = cfg.solver;
    detail::checked(epi, "step", [&] { c.validate(); });
    cfg.epidemic = c;
    note_defaults(epi);
  }

  if (const auto* d = doc.section("detection")) {
    const SectionReader det(d, "detection");
    MonteCarloSpec spec;
    spec.cir.symbol_interval = det.number("symbol_interval");
    if (det.has("taps")) {
      spec.cir.taps = det.list("taps");
    } else {
      detail::checked(det, "tx", [&] {
        spec.cir = cir_from_channel(cfg.environment, det.position("tx"), det.position("rx"), det.number("mass"),
                                    det.number("symbol_interval"), det.integer("taps_count"));
      });
    }
    if (det.word("noise") == "gaussian")
      spec.noise = GaussianNoise{det.number("sigma")};
    else
      spec.noise = PoissonNoise{det.number("alpha")};
    const std::optional<double> threshold =
        det.has("threshold") ? std::optional<double>(det.number("threshold")) : std::nullopt;
    const std::string detector = det.word("detector");
    if (detector == "threshold")
      spec.detector.mode = SymbolThreshold{threshold};
    else if (detector == "sequence_ml")
      spec.detector.mode = SequenceML{det.integer("memory")};
    else
      spec.detector.mode = NonCoherentDifference{threshold};
    spec.detector.prior_one = det.number("prior_one");
    spec.bits_per_frame = det.integer("bits_per_frame");
    spec.trials = det.integer("trials");
    if (spec.bits_per_frame < 1) throw ConfigError(det.line("bits_per_frame"), "bits_per_frame", "must be >= 1");
    if (spec.trials < 1) throw ConfigError(det.line("trials"), "trials", "must be >= 1");
    detail::checked(det, "taps", [&] { spec.cir.validate(); });
    detail::checked(det, "noise", [&] { validate(spec.noise); });
    detail::checked(det, "detector", [&] { spec.detector.validate(); });
    cfg.detection = spec;
    note_defaults(det);
  }

  if (const auto* l = doc.section("localization")) {
    const SectionReader loc(l, "localization");
    LocalizationConfig c;
    const std::string model = loc.word("model");
    c.model = model == "steady"      ? ForwardModel::SteadyContinuous
              : model == "transient" ? ForwardModel::TransientContinuous
                                     : ForwardModel::Instant;
    c.domain = Box{loc.position("domain_lo"), loc.position("domain_hi")};
    c.grid_points = loc.integer("grid_points");
    c.simplex_tol = loc.number("simplex_tol");
    c.max_iterations = loc.integer("max_iterations");
    if (c.grid_points < 2) throw ConfigError(loc.line("grid_points"), "grid_points", "must be >= 2");
    cfg.localization = c;
    note_defaults(loc);
  }

  cfg.document = std::move(doc);
  return cfg;
}

inline ScenarioConfig load_config_text(std::string_view text) { return build_scenario(parse_config(text)); }

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str());
}

}  // namespace virodyne

#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "virodyne/channel.hpp"
#include "virodyne/config.hpp"
#include "virodyne/detection.hpp"
#include "virodyne/epidemic.hpp"
#include "virodyne/error.hpp"
#include "virodyne/format.hpp"
#include "virodyne/localization.hpp"
#include "virodyne/mutation.hpp"
#include "virodyne/seqstat.hpp"

namespace virodyne {

inline constexpr const char* kToolVersion = "0.1.0";

namespace cli {

using Json = nlohmann::ordered_json;

/// Thrown for bad flag combinations detected after parsing (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Metadata carried by every artifact.
struct Metadata {
  std::string command;
  std::string config_hash;
  std::optional<Seed> seed;
  std::vector<std::string> notes;  // defaults applied, overrides, input hashes

  void write_comments(std::ostream& out) const {
    out << "# virodyne " << kToolVersion << '\n';
    out << "# command = " << command << '\n';
    out << "# config_hash = " << config_hash << '\n';
    out << "# seed = " << (seed ? std::to_string(*seed) : std::string("none")) << '\n';
    for (const auto& n : notes) out << "# " << n << '\n';
  }

  Json json() const {
    Json j;
    j["tool"] = "virodyne";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seed"] = seed ? Json(*seed) : Json(nullptr);
    j["notes"] = notes;
    return j;
  }
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::EmptyInput, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to `path`, or to `fallback` when the path is empty or "-".
inline void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& body) {
  if (path.empty() || path == "-") {
    body(fallback);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  body(out);
}

inline void emit_json(const std::string& path, std::ostream& fallback, const Json& j) {
  emit(path, fallback, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

inline Metadata config_metadata(const std::string& command, const ScenarioConfig& cfg) {
  Metadata m{command, hex64(cfg.hash()), cfg.seed, {}};
  for (const auto& d : cfg.defaults) m.notes.push_back("default " + d);
  return m;
}

inline Json position_json(const Position& p) { return Json::array({p.x, p.y, p.z}); }

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct FieldArgs {
  std::string config;
  std::optional<double> speed;
  std::vector<double> times;
  std::string out;
};

inline int run_field(const FieldArgs& a, std::ostream& out) {
  const ScenarioConfig cfg = load_config(a.config);
  if (cfg.sources.empty()) throw UsageError("config has no [source] section");
  if (!cfg.grid) throw UsageError("config has no [grid] section");
  std::vector<double> times = a.times.empty() ? cfg.grid->times : a.times;
  if (times.empty()) throw UsageError("no evaluation time: set grid.time or pass --time");
  for (double t : times)
    if (!(t >= 0.0)) throw UsageError("--time must be >= 0");
  Metadata meta = config_metadata("field", cfg);

  Scenario scenario{cfg.environment, {}, cfg.solver};
  const double horizon = *std::max_element(times.begin(), times.end());
  for (SourceBlock b : cfg.sources) {
    if (a.speed) {
      if (*a.speed < 0.0) throw UsageError("--speed must be >= 0");
      if (b.kind == SourceKind::Continuous) b.speed = *a.speed;
    }
    scenario.sources.push_back(b.to_spec(horizon));
  }
  if (a.speed) meta.notes.push_back("override source.speed = " + format_double(*a.speed) + " mps");
  if (!a.times.empty()) {
    std::string s;
    for (double t : a.times) s += (s.empty() ? "" : " ") + format_double(t);
    meta.notes.push_back("override grid.time = " + s + " s");
  }

  FieldQuery query;
  for (double t : times)
    for (double x : cfg.grid->axes[0])
      for (double y : cfg.grid->axes[1])
        for (double z : cfg.grid->axes[2]) query.points.push_back({Position(x, y, z), TimePoint(t)});
  const auto values = evaluate_field(query, scenario);
  emit(a.out, out, [&](std::ostream& o) {
    meta.write_comments(o);
    write_field_csv(o, query, values);
  });
  return 0;
}

struct EpidemicArgs {
  std::string config;
  std::optional<Seed> seed;
  std::string out;
  std::string summary;
};

inline int run_epidemic(const EpidemicArgs& a, std::ostream& out) {
  const ScenarioConfig cfg = load_config(a.config);
  if (!cfg.population) throw UsageError("config has no [population] section");
  if (!cfg.epidemic) throw UsageError("config has no [epidemic] section");
  Metadata meta = config_metadata("epidemic", cfg);
  const Seed seed = a.seed.value_or(cfg.seed);
  meta.seed = seed;
  auto agents = make_population(*cfg.population, cfg.epidemic->horizon, seed);
  const auto state = run(std::move(agents), *cfg.epidemic, cfg.environment, seed);
  emit(a.out, out, [&](std::ostream& o) {
    meta.write_comments(o);
    write_epidemic_csv(o, state);
  });
  if (!a.summary.empty()) {
    Json j;
    j["meta"] = meta.json();
    j["agents"] = state.agents.size();
    Json curve = Json::array();
    for (const auto& s : state.series) curve.push_back({{"t", s.t}, {"infected", s.infected_count()}});
    j["infection_curve"] = curve;
    j["final_infected"] = state.current().infected_count();
    emit_json(a.summary, out, j);
  }
  return 0;
}

struct DetectArgs {
  std::string config;
  std::optional<Seed> seed;
  std::optional<std::size_t> trials;
  std::string out;
};

inline int run_detect(const DetectArgs& a, std::ostream& out) {
  const ScenarioConfig cfg = load_config(a.config);
  if (!cfg.detection) throw UsageError("config has no [detection] section");
  Metadata meta = config_metadata("detect", cfg);
  const Seed seed = a.seed.value_or(cfg.seed);
  meta.seed = seed;
  MonteCarloSpec spec = *cfg.detection;
  if (a.trials) {
    if (*a.trials < 1) throw UsageError("--trials must be >= 1");
    spec.trials = *a.trials;
    meta.notes.push_back("override detection.trials = " + std::to_string(*a.trials));
  }
  const ErrorReport r = error_probability(spec, seed);
  Json j;
  j["ber"] = r.ber;
  j["ci"] = Json::array({r.ci_low, r.ci_high});
  j["mi_bits"] = r.mi_bits;
  j["trials"] = r.trials;
  j["seed"] = r.seed;
  j["errors"] = r.errors;
  j["bits"] = r.bits;
  j["taps"] = spec.cir.taps;
  j["meta"] = meta.json();
  emit_json(a.out, out, j);
  return 0;
}

struct LocalizeArgs {
  std::string readings;
  std::string config;
  std::string model;
  std::string out;
};

inline int run_localize(const LocalizeArgs& a, std::ostream& out) {
  std::istringstream rin(read_file(a.readings));
  const auto readings = read_readings_csv(rin);
  ScenarioConfig cfg = a.config.empty() ? load_config_text("") : load_config(a.config);
  Metadata meta = config_metadata("localize", cfg);
  meta.seed.reset();
  meta.notes.push_back("readings_hash = " + hex64(fnv1a64(read_file(a.readings))));

  LocalizationConfig lc;
  if (cfg.localization) {
    lc = *cfg.localization;
  } else {
    Position lo = readings.front().position, hi = lo;
    for (const auto& r : readings) {
      lo = {std::min(lo.x, r.position.x), std::min(lo.y, r.position.y), std::min(lo.z, r.position.z)};
      hi = {std::max(hi.x, r.position.x), std::max(hi.y, r.position.y), std::max(hi.z, r.position.z)};
    }
    lc.domain = Box{lo, hi};
    meta.notes.push_back("default localization.domain = sensor bounding box");
  }
  if (!a.model.empty()) {
    lc.model = a.model == "steady" ? ForwardModel::SteadyContinuous
               : a.model == "transient" ? ForwardModel::TransientContinuous
                                         : ForwardModel::Instant;
    meta.notes.push_back("override localization.model = " + a.model);
  }

  SourceEstimate est;
  int code = 0;
  try {
    est = localize(readings, cfg.environment, lc);
  } catch (const LocalizationNotConverged& e) {
    est = e.best();
    code = 1;
  }
  const auto ident = crlb_diagnostics(readings, cfg.environment, lc.model, est.position, est.rate);
  Json j;
  j["position"] = position_json(est.position);
  j["rate"] = est.rate;
  j["residual_norm"] = est.residual_norm;
  j["converged"] = est.converged;
  j["iterations"] = est.iterations;
  j["identifiability"] = {{"condition_number", ident.condition_number},
                          {"geometry_rank", ident.geometry_rank},
                          {"duplicate_sensors", ident.duplicate_sensors},
                          {"flagged", ident.flagged}};
  j["meta"] = meta.json();
  emit_json(a.out, out, j);
  return code;
}

struct SequenceArgs {
  std::string fasta;
  std::string alphabet = "auto";
  double pseudocount = 0.0;
  bool lenient = false;
};

inline Alphabet alphabet_from(const std::string& s) {
  if (s == "nucleotide") return Alphabet::Nucleotide;
  if (s == "amino") return Alphabet::AminoAcid;
  return Alphabet::Auto;
}

inline AlignmentMatrix load_alignment(const SequenceArgs& a, Metadata& meta) {
  const std::string text = read_file(a.fasta);
  meta.notes.push_back("input_hash = " + hex64(fnv1a64(text)));
  const auto records = parse_fasta(text, alphabet_from(a.alphabet));
  auto m = build_alignment(records, alphabet_from(a.alphabet), !a.lenient);
  meta.notes.push_back(std::string("alphabet = ") + to_string(m.alphabet));
  if (m.truncated > 0) meta.notes.push_back("truncated_rows = " + std::to_string(m.truncated));
  return m;
}

inline std::string params_hash(const std::string& canonical) { return hex64(fnv1a64(canonical)); }

struct EntropyArgs {
  SequenceArgs seq;
  std::string out;
};

inline int run_entropy(const EntropyArgs& a, std::ostream& out) {
  Metadata meta{"entropy",
                params_hash("alphabet=" + a.seq.alphabet + ";pseudocount=" + format_double(a.seq.pseudocount) +
                            ";lenient=" + (a.seq.lenient ? "true" : "false")),
                std::nullopt,
                {}};
  const auto m = load_alignment(a.seq, meta);
  const auto prof = positional_entropy(m, a.seq.pseudocount);
  emit(a.out, out, [&](std::ostream& o) {
    meta.write_comments(o);
    write_profile_csv(o, prof);
  });
  return 0;
}

struct HotspotArgs {
  SequenceArgs seq;
  std::string profile;
  std::optional<std::size_t> top;
  std::optional<double> min_entropy;
  std::string out;
};

inline int run_hotspots(const HotspotArgs& a, std::ostream& out) {
  if (a.seq.fasta.empty() == a.profile.empty()) throw UsageError("give exactly one of --fasta or --profile");
  if (a.top.has_value() == a.min_entropy.has_value()) throw UsageError("give exactly one of --top or --min-entropy");
  const HotspotSelection sel = a.top ? HotspotSelection(TopK{*a.top}) : HotspotSelection(MinEntropy{*a.min_entropy});
  const std::string sel_text = a.top ? "top=" + std::to_string(*a.top) : "min_entropy=" + format_double(*a.min_entropy);
  Metadata meta{"hotspots",
                params_hash(sel_text + ";alphabet=" + a.seq.alphabet + ";pseudocount=" +
                            format_double(a.seq.pseudocount) + ";lenient=" + (a.seq.lenient ? "true" : "false")),
                std::nullopt,
                {}};
  EntropyProfile prof;
  if (!a.profile.empty()) {
    const std::string text = read_file(a.profile);
    meta.notes.push_back("input_hash = " + hex64(fnv1a64(text)));
    std::istringstream in(text);
    prof = read_profile_csv(in);
  } else {
    prof = positional_entropy(load_alignment(a.seq, meta), a.seq.pseudocount);
  }
  Json list = Json::array();
  for (const auto& h : hotspots(prof, sel)) list.push_back({{"position", h.position}, {"entropy_bits", h.entropy_bits}});
  Json j;
  j["selection"] = sel_text;
  j["hotspots"] = list;
  j["meta"] = meta.json();
  emit_json(a.out, out, j);
  return 0;
}

struct DirectionArgs {
  SequenceArgs seq;
  std::size_t position = 0;
  double q = 0.0;
  double gamma = 0.0;
  std::string mode = "full";
  std::string level = "aa";
  bool no_stop = false;
  std::string format = "json";
  std::string out;
};

inline int run_direction(const DirectionArgs& a, std::ostream& out) {
  Metadata meta{"direction",
                params_hash("position=" + std::to_string(a.position) + ";q=" + format_double(a.q) +
                            ";gamma=" + format_double(a.gamma) + ";mode=" + a.mode + ";level=" + a.level +
                            ";no_stop=" + (a.no_stop ? "true" : "false") + ";alphabet=" + a.seq.alphabet),
                std::nullopt,
                {}};
  const auto m = load_alignment(a.seq, meta);
  DirectionOptions opt;
  opt.mode = a.mode == "ts" ? MutationMode::TransitionsOnly
             : a.mode == "tv" ? MutationMode::TransversionsOnly
                              : MutationMode::Full;
  opt.level = a.level == "base" ? Level::Base : a.level == "codon" ? Level::Codon : Level::AminoAcid;
  opt.exclude_stop = a.no_stop;
  const auto rep = mutation_direction(m, a.position, KimuraParams{a.q, a.gamma}, opt);

  if (a.format == "table") {
    emit(a.out, out, [&](std::ostream& o) {
      meta.write_comments(o);
      o << "rank\tlabel\tname\tprobability\n";
      for (std::size_t i = 0; i < rep.targets.size(); ++i) {
        const auto& t = rep.targets[i];
        o << i + 1 << '\t' << t.label << '\t' << t.name << '\t' << format_double(t.probability) << '\n';
      }
    });
    return 0;
  }
  auto states = [](const std::vector<RankedState>& v) {
    Json arr = Json::array();
    for (const auto& s : v) arr.push_back({{"label", s.label}, {"name", s.name}, {"probability", s.probability}});
    return arr;
  };
  Json j;
  j["position"] = rep.position;
  j["level"] = to_string(rep.level);
  j["mode"] = to_string(rep.mode);
  j["q"] = a.q;
  j["gamma"] = a.gamma;
  j["n_effective"] = rep.n_effective;
  j["source"] = states(rep.source);
  j["targets"] = states(rep.targets);
  j["meta"] = meta.json();
  emit_json(a.out, out, j);
  return 0;
}

}  // namespace cli

/// Entry point shared by the executable and the tests. Returns 0 on success,
/// 1 on a domain error, 2 on a usage or configuration error.
inline int run_command(const std::vector<std::string>& argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"virodyne: macroscale molecular communication and viral sequence analysis", "virodyne"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("virodyne ") + kToolVersion);

  auto add_sequence_flags = [](CLI::App* sub, SequenceArgs& s, bool required) {
    auto* f = sub->add_option("--fasta", s.fasta, "Aligned FASTA file");
    if (required) f->required();
    sub->add_option("--alphabet", s.alphabet, "Residue alphabet")
        ->check(CLI::IsMember({"auto", "nucleotide", "amino"}));
    sub->add_option("--pseudocount", s.pseudocount, "Additive smoothing per symbol")->check(CLI::NonNegativeNumber);
    sub->add_flag("--lenient", s.lenient, "Truncate unequal rows instead of failing");
  };

  FieldArgs field;
  auto* f = app.add_subcommand("field", "Concentration grid as CSV x,y,z,t,c");
  f->add_option("--config", field.config, "Scenario config")->required();
  f->add_option("--speed", field.speed, "Speed of continuous sources (m/s)");
  f->add_option("--time", field.times, "Evaluation time(s) in seconds");
  f->add_option("--out", field.out, "Output CSV (default stdout)");

  EpidemicArgs epi;
  auto* e = app.add_subcommand("epidemic", "Agent-based SI simulation");
  e->add_option("--config", epi.config, "Scenario config")->required();
  e->add_option("--seed", epi.seed, "Overrides run.seed");
  e->add_option("--out", epi.out, "Time-series CSV (default stdout)");
  e->add_option("--summary", epi.summary, "Summary JSON with the infection curve");

  DetectArgs det;
  auto* d = app.add_subcommand("detect", "Monte-Carlo bit error rate of an OOK link");
  d->add_option("--config", det.config, "Scenario config")->required();
  d->add_option("--seed", det.seed, "Overrides run.seed");
  d->add_option("--trials", det.trials, "Overrides detection.trials");
  d->add_option("--out", det.out, "Report JSON (default stdout)");

  LocalizeArgs loc;
  auto* l = app.add_subcommand("localize", "Source position and rate from sensor readings");
  l->add_option("--readings", loc.readings, "CSV x,y,z,t,c,sigma")->required();
  l->add_option("--config", loc.config, "Environment and [localization] settings");
  l->add_option("--model", loc.model, "Forward model")->check(CLI::IsMember({"steady", "transient", "instant"}));
  l->add_option("--out", loc.out, "Estimate JSON (default stdout)");

  EntropyArgs ent;
  auto* en = app.add_subcommand("entropy", "Per-position Shannon entropy profile");
  add_sequence_flags(en, ent.seq, true);
  en->add_option("--out", ent.out, "Profile CSV (default stdout)");

  HotspotArgs hot;
  auto* h = app.add_subcommand("hotspots", "Most variable positions");
  add_sequence_flags(h, hot.seq, false);
  h->add_option("--profile", hot.profile, "Profile CSV written by 'entropy'");
  h->add_option("--top", hot.top, "Keep the k most variable positions");
  h->add_option("--min-entropy", hot.min_entropy, "Keep positions at or above this entropy (bits)");
  h->add_option("--out", hot.out, "Hot-spot JSON (default stdout)");

  DirectionArgs dir;
  auto* r = app.add_subcommand("direction", "Ranked mutation targets at one position");
  add_sequence_flags(r, dir.seq, true);
  r->add_option("--position", dir.position, "1-based position (codon index at codon/aa level)")->required();
  r->add_option("--q", dir.q, "Transition probability per site")->required();
  r->add_option("--gamma", dir.gamma, "Transversion ratio")->required();
  r->add_option("--mode", dir.mode, "Allowed substitutions")->check(CLI::IsMember({"full", "ts", "tv"}));
  r->add_option("--level", dir.level, "Reporting level")->check(CLI::IsMember({"base", "codon", "aa"}));
  r->add_flag("--no-stop", dir.no_stop, "Drop STOP and renormalize over the 20 amino acids");
  r->add_option("--format", dir.format, "Output format")->check(CLI::IsMember({"json", "table"}));
  r->add_option("--out", dir.out, "Output file (default stdout)");

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*f) return run_field(field, out);
    if (*e) return run_epidemic(epi, out);
    if (*d) return run_detect(det, out);
    if (*l) return run_localize(loc, out);
    if (*en) return run_entropy(ent, out);
    if (*h) return run_hotspots(hot, out);
    if (*r) return run_direction(dir, out);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return ex.kind() == ErrorKind::Config ? 2 : 1;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace virodyne

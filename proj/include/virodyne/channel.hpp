#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <variant>
#include <vector>

#include "virodyne/core.hpp"
#include "virodyne/error.hpp"
#include "virodyne/format.hpp"
#include "virodyne/parallel.hpp"
#include "virodyne/quadrature.hpp"
#include "virodyne/trajectory.hpp"

namespace virodyne {

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

struct FreeSpace {
  friend bool operator==(const FreeSpace&, const FreeSpace&) = default;
};

/// Impermeable ground plane z = 0; the field lives in z >= 0.
struct HalfSpaceReflecting {
  friend bool operator==(const HalfSpaceReflecting&, const HalfSpaceReflecting&) = default;
};

/// Duct running along x with reflecting walls y = 0, y = width, z = 0,
/// z = height. The image series is cut at |n| <= image_order per axis.
struct RectangularDuctReflecting {
  double width = 1.0;
  double height = 1.0;
  int image_order = 10;

  friend bool operator==(const RectangularDuctReflecting&, const RectangularDuctReflecting&) = default;
};

using Boundary = std::variant<FreeSpace, HalfSpaceReflecting, RectangularDuctReflecting>;

/// Propagation medium. Image solutions are exact when the wind is parallel
/// to every reflecting wall (for the duct: wind along x; for the ground: no
/// vertical component).
struct Environment {
  Diffusivity diffusivity{1.0};
  Velocity wind{};
  Boundary boundary{FreeSpace{}};

  void validate() const {
    if (const auto* duct = std::get_if<RectangularDuctReflecting>(&boundary)) {
      if (!(duct->width > 0.0) || !(duct->height > 0.0))
        throw Error(ErrorKind::InvalidArgument, "duct dimensions must be positive");
      if (duct->image_order < 0) throw Error(ErrorKind::InvalidArgument, "image_order must be >= 0");
    }
  }
};

// ---------------------------------------------------------------------------
// Sources
// ---------------------------------------------------------------------------

enum class SourceKind { Instant, Continuous };

/// Emission profile of one infected entity.
///
/// `strength` is kg for an Instant release and kg/s for a Continuous one.
/// A Continuous source may carry a dimensionless `rate_profile(t)` (absolute
/// time, must be >= 0) that scales the rate, e.g. to follow symptom severity
/// or to stop emitting. The location is either fixed or a Trajectory.
struct SourceSpec {
  SourceKind kind = SourceKind::Continuous;
  std::variant<Position, Trajectory> location{Position{}};
  double strength = 0.0;
  double start_time = 0.0;
  std::function<double(double)> rate_profile{};

  static SourceSpec instant(const Position& p, double mass_kg, double t0 = 0.0) {
    SourceSpec s;
    s.kind = SourceKind::Instant;
    s.location = p;
    s.strength = mass_kg;
    s.start_time = t0;
    s.validate();
    return s;
  }

  static SourceSpec continuous(const Position& p, double rate_kg_s, double t0 = 0.0) {
    SourceSpec s;
    s.kind = SourceKind::Continuous;
    s.location = p;
    s.strength = rate_kg_s;
    s.start_time = t0;
    s.validate();
    return s;
  }

  static SourceSpec moving(Trajectory path, double rate_kg_s, double t0 = 0.0) {
    SourceSpec s;
    s.kind = SourceKind::Continuous;
    s.location = std::move(path);
    s.strength = rate_kg_s;
    s.start_time = t0;
    s.validate();
    return s;
  }

  void validate() const {
    if (!std::isfinite(strength) || strength < 0.0)
      throw Error(ErrorKind::InvalidArgument, "source strength must be finite and >= 0");
    if (!std::isfinite(start_time) || start_time < 0.0)
      throw Error(ErrorKind::InvalidArgument, "source start_time must be finite and >= 0");
  }

  bool has_trajectory() const { return std::holds_alternative<Trajectory>(location); }

  Position position_at(double t) const {
    if (const auto* p = std::get_if<Position>(&location)) return *p;
    return std::get<Trajectory>(location).position_at(t);
  }

  double rate_at(double t) const {
    if (!rate_profile) return strength;
    const double m = rate_profile(t);
    if (!std::isfinite(m) || m < 0.0) throw Error(ErrorKind::InvalidArgument, "rate profile must be finite and >= 0");
    return strength * m;
  }

  /// Fixed position with constant rate: the closed-form continuous solution applies.
  bool is_static_constant() const {
    if (rate_profile) return false;
    if (const auto* traj = std::get_if<Trajectory>(&location)) return traj->is_stationary();
    return true;
  }
};

struct ChannelOptions {
  double quadrature_tol = 1e-6;
  int max_refinement = 20;
};

namespace detail {

/// Calls fn(image_position) for the source and each of its mirror images.
template <typename Fn>
void for_each_image(const Boundary& boundary, const Position& src, Fn&& fn) {
  if (std::holds_alternative<FreeSpace>(boundary)) {
    fn(src);
  } else if (std::holds_alternative<HalfSpaceReflecting>(boundary)) {
    fn(src);
    fn(Position(src.x, src.y, -src.z));
  } else {
    const auto& duct = std::get<RectangularDuctReflecting>(boundary);
    const int n = duct.image_order;
    for (int iy = -n; iy <= n; ++iy) {
      const double base_y = 2.0 * iy * duct.width;
      for (int sy = 0; sy < 2; ++sy) {
        const double y = base_y + (sy == 0 ? src.y : -src.y);
        for (int iz = -n; iz <= n; ++iz) {
          const double base_z = 2.0 * iz * duct.height;
          for (int sz = 0; sz < 2; ++sz) {
            const double z = base_z + (sz == 0 ? src.z : -src.z);
            fn(Position(src.x, y, z));
          }
        }
      }
    }
  }
}

/// Free-space Green's function of the advection-diffusion equation for a unit
/// release at `src` observed after `tau` seconds.
inline double green_free(double diffusivity, const Velocity& wind, const Position& src,
                         const Position& r, double tau) {
  const double four_d_tau = 4.0 * diffusivity * tau;
  const double dx = r.x - src.x - wind.vx * tau;
  const double dy = r.y - src.y - wind.vy * tau;
  const double dz = r.z - src.z - wind.vz * tau;
  const double r2 = dx * dx + dy * dy + dz * dz;
  return std::exp(-r2 / four_d_tau) / std::pow(std::numbers::pi * four_d_tau, 1.5);
}

/// log(erfc(x)), finite far into the tail.
inline double log_erfc(double x) {
  if (x < 25.0) return std::log(std::erfc(x));
  const double inv2 = 1.0 / (x * x);
  return -x * x - std::log(x * std::sqrt(std::numbers::pi)) +
         std::log1p(-0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2);
}

/// Continuous point release with constant unit rate, switched on `tau`
/// seconds ago, in unbounded space with uniform wind. tau = infinity gives
/// the steady plume.
inline double continuous_free(double diffusivity, const Velocity& wind, const Position& src,
                              const Position& r, double tau) {
  const Velocity delta = r - src;
  const double d = std::sqrt(squared_norm(delta));
  const double speed = wind.speed();
  const double prefactor = 1.0 / (4.0 * std::numbers::pi * diffusivity * d);
  if (speed == 0.0) {
    if (std::isinf(tau)) return prefactor;
    return prefactor * std::erfc(d / std::sqrt(4.0 * diffusivity * tau));
  }
  const double drift = (wind.vx * delta.vx + wind.vy * delta.vy + wind.vz * delta.vz) / (2.0 * diffusivity);
  const double a = d * speed / (2.0 * diffusivity);
  if (std::isinf(tau)) return prefactor * std::exp(drift - a);
  const double root = std::sqrt(4.0 * diffusivity * tau);
  const double upstream = std::exp(drift - a + log_erfc((d - speed * tau) / root));
  const double downstream = std::exp(drift + a + log_erfc((d + speed * tau) / root));
  return 0.5 * prefactor * (upstream + downstream);
}

inline void require_off_source(const Position& src, const Position& r) {
  if (squared_norm(r - src) == 0.0)
    throw Error(ErrorKind::SingularPoint, "continuous-source field is singular at the source position");
}

}  // namespace detail

/// Green's function of the environment (images included) for a unit mass
/// released at `src`, `tau` seconds before observation.
inline double green(const Environment& env, const Position& src, const Position& r, double tau) {
  if (!(tau > 0.0)) return 0.0;
  double sum = 0.0;
  detail::for_each_image(env.boundary, src, [&](const Position& img) {
    sum += detail::green_free(env.diffusivity.value(), env.wind, img, r, tau);
  });
  return sum;
}

/// Field of an instantaneous release: Q G(r, t - t0; r0), zero before release.
inline double concentration_instant(const SourceSpec& src, const Environment& env, const Position& r,
                                    TimePoint t) {
  if (src.kind != SourceKind::Instant)
    throw Error(ErrorKind::InvalidArgument, "concentration_instant needs an Instant source");
  const double tau = t.seconds() - src.start_time;
  if (!(tau > 0.0) || src.strength == 0.0) return 0.0;
  return src.strength * green(env, src.position_at(src.start_time), r, tau);
}

/// Field of a fixed source emitting at a constant rate since start_time.
/// Closed form, including wind and image terms.
inline double concentration_continuous(const SourceSpec& src, const Environment& env, const Position& r,
                                       TimePoint t) {
  if (src.kind != SourceKind::Continuous || !src.is_static_constant())
    throw Error(ErrorKind::InvalidArgument, "concentration_continuous needs a fixed constant-rate source");
  const Position r0 = src.position_at(src.start_time);
  detail::require_off_source(r0, r);
  const double tau = t.seconds() - src.start_time;
  if (!(tau > 0.0) || src.strength == 0.0) return 0.0;
  double sum = 0.0;
  detail::for_each_image(env.boundary, r0, [&](const Position& img) {
    detail::require_off_source(img, r);
    sum += detail::continuous_free(env.diffusivity.value(), env.wind, img, r, tau);
  });
  return src.strength * sum;
}

/// Long-time limit of concentration_continuous.
inline double concentration_steady(const Position& source, double rate, const Environment& env,
                                   const Position& r) {
  detail::require_off_source(source, r);
  double sum = 0.0;
  detail::for_each_image(env.boundary, source, [&](const Position& img) {
    detail::require_off_source(img, r);
    sum += detail::continuous_free(env.diffusivity.value(), env.wind, img, r,
                                   std::numeric_limits<double>::infinity());
  });
  return rate * sum;
}

/// Superposition of instant releases along the emission history:
/// c(r,t) = integral over s in [t0, t] of rate(s) G(r, t - s; r0(s)) ds,
/// evaluated by adaptive Gauss-Kronrod quadrature to `quadrature_tol`
/// relative error.
inline double concentration_moving_source(const SourceSpec& src, const Environment& env, const Position& r,
                                          TimePoint t, const ChannelOptions& opt = {}) {
  if (src.kind == SourceKind::Instant) return concentration_instant(src, env, r, t);
  const double t_end = t.seconds();
  const double t_begin = src.start_time;
  if (!(t_end > t_begin) || src.strength == 0.0) return 0.0;
  if (const auto* traj = std::get_if<Trajectory>(&src.location)) {
    if (!traj->covers(t_begin) || !traj->covers(t_end))
      throw Error(ErrorKind::OutOfRange, "trajectory does not cover the emission interval");
  }

  // The kernel concentrates near s -> t when the observer is close to the
  // current source position; geometric breakpoints toward t_end resolve it.
  std::vector<double> breaks{t_begin, t_end};
  if (const auto* traj = std::get_if<Trajectory>(&src.location)) {
    const auto& knots = traj->knots();
    for (std::size_t i = 0; i < knots.size(); ++i) {
      if (knots[i].t > t_begin && knots[i].t < t_end) breaks.push_back(knots[i].t);
      if (i == 0) continue;
      // Closest approach of each segment to the observer.
      const Velocity seg = knots[i].position - knots[i - 1].position;
      const double len2 = squared_norm(seg);
      if (len2 == 0.0) continue;
      const Velocity rel = r - knots[i - 1].position;
      const double w = (rel.vx * seg.vx + rel.vy * seg.vy + rel.vz * seg.vz) / len2;
      if (w <= 0.0 || w >= 1.0) continue;
      const double s_close = knots[i - 1].t + w * (knots[i].t - knots[i - 1].t);
      if (s_close > t_begin && s_close < t_end) breaks.push_back(s_close);
    }
  }
  const double d_now = distance(src.position_at(t_end), r);
  const double D = env.diffusivity.value();
  if (d_now == 0.0)
    throw Error(ErrorKind::SingularPoint, "observer coincides with the current source position");
  const double span = t_end - t_begin;
  const double tau_floor = 1e-2 * d_now * d_now / (6.0 * D);
  for (double tau = 0.5 * span; tau > tau_floor && breaks.size() < 200; tau *= 0.5)
    breaks.push_back(t_end - tau);

  auto integrand = [&](double s) {
    const double rate = src.rate_at(s);
    if (rate == 0.0) return 0.0;
    return rate * green(env, src.position_at(s), r, t_end - s);
  };
  QuadratureOptions qo;
  qo.rel_tol = opt.quadrature_tol;
  qo.max_depth = opt.max_refinement;
  qo.abs_tol = std::numeric_limits<double>::min();
  return integrate_adaptive(integrand, std::move(breaks), qo).value;
}

/// Dispatches to the cheapest exact solver for the source.
inline double concentration(const SourceSpec& src, const Environment& env, const Position& r, TimePoint t,
                            const ChannelOptions& opt = {}) {
  if (src.kind == SourceKind::Instant) return concentration_instant(src, env, r, t);
  if (src.is_static_constant()) return concentration_continuous(src, env, r, t);
  return concentration_moving_source(src, env, r, t, opt);
}

/// Linear superposition over sources sharing one environment.
inline double concentration_multi_source(const std::vector<SourceSpec>& sources, const Environment& env,
                                         const Position& r, TimePoint t, const ChannelOptions& opt = {}) {
  double sum = 0.0;
  for (const auto& s : sources) sum += concentration(s, env, r, t, opt);
  return sum;
}

// ---------------------------------------------------------------------------
// Batch evaluation
// ---------------------------------------------------------------------------

struct FieldPoint {
  Position position;
  TimePoint time;
};

struct FieldQuery {
  std::vector<FieldPoint> points;
};

struct Scenario {
  Environment environment;
  std::vector<SourceSpec> sources;
  ChannelOptions options;
};

/// Evaluates every query point, possibly in parallel. Failing points are
/// gathered (with their indices) into a single BatchError.
inline std::vector<double> evaluate_field(const FieldQuery& query, const Scenario& scenario) {
  scenario.environment.validate();
  std::vector<double> values(query.points.size(), 0.0);
  std::vector<std::optional<PointError>> failures(query.points.size());
  parallel_for(query.points.size(), [&](std::size_t i) {
    const auto& p = query.points[i];
    try {
      values[i] = concentration_multi_source(scenario.sources, scenario.environment, p.position, p.time,
                                             scenario.options);
    } catch (const Error& e) {
      failures[i] = PointError{i, e.kind(), e.what()};
    }
  });
  std::vector<PointError> errors;
  for (auto& f : failures)
    if (f) errors.push_back(std::move(*f));
  if (!errors.empty()) throw BatchError(std::move(errors));
  return values;
}

/// CSV rows `x,y,z,t,c` in query order.
inline void write_field_csv(std::ostream& out, const FieldQuery& query, const std::vector<double>& values) {
  out << "x,y,z,t,c\n";
  for (std::size_t i = 0; i < query.points.size(); ++i) {
    const auto& p = query.points[i];
    out << format_double(p.position.x) << ',' << format_double(p.position.y) << ','
        << format_double(p.position.z) << ',' << format_double(p.time.seconds()) << ','
        << format_double(values[i]) << '\n';
  }
}

}  // namespace virodyne

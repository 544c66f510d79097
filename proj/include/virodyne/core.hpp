#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "virodyne/error.hpp"

namespace virodyne {

namespace detail {
inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be finite");
}
}  // namespace detail

/// Cartesian position in meters.
struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Position() = default;
  Position(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {
    detail::require_finite(x, "position.x");
    detail::require_finite(y, "position.y");
    detail::require_finite(z, "position.z");
  }

  friend bool operator==(const Position&, const Position&) = default;
};

/// Velocity in m/s. Also used as a plain displacement-rate vector.
struct Velocity {
  double vx = 0.0;
  double vy = 0.0;
  double vz = 0.0;

  constexpr Velocity() = default;
  Velocity(double x, double y, double z) : vx(x), vy(y), vz(z) {
    detail::require_finite(vx, "velocity.vx");
    detail::require_finite(vy, "velocity.vy");
    detail::require_finite(vz, "velocity.vz");
  }

  double speed() const { return std::sqrt(vx * vx + vy * vy + vz * vz); }

  friend bool operator==(const Velocity&, const Velocity&) = default;
};

/// Seconds since scenario start; never negative.
class TimePoint {
 public:
  constexpr TimePoint() = default;
  explicit TimePoint(double seconds) : t_(seconds) {
    detail::require_finite(seconds, "time");
    if (seconds < 0.0) throw Error(ErrorKind::InvalidArgument, "time must be non-negative");
  }

  double seconds() const noexcept { return t_; }

  friend auto operator<=>(const TimePoint&, const TimePoint&) = default;

 private:
  double t_ = 0.0;
};

/// Effective diffusivity in m^2/s. Turbulent mixing is folded in by the caller
/// as a larger value; no separate turbulence model exists.
class Diffusivity {
 public:
  explicit Diffusivity(double m2_per_s) : d_(m2_per_s) {
    detail::require_finite(m2_per_s, "diffusivity");
    if (m2_per_s <= 0.0) throw Error(ErrorKind::InvalidArgument, "diffusivity must be positive");
  }

  double value() const noexcept { return d_; }

  friend bool operator==(const Diffusivity&, const Diffusivity&) = default;

 private:
  double d_;
};

using Seed = std::uint64_t;

inline Position operator+(const Position& p, const Velocity& d) {
  return {p.x + d.vx, p.y + d.vy, p.z + d.vz};
}

inline Velocity operator-(const Position& a, const Position& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}

inline Velocity operator*(double s, const Velocity& v) { return {s * v.vx, s * v.vy, s * v.vz}; }

inline double squared_norm(const Velocity& v) { return v.vx * v.vx + v.vy * v.vy + v.vz * v.vz; }

inline double distance(const Position& a, const Position& b) { return std::sqrt(squared_norm(a - b)); }

/// Linear blend a + w (b - a).
inline Position lerp(const Position& a, const Position& b, double w) {
  return {a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), a.z + w * (b.z - a.z)};
}

}  // namespace virodyne

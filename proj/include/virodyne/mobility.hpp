#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <variant>
#include <vector>

#include "virodyne/core.hpp"
#include "virodyne/error.hpp"
#include "virodyne/rng.hpp"
#include "virodyne/trajectory.hpp"

namespace virodyne {

/// Axis-aligned box in meters.
struct Box {
  Position lo;
  Position hi;

  bool contains(const Position& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }

  Position clamp(const Position& p) const {
    return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y), std::clamp(p.z, lo.z, hi.z)};
  }

  double diagonal() const { return distance(lo, hi); }
};

/// Brownian-like walk: every step_dt the agent moves step_len in a uniformly
/// random direction.
struct RandomWalk {
  double step_len = 1.0;
  double step_dt = 1.0;
};

/// Travel to a uniform waypoint at a uniform speed, pause, repeat.
struct RandomWaypoint {
  double speed_min = 0.5;
  double speed_max = 1.5;
  double pause = 0.0;
};

/// Constant speed in a direction redrawn every epoch.
struct RandomDirection {
  double speed = 1.0;
  double epoch = 10.0;
};

/// Deterministic straight-line motion at a fixed velocity.
struct Scripted {
  Velocity velocity{};
};

enum class BoundaryPolicy { Reflect, WrapToWaypoint };

struct MobilityModel {
  std::variant<RandomWalk, RandomWaypoint, RandomDirection, Scripted> kind{RandomWalk{}};
  Box domain{};
  BoundaryPolicy boundary = BoundaryPolicy::Reflect;
  /// Restricts random directions to the x-y plane (pedestrians on a floor).
  bool planar = false;

  double max_speed() const {
    return std::visit(
        [](const auto& m) -> double {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, RandomWalk>) return m.step_len / m.step_dt;
          else if constexpr (std::is_same_v<T, RandomWaypoint>) return m.speed_max;
          else if constexpr (std::is_same_v<T, RandomDirection>) return m.speed;
          else return m.velocity.speed();
        },
        kind);
  }

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be positive");
    };
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, RandomWalk>) {
            positive(m.step_len, "step_len");
            positive(m.step_dt, "step_dt");
          } else if constexpr (std::is_same_v<T, RandomWaypoint>) {
            positive(m.speed_min, "speed_min");
            positive(m.speed_max, "speed_max");
            if (m.speed_max < m.speed_min) throw Error(ErrorKind::InvalidArgument, "speed_max < speed_min");
            if (m.pause < 0.0) throw Error(ErrorKind::InvalidArgument, "pause must be >= 0");
          } else if constexpr (std::is_same_v<T, RandomDirection>) {
            positive(m.speed, "speed");
            positive(m.epoch, "epoch");
          }
        },
        kind);
    if (!(domain.hi.x > domain.lo.x) || !(domain.hi.y > domain.lo.y))
      throw Error(ErrorKind::InvalidArgument, "mobility domain is degenerate");
    if (!planar && !(domain.hi.z > domain.lo.z))
      throw Error(ErrorKind::InvalidArgument, "mobility domain is degenerate in z");
    if (planar && domain.hi.z < domain.lo.z) throw Error(ErrorKind::InvalidArgument, "mobility domain is inverted in z");
  }
};

namespace detail {

class PathBuilder {
 public:
  PathBuilder(const MobilityModel& model, const Position& start, RngStream& rng)
      : model_(model), rng_(rng), pos_(start) {
    knots_.push_back({0.0, start});
  }

  double now() const { return t_; }
  const Position& position() const { return pos_; }

  void hold_until(double t_end) {
    if (t_end <= t_) return;
    t_ = t_end;
    push();
  }

  /// Moves with velocity v until time t_end, handling walls per policy.
  /// Returns the velocity in effect at the end (after reflections).
  Velocity move_until(Velocity v, double t_end) {
    const Box& box = model_.domain;
    for (int guard = 0; t_ < t_end && guard < 10000; ++guard) {
      const double remaining = t_end - t_;
      double hit = remaining;
      int axis = -1;
      auto check = [&](double p, double vel, double lo, double hi, int ax) {
        if (vel > 0.0) {
          const double th = (hi - p) / vel;
          if (th < hit) hit = std::max(th, 0.0), axis = ax;
        } else if (vel < 0.0) {
          const double th = (lo - p) / vel;
          if (th < hit) hit = std::max(th, 0.0), axis = ax;
        }
      };
      check(pos_.x, v.vx, box.lo.x, box.hi.x, 0);
      check(pos_.y, v.vy, box.lo.y, box.hi.y, 1);
      check(pos_.z, v.vz, box.lo.z, box.hi.z, 2);
      pos_ = box.clamp(pos_ + hit * v);
      t_ = axis < 0 ? t_end : t_ + hit;
      if (axis < 0) break;
      if (hit > 0.0) push();
      if (model_.boundary == BoundaryPolicy::Reflect) {
        if (axis == 0) v.vx = -v.vx;
        if (axis == 1) v.vy = -v.vy;
        if (axis == 2) v.vz = -v.vz;
      } else {
        // Redirect toward a fresh interior waypoint at the same speed.
        const Position target = draw_point();
        const Velocity dir = target - pos_;
        const double len = std::sqrt(squared_norm(dir));
        const double speed = v.speed();
        v = len > 0.0 ? (speed / len) * dir : Velocity{};
      }
    }
    push();
    return v;
  }

  Velocity random_direction() {
    if (model_.planar) {
      const double phi = 2.0 * std::numbers::pi * rng_.uniform();
      return {std::cos(phi), std::sin(phi), 0.0};
    }
    const double cos_theta = 2.0 * rng_.uniform() - 1.0;
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    const double phi = 2.0 * std::numbers::pi * rng_.uniform();
    return {sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta};
  }

  Position draw_point() {
    const Box& b = model_.domain;
    const double z = model_.planar ? pos_.z : rng_.uniform(b.lo.z, b.hi.z);
    return {rng_.uniform(b.lo.x, b.hi.x), rng_.uniform(b.lo.y, b.hi.y), z};
  }

  Trajectory finish() { return Trajectory(std::move(knots_)); }

 private:
  // Segments shorter than rounding noise are merged into the previous knot.
  void push() {
    if (knots_.size() > 1 && t_ - knots_.back().t <= 1e-9 * std::max(1.0, t_)) knots_.back() = {t_, pos_};
    else if (t_ > knots_.back().t) knots_.push_back({t_, pos_});
    else knots_.back().position = pos_;
  }

  const MobilityModel& model_;
  RngStream& rng_;
  Position pos_;
  double t_ = 0.0;
  std::vector<Knot> knots_;
};

}  // namespace detail

/// Draws a path over [0, horizon] from `start`. The same (model, start,
/// horizon, stream state) always yields the same trajectory.
inline Trajectory sample_trajectory(const MobilityModel& model, const Position& start, double horizon,
                                    RngStream& rng) {
  model.validate();
  if (!model.domain.contains(start)) throw Error(ErrorKind::OutOfDomain, "start position outside mobility domain");
  if (!(horizon >= 0.0) || !std::isfinite(horizon))
    throw Error(ErrorKind::InvalidArgument, "horizon must be finite and >= 0");
  detail::PathBuilder path(model, start, rng);
  if (horizon == 0.0) return path.finish();

  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RandomWalk>) {
          const double speed = m.step_len / m.step_dt;
          for (std::size_t k = 1; path.now() < horizon; ++k)
            path.move_until(speed * path.random_direction(),
                            std::min(m.step_dt * static_cast<double>(k), horizon));
        } else if constexpr (std::is_same_v<T, RandomWaypoint>) {
          while (path.now() < horizon) {
            const Position target = path.draw_point();
            const double speed = rng.uniform(m.speed_min, m.speed_max);
            const Velocity delta = target - path.position();
            const double len = std::sqrt(squared_norm(delta));
            if (len > 0.0) {
              path.move_until((speed / len) * delta, std::min(path.now() + len / speed, horizon));
            }
            if (path.now() < horizon) path.hold_until(std::min(path.now() + m.pause, horizon));
          }
        } else if constexpr (std::is_same_v<T, RandomDirection>) {
          for (std::size_t k = 1; path.now() < horizon; ++k)
            path.move_until(m.speed * path.random_direction(), std::min(m.epoch * static_cast<double>(k), horizon));
        } else {
          path.move_until(m.velocity, horizon);
        }
      },
      model.kind);
  return path.finish();
}

}  // namespace virodyne

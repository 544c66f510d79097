#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "virodyne/core.hpp"
#include "virodyne/error.hpp"
#include "virodyne/format.hpp"

namespace virodyne {

struct Knot {
  double t;
  Position position;

  friend bool operator==(const Knot&, const Knot&) = default;
};

/// Piecewise-linear path through time-ordered knots.
class Trajectory {
 public:
  Trajectory() = default;

  explicit Trajectory(std::vector<Knot> knots) : knots_(std::move(knots)) {
    if (knots_.empty()) throw Error(ErrorKind::InvalidArgument, "trajectory needs at least one knot");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      if (!std::isfinite(knots_[i].t) || knots_[i].t < 0.0)
        throw Error(ErrorKind::InvalidArgument, "trajectory times must be finite and non-negative");
      if (i > 0 && !(knots_[i].t > knots_[i - 1].t))
        throw Error(ErrorKind::InvalidArgument, "trajectory times must be strictly increasing");
    }
  }

  /// Holds one position over [t0, t1] (a single knot when t0 == t1).
  static Trajectory stationary(const Position& p, double t0, double t1) {
    if (t1 > t0) return Trajectory({{t0, p}, {t1, p}});
    return Trajectory({{t0, p}});
  }

  /// Straight line from `start` with constant velocity over [t0, t1].
  static Trajectory linear(const Position& start, const Velocity& v, double t0, double t1) {
    if (!(t1 > t0)) return Trajectory({{t0, start}});
    return Trajectory({{t0, start}, {t1, start + (t1 - t0) * v}});
  }

  const std::vector<Knot>& knots() const noexcept { return knots_; }
  bool empty() const noexcept { return knots_.empty(); }
  double start_time() const { return knots_.front().t; }
  double end_time() const { return knots_.back().t; }

  bool covers(double t) const {
    return !knots_.empty() && t >= start_time() && t <= end_time();
  }

  Position position_at(double t) const {
    if (!covers(t))
      throw Error(ErrorKind::OutOfRange, "time " + format_double(t) + " outside trajectory span");
    if (knots_.size() == 1) return knots_.front().position;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                               [](double value, const Knot& k) { return value < k.t; });
    if (it == knots_.end()) return knots_.back().position;
    const Knot& hi = *it;
    const Knot& lo = *(it - 1);
    if (t == lo.t) return lo.position;
    return lerp(lo.position, hi.position, (t - lo.t) / (hi.t - lo.t));
  }

  Position position_at(TimePoint t) const { return position_at(t.seconds()); }

  /// True when every knot sits at the same point.
  bool is_stationary() const {
    return std::all_of(knots_.begin(), knots_.end(),
                       [&](const Knot& k) { return k.position == knots_.front().position; });
  }

  double max_segment_speed() const {
    double best = 0.0;
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      const double d = distance(knots_[i].position, knots_[i - 1].position);
      best = std::max(best, d / (knots_[i].t - knots_[i - 1].t));
    }
    return best;
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::vector<Knot> knots_;
};

/// CSV with header `t,x,y,z`.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,x,y,z\n";
  for (const auto& k : traj.knots()) {
    out << format_double(k.t) << ',' << format_double(k.position.x) << ','
        << format_double(k.position.y) << ',' << format_double(k.position.z) << '\n';
  }
}

inline Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<Knot> knots;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "t,x,y,z") throw ParseError(line_no, 1, "expected header t,x,y,z");
      header_seen = true;
      continue;
    }
    const auto fields = split_csv_numbers(line, line_no, 4);
    knots.push_back({fields[0], Position(fields[1], fields[2], fields[3])});
  }
  if (knots.empty()) throw Error(ErrorKind::EmptyInput, "trajectory CSV has no rows");
  return Trajectory(std::move(knots));
}

}  // namespace virodyne

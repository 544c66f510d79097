#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "virodyne/channel.hpp"
#include "virodyne/format.hpp"
#include "virodyne/mobility.hpp"
#include "virodyne/parallel.hpp"

namespace virodyne {

struct SensorReading {
  Position position;
  double time = 0.0;
  double value = 0.0;  // kg/m^3
  double sigma = 1.0;  // kg/m^3
};

/// Which channel solution links a hypothesized source to the readings.
/// Transient and instant models assume emission starting at t = 0.
enum class ForwardModel { SteadyContinuous, TransientContinuous, Instant };

struct LocalizationConfig {
  Box domain{};
  ForwardModel model = ForwardModel::SteadyContinuous;
  std::size_t grid_points = 16;  // per axis
  double simplex_tol = 1e-8;     // relative to the domain diagonal
  std::size_t max_iterations = 5000;
  std::optional<Position> initial_guess{};
};

struct SourceEstimate {
  Position position;
  double rate = 0.0;  // kg/s, or kg for the instant model
  double residual_norm = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

class LocalizationNotConverged : public Error {
 public:
  explicit LocalizationNotConverged(SourceEstimate best)
      : Error(ErrorKind::NotConverged, "simplex refinement hit its iteration cap"), best_(best) {}
  const SourceEstimate& best() const noexcept { return best_; }

 private:
  SourceEstimate best_;
};

/// Concentration per unit release at the sensor from a source at `source`.
inline double unit_response(const Environment& env, ForwardModel model, const Position& source,
                            const SensorReading& s) {
  if (squared_norm(source - s.position) == 0.0 && model != ForwardModel::Instant)
    return std::numeric_limits<double>::infinity();
  switch (model) {
    case ForwardModel::SteadyContinuous:
      return concentration_steady(source, 1.0, env, s.position);
    case ForwardModel::TransientContinuous:
      return concentration_continuous(SourceSpec::continuous(source, 1.0), env, s.position, TimePoint(s.time));
    case ForwardModel::Instant:
      return concentration_instant(SourceSpec::instant(source, 1.0), env, s.position, TimePoint(s.time));
  }
  return 0.0;
}

/// Number of affinely independent directions spanned by the sensor positions
/// (3 for a proper 3-D array, 2 if coplanar, ...).
inline int geometry_rank(std::span<const Position> sensors, double rel_tol = 1e-9) {
  if (sensors.size() < 2) return 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(sensors.size() - 1), 3);
  double scale = 0.0;
  for (std::size_t i = 1; i < sensors.size(); ++i) {
    const Velocity d = sensors[i] - sensors[0];
    m.row(static_cast<Eigen::Index>(i - 1)) << d.vx, d.vy, d.vz;
    scale = std::max(scale, std::sqrt(squared_norm(d)));
  }
  if (scale == 0.0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m / scale);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > rel_tol * svd.singularValues()(0)) ++rank;
  return rank;
}

namespace detail {

struct Profiled {
  double rate;
  double residual;  // weighted sum of squares
};

/// Best non-negative release for a fixed position (the model is linear in
/// it) and the resulting weighted residual.
inline Profiled profile_rate(const Environment& env, ForwardModel model, const Position& p,
                             std::span<const SensorReading> readings) {
  double num = 0.0, den = 0.0;
  std::vector<double> u(readings.size());
  for (std::size_t i = 0; i < readings.size(); ++i) {
    u[i] = unit_response(env, model, p, readings[i]);
    if (!std::isfinite(u[i])) return {0.0, std::numeric_limits<double>::infinity()};
    const double w = 1.0 / (readings[i].sigma * readings[i].sigma);
    num += w * u[i] * readings[i].value;
    den += w * u[i] * u[i];
  }
  const double rate = den > 0.0 ? std::max(0.0, num / den) : 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < readings.size(); ++i) {
    const double e = (readings[i].value - rate * u[i]) / readings[i].sigma;
    ss += e * e;
  }
  return {rate, ss};
}

}  // namespace detail

/// Weighted least-squares (Gaussian maximum-likelihood) estimate of a single
/// source's position and release from fixed sensor readings. A coarse grid
/// over the domain seeds a Nelder-Mead simplex over position; the release is
/// solved in closed form at every trial position.
inline SourceEstimate localize(std::span<const SensorReading> readings, const Environment& env,
                               const LocalizationConfig& cfg) {
  if (readings.size() < 4) throw Error(ErrorKind::Unidentifiable, "need at least 4 readings");
  std::vector<Position> sensors;
  for (const auto& r : readings) {
    if (!(r.sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "reading sigma must be positive");
    sensors.push_back(r.position);
  }
  if (geometry_rank(sensors) < 3) throw Error(ErrorKind::Unidentifiable, "sensor positions are coplanar or degenerate");
  if (std::all_of(readings.begin(), readings.end(), [](const SensorReading& r) { return r.value == 0.0; }))
    throw Error(ErrorKind::Unidentifiable, "all readings are zero; any zero-release source fits");

  const Box& box = cfg.domain;
  auto objective = [&](const Position& p) {
    if (!box.contains(p)) return std::numeric_limits<double>::infinity();
    return detail::profile_rate(env, cfg.model, p, readings).residual;
  };

  Position start;
  if (cfg.initial_guess) {
    start = *cfg.initial_guess;
  } else {
    const std::size_t n = std::max<std::size_t>(cfg.grid_points, 1);
    std::vector<double> values(n * n * n);
    auto cell = [&](std::size_t idx) {
      const std::size_t i = idx % n, j = (idx / n) % n, k = idx / (n * n);
      auto coord = [&](double lo, double hi, std::size_t c) {
        return lo + (hi - lo) * (static_cast<double>(c) + 0.5) / static_cast<double>(n);
      };
      return Position(coord(box.lo.x, box.hi.x, i), coord(box.lo.y, box.hi.y, j), coord(box.lo.z, box.hi.z, k));
    };
    parallel_for(values.size(), [&](std::size_t idx) { values[idx] = objective(cell(idx)); });
    // First minimum in index order, independent of scheduling.
    const std::size_t best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    start = cell(best);
  }

  // Nelder-Mead over position.
  const double diag = box.diagonal();
  const double step = (cfg.initial_guess ? 0.05 : 0.5 / static_cast<double>(std::max<std::size_t>(cfg.grid_points, 1))) * diag;
  using Vec = std::array<double, 3>;
  auto to_pos = [](const Vec& v) { return Position(v[0], v[1], v[2]); };
  std::array<Vec, 4> simplex;
  std::array<double, 4> f;
  simplex[0] = {start.x, start.y, start.z};
  for (int i = 1; i < 4; ++i) {
    simplex[i] = simplex[0];
    simplex[i][i - 1] += step;
    if (!box.contains(to_pos(simplex[i]))) simplex[i][i - 1] -= 2.0 * step;
  }
  for (int i = 0; i < 4; ++i) f[i] = objective(to_pos(simplex[i]));

  std::size_t iter = 0;
  bool converged = false;
  // A fit this close to exact cannot be improved in double precision.
  double data_norm = 0.0;
  for (const auto& r : readings) data_norm += (r.value / r.sigma) * (r.value / r.sigma);
  const double f_floor = 1e-24 * data_norm;
  for (; iter < cfg.max_iterations; ++iter) {
    std::array<int, 4> order = {0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return f[a] < f[b]; });
    std::array<Vec, 4> s2;
    std::array<double, 4> f2;
    for (int i = 0; i < 4; ++i) s2[i] = simplex[order[i]], f2[i] = f[order[i]];
    simplex = s2;
    f = f2;

    double size = 0.0;
    for (int i = 1; i < 4; ++i) {
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) d2 += (simplex[i][a] - simplex[0][a]) * (simplex[i][a] - simplex[0][a]);
      size = std::max(size, std::sqrt(d2));
    }
    if (size <= cfg.simplex_tol * diag || f[0] <= f_floor) {
      converged = true;
      break;
    }

    Vec centroid{0, 0, 0};
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 3; ++a) centroid[a] += simplex[i][a] / 3.0;
    auto along = [&](double t) {
      Vec v;
      for (int a = 0; a < 3; ++a) v[a] = centroid[a] + t * (simplex[3][a] - centroid[a]);
      return v;
    };
    const Vec xr = along(-1.0);
    const double fr = objective(to_pos(xr));
    if (fr < f[0]) {
      const Vec xe = along(-2.0);
      const double fe = objective(to_pos(xe));
      if (fe < fr) simplex[3] = xe, f[3] = fe;
      else simplex[3] = xr, f[3] = fr;
    } else if (fr < f[2]) {
      simplex[3] = xr, f[3] = fr;
    } else {
      const bool outside = fr < f[3];
      const Vec xc = along(outside ? -0.5 : 0.5);
      const double fc = objective(to_pos(xc));
      if (fc < (outside ? fr : f[3])) {
        simplex[3] = xc, f[3] = fc;
      } else {
        for (int i = 1; i < 4; ++i) {
          for (int a = 0; a < 3; ++a) simplex[i][a] = simplex[0][a] + 0.5 * (simplex[i][a] - simplex[0][a]);
          f[i] = objective(to_pos(simplex[i]));
        }
      }
    }
  }

  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (f[i] < f[best]) best = i;
  SourceEstimate est;
  est.position = to_pos(simplex[best]);
  const auto prof = detail::profile_rate(env, cfg.model, est.position, readings);
  est.rate = prof.rate;
  est.residual_norm = std::sqrt(prof.residual);
  est.converged = converged;
  est.iterations = iter;
  if (!converged) throw LocalizationNotConverged(est);
  return est;
}

struct IdentifiabilityReport {
  double condition_number = 0.0;
  int geometry_rank = 0;
  bool duplicate_sensors = false;
  bool flagged = false;
};

/// Sensitivity of the readings to (x, y, z, release) at a hypothesized
/// source: numerical Jacobian, rows weighted by 1/sigma, columns normalized.
/// Flags rank-deficient or duplicated geometries and condition numbers above
/// `threshold`.
inline IdentifiabilityReport crlb_diagnostics(std::span<const SensorReading> sensors, const Environment& env,
                                              ForwardModel model, const Position& source, double rate,
                                              double threshold = 1e8) {
  IdentifiabilityReport rep;
  std::vector<Position> pos;
  for (const auto& s : sensors) pos.push_back(s.position);
  rep.geometry_rank = geometry_rank(pos);
  for (std::size_t i = 0; i < pos.size() && !rep.duplicate_sensors; ++i)
    for (std::size_t j = i + 1; j < pos.size(); ++j)
      if (pos[i] == pos[j]) {
        rep.duplicate_sensors = true;
        break;
      }

  const Eigen::Index n = static_cast<Eigen::Index>(sensors.size());
  Eigen::MatrixXd jac(n, 4);
  double scale = 0.0;
  for (const auto& p : pos) scale = std::max(scale, distance(p, source));
  const double h = 1e-6 * std::max(scale, 1e-9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = sensors[static_cast<std::size_t>(i)];
    const double w = 1.0 / s.sigma;
    const std::array<Velocity, 3> axes = {Velocity(h, 0, 0), Velocity(0, h, 0), Velocity(0, 0, h)};
    for (int a = 0; a < 3; ++a) {
      const double up = unit_response(env, model, source + axes[a], s);
      const double dn = unit_response(env, model, source + (-1.0) * axes[a], s);
      jac(i, a) = w * rate * (up - dn) / (2.0 * h);
    }
    jac(i, 3) = w * unit_response(env, model, source, s);
  }
  for (Eigen::Index c = 0; c < 4; ++c) {
    const double norm = jac.col(c).norm();
    if (norm > 0.0 && std::isfinite(norm)) jac.col(c) /= norm;
  }
  if (!jac.allFinite()) {
    rep.condition_number = std::numeric_limits<double>::infinity();
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    rep.condition_number = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  }
  rep.flagged = rep.condition_number > threshold || rep.geometry_rank < 3 || rep.duplicate_sensors ||
                n < 4;
  return rep;
}

/// Readings CSV with header `x,y,z,t,c,sigma`.
inline std::vector<SensorReading> read_readings_csv(std::istream& in) {
  std::vector<SensorReading> out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "x,y,z,t,c,sigma") throw ParseError(line_no, 1, "expected header x,y,z,t,c,sigma");
      header_seen = true;
      continue;
    }
    const auto v = split_csv_numbers(line, line_no, 6);
    out.push_back({Position(v[0], v[1], v[2]), v[3], v[4], v[5]});
  }
  if (out.empty()) throw Error(ErrorKind::EmptyInput, "readings CSV has no rows");
  return out;
}

}  // namespace virodyne

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "virodyne/core.hpp"
#include "virodyne/error.hpp"

namespace virodyne {

/// Explicit finite-difference solver for the advection-diffusion equation on
/// a uniform box. Second-order central diffusion, first-order upwind
/// advection, forward Euler in time. Used as an independent oracle for the
/// closed-form and quadrature solvers, and as the only route for winds that
/// vary in space or time.
///
/// Point sources are represented as normalized Gaussian blobs of width
/// `sigma`; a blob deposited at time s is the exact free-space field of a
/// point release made at s - sigma^2 / (2 D).
class FiniteDifferenceSolver {
 public:
  struct Grid {
    Position origin;  // coordinates of node (0,0,0)
    double spacing = 1.0;
    std::size_t nx = 1, ny = 1, nz = 1;

    Position node(std::size_t i, std::size_t j, std::size_t k) const {
      return {origin.x + spacing * static_cast<double>(i), origin.y + spacing * static_cast<double>(j),
              origin.z + spacing * static_cast<double>(k)};
    }
  };

  /// Absorbing: c = 0 on all faces. ReflectingFloor: zero-flux at the k = 0
  /// face (the plane z = origin.z), absorbing elsewhere.
  enum class Walls { Absorbing, ReflectingFloor };

  using WindField = std::function<Velocity(const Position&, double)>;

  struct Emitter {
    std::function<Position(double)> position;
    std::function<double(double)> rate;  // kg/s
    double sigma;
  };

  FiniteDifferenceSolver(Grid grid, double diffusivity, WindField wind = {}, Walls walls = Walls::Absorbing)
      : grid_(grid), diffusivity_(diffusivity), wind_(std::move(wind)), walls_(walls),
        c_(grid.nx * grid.ny * grid.nz, 0.0), scratch_(c_.size(), 0.0) {
    if (grid.nx < 3 || grid.ny < 3 || grid.nz < 3)
      throw Error(ErrorKind::InvalidArgument, "finite-difference grid needs at least 3 nodes per axis");
    if (!(grid.spacing > 0.0) || !(diffusivity > 0.0))
      throw Error(ErrorKind::InvalidArgument, "spacing and diffusivity must be positive");
  }

  const Grid& grid() const noexcept { return grid_; }
  double time() const noexcept { return time_; }
  void set_time(double t) { time_ = t; }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (k * grid_.ny + j) * grid_.nx + i;
  }

  double at(std::size_t i, std::size_t j, std::size_t k) const { return c_[index(i, j, k)]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) { return c_[index(i, j, k)]; }

  /// Deposits `mass` as a Gaussian blob normalized so the discrete integral
  /// equals `mass` exactly.
  void add_blob(const Position& center, double mass, double sigma) {
    if (mass == 0.0) return;
    const double inv = 1.0 / (2.0 * sigma * sigma);
    const double cutoff = 6.0 * sigma;
    const double h = grid_.spacing;
    auto range = [&](double lo_coord, double c, std::size_t n, std::size_t& lo, std::size_t& hi) {
      const double a = std::floor((c - cutoff - lo_coord) / h);
      const double b = std::ceil((c + cutoff - lo_coord) / h);
      lo = static_cast<std::size_t>(std::clamp(a, 1.0, static_cast<double>(n - 2)));
      hi = static_cast<std::size_t>(std::clamp(b, 1.0, static_cast<double>(n - 2)));
    };
    std::size_t i0, i1, j0, j1, k0, k1;
    range(grid_.origin.x, center.x, grid_.nx, i0, i1);
    range(grid_.origin.y, center.y, grid_.ny, j0, j1);
    range(grid_.origin.z, center.z, grid_.nz, k0, k1);
    if (walls_ == Walls::ReflectingFloor) k0 = 0;

    // Separable weights; at a reflecting floor the blob is folded back onto
    // the domain.
    auto weights = [&](double origin, double c, std::size_t lo, std::size_t hi, bool mirror) {
      std::vector<double> w(hi - lo + 1);
      for (std::size_t i = lo; i <= hi; ++i) {
        const double x = origin + h * static_cast<double>(i) - c;
        w[i - lo] = std::exp(-x * x * inv);
        if (mirror) {
          const double xm = origin + h * static_cast<double>(i) - (2.0 * origin - c);
          w[i - lo] += std::exp(-xm * xm * inv);
        }
      }
      return w;
    };
    const auto wx = weights(grid_.origin.x, center.x, i0, i1, false);
    const auto wy = weights(grid_.origin.y, center.y, j0, j1, false);
    auto wz = weights(grid_.origin.z, center.z, k0, k1, walls_ == Walls::ReflectingFloor);
    if (walls_ == Walls::ReflectingFloor && k0 == 0) wz.front() *= 0.5;  // half cell at the wall
    double total = 0.0;
    for (double a : wx)
      for (double b : wy)
        for (double c : wz) total += a * b * c;
    if (!(total > 0.0)) return;
    const double scale = mass / (total * h * h * h);
    for (std::size_t k = k0; k <= k1; ++k)
      for (std::size_t j = j0; j <= j1; ++j)
        for (std::size_t i = i0; i <= i1; ++i) {
          double w = wx[i - i0] * wy[j - j0] * wz[k - k0];
          if (walls_ == Walls::ReflectingFloor && k == 0) w *= 2.0;  // undo the half weight for the value
          c_[index(i, j, k)] += scale * w;
        }
  }

  void add_emitter(Emitter e) { emitters_.push_back(std::move(e)); }

  /// Largest stable explicit step for the current wind bound.
  double stable_step(double max_speed = 0.0) const {
    const double h = grid_.spacing;
    const double diff_limit = h * h / (6.0 * diffusivity_);
    if (max_speed <= 0.0) return diff_limit;
    return 1.0 / (1.0 / diff_limit + 3.0 * max_speed / h);
  }

  /// Integrates to t_end using steps no larger than `safety * stable_step`.
  void advance_to(double t_end, double max_speed = 0.0, double safety = 0.9) {
    const double dt_max = safety * stable_step(max_speed);
    while (time_ < t_end) {
      const double dt = std::min(dt_max, t_end - time_);
      step(dt);
    }
  }

  void step(double dt) {
    const std::size_t nx = grid_.nx, ny = grid_.ny, nz = grid_.nz;
    const double h = grid_.spacing;
    const double lam = diffusivity_ * dt / (h * h);
    const double t_mid = time_ + 0.5 * dt;
    std::fill(scratch_.begin(), scratch_.end(), 0.0);
    const std::size_t k_begin = walls_ == Walls::ReflectingFloor ? 0 : 1;
    for (std::size_t k = k_begin; k + 1 < nz; ++k) {
      for (std::size_t j = 1; j + 1 < ny; ++j) {
        for (std::size_t i = 1; i + 1 < nx; ++i) {
          const std::size_t id = index(i, j, k);
          const double c = c_[id];
          const double xm = c_[id - 1], xp = c_[id + 1];
          const double ym = c_[id - nx], yp = c_[id + nx];
          const double zp = c_[id + nx * ny];
          const double zm = k == 0 ? zp : c_[id - nx * ny];  // mirror node at the wall
          double next = c + lam * (xm + xp + ym + yp + zm + zp - 6.0 * c);
          if (wind_) {
            const Velocity v = wind_(grid_.node(i, j, k), t_mid);
            const double r = dt / h;
            next -= r * (v.vx > 0 ? v.vx * (c - xm) : v.vx * (xp - c));
            next -= r * (v.vy > 0 ? v.vy * (c - ym) : v.vy * (yp - c));
            if (k > 0 || v.vz < 0) next -= r * (v.vz > 0 ? v.vz * (c - zm) : v.vz * (zp - c));
          }
          scratch_[id] = next;
        }
      }
    }
    c_.swap(scratch_);
    for (const auto& e : emitters_) {
      const double rate = e.rate(t_mid);
      if (rate > 0.0) add_blob(e.position(t_mid), rate * dt, e.sigma);
    }
    time_ += dt;
  }

  /// Discrete mass (trapezoid weights at a reflecting floor).
  double total_mass() const {
    const double h3 = grid_.spacing * grid_.spacing * grid_.spacing;
    double sum = 0.0;
    for (std::size_t k = 0; k < grid_.nz; ++k) {
      const double w = (walls_ == Walls::ReflectingFloor && k == 0) ? 0.5 : 1.0;
      for (std::size_t j = 0; j < grid_.ny; ++j)
        for (std::size_t i = 0; i < grid_.nx; ++i) sum += w * c_[index(i, j, k)];
    }
    return sum * h3;
  }

  /// Time shift that maps a blob of width sigma onto an earlier point release.
  double blob_age(double sigma) const { return sigma * sigma / (2.0 * diffusivity_); }

 private:
  Grid grid_;
  double diffusivity_;
  WindField wind_;
  Walls walls_;
  std::vector<double> c_;
  std::vector<double> scratch_;
  std::vector<Emitter> emitters_;
  double time_ = 0.0;
};

}  // namespace virodyne

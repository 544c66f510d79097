#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "virodyne/error.hpp"

namespace virodyne {

struct QuadratureOptions {
  double rel_tol = 1e-6;
  double abs_tol = 0.0;
  int max_depth = 20;            // bisection levels below each starting panel
  std::size_t max_intervals = 20000;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
};

namespace detail {

struct Panel {
  double a;
  double b;
  int depth;
  double value;
  double error;
};

struct PanelWorse {
  bool operator()(const Panel& l, const Panel& r) const { return l.error < r.error; }
};

// 15-point Kronrod rule with its embedded 7-point Gauss rule.
template <typename F>
Panel gauss_kronrod15(F& f, double a, double b, int depth) {
  static constexpr std::array<double, 8> xgk = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.0};
  static constexpr std::array<double, 8> wgk = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * wgk[7];
  double gauss = fc * wg[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * xgk[j];
    const double sum = f(center - dx) + f(center + dx);
    kronrod += wgk[j] * sum;
    if (j % 2 == 1) gauss += wg[j / 2] * sum;
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, depth, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod quadrature of f over consecutive
/// breakpoints. The panel with the largest error estimate is bisected until
/// the summed error is within tolerance. Panels that reach `max_depth` are
/// frozen; if the tolerance is still unmet a QuadratureFailure carries the
/// best estimate.
template <typename F>
QuadratureResult integrate_adaptive(F&& f, std::vector<double> breakpoints,
                                    const QuadratureOptions& opt = {}) {
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
  QuadratureResult result;
  if (breakpoints.size() < 2) return result;

  std::priority_queue<detail::Panel, std::vector<detail::Panel>, detail::PanelWorse> open;
  double frozen_value = 0.0;
  double frozen_error = 0.0;
  double value = 0.0;
  double error = 0.0;
  std::size_t panels = 0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    auto p = detail::gauss_kronrod15(f, breakpoints[i], breakpoints[i + 1], 0);
    result.evaluations += 15;
    value += p.value;
    error += p.error;
    open.push(p);
    ++panels;
  }

  constexpr double eps = std::numeric_limits<double>::epsilon();
  auto target = [&] { return std::max(opt.abs_tol, opt.rel_tol * std::abs(value)); };

  while (error > target() && !open.empty()) {
    detail::Panel worst = open.top();
    open.pop();
    // Round-off floor: nothing left to gain by splitting.
    if (worst.error <= 50.0 * eps * std::abs(worst.value) || worst.depth >= opt.max_depth) {
      frozen_value += worst.value;
      frozen_error += worst.error;
      continue;
    }
    if (panels >= opt.max_intervals) {
      open.push(worst);
      break;
    }
    const double mid = 0.5 * (worst.a + worst.b);
    auto left = detail::gauss_kronrod15(f, worst.a, mid, worst.depth + 1);
    auto right = detail::gauss_kronrod15(f, mid, worst.b, worst.depth + 1);
    result.evaluations += 30;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    open.push(left);
    open.push(right);
    ++panels;
  }

  // Re-sum from the panels to shed drift accumulated by the running updates.
  double v = frozen_value;
  double e = frozen_error;
  while (!open.empty()) {
    v += open.top().value;
    e += open.top().error;
    open.pop();
  }
  result.value = v;
  result.error = e;
  if (e > std::max(opt.abs_tol, opt.rel_tol * std::abs(v)) && e > 100.0 * eps * std::abs(v))
    throw QuadratureFailure(v, e);
  return result;
}

}  // namespace virodyne

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "common.hpp"

namespace advreg {

enum class LossKind { squared, absolute, quantile, cauchy, huber };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::squared: return "squared";
    case LossKind::absolute: return "absolute";
    case LossKind::quantile: return "quantile";
    case LossKind::cauchy: return "cauchy";
    case LossKind::huber: return "huber";
  }
  return "?";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "squared") return LossKind::squared;
  if (s == "absolute") return LossKind::absolute;
  if (s == "quantile") return LossKind::quantile;
  if (s == "cauchy") return LossKind::cauchy;
  if (s == "huber") return LossKind::huber;
  throw ConfigError("unknown loss kind '" + s + "'");
}

/// A loss l(y, x) with its Lipschitz constant C, and the lower-bound pair
/// (c, q) such that l(y, x) >= c |y - x|^q. For squared, cauchy and huber the
/// constants only hold on a bounded range |y - x| <= diff_bound.
struct LossSpec {
  LossKind kind = LossKind::squared;
  double param = 0.0;  // tau (quantile), kappa (cauchy), delta (huber)
  double lipschitz = 1.0;
  double lower_const = 1.0;
  double lower_exp = 2.0;

  static LossSpec squared(double diff_bound = 10.0) {
    // |d/dx (y-x)^2| = 2|y-x|
    return {LossKind::squared, 0.0, 2.0 * diff_bound, 1.0, 2.0};
  }
  static LossSpec absolute() { return {LossKind::absolute, 0.0, 1.0, 1.0, 1.0}; }
  static LossSpec quantile(double tau) {
    require(tau > 0.0 && tau < 1.0, "quantile level must lie in (0,1)");
    return {LossKind::quantile, tau, std::max(tau, 1.0 - tau),
            std::min(tau, 1.0 - tau), 1.0};
  }
  static LossSpec cauchy(double kappa, double diff_bound = 10.0) {
    require(kappa > 0.0, "cauchy scale must be positive");
    require(diff_bound > 0.0, "diff bound must be positive");
    // log(1+u)/u is decreasing, so the tightest quadratic constant on
    // |t| <= R is log(1 + kappa^2 R^2) / R^2. Max slope 2k^2t/(1+k^2t^2) = k.
    const double r2 = diff_bound * diff_bound;
    return {LossKind::cauchy, kappa, kappa, std::log1p(kappa * kappa * r2) / r2,
            2.0};
  }
  static LossSpec huber(double delta, double diff_bound = 10.0) {
    require(delta > 0.0, "huber threshold must be positive");
    require(diff_bound > 0.0, "diff bound must be positive");
    return {LossKind::huber, delta, delta,
            std::min(0.5, delta / (2.0 * diff_bound)), 2.0};
  }
};

inline double loss(const LossSpec& spec, double y, double x) {
  const double t = y - x;
  switch (spec.kind) {
    case LossKind::squared: return t * t;
    case LossKind::absolute: return std::abs(t);
    case LossKind::quantile: {
      const double tau = spec.param;
      return ((t >= 0.0 ? tau : 0.0) + (t <= 0.0 ? tau - 1.0 : 0.0)) * t;
    }
    case LossKind::cauchy: {
      const double k = spec.param;
      return std::log1p(k * k * t * t);
    }
    case LossKind::huber: {
      const double d = spec.param;
      const double a = std::abs(t);
      return a <= d ? 0.5 * t * t : d * (a - 0.5 * d);
    }
  }
  return 0.0;
}

/// d loss / d x (the prediction argument). Subgradient 0 at y == x.
inline double loss_grad(const LossSpec& spec, double y, double x) {
  const double t = y - x;
  switch (spec.kind) {
    case LossKind::squared: return -2.0 * t;
    case LossKind::absolute: return t > 0.0 ? -1.0 : (t < 0.0 ? 1.0 : 0.0);
    case LossKind::quantile:
      return t > 0.0 ? -spec.param : (t < 0.0 ? 1.0 - spec.param : 0.0);
    case LossKind::cauchy: {
      const double k2 = spec.param * spec.param;
      return -2.0 * k2 * t / (1.0 + k2 * t * t);
    }
    case LossKind::huber: {
      const double d = spec.param;
      if (std::abs(t) <= d) return -t;
      return t > 0.0 ? -d : d;
    }
  }
  return 0.0;
}

struct Assumption4Report {
  double grid_bound = 0.0;
  std::size_t grid_points = 0;
  std::size_t lower_bound_violations = 0;
  double max_lower_bound_violation = 0.0;
  std::size_t lipschitz_violations = 0;
  double max_lipschitz_violation = 0.0;
  // Largest |l(y,x) - l(x,y)|. Informational: the quantile loss is a listed
  // example yet is not swap-symmetric for tau != 1/2.
  double max_swap_asymmetry = 0.0;
  // Largest |l(y,x) - l(y+s,x+s)| over grid shifts.
  double max_shift_variation = 0.0;

  bool passed() const {
    return lower_bound_violations == 0 && lipschitz_violations == 0;
  }
};

/// Checks l(y,x) >= c |y-x|^q and the Lipschitz bound in each argument on a
/// uniform grid over [-grid_bound, grid_bound]^2.
inline Assumption4Report check_assumption4(const LossSpec& spec,
                                           double grid_bound,
                                           std::size_t points_per_axis = 401) {
  require(grid_bound > 0.0, "grid bound must be positive");
  require(points_per_axis >= 2, "need at least two grid points per axis");
  constexpr double kTol = 1e-12;
  Assumption4Report rep;
  rep.grid_bound = grid_bound;
  rep.grid_points = points_per_axis * points_per_axis;
  const double step = 2.0 * grid_bound / static_cast<double>(points_per_axis - 1);
  auto at = [&](std::size_t i) { return -grid_bound + step * static_cast<double>(i); };

  for (std::size_t i = 0; i < points_per_axis; ++i) {
    const double y = at(i);
    for (std::size_t j = 0; j < points_per_axis; ++j) {
      const double x = at(j);
      const double v = loss(spec, y, x);
      const double lower = spec.lower_const * std::pow(std::abs(y - x), spec.lower_exp);
      const double gap = lower - v;
      if (gap > kTol * (1.0 + lower)) {
        ++rep.lower_bound_violations;
        rep.max_lower_bound_violation = std::max(rep.max_lower_bound_violation, gap);
      }
      rep.max_swap_asymmetry =
          std::max(rep.max_swap_asymmetry, std::abs(v - loss(spec, x, y)));
      if (i + 1 < points_per_axis && j + 1 < points_per_axis) {
        rep.max_shift_variation = std::max(
            rep.max_shift_variation, std::abs(v - loss(spec, at(i + 1), at(j + 1))));
      }
      // Lipschitz in x and in y along grid edges.
      const double bound = spec.lipschitz * step;
      if (j + 1 < points_per_axis) {
        const double dx = std::abs(v - loss(spec, y, at(j + 1))) - bound;
        if (dx > kTol * (1.0 + bound)) {
          ++rep.lipschitz_violations;
          rep.max_lipschitz_violation = std::max(rep.max_lipschitz_violation, dx);
        }
      }
      if (i + 1 < points_per_axis) {
        const double dy = std::abs(v - loss(spec, at(i + 1), x)) - bound;
        if (dy > kTol * (1.0 + bound)) {
          ++rep.lipschitz_violations;
          rep.max_lipschitz_violation = std::max(rep.max_lipschitz_violation, dy);
        }
      }
    }
  }
  return rep;
}

}  // namespace advreg

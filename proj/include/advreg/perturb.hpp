#pragma once

// The perturbation set  {x' in [0,1]^d : ||x - x'||_p <= h}  and the inner
// maximization of a loss over it.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <random>
#include <string>

#include "common.hpp"
#include "losses.hpp"

namespace advreg {

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

enum class InnerMaxMethod { pgd, grid };

struct PerturbationSpec {
  double radius = 0.125;
  double order = kInfNorm;  // p in [1, inf]
  std::size_t steps = 10;
  double step_size = 0.125 / 4.0;
  std::size_t restarts = 1;
  InnerMaxMethod method = InnerMaxMethod::pgd;
  std::size_t grid_points = 201;  // per axis, grid method only

  /// Defaults for radius h: step size h/4, 10 steps, one random restart.
  static PerturbationSpec with_radius(double h, double p = kInfNorm) {
    PerturbationSpec s;
    s.radius = h;
    s.order = p;
    s.step_size = h / 4.0;
    return s;
  }

  void validate() const {
    require(radius > 0.0 && radius < 1.0 + 1e-12, "radius h must lie in (0,1)");
    require(order >= 1.0, "norm order p must be >= 1");
    require(steps >= 1, "PGD needs at least one step");
    require(step_size > 0.0, "step size must be positive");
    require(grid_points >= 2, "grid needs at least two points per axis");
  }
};

inline double lp_norm(ConstVec v, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  if (p == 1.0) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
  }
  if (p == 2.0) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), p);
  return std::pow(s, 1.0 / p);
}

inline double lp_distance(ConstVec a, ConstVec b, double p) {
  Vector d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return lp_norm(d, p);
}

/// In-place projection of `x` onto the ball around `center` intersected with
/// the unit cube. Radial scaling onto the ball, then a coordinate clamp to the
/// cube; the clamp never moves a coordinate away from the center (which lies in
/// the cube), so the result stays in the ball. Exact Euclidean projection for
/// p = inf.
inline void project_into(ConstVec center, MutVec x, const PerturbationSpec& spec) {
  const double h = spec.radius;
  if (std::isinf(spec.order)) {
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = std::clamp(std::clamp(x[i], center[i] - h, center[i] + h), 0.0, 1.0);
    return;
  }
  const double dist = lp_distance(x, center, spec.order);
  if (dist > h) {
    const double scale = h / dist;
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = center[i] + (x[i] - center[i]) * scale;
  }
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
}

inline Vector project(ConstVec center, ConstVec candidate,
                      const PerturbationSpec& spec) {
  require(center.size() == candidate.size(), "dimension mismatch in project");
  Vector out(candidate.begin(), candidate.end());
  project_into(center, out, spec);
  return out;
}

inline bool in_neighborhood(ConstVec center, ConstVec x,
                            const PerturbationSpec& spec, double tol = 1e-12) {
  for (double v : x)
    if (v < -tol || v > 1.0 + tol) return false;
  return lp_distance(x, center, spec.order) <= spec.radius + tol;
}

/// Uniform draw from the l_p ball around `center`, then clamped to the cube.
inline void random_start(ConstVec center, MutVec x, const PerturbationSpec& spec,
                         Rng& rng) {
  const std::size_t d = center.size();
  const double h = spec.radius;
  if (std::isinf(spec.order)) {
    std::uniform_real_distribution<double> u(-h, h);
    for (std::size_t i = 0; i < d; ++i) x[i] = center[i] + u(rng);
  } else {
    // Generalized-Gaussian direction, radius U^{1/d}: uniform in the l_p ball.
    const double p = spec.order;
    std::gamma_distribution<double> gamma(1.0 / p, 1.0);
    std::bernoulli_distribution coin(0.5);
    Vector g(d);
    for (double& v : g) v = std::pow(gamma(rng), 1.0 / p) * (coin(rng) ? 1.0 : -1.0);
    const double norm = lp_norm(g, p);
    const double r = std::pow(uniform01(rng), 1.0 / static_cast<double>(d));
    for (std::size_t i = 0; i < d; ++i)
      x[i] = center[i] + (norm > 0.0 ? h * r * g[i] / norm : 0.0);
  }
  project_into(center, x, spec);
}

/// Unit-l_p direction maximizing <grad, v> (sign for p = inf).
inline void steepest_direction(ConstVec grad, MutVec dir, double p) {
  const std::size_t d = grad.size();
  if (std::isinf(p)) {
    for (std::size_t i = 0; i < d; ++i)
      dir[i] = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
    return;
  }
  std::fill(dir.begin(), dir.end(), 0.0);
  if (p == 1.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(grad[i]) > std::abs(grad[best])) best = i;
    if (grad[best] != 0.0) dir[best] = grad[best] > 0.0 ? 1.0 : -1.0;
    return;
  }
  const double q = p / (p - 1.0);
  const double qn = lp_norm(grad, q);
  if (qn == 0.0) return;
  for (std::size_t i = 0; i < d; ++i) {
    const double a = std::abs(grad[i]) / qn;
    dir[i] = (grad[i] > 0.0 ? 1.0 : -1.0) * std::pow(a, q - 1.0);
  }
}

/// Scalar function of x with an input gradient.
template <class M>
concept InputDifferentiable = requires(M m, ConstVec x, MutVec g) {
  { m.dim() } -> std::convertible_to<std::size_t>;
  { m.value(x) } -> std::convertible_to<double>;
  { m.value_and_grad(x, g) } -> std::convertible_to<double>;
};

/// Target evaluated at the perturbed point; its input gradient is taken as 0.
template <class T>
concept PointTarget = requires(const T& t, ConstVec x) {
  { t(x) } -> std::convertible_to<double>;
};

struct ConstantTarget {
  double y = 0.0;
  double operator()(ConstVec) const { return y; }
};

/// Adapts a plain function (with optional input gradient) to the model
/// interface. Without a gradient the function is treated as locally flat.
struct FunctionModel {
  std::size_t d = 1;
  std::function<double(ConstVec)> f;
  std::function<void(ConstVec, MutVec)> grad;

  std::size_t dim() const { return d; }
  double value(ConstVec x) const { return f(x); }
  double value_and_grad(ConstVec x, MutVec g) const {
    if (grad)
      grad(x, g);
    else
      std::fill(g.begin(), g.end(), 0.0);
    return f(x);
  }
};

struct InnerMaxResult {
  Vector x_star;
  double value = 0.0;
};

namespace detail {

inline void check_finite(double v) {
  if (!std::isfinite(v))
    throw DivergenceError("non-finite loss during inner maximization; step size likely too large");
}

template <class M, class T>
double objective(M& model, const LossSpec& loss_spec, const T& target, ConstVec x) {
  const double v = loss(loss_spec, target(x), model.value(x));
  check_finite(v);
  return v;
}

}  // namespace detail

/// Exhaustive search over a uniform grid of the neighborhood's bounding box
/// (points outside the l_p ball are skipped). The center is always included.
template <class M, PointTarget T>
  requires InputDifferentiable<M>
InnerMaxResult grid_maximize(M& model, const LossSpec& loss_spec, const T& target,
                             ConstVec center, const PerturbationSpec& spec) {
  const std::size_t d = center.size();
  require(d == model.dim(), "center dimension does not match model");
  require(d <= 3, "grid inner maximization supports d <= 3");
  InnerMaxResult best{Vector(center.begin(), center.end()), 0.0};
  best.value = detail::objective(model, loss_spec, target, center);

  Vector lo(d), hi(d), x(d);
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = std::max(0.0, center[i] - spec.radius);
    hi[i] = std::min(1.0, center[i] + spec.radius);
  }
  const std::size_t n = spec.grid_points;
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= n;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t k = rem % n;
      rem /= n;
      x[i] = k + 1 == n ? hi[i]
                        : lo[i] + (hi[i] - lo[i]) * static_cast<double>(k) /
                                      static_cast<double>(n - 1);
    }
    if (!std::isinf(spec.order) &&
        lp_distance(x, center, spec.order) > spec.radius)
      continue;
    const double v = detail::objective(model, loss_spec, target, x);
    if (v > best.value) {
      best.value = v;
      best.x_star = x;
    }
  }
  return best;
}

/// Projected gradient ascent from the center plus `restarts` random starts.
/// Steepest-ascent steps in the l_p geometry (sign steps for p = inf); the step
/// is halved whenever an iterate lowers the objective. Returns the best iterate
/// seen, so the value is never below the value at the center.
template <class M, PointTarget T>
  requires InputDifferentiable<M>
InnerMaxResult pgd_maximize(M& model, const LossSpec& loss_spec, const T& target,
                            ConstVec center, const PerturbationSpec& spec, Rng& rng) {
  const std::size_t d = center.size();
  require(d == model.dim(), "center dimension does not match model");
  Vector x(d), grad(d), dir(d);
  InnerMaxResult best{Vector(center.begin(), center.end()),
                      -std::numeric_limits<double>::infinity()};

  for (std::size_t start = 0; start <= spec.restarts; ++start) {
    if (start == 0)
      std::copy(center.begin(), center.end(), x.begin());
    else
      random_start(center, x, spec, rng);
    double eta = spec.step_size;
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it <= spec.steps; ++it) {
      const double pred = model.value_and_grad(x, grad);
      const double y = target(x);
      const double v = loss(loss_spec, y, pred);
      detail::check_finite(v);
      if (v > best.value) {
        best.value = v;
        best.x_star = x;
      }
      if (it == spec.steps) break;
      if (v < prev) eta *= 0.5;
      prev = v;
      const double dl = loss_grad(loss_spec, y, pred);
      for (double& g : grad) g *= dl;
      steepest_direction(grad, dir, spec.order);
      bool moved = false;
      for (std::size_t i = 0; i < d; ++i) {
        if (dir[i] != 0.0) moved = true;
        x[i] += eta * dir[i];
      }
      if (!moved) break;  // stationary
      project_into(center, x, spec);
    }
  }
  return best;
}

template <class M, PointTarget T>
  requires InputDifferentiable<M>
InnerMaxResult inner_maximize(M& model, const LossSpec& loss_spec, const T& target,
                              ConstVec center, const PerturbationSpec& spec, Rng& rng) {
  for (double c : center)
    require(c >= 0.0 && c <= 1.0, "center must lie in the unit cube");
  if (spec.method == InnerMaxMethod::grid)
    return grid_maximize(model, loss_spec, target, center, spec);
  return pgd_maximize(model, loss_spec, target, center, spec, rng);
}

}  // namespace advreg

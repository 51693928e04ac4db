#pragma once

// Monte-Carlo risk estimates, adversarial norms and power-law rate fits.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "perturb.hpp"

namespace advreg {

using ScalarFn = std::function<double(ConstVec)>;

inline double sup_abs_error(const ScalarFn& f_hat, const ScalarFn& f_star,
                            const PointSet& points) {
  double m = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto x = points.row(i);
    m = std::max(m, std::abs(f_hat(x) - f_star(x)));
  }
  return m;
}

/// (mean |f_hat - f_star|^p)^{1/p} over the given points.
inline double lp_error(const ScalarFn& f_hat, const ScalarFn& f_star, double p,
                       const PointSet& points) {
  require(p >= 1.0, "L^p risk needs p >= 1");
  require(points.size() >= 1, "need at least one evaluation point");
  if (std::isinf(p)) return sup_abs_error(f_hat, f_star, points);
  Vector terms(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto x = points.row(i);
    terms[i] = std::pow(std::abs(f_hat(x) - f_star(x)), p);
  }
  return std::pow(pairwise_sum(terms) / static_cast<double>(points.size()), 1.0 / p);
}

/// Max of |f_hat - f_star| over m uniform points of [0,1]^dim.
inline double estimate_sup_risk(const ScalarFn& f_hat, const ScalarFn& f_star,
                                std::size_t dim, std::size_t m, std::uint64_t seed) {
  require(m >= 1, "need at least one evaluation point");
  return sup_abs_error(f_hat, f_star, sample_uniform_cube(dim, m, seed));
}

inline double estimate_lp_risk(const ScalarFn& f_hat, const ScalarFn& f_star, double p,
                               std::size_t dim, std::size_t m, std::uint64_t seed) {
  require(m >= 1, "need at least one evaluation point");
  return lp_error(f_hat, f_star, p, sample_uniform_cube(dim, m, seed));
}

/// n^{-1} sum_i max_{x' in neighborhood(x_i)} g(x')^2. Uses the grid maximizer
/// for d <= 2 and PGD otherwise.
inline double adversarial_norm_sq(const FunctionModel& g, const PointSet& points,
                                  PerturbationSpec spec, std::uint64_t seed = 0) {
  require(points.size() >= 1, "need at least one point");
  require(points.dim == g.dim(), "point dimension does not match function");
  FunctionModel model = g;
  if (points.dim > 2 && !model.grad) {
    // central differences stand in for the missing input gradient
    model.grad = [f = g.f](ConstVec x, MutVec out) {
      constexpr double eps = 1e-6;
      Vector y(x.begin(), x.end());
      for (std::size_t j = 0; j < y.size(); ++j) {
        const double keep = y[j];
        y[j] = keep + eps;
        const double up = f(y);
        y[j] = keep - eps;
        const double down = f(y);
        y[j] = keep;
        out[j] = (up - down) / (2.0 * eps);
      }
    };
  }
  const LossSpec sq = LossSpec::squared();
  const ConstantTarget zero{0.0};
  Vector vals(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    Rng rng(stream_seed(seed, 0xAD, i));
    vals[i] = points.dim <= 2 ? grid_maximize(model, sq, zero, points.row(i), spec).value
                              : pgd_maximize(model, sq, zero, points.row(i), spec, rng).value;
  }
  return pairwise_sum(vals) / static_cast<double>(points.size());
}

/// Gamma(1/p + 1)^d / Gamma(d/p + 1) * h^d: the l_p-ball volume divided by 2^d,
/// i.e. the measure of the neighborhood of a cube corner (the infimum over the
/// cube). p = inf gives h^d.
inline double lp_corner_volume(double p, std::size_t d, double h) {
  require(p >= 1.0, "p must be >= 1");
  require(d >= 1, "d must be >= 1");
  require(h > 0.0 && h <= 1.0, "h must lie in (0,1]");
  const double dd = static_cast<double>(d);
  if (std::isinf(p)) return std::pow(h, dd);
  const double log_v =
      dd * std::lgamma(1.0 / p + 1.0) - std::lgamma(dd / p + 1.0) + dd * std::log(h);
  return std::exp(log_v);
}

struct RateFit {
  Vector sample_sizes;
  Vector risks;
  double fitted_exponent = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of log(risk) on log(n); exponent = -slope.
inline RateFit fit_rate(const Vector& sample_sizes, const Vector& risks) {
  require(sample_sizes.size() == risks.size(), "sizes and risks differ in length");
  require(sample_sizes.size() >= 2, "need at least two sample sizes");
  const std::size_t k = risks.size();
  Vector lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    require(sample_sizes[i] > 0.0, "sample sizes must be positive");
    require(risks[i] > 0.0, "risks must be positive for a log-log fit");
    lx[i] = std::log(sample_sizes[i]);
    ly[i] = std::log(risks[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(k);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  require(sxx > 0.0, "sample sizes must not all be equal");
  const double slope = sxy / sxx;
  RateFit fit{sample_sizes, risks, -slope, 1.0};
  // a perfectly flat response is fitted exactly
  if (syy > 0.0) fit.r_squared = (sxy * sxy) / (sxx * syy);
  return fit;
}

/// Minimax exponent 2 beta / (2 beta + d).
inline double minimax_exponent(double beta, std::size_t d) {
  return 2.0 * beta / (2.0 * beta + static_cast<double>(d));
}

struct RiskReport {
  double sup_risk = 0.0;
  double l2_risk = 0.0;
  double adversarial_norm_sq = 0.0;
  std::optional<double> preprocess_residual_sup;
  std::size_t eval_points = 0;
  std::uint64_t seed = 0;

  static std::string csv_header() {
    return "sup_risk,l2_risk,adversarial_norm_sq,preprocess_residual_sup,eval_points,seed";
  }
  std::string csv_row() const {
    std::ostringstream os;
    os.precision(10);
    os << sup_risk << ',' << l2_risk << ',' << adversarial_norm_sq << ',';
    if (preprocess_residual_sup) os << *preprocess_residual_sup;
    os << ',' << eval_points << ',' << seed;
    return os.str();
  }
  nlohmann::json to_json() const {
    nlohmann::json j{{"sup_risk", sup_risk},       {"l2_risk", l2_risk},
                     {"adversarial_norm_sq", adversarial_norm_sq},
                     {"eval_points", eval_points}, {"seed", seed}};
    j["preprocess_residual_sup"] =
        preprocess_residual_sup ? nlohmann::json(*preprocess_residual_sup) : nlohmann::json();
    return j;
  }
};

/// Sup and L2 risks on one shared uniform sample, the adversarial norm of the
/// error on `adv_points` and optionally the preprocessing residual sup.
inline RiskReport evaluate_risks(const ScalarFn& f_hat, const ScalarFn& f_star,
                                 std::size_t dim, std::size_t m, std::uint64_t seed,
                                 const PerturbationSpec* adv_spec = nullptr,
                                 const PointSet* adv_points = nullptr,
                                 const ScalarFn* preprocessed = nullptr) {
  const PointSet pts = sample_uniform_cube(dim, m, seed);
  RiskReport r;
  r.eval_points = m;
  r.seed = seed;
  r.sup_risk = sup_abs_error(f_hat, f_star, pts);
  r.l2_risk = lp_error(f_hat, f_star, 2.0, pts);
  if (adv_spec != nullptr && adv_points != nullptr) {
    FunctionModel err{dim, [&](ConstVec x) { return f_hat(x) - f_star(x); }, {}};
    r.adversarial_norm_sq = adversarial_norm_sq(err, *adv_points, *adv_spec, seed);
  }
  if (preprocessed != nullptr) r.preprocess_residual_sup = sup_abs_error(*preprocessed, f_star, pts);
  return r;
}

}  // namespace advreg

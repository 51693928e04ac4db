#pragma once

// Two-atom construction under which ordinary adversarial training is
// inconsistent, with its closed-form empirical risk minimizer.
//
// Atoms x_a = (0.3, 0.5, ...), x_b = (0.7, 0.5, ...); f* = -1 at x_a and +1 at
// x_b; noise uniform on [-0.1, 0.1]; p = inf, h = 0.5. The l_inf balls cover
// x_1 in [0, 0.8] and [0.2, 1]. Over functions that are constant on the three
// regions x_1 < 0.2, 0.2 <= x_1 <= 0.8, x_1 > 0.8, the ordinary adversarial
// risk is
//   (1/n) sum_{a} max{(Y_i - c1)^2, (Y_i - c2)^2}
//     + (1/n) sum_{b} max{(Y_i - c2)^2, (Y_i - c3)^2},
// bounded below by (1/n) sum_i (Y_i - c2)^2 and attaining that bound when c1,
// c3 sit at the per-atom response means.

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "common.hpp"
#include "datagen.hpp"
#include "network.hpp"
#include "train.hpp"

namespace advreg::prop1 {

inline constexpr double kRadius = 0.5;
inline constexpr double kNoiseHalfWidth = 0.1;

inline double true_function(ConstVec x) { return prop1_true_function(x); }

struct Instance {
  std::size_t d = 1;
  std::size_t n1 = 0;  // samples at x_a
  std::size_t n2 = 0;  // samples at x_b
  Vector noise;        // first n1 belong to x_a, the remaining n2 to x_b

  std::size_t n() const { return n1 + n2; }
};

/// n1 = floor(n/2), n2 = n - n1 samples; noise uniform on [-0.1, 0.1].
inline Instance make_instance(std::size_t n, std::size_t d, std::uint64_t seed) {
  require(n >= 2, "need at least two samples");
  require(d >= 1, "dimension must be positive");
  Instance inst{d, n / 2, n - n / 2, Vector(n)};
  Rng rng(stream_seed(seed, 0x9901));
  std::uniform_real_distribution<double> u(-kNoiseHalfWidth, kNoiseHalfWidth);
  for (double& v : inst.noise) v = u(rng);
  return inst;
}

inline std::array<Vector, 2> atoms(std::size_t d) { return dirac_atoms(d); }

inline Dataset to_dataset(const Instance& inst) {
  require(inst.noise.size() == inst.n(), "noise count does not match n1 + n2");
  Dataset data;
  data.truth = true_function;
  data.inputs = PointSet(inst.n(), inst.d);
  data.outputs.resize(inst.n());
  const auto a = atoms(inst.d);
  for (std::size_t i = 0; i < inst.n(); ++i) {
    const Vector& x = i < inst.n1 ? a[0] : a[1];
    std::copy(x.begin(), x.end(), data.inputs.row(i).begin());
    data.outputs[i] = true_function(x) + inst.noise[i];
  }
  return data;
}

struct Constants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

/// c2 = (n2 - n1)/n + mean(noise); c1, c3 are the response means at each atom.
inline Constants closed_form_minimizer(const Instance& inst) {
  require(inst.n1 >= 1 && inst.n2 >= 1, "both atoms need samples");
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < inst.n1; ++i) sa += inst.noise[i];
  for (std::size_t i = inst.n1; i < inst.n(); ++i) sb += inst.noise[i];
  const double n = static_cast<double>(inst.n());
  return {-1.0 + sa / static_cast<double>(inst.n1),
          (static_cast<double>(inst.n2) - static_cast<double>(inst.n1)) / n + (sa + sb) / n,
          1.0 + sb / static_cast<double>(inst.n2)};
}

// Region cuts written as the ball edges themselves, so a neighborhood edge
// computed in floating point lands in the middle region.
inline constexpr double kLowCut = 0.7 - kRadius;
inline constexpr double kHighCut = 0.3 + kRadius;

inline double piecewise_value(const Constants& c, double x1) {
  if (x1 < kLowCut) return c.c1;
  if (x1 > kHighCut) return c.c3;
  return c.c2;
}

inline FunctionModel piecewise_model(const Constants& c, std::size_t d) {
  return {d, [c](ConstVec x) { return piecewise_value(c, x[0]); }, {}};
}

/// Ordinary adversarial risk of the piecewise-constant candidate, by region.
inline double piecewise_adversarial_risk(const Instance& inst, const Constants& c) {
  double total = 0.0;
  for (std::size_t i = 0; i < inst.n(); ++i) {
    if (i < inst.n1) {
      const double y = -1.0 + inst.noise[i];
      total += std::max((y - c.c1) * (y - c.c1), (y - c.c2) * (y - c.c2));
    } else {
      const double y = 1.0 + inst.noise[i];
      total += std::max((y - c.c2) * (y - c.c2), (y - c.c3) * (y - c.c3));
    }
  }
  return total / static_cast<double>(inst.n());
}

/// L2(P_X) risk of the piecewise minimizer: both atoms fall in the c2 region,
/// so 0.5 (c2 + 1)^2 + 0.5 (c2 - 1)^2 = 1 + c2^2.
inline double l2_risk_prop1(double c2) { return 1.0 + c2 * c2; }

/// Squared L2(P_X) risk of any function under the two-atom design.
template <class F>
double l2_risk_at_atoms(F&& f, std::size_t d) {
  const auto a = atoms(d);
  const double ea = f(ConstVec(a[0])) - true_function(a[0]);
  const double eb = f(ConstVec(a[1])) - true_function(a[1]);
  return 0.5 * ea * ea + 0.5 * eb * eb;
}

/// Training settings used for the neural comparison on this construction.
inline TrainConfig demo_train_config(Scheme scheme, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.scheme = scheme;
  cfg.perturbation = PerturbationSpec::with_radius(kRadius);
  cfg.architecture = {3, 20, 1000.0};
  cfg.epochs = 2000;
  cfg.batch_size = 20;
  cfg.learning_rate = 3e-3;
  cfg.preprocessing.k = 3;
  cfg.seed = seed;
  return cfg;
}

struct DemoRow {
  std::uint64_t seed = 0;
  double oracle_risk = 0.0;  // empirical ordinary adversarial risk at the minimizer
  double oracle_c2 = 0.0;
  double oracle_l2 = 0.0;
  double ordinary_risk = 0.0;
  double ordinary_l2 = 0.0;
  double preprocessed_risk = 0.0;
  double preprocessed_l2 = 0.0;

  static std::string csv_header() {
    return "seed,oracle_risk,oracle_c2,oracle_l2,ordinary_risk,ordinary_l2,"
           "preprocessed_risk,preprocessed_l2";
  }
};

/// Oracle vs. trained ordinary and preprocessed networks on one instance.
/// Trained risks are the empirical ordinary adversarial risk evaluated with an
/// exhaustive grid over each neighborhood.
inline DemoRow run_demo(std::size_t n, std::uint64_t seed, std::size_t d = 1) {
  const Instance inst = make_instance(n, d, seed);
  const Dataset data = to_dataset(inst);
  DemoRow row;
  row.seed = seed;
  const Constants c = closed_form_minimizer(inst);
  row.oracle_risk = piecewise_adversarial_risk(inst, c);
  row.oracle_c2 = c.c2;
  row.oracle_l2 = l2_risk_prop1(c.c2);

  RiskContext eval_ctx{Scheme::adversarial_ordinary, LossSpec::squared(),
                       PerturbationSpec::with_radius(kRadius), seed};
  if (d <= 2) {
    eval_ctx.perturbation.method = InnerMaxMethod::grid;
    eval_ctx.perturbation.grid_points = d == 1 ? 2001 : 101;
  }
  for (Scheme s : {Scheme::adversarial_ordinary, Scheme::adversarial_preprocessed}) {
    const TrainResult fit = train(demo_train_config(s, seed), data);
    NetworkModel model(fit.shape, fit.params);
    const double risk = empirical_risk(eval_ctx, model, data);
    const double l2 = l2_risk_at_atoms([&](ConstVec x) { return model.value(x); }, d);
    if (s == Scheme::adversarial_ordinary) {
      row.ordinary_risk = risk;
      row.ordinary_l2 = l2;
    } else {
      row.preprocessed_risk = risk;
      row.preprocessed_l2 = l2;
    }
  }
  return row;
}

}  // namespace advreg::prop1

#pragma once

// Least-squares, ordinary adversarial and preprocessed adversarial estimators
// trained by minibatch gradient descent with a per-sample inner maximization.

#include <chrono>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "common.hpp"
#include "datagen.hpp"
#include "losses.hpp"
#include "network.hpp"
#include "perturb.hpp"
#include "preprocess.hpp"

namespace advreg {

enum class Scheme { least_squares, adversarial_ordinary, adversarial_preprocessed };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::least_squares: return "least_squares";
    case Scheme::adversarial_ordinary: return "adversarial_ordinary";
    case Scheme::adversarial_preprocessed: return "adversarial_preprocessed";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  for (Scheme v : {Scheme::least_squares, Scheme::adversarial_ordinary,
                   Scheme::adversarial_preprocessed})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown scheme '" + s + "'");
}

enum class OptimizerKind { sgd, adam };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct Architecture {
  std::size_t depth = 3;  // number of affine layers
  std::size_t width = 40;
  double output_bound = 1000.0;

  NetworkShape shape_for(std::size_t input_dim) const {
    return NetworkShape::mlp(input_dim, depth, width, output_bound);
  }
};

struct PreprocessSettings {
  std::size_t k = 3;
  bool split = false;  // fit Y_hat on a random half, train on the other half
};

struct TrainConfig {
  Scheme scheme = Scheme::adversarial_preprocessed;
  LossSpec loss = LossSpec::squared();
  PerturbationSpec perturbation = PerturbationSpec::with_radius(0.125);
  Architecture architecture;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  // Cosine decay from learning_rate to learning_rate * final_lr_fraction over
  // the run; 1.0 keeps the rate constant.
  double final_lr_fraction = 1.0;
  OptimizerSpec optimizer;
  std::uint64_t seed = 0;
  PreprocessSettings preprocessing;
  bool warm_start = false;  // add the previous epoch's maximizer as a PGD start
  std::size_t workers = 1;

  void validate() const {
    require(epochs >= 1, "epochs must be positive");
    require(batch_size >= 1, "batch size must be positive");
    require(learning_rate > 0.0 && std::isfinite(learning_rate),
            "learning rate must be positive");
    require(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0,
            "final learning-rate fraction must lie in (0,1]");
    require(workers >= 1, "need at least one worker");
    if (scheme != Scheme::least_squares) perturbation.validate();
    if (scheme == Scheme::adversarial_preprocessed)
      require(preprocessing.k >= 1, "k must be at least 1");
  }
};

/// Scheme, loss and neighborhood needed to evaluate an empirical risk.
struct RiskContext {
  Scheme scheme = Scheme::least_squares;
  LossSpec loss = LossSpec::squared();
  PerturbationSpec perturbation;
  std::uint64_t seed = 0;

  static RiskContext from(const TrainConfig& cfg) {
    return {cfg.scheme, cfg.loss, cfg.perturbation, cfg.seed};
  }
};

namespace detail {

struct SampleTarget {
  const Preprocessor* prep = nullptr;
  double y = 0.0;
  double operator()(ConstVec x) const { return prep != nullptr ? prep->evaluate(x) : y; }
};

template <class M>
InnerMaxResult sample_max(const RiskContext& ctx, M& model, const Dataset& data,
                          const Preprocessor* prep, std::size_t i, Rng& rng,
                          const Vector* warm = nullptr) {
  const ConstVec xi = data.inputs.row(i);
  if (ctx.scheme == Scheme::least_squares) {
    const double v = loss(ctx.loss, data.outputs[i], model.value(xi));
    return {Vector(xi.begin(), xi.end()), v};
  }
  SampleTarget target;
  if (ctx.scheme == Scheme::adversarial_preprocessed) {
    if (prep == nullptr) throw ConfigError("preprocessed scheme requires a fitted preprocessor");
    target.prep = prep;
  } else {
    target.y = data.outputs[i];
  }
  InnerMaxResult res = inner_maximize(model, ctx.loss, target, xi, ctx.perturbation, rng);
  if (warm != nullptr && !warm->empty()) {
    // refine from the previous maximizer with a plain PGD run
    PerturbationSpec s = ctx.perturbation;
    s.restarts = 0;
    Vector start = project(xi, *warm, s);
    InnerMaxResult alt = pgd_maximize(model, ctx.loss, target, start, s, rng);
    if (alt.value > res.value && in_neighborhood(xi, alt.x_star, ctx.perturbation))
      res = std::move(alt);
  }
  return res;
}

}  // namespace detail

/// (1/n) sum_i sup_{x' in neighborhood(X_i)} loss(target_i(x'), f(x')), where
/// target_i is Y_i (ordinary) or Y_hat(x') (preprocessed). Least squares uses
/// the observed point only.
template <class M>
  requires InputDifferentiable<M>
double empirical_risk(const RiskContext& ctx, M& model, const Dataset& data,
                      const Preprocessor* prep = nullptr) {
  require(data.size() >= 1, "empirical risk of an empty dataset");
  if (ctx.scheme == Scheme::adversarial_preprocessed && prep == nullptr)
    throw ConfigError("preprocessed scheme requires a fitted preprocessor");
  Vector values(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng rng(stream_seed(ctx.seed, 0xE4, i));
    values[i] = detail::sample_max(ctx, model, data, prep, i, rng).value;
  }
  return pairwise_sum(values) / static_cast<double>(data.size());
}

inline double empirical_risk(const RiskContext& ctx, const NetworkShape& shape,
                             const NetworkParams& params, const Dataset& data,
                             const Preprocessor* prep = nullptr) {
  NetworkModel model(shape, params);
  return empirical_risk(ctx, model, data, prep);
}

struct EpochRecord {
  std::size_t epoch = 0;
  double risk = 0.0;  // mean inner-max loss over the epoch's samples
  double wall_ms = 0.0;
};

struct TrainResult {
  NetworkShape shape;
  NetworkParams params;
  std::vector<EpochRecord> history;
  std::shared_ptr<const Preprocessor> preprocessor;  // preprocessed scheme only
  Dataset training_data;                             // after an optional split
};

class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, NetworkParams last_finite,
                   std::vector<EpochRecord> history)
      : DivergenceError(what), last_finite_(std::move(last_finite)),
        history_(std::move(history)) {}
  const NetworkParams& last_finite_params() const { return last_finite_; }
  const std::vector<EpochRecord>& history() const { return history_; }

 private:
  NetworkParams last_finite_;
  std::vector<EpochRecord> history_;
};

namespace detail {

class Optimizer {
 public:
  Optimizer(const OptimizerSpec& spec, double lr, const NetworkShape& shape)
      : spec_(spec), lr_(lr), m_(NetworkParams::zeros(shape)), v_(NetworkParams::zeros(shape)) {}

  void set_learning_rate(double lr) { lr_ = lr; }

  void step(NetworkParams& params, const NetworkParams& grad) {
    ++t_;
    const double b1 = spec_.beta1, b2 = spec_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      auto update = [&](Vector& p, const Vector& g, Vector& m, Vector& v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (spec_.kind == OptimizerKind::sgd) {
            p[i] -= lr_ * g[i];
            continue;
          }
          m[i] = b1 * m[i] + (1.0 - b1) * g[i];
          v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
          p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + spec_.epsilon);
        }
      };
      auto& pl = params.layers[l];
      const auto& gl = grad.layers[l];
      update(pl.weights, gl.weights, m_.layers[l].weights, v_.layers[l].weights);
      update(pl.bias, gl.bias, m_.layers[l].bias, v_.layers[l].bias);
    }
  }

 private:
  OptimizerSpec spec_;
  double lr_;
  NetworkParams m_, v_;
  std::size_t t_ = 0;
};

// Runs fn(i) for i in [0, count) over `workers` threads in contiguous chunks.
template <class F>
void parallel_for(std::size_t count, std::size_t workers, F&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i, 0);
    return;
  }
  workers = std::min(workers, count);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = count * w / workers, hi = count * (w + 1) / workers;
    pool.emplace_back([&fn, lo, hi, w] {
      for (std::size_t i = lo; i < hi; ++i) fn(i, w);
    });
  }
}

}  // namespace detail

/// Minimax training: for each minibatch, resolve every sample's inner
/// maximization under the current parameters, then take one descent step on
/// the mean loss at the maximizers (maximizers held fixed).
inline TrainResult train(const TrainConfig& cfg, const Dataset& data) {
  cfg.validate();
  require(data.size() >= 1, "training data must be non-empty");
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();

  TrainResult out;
  out.training_data = data;
  if (cfg.scheme == Scheme::adversarial_preprocessed) {
    if (cfg.preprocessing.split) {
      SplitData parts = split_half(data, cfg.seed);
      out.preprocessor = fit_knn(parts.pilot, cfg.preprocessing.k);
      out.training_data = std::move(parts.training);
    } else {
      out.preprocessor = fit_knn(data, cfg.preprocessing.k);
    }
  }
  const Dataset& train_set = out.training_data;
  const Preprocessor* prep = out.preprocessor.get();
  const std::size_t n = train_set.size();

  out.shape = cfg.architecture.shape_for(train_set.dim());
  out.params = init(out.shape, cfg.seed);
  detail::Optimizer opt(cfg.optimizer, cfg.learning_rate, out.shape);
  const RiskContext ctx = RiskContext::from(cfg);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Vector> warm(cfg.warm_start ? n : 0);
  NetworkParams grad = NetworkParams::zeros(out.shape);
  NetworkParams last_finite = out.params;
  const std::size_t workers = std::min(cfg.workers, cfg.batch_size);
  std::vector<InnerMaxResult> batch_max(cfg.batch_size);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng perm_rng(stream_seed(cfg.seed, 0x9E4, epoch));
    std::shuffle(order.begin(), order.end(), perm_rng);
    if (cfg.final_lr_fraction < 1.0 && cfg.epochs > 1) {
      const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
      const double lo = cfg.learning_rate * cfg.final_lr_fraction;
      opt.set_learning_rate(lo + 0.5 * (cfg.learning_rate - lo) *
                                     (1.0 + std::cos(std::numbers::pi * t)));
    }
    Vector sample_values(n, 0.0);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      {
        std::vector<NetworkModel> models(workers, NetworkModel(out.shape, out.params));
        detail::parallel_for(len, workers, [&](std::size_t b, std::size_t w) {
          const std::size_t i = order[start + b];
          Rng rng(stream_seed(cfg.seed, 0x1AA, epoch, i));
          batch_max[b] = detail::sample_max(ctx, models[w], train_set, prep, i, rng,
                                            cfg.warm_start ? &warm[i] : nullptr);
        });
      }
      grad.fill(0.0);
      NetworkModel model(out.shape, out.params);
      for (std::size_t b = 0; b < len; ++b) {
        const std::size_t i = order[start + b];
        const InnerMaxResult& r = batch_max[b];
        sample_values[i] = r.value;
        const double target = ctx.scheme == Scheme::adversarial_preprocessed
                                  ? prep->evaluate(r.x_star)
                                  : train_set.outputs[i];
        const double pred = model.value(r.x_star);
        const double upstream = loss_grad(cfg.loss, target, pred) / static_cast<double>(len);
        model.accumulate_param_grad(r.x_star, upstream, grad);
        if (cfg.warm_start) warm[i] = r.x_star;
      }
      opt.step(out.params, grad);
    }
    const double risk = pairwise_sum(sample_values) / static_cast<double>(n);
    if (!std::isfinite(risk) || !out.params.all_finite())
      throw TrainingDiverged("non-finite risk at epoch " + std::to_string(epoch),
                             last_finite, out.history);
    last_finite = out.params;
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    out.history.push_back({epoch, risk, ms});
  }
  return out;
}

inline void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,risk,wall_time\n";
  out.precision(10);
  for (const auto& r : history) out << r.epoch << ',' << r.risk << ',' << r.wall_ms << '\n';
}

}  // namespace advreg

#pragma once

// Fully-connected ReLU network with a clipped scalar output and hand-written
// reverse-mode differentiation with respect to both parameters and input.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"

namespace advreg {

/// Layer widths W_1..W_{L+1} (W_1 = input dim, W_{L+1} = 1) and output bound B.
struct NetworkShape {
  std::vector<std::size_t> widths;
  double output_bound = 1.0;

  std::size_t depth() const { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t input_dim() const { return widths.empty() ? 0 : widths.front(); }

  void validate() const {
    require(widths.size() >= 2, "network needs at least one layer");
    for (std::size_t w : widths) require(w >= 1, "layer widths must be >= 1");
    require(widths.back() == 1, "network output width must be 1");
    require(std::isfinite(output_bound) && output_bound >= 1.0,
            "output bound must be >= 1");
  }

  /// `depth` affine layers, all hidden layers of width `width`.
  static NetworkShape mlp(std::size_t input_dim, std::size_t depth,
                          std::size_t width, double bound) {
    NetworkShape s;
    s.widths.push_back(input_dim);
    for (std::size_t l = 1; l < depth; ++l) s.widths.push_back(width);
    s.widths.push_back(1);
    s.output_bound = bound;
    s.validate();
    return s;
  }

  bool operator==(const NetworkShape&) const = default;
};

struct DenseLayer {
  std::size_t rows = 0;  // fan-out
  std::size_t cols = 0;  // fan-in
  Vector weights;        // rows x cols, row-major
  Vector bias;           // rows

  double& w(std::size_t r, std::size_t c) { return weights[r * cols + c]; }
  double w(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }

  bool operator==(const DenseLayer&) const = default;
};

struct NetworkParams {
  std::vector<DenseLayer> layers;

  static NetworkParams zeros(const NetworkShape& shape) {
    shape.validate();
    NetworkParams p;
    for (std::size_t l = 0; l < shape.depth(); ++l) {
      DenseLayer layer;
      layer.rows = shape.widths[l + 1];
      layer.cols = shape.widths[l];
      layer.weights.assign(layer.rows * layer.cols, 0.0);
      layer.bias.assign(layer.rows, 0.0);
      p.layers.push_back(std::move(layer));
    }
    return p;
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }

  /// Visits every scalar parameter in a fixed order (layer, weights, bias).
  template <class F>
  void for_each(F&& f) {
    for (auto& l : layers) {
      for (double& v : l.weights) f(v);
      for (double& v : l.bias) f(v);
    }
  }
  template <class F>
  void for_each(F&& f) const {
    for (const auto& l : layers) {
      for (double v : l.weights) f(v);
      for (double v : l.bias) f(v);
    }
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](double v) { ok = ok && std::isfinite(v); });
    return ok;
  }

  void fill(double value) {
    for_each([&](double& v) { v = value; });
  }

  bool operator==(const NetworkParams&) const = default;
};

inline void check_consistent(const NetworkParams& params,
                             const NetworkShape& shape) {
  require(params.layers.size() == shape.depth(),
          "params depth does not match shape");
  for (std::size_t l = 0; l < shape.depth(); ++l) {
    const auto& layer = params.layers[l];
    require(layer.rows == shape.widths[l + 1] && layer.cols == shape.widths[l] &&
                layer.weights.size() == layer.rows * layer.cols &&
                layer.bias.size() == layer.rows,
            "layer " + std::to_string(l) + " dimensions do not match shape");
  }
}

struct DualGradient {
  NetworkParams param_grads;
  Vector input_grad;
};

/// Activations recorded by a forward pass; consumed by the backward pass.
struct ForwardTape {
  Vector input;
  std::vector<Vector> pre;   // pre-activation per layer
  std::vector<Vector> post;  // ReLU output per hidden layer
  double raw_output = 0.0;
  double output = 0.0;
  bool saturated = false;
};

/// Records a forward pass. Hidden layers use ReLU; the last layer is affine,
/// followed by a hard clamp to [-B, B].
inline void record(const NetworkParams& params, const NetworkShape& shape,
                   ConstVec x, ForwardTape& tape) {
  require(x.size() == shape.input_dim(),
          "input dimension " + std::to_string(x.size()) +
              " does not match network input width " +
              std::to_string(shape.input_dim()));
  const std::size_t depth = shape.depth();
  tape.input.assign(x.begin(), x.end());
  tape.pre.resize(depth);
  tape.post.resize(depth);
  const Vector* in = &tape.input;
  for (std::size_t l = 0; l < depth; ++l) {
    const DenseLayer& layer = params.layers[l];
    Vector& z = tape.pre[l];
    z.resize(layer.rows);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      const double* wr = layer.weights.data() + r * layer.cols;
      double acc = layer.bias[r];
      for (std::size_t c = 0; c < layer.cols; ++c) acc += wr[c] * (*in)[c];
      z[r] = acc;
    }
    if (l + 1 < depth) {
      Vector& a = tape.post[l];
      a.resize(layer.rows);
      for (std::size_t r = 0; r < layer.rows; ++r) a[r] = z[r] > 0.0 ? z[r] : 0.0;
      in = &a;
    }
  }
  const double bound = shape.output_bound;
  tape.raw_output = tape.pre.back()[0];
  tape.saturated = std::abs(tape.raw_output) > bound;
  tape.output = std::clamp(tape.raw_output, -bound, bound);
}

inline double forward(const NetworkParams& params, const NetworkShape& shape,
                      ConstVec x) {
  ForwardTape tape;
  record(params, shape, x, tape);
  return tape.output;
}

/// Reverse pass over a recorded tape. Either output may be null.
/// Parameter gradients are accumulated (added) into `param_acc`.
inline void backward_into(const NetworkParams& params,
                          const NetworkShape& shape, const ForwardTape& tape,
                          double upstream, NetworkParams* param_acc,
                          MutVec* input_grad, std::vector<Vector>& scratch) {
  const std::size_t depth = shape.depth();
  if (tape.saturated) upstream = 0.0;
  scratch.resize(2);
  Vector& delta = scratch[0];
  Vector& next = scratch[1];
  delta.assign(1, upstream);
  for (std::size_t l = depth; l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    // delta holds dOut/dz for layer l (pre-activation)
    const Vector& in = l == 0 ? tape.input : tape.post[l - 1];
    if (param_acc != nullptr) {
      DenseLayer& g = param_acc->layers[l];
      for (std::size_t r = 0; r < layer.rows; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        g.bias[r] += d;
        double* gr = g.weights.data() + r * layer.cols;
        for (std::size_t c = 0; c < layer.cols; ++c) gr[c] += d * in[c];
      }
    }
    if (l == 0 && input_grad == nullptr) break;
    next.assign(layer.cols, 0.0);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* wr = layer.weights.data() + r * layer.cols;
      for (std::size_t c = 0; c < layer.cols; ++c) next[c] += d * wr[c];
    }
    if (l > 0) {
      const Vector& z = tape.pre[l - 1];
      for (std::size_t c = 0; c < layer.cols; ++c)
        if (!(z[c] > 0.0)) next[c] = 0.0;
    }
    std::swap(delta, next);
  }
  if (input_grad != nullptr) std::copy(delta.begin(), delta.end(), input_grad->begin());
}

inline DualGradient backward(const NetworkParams& params,
                             const NetworkShape& shape, const ForwardTape& tape,
                             double upstream) {
  DualGradient g{NetworkParams::zeros(shape), Vector(shape.input_dim(), 0.0)};
  std::vector<Vector> scratch;
  MutVec ig(g.input_grad);
  backward_into(params, shape, tape, upstream, &g.param_grads, &ig, scratch);
  return g;
}

inline DualGradient backward(const NetworkParams& params,
                             const NetworkShape& shape, ConstVec x,
                             double upstream) {
  ForwardTape tape;
  record(params, shape, x, tape);
  return backward(params, shape, tape, upstream);
}

/// He-normal weights (variance 2 / fan-in), zero biases.
inline NetworkParams init(const NetworkShape& shape, std::uint64_t seed) {
  NetworkParams p = NetworkParams::zeros(shape);
  Rng rng(stream_seed(seed, 0x11A7));
  for (auto& layer : p.layers) {
    std::normal_distribution<double> dist(
        0.0, std::sqrt(2.0 / static_cast<double>(layer.cols)));
    for (double& w : layer.weights) w = dist(rng);
  }
  return p;
}

/// Scalar function view of a network with reusable scratch space.
/// Not thread-safe; use one instance per worker.
class NetworkModel {
 public:
  NetworkModel(const NetworkShape& shape, const NetworkParams& params)
      : shape_(&shape), params_(&params) {}

  std::size_t dim() const { return shape_->input_dim(); }

  double value(ConstVec x) {
    record(*params_, *shape_, x, tape_);
    return tape_.output;
  }

  /// Returns f(x) and writes the input gradient into `grad`.
  double value_and_grad(ConstVec x, MutVec grad) {
    record(*params_, *shape_, x, tape_);
    backward_into(*params_, *shape_, tape_, 1.0, nullptr, &grad, scratch_);
    return tape_.output;
  }

  /// Adds upstream * d f(x) / d theta to `acc`.
  void accumulate_param_grad(ConstVec x, double upstream, NetworkParams& acc) {
    record(*params_, *shape_, x, tape_);
    backward_into(*params_, *shape_, tape_, upstream, &acc, nullptr, scratch_);
  }

  const NetworkShape& shape() const { return *shape_; }
  const NetworkParams& params() const { return *params_; }

 private:
  const NetworkShape* shape_;
  const NetworkParams* params_;
  ForwardTape tape_;
  std::vector<Vector> scratch_;
};

// ---- serialization -------------------------------------------------------

inline constexpr int kNetworkFormatVersion = 1;

inline nlohmann::json to_json(const NetworkShape& shape,
                              const NetworkParams& params) {
  check_consistent(params, shape);
  nlohmann::json j;
  j["format"] = "advreg-network";
  j["version"] = kNetworkFormatVersion;
  j["widths"] = shape.widths;
  j["output_bound"] = shape.output_bound;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : params.layers)
    j["layers"].push_back({{"weights", l.weights}, {"bias", l.bias}});
  return j;
}

inline std::pair<NetworkShape, NetworkParams> network_from_json(
    const nlohmann::json& j) {
  if (j.value("format", "") != "advreg-network")
    throw ConfigError("not an advreg-network record");
  if (j.value("version", 0) != kNetworkFormatVersion)
    throw ConfigError("unsupported network record version");
  NetworkShape shape;
  shape.widths = j.at("widths").get<std::vector<std::size_t>>();
  shape.output_bound = j.at("output_bound").get<double>();
  shape.validate();
  NetworkParams params = NetworkParams::zeros(shape);
  const auto& layers = j.at("layers");
  require(layers.size() == shape.depth(), "layer count mismatch in record");
  for (std::size_t l = 0; l < shape.depth(); ++l) {
    params.layers[l].weights = layers[l].at("weights").get<Vector>();
    params.layers[l].bias = layers[l].at("bias").get<Vector>();
  }
  check_consistent(params, shape);
  require(params.all_finite(), "non-finite parameter in record");
  return {shape, params};
}

inline void save_network(const std::string& path, const NetworkShape& shape,
                         const NetworkParams& params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << to_json(shape, params).dump() << '\n';
}

inline std::pair<NetworkShape, NetworkParams> load_network(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return network_from_json(nlohmann::json::parse(in));
}

}  // namespace advreg

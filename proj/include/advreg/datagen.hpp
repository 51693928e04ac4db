#pragma once

// Regression samples Y = f*(X) + noise for the benchmark target functions.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "common.hpp"

namespace advreg {

enum class TargetCase { case1, case2, case3, constant, prop1, custom };

inline std::string to_string(TargetCase c) {
  switch (c) {
    case TargetCase::case1: return "case1";
    case TargetCase::case2: return "case2";
    case TargetCase::case3: return "case3";
    case TargetCase::constant: return "constant";
    case TargetCase::prop1: return "prop1";
    case TargetCase::custom: return "custom";
  }
  return "?";
}

inline TargetCase target_case_from_string(const std::string& s) {
  for (TargetCase c : {TargetCase::case1, TargetCase::case2, TargetCase::case3,
                       TargetCase::constant, TargetCase::prop1, TargetCase::custom})
    if (to_string(c) == s) return c;
  throw ConfigError("unknown target case '" + s + "'");
}

/// Input dimension fixed by the case, or 0 when the caller chooses it.
inline std::size_t case_dimension(TargetCase c) {
  switch (c) {
    case TargetCase::case1: return 1;
    case TargetCase::case2: return 2;
    case TargetCase::case3: return 7;
    default: return 0;
  }
}

/// Step-with-ramp truth used by the two-atom inconsistency construction.
inline double prop1_true_function(ConstVec x) {
  const double x1 = x[0];
  if (x1 < 0.4) return -1.0;
  if (x1 > 0.6) return 1.0;
  return 10.0 * (x1 - 0.5);
}

inline double true_function(TargetCase c, ConstVec x, double constant = 0.0) {
  constexpr double pi = std::numbers::pi;
  const std::size_t fixed = case_dimension(c);
  require(fixed == 0 || x.size() == fixed,
          "input dimension does not match " + to_string(c));
  switch (c) {
    case TargetCase::case1:
      return 0.3 * std::sin(4.0 * pi * x[0]) - x[0] + 0.5;
    case TargetCase::case2:
      return std::sin(4.0 * pi * x[0]) + std::cos(2.0 * pi * x[1]);
    case TargetCase::case3:
      // x2^7 x3 + 0.1 >= 0.1 on the cube, so the log is always defined.
      return 2.0 / (x[0] + 0.01) + 3.0 * std::log(std::pow(x[1], 7) * x[2] + 0.1) * x[3] +
             0.1 * std::pow(x[4], 4) * x[5] * x[5] * x[6];
    case TargetCase::constant: return constant;
    case TargetCase::prop1: return prop1_true_function(x);
    case TargetCase::custom: break;
  }
  throw ContractError("custom targets have no built-in formula");
}

enum class NoiseKind { none, gaussian, uniform, student_t };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::none: return "none";
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::uniform: return "uniform";
    case NoiseKind::student_t: return "student_t";
  }
  return "?";
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
  for (NoiseKind k : {NoiseKind::none, NoiseKind::gaussian, NoiseKind::uniform,
                      NoiseKind::student_t})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown noise kind '" + s + "'");
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  double param = 0.0;  // variance (gaussian), half-width a (uniform), dof (student_t)
  double scale = 1.0;  // student_t only

  static NoiseSpec gaussian(double variance) { return {NoiseKind::gaussian, variance, 1.0}; }
  static NoiseSpec uniform(double half_width) { return {NoiseKind::uniform, half_width, 1.0}; }
  static NoiseSpec student_t(double dof, double scale) {
    return {NoiseKind::student_t, dof, scale};
  }
  static NoiseSpec none() { return {NoiseKind::none, 0.0, 1.0}; }
};

enum class InputDesign { uniform, dirac_mixture };

struct DataGenSpec {
  TargetCase target = TargetCase::case1;
  std::size_t dim = 0;  // required for constant/prop1/custom
  double constant = 0.0;
  std::function<double(ConstVec)> custom;
  std::size_t n = 100;
  NoiseSpec noise;
  // dirac_mixture: equal-weight atoms at (0.3, 0.5, ..., 0.5), (0.7, 0.5, ..., 0.5)
  InputDesign design = InputDesign::uniform;
  std::uint64_t seed = 0;

  std::size_t input_dim() const {
    const std::size_t fixed = case_dimension(target);
    return fixed != 0 ? fixed : dim;
  }
};

struct Dataset {
  PointSet inputs;
  Vector outputs;
  std::function<double(ConstVec)> truth;  // may be empty (e.g. imported data)

  std::size_t size() const { return outputs.size(); }
  std::size_t dim() const { return inputs.dim; }
};

inline std::function<double(ConstVec)> truth_function(const DataGenSpec& spec) {
  if (spec.target == TargetCase::custom) {
    require(static_cast<bool>(spec.custom), "custom target needs a function");
    return spec.custom;
  }
  const TargetCase c = spec.target;
  const double k = spec.constant;
  return [c, k](ConstVec x) { return true_function(c, x, k); };
}

inline std::array<Vector, 2> dirac_atoms(std::size_t d) {
  Vector a(d, 0.5), b(d, 0.5);
  a[0] = 0.3;
  b[0] = 0.7;
  return {a, b};
}

inline double draw_noise(const NoiseSpec& noise, Rng& rng) {
  switch (noise.kind) {
    case NoiseKind::none: return 0.0;
    case NoiseKind::gaussian:
      if (noise.param <= 0.0) return 0.0;
      return std::normal_distribution<double>(0.0, std::sqrt(noise.param))(rng);
    case NoiseKind::uniform:
      if (noise.param <= 0.0) return 0.0;
      return std::uniform_real_distribution<double>(-noise.param, noise.param)(rng);
    case NoiseKind::student_t:
      return noise.scale * std::student_t_distribution<double>(noise.param)(rng);
  }
  return 0.0;
}

inline Dataset sample(const DataGenSpec& spec) {
  const std::size_t d = spec.input_dim();
  require(d >= 1, "input dimension must be set for this target");
  require(spec.n >= 1, "sample size must be positive");
  require(spec.noise.param >= 0.0, "noise parameter must be non-negative");
  if (spec.noise.kind == NoiseKind::student_t)
    require(spec.noise.param > 0.0, "student-t degrees of freedom must be positive");

  Dataset data;
  data.truth = truth_function(spec);
  data.inputs = PointSet(spec.n, d);
  data.outputs.resize(spec.n);
  Rng xrng(stream_seed(spec.seed, 0xDA7A, 1));
  Rng nrng(stream_seed(spec.seed, 0xDA7A, 2));
  const auto atoms = dirac_atoms(d);
  for (std::size_t i = 0; i < spec.n; ++i) {
    MutVec x = data.inputs.row(i);
    if (spec.design == InputDesign::dirac_mixture) {
      const Vector& a = uniform01(xrng) < 0.5 ? atoms[0] : atoms[1];
      std::copy(a.begin(), a.end(), x.begin());
    } else {
      for (double& v : x) v = uniform01(xrng);
    }
  }
  for (std::size_t i = 0; i < spec.n; ++i)
    data.outputs[i] = data.truth(data.inputs.row(i)) + draw_noise(spec.noise, nrng);
  return data;
}

// ---- CSV (header x1..xd,y) -----------------------------------------------

inline void write_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.inputs.row(i)) out << v << ',';
    out << data.outputs[i] << '\n';
  }
}

inline Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty dataset CSV");
  std::size_t cols = 1;
  for (char c : line) cols += c == ',' ? 1 : 0;
  if (cols < 2) throw ConfigError("dataset CSV needs x1..xd,y columns");
  Dataset data;
  data.inputs.dim = cols - 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (c + 1 < cols) {
        if (v < 0.0 || v > 1.0) throw ConfigError("dataset input outside the unit cube");
        data.inputs.data.push_back(v);
      } else {
        data.outputs.push_back(v);
      }
      ++c;
    }
    if (c != cols) throw ConfigError("ragged dataset CSV row");
  }
  return data;
}

}  // namespace advreg

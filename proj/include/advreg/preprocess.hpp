#pragma once

// Pilot estimators Y_hat(x) used as surrogate labels at perturbed inputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "common.hpp"
#include "datagen.hpp"

namespace advreg {

class Preprocessor {
 public:
  virtual ~Preprocessor() = default;
  virtual double evaluate(ConstVec x) const = 0;
  virtual std::size_t dim() const = 0;
  /// Cap V on |Y_hat| over the domain.
  virtual double bound() const = 0;

  double operator()(ConstVec x) const { return evaluate(x); }
};

/// Mean response of the k nearest training inputs (Euclidean). Ties at equal
/// distance are resolved in favour of the lower sample index.
class KnnPreprocessor final : public Preprocessor {
 public:
  KnnPreprocessor(PointSet inputs, Vector outputs, std::size_t k)
      : inputs_(std::move(inputs)), outputs_(std::move(outputs)), k_(k) {
    require(k_ >= 1, "k must be at least 1");
    require(k_ <= outputs_.size(), "k must not exceed the number of samples");
    require(inputs_.size() == outputs_.size(), "inputs and outputs differ in length");
    for (double y : outputs_) bound_ = std::max(bound_, std::abs(y));
  }

  std::size_t k() const { return k_; }
  std::size_t dim() const override { return inputs_.dim; }
  double bound() const override { return bound_; }

  /// Indices of the k nearest samples, ordered by (distance, index).
  std::vector<std::size_t> neighbors(ConstVec x) const {
    require(x.size() == inputs_.dim, "query dimension does not match data");
    // Insertion into a sorted buffer of size k; k is small in practice.
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(k_ + 1);
    const std::size_t n = outputs_.size();
    const std::size_t d = inputs_.dim;
    const double* base = inputs_.data.data();
    for (std::size_t i = 0; i < n; ++i) {
      double dist = 0.0;
      const double* xi = base + i * d;
      for (std::size_t j = 0; j < d; ++j) {
        const double t = xi[j] - x[j];
        dist += t * t;
      }
      if (best.size() == k_ && !(dist < best.back().first)) continue;
      // scanning in index order: strict comparison keeps earlier indices first
      auto pos = std::upper_bound(best.begin(), best.end(), dist,
                                  [](double v, const auto& e) { return v < e.first; });
      best.insert(pos, {dist, i});
      if (best.size() > k_) best.pop_back();
    }
    std::vector<std::size_t> idx;
    idx.reserve(k_);
    for (const auto& e : best) idx.push_back(e.second);
    return idx;
  }

  double evaluate(ConstVec x) const override {
    double s = 0.0;
    for (std::size_t i : neighbors(x)) s += outputs_[i];
    return s / static_cast<double>(k_);
  }

 private:
  PointSet inputs_;
  Vector outputs_;
  std::size_t k_;
  double bound_ = 0.0;
};

inline std::shared_ptr<const KnnPreprocessor> fit_knn(const Dataset& data,
                                                      std::size_t k) {
  require(data.size() >= 1, "cannot fit on an empty dataset");
  if (k > data.size())
    throw ContractError("k = " + std::to_string(k) + " exceeds n = " +
                        std::to_string(data.size()));
  return std::make_shared<const KnnPreprocessor>(data.inputs, data.outputs, k);
}

/// Wraps a known function as a preprocessor (e.g. the exact truth).
class FunctionPreprocessor final : public Preprocessor {
 public:
  FunctionPreprocessor(std::size_t d, std::function<double(ConstVec)> f, double bound)
      : d_(d), f_(std::move(f)), bound_(bound) {}
  double evaluate(ConstVec x) const override { return f_(x); }
  std::size_t dim() const override { return d_; }
  double bound() const override { return bound_; }

 private:
  std::size_t d_;
  std::function<double(ConstVec)> f_;
  double bound_;
};

struct SplitData {
  Dataset pilot;     // used to fit the preprocessor
  Dataset training;  // used for the adversarial fit
};

/// Random half/half split; the first half (rounded down) goes to the pilot.
inline SplitData split_half(const Dataset& data, std::uint64_t seed) {
  require(data.size() >= 2, "need at least two samples to split");
  std::vector<std::size_t> perm(data.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(stream_seed(seed, 0x5B117));
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t half = data.size() / 2;
  SplitData out;
  for (Dataset* part : {&out.pilot, &out.training}) {
    part->inputs.dim = data.dim();
    part->truth = data.truth;
  }
  for (std::size_t r = 0; r < perm.size(); ++r) {
    Dataset& part = r < half ? out.pilot : out.training;
    const auto row = data.inputs.row(perm[r]);
    part.inputs.data.insert(part.inputs.data.end(), row.begin(), row.end());
    part.outputs.push_back(data.outputs[perm[r]]);
  }
  return out;
}

}  // namespace advreg

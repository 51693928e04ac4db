#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advreg {

using Vector = std::vector<double>;
using ConstVec = std::span<const double>;
using MutVec = std::span<double>;

/// Raised when a caller violates a documented precondition (dimension
/// mismatch, out-of-range hyperparameter, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for inconsistent or incomplete experiment/training configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an iterative procedure produces a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

/// Row-major dense matrix of samples: one row per point.
struct PointSet {
  std::size_t dim = 0;
  Vector data;

  PointSet() = default;
  PointSet(std::size_t rows, std::size_t d) : dim(d), data(rows * d, 0.0) {}

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  ConstVec row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  MutVec row(std::size_t i) { return {data.data() + i * dim, dim}; }
};

// SplitMix64 finalizer; used to derive independent per-stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(mix_seed(seed) ^ a) ^ b) ^ c);
}

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline PointSet sample_uniform_cube(std::size_t dim, std::size_t m,
                                    std::uint64_t seed) {
  PointSet pts(m, dim);
  Rng rng(seed);
  for (double& v : pts.data) v = uniform01(rng);
  return pts;
}

/// Pairwise (cascade) summation; order-independent of worker count.
inline double pairwise_sum(ConstVec v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace advreg

#include <gtest/gtest.h>

#include <random>

#include <advreg/network.hpp>

#include "oracles.hpp"

using namespace advreg;

namespace {

NetworkParams random_params(const NetworkShape& s, Rng& rng) {
  NetworkParams p = NetworkParams::zeros(s);
  std::normal_distribution<double> g(0.0, 0.7);
  p.for_each([&](double& v) { v = g(rng); });
  return p;
}

}  // namespace

TEST(Forward, IdentityNetwork) {
  NetworkShape s{{1, 1}, 1.0};
  NetworkParams p = NetworkParams::zeros(s);
  p.layers[0].weights[0] = 1.0;
  EXPECT_DOUBLE_EQ(forward(p, s, Vector{0.4}), 0.4);
}

TEST(Forward, ClampsToBound) {
  NetworkShape s{{1, 1}, 3.0};
  NetworkParams p = NetworkParams::zeros(s);
  p.layers[0].bias[0] = 5.0;
  EXPECT_DOUBLE_EQ(forward(p, s, Vector{0.2}), 3.0);
  p.layers[0].bias[0] = -5.0;
  EXPECT_DOUBLE_EQ(forward(p, s, Vector{0.2}), -3.0);
}

TEST(Forward, TwoLayerHandComputation) {
  NetworkShape s{{2, 2, 1}, 100.0};
  NetworkParams p = NetworkParams::zeros(s);
  p.layers[0].weights = {1.0, -2.0, 0.5, 0.25};
  p.layers[0].bias = {0.1, -0.3};
  p.layers[1].weights = {3.0, -1.5};
  p.layers[1].bias = {0.2};
  const double x0 = 0.6, x1 = 0.1;
  const double z0 = std::max(0.0, 1.0 * x0 - 2.0 * x1 + 0.1);    // 0.5
  const double z1 = std::max(0.0, 0.5 * x0 + 0.25 * x1 - 0.3);   // 0.025
  EXPECT_NEAR(forward(p, s, Vector{x0, x1}), 3.0 * z0 - 1.5 * z1 + 0.2, 1e-12);
}

TEST(Forward, MatchesOracleAndRespectsBound) {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto s = NetworkShape::mlp(3, 3, 8, 1.5);
    const auto p = random_params(s, rng);
    for (int q = 0; q < 20; ++q) {
      Vector x{uniform01(rng), uniform01(rng), uniform01(rng)};
      const double y = forward(p, s, x);
      EXPECT_NEAR(y, oracle::forward(p, s, x), 1e-12);
      EXPECT_LE(std::abs(y), 1.5);
    }
  }
}

TEST(Forward, DimensionMismatchThrows) {
  const auto s = NetworkShape::mlp(2, 3, 4, 10.0);
  const auto p = init(s, 1);
  EXPECT_THROW(forward(p, s, Vector{0.1}), ContractError);
  EXPECT_THROW(forward(p, s, Vector{0.1, 0.2, 0.3}), ContractError);
}

TEST(Forward, PiecewiseLinearAlongLines) {
  Rng rng(11);
  const auto s = NetworkShape::mlp(2, 3, 10, 100.0);
  const auto p = init(s, 3);
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    Vector x{0.2 + 0.6 * uniform01(rng), 0.2 + 0.6 * uniform01(rng)};
    Vector v{uniform01(rng) - 0.5, uniform01(rng) - 0.5};
    const double e = 1e-6;
    double margin = 0.0;
    oracle::forward(p, s, x, &margin);
    if (margin < 1e-3) continue;
    auto at = [&](double tt) { return forward(p, s, Vector{x[0] + tt * v[0], x[1] + tt * v[1]}); };
    EXPECT_NEAR(at(e) - 2.0 * at(0.0) + at(-e), 0.0, 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(Shape, ValidatesBoundAndOutputWidth) {
  EXPECT_THROW((NetworkShape{{2, 3, 2}, 10.0}.validate()), ContractError);
  EXPECT_THROW((NetworkShape{{2, 1}, 0.5}.validate()), ContractError);
  EXPECT_THROW((NetworkShape{{2}, 10.0}.validate()), ContractError);
  EXPECT_NO_THROW((NetworkShape{{2, 1}, 1.0}.validate()));
  const auto s = NetworkShape::mlp(4, 3, 40, 1000.0);
  EXPECT_EQ(s.widths, (std::vector<std::size_t>{4, 40, 40, 1}));
  EXPECT_EQ(s.depth(), 3u);
}

TEST(Backward, LinearInputGradient) {
  NetworkShape s{{1, 1}, 10.0};
  NetworkParams p = NetworkParams::zeros(s);
  p.layers[0].weights[0] = 2.0;
  const auto g = backward(p, s, Vector{0.3}, 0.7);
  EXPECT_DOUBLE_EQ(g.input_grad[0], 2.0 * 0.7);
  EXPECT_DOUBLE_EQ(g.param_grads.layers[0].weights[0], 0.3 * 0.7);
  EXPECT_DOUBLE_EQ(g.param_grads.layers[0].bias[0], 0.7);
}

TEST(Backward, SaturatedOutputHasZeroGradient) {
  const auto s = NetworkShape::mlp(2, 3, 5, 1.0);
  auto p = init(s, 2);
  p.layers.back().bias[0] = 50.0;
  const auto g = backward(p, s, Vector{0.3, 0.6}, 1.0);
  for (double v : g.input_grad) EXPECT_EQ(v, 0.0);
  g.param_grads.for_each([](double v) { EXPECT_EQ(v, 0.0); });
}

TEST(Backward, ReluKinkSubgradientIsZero) {
  NetworkShape s{{1, 1, 1}, 10.0};
  NetworkParams p = NetworkParams::zeros(s);
  p.layers[0].weights[0] = 1.0;  // z = x, kink at 0
  p.layers[1].weights[0] = 1.0;
  const auto g = backward(p, s, Vector{0.0}, 1.0);
  EXPECT_EQ(g.input_grad[0], 0.0);
  EXPECT_EQ(g.param_grads.layers[0].weights[0], 0.0);
}

TEST(Backward, MatchesCentralDifferences) {
  Rng rng(2024);
  constexpr double step = 1e-5;
  int nets = 0;
  while (nets < 20) {
    const std::size_t d = 1 + rng() % 4;
    const auto s = NetworkShape::mlp(d, 3, 2 + rng() % 15, 1000.0);
    NetworkParams p = random_params(s, rng);
    Vector x(d);
    for (double& v : x) v = uniform01(rng);
    double margin = 0.0;
    oracle::forward(p, s, x, &margin);
    if (margin < 1e-3) continue;
    ++nets;
    const auto g = backward(p, s, x, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
      Vector up = x, dn = x;
      up[j] += step;
      dn[j] -= step;
      const double fd = (oracle::forward(p, s, up) - oracle::forward(p, s, dn)) / (2 * step);
      EXPECT_TRUE(oracle::close_rel(g.input_grad[j], fd, 1e-4)) << g.input_grad[j] << " vs " << fd;
    }
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto check = [&](Vector& vals, const Vector& grads) {
        for (std::size_t i = 0; i < vals.size(); ++i) {
          const double keep = vals[i];
          vals[i] = keep + step;
          const double up = oracle::forward(p, s, x);
          vals[i] = keep - step;
          const double dn = oracle::forward(p, s, x);
          vals[i] = keep;
          const double fd = (up - dn) / (2 * step);
          EXPECT_TRUE(oracle::close_rel(grads[i], fd, 1e-4)) << grads[i] << " vs " << fd;
        }
      };
      check(p.layers[l].weights, g.param_grads.layers[l].weights);
      check(p.layers[l].bias, g.param_grads.layers[l].bias);
    }
  }
}

TEST(Backward, AccumulatesIntoExistingGradient) {
  const auto s = NetworkShape::mlp(2, 3, 4, 100.0);
  const auto p = init(s, 5);
  NetworkModel m(s, p);
  NetworkParams acc = NetworkParams::zeros(s);
  m.accumulate_param_grad(Vector{0.2, 0.4}, 1.0, acc);
  m.accumulate_param_grad(Vector{0.2, 0.4}, 1.0, acc);
  const auto once = backward(p, s, Vector{0.2, 0.4}, 2.0);
  EXPECT_EQ(acc, once.param_grads);
}

TEST(Init, DeterministicPerSeed) {
  const auto s = NetworkShape::mlp(3, 3, 16, 100.0);
  EXPECT_EQ(init(s, 42), init(s, 42));
  EXPECT_NE(init(s, 42), init(s, 43));
  for (const auto& l : init(s, 42).layers)
    for (double b : l.bias) EXPECT_EQ(b, 0.0);
}

TEST(Init, HeVariance) {
  const std::size_t fan_in = 50;
  const auto s = NetworkShape::mlp(fan_in, 2, 400, 100.0);
  const auto p = init(s, 9);
  const Vector& w = p.layers[0].weights;  // 20000 draws
  ASSERT_GE(w.size(), 10000u);
  double mean = 0.0, ss = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  for (double v : w) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(w.size() - 1);
  EXPECT_NEAR(var, 2.0 / fan_in, 0.2 * 2.0 / fan_in);
}

TEST(Serialization, RoundTrip) {
  const auto s = NetworkShape::mlp(3, 3, 6, 250.0);
  const auto p = init(s, 77);
  const auto [s2, p2] = network_from_json(nlohmann::json::parse(to_json(s, p).dump()));
  EXPECT_EQ(s, s2);
  EXPECT_EQ(p, p2);
}

TEST(Serialization, RejectsForeignRecords) {
  EXPECT_THROW(network_from_json(nlohmann::json{{"format", "other"}}), ConfigError);
  auto j = to_json(NetworkShape::mlp(1, 2, 2, 10.0), init(NetworkShape::mlp(1, 2, 2, 10.0), 1));
  j["version"] = 99;
  EXPECT_THROW(network_from_json(j), ConfigError);
}

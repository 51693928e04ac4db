// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <advreg/advreg.hpp>

#include "oracles.hpp"

using namespace advreg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(Vector v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail, double secs) {
  std::printf("[%s] criterion %d: %s | %s | %.1f s\n", pass ? "PASS" : "FAIL", id, name,
              detail.c_str(), secs);
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void gradient_correctness() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  std::normal_distribution<double> bias(0.0, 0.5);
  constexpr double step = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0, nets = 0, bad = 0;
  while (nets < 50) {
    const std::size_t d = 1 + rng() % 4;
    const std::size_t width = 1 + rng() % 16;
    const auto shape = NetworkShape::mlp(d, 3, width, 1000.0);
    NetworkParams p = init(shape, rng());
    for (auto& l : p.layers)
      for (double& b : l.bias) b = bias(rng);
    Vector x(d);
    double margin = 0.0;
    int tries = 0;
    do {
      for (double& v : x) v = uniform01(rng);
      oracle::forward(p, shape, x, &margin);
    } while (margin < 1e-3 && ++tries < 50);
    if (margin < 1e-3) continue;  // every probe near a kink; draw another net
    ++nets;
    const auto g = backward(p, shape, x, 1.0);
    auto compare = [&](double ad, double fd) {
      ++checked;
      const double err = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-4});
      worst = std::max(worst, err);
      if (!oracle::close_rel(ad, fd, 1e-4, 1e-8)) ++bad;
    };
    for (std::size_t j = 0; j < d; ++j) {
      Vector up = x, dn = x;
      up[j] += step;
      dn[j] -= step;
      compare(g.input_grad[j],
              (oracle::forward(p, shape, up) - oracle::forward(p, shape, dn)) / (2 * step));
    }
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto sweep = [&](Vector& vals, const Vector& grads) {
        for (std::size_t i = 0; i < vals.size(); ++i) {
          const double keep = vals[i];
          vals[i] = keep + step;
          const double up = oracle::forward(p, shape, x);
          vals[i] = keep - step;
          const double dn = oracle::forward(p, shape, x);
          vals[i] = keep;
          compare(grads[i], (up - dn) / (2 * step));
        }
      };
      sweep(p.layers[l].weights, g.param_grads.layers[l].weights);
      sweep(p.layers[l].bias, g.param_grads.layers[l].bias);
    }
  }
  const double secs = seconds_since(t0);
  report(1, "gradient correctness", bad == 0 && secs < 10.0,
         fmt("50 nets, %zu gradients, %zu outside rel tol 1e-4, max rel err %.2e", checked, bad, worst),
         secs);
}

void inner_max_oracle() {
  const auto t0 = Clock::now();
  const auto spec = PerturbationSpec::with_radius(0.125);
  const LossSpec sq = LossSpec::squared();
  Rng rng(77);
  double worst = 0.0;
  std::size_t bad = 0;
  for (int t = 0; t < 20; ++t) {
    const auto shape = NetworkShape::mlp(1, 3, 16, 1000.0);
    const auto params = init(shape, 500 + t);
    NetworkModel m(shape, params);
    const double c = uniform01(rng), y = 2.0 * uniform01(rng) - 1.0;
    Rng prng(stream_seed(t, 1));
    const double pgd = pgd_maximize(m, sq, ConstantTarget{y}, Vector{c}, spec, prng).value;
    const double grid = oracle::grid_max_1d(
        [&](double x) {
          const double r = y - oracle::forward(params, shape, Vector{x});
          return r * r;
        },
        std::max(0.0, c - 0.125), std::min(1.0, c + 0.125), 10000);
    const double gap = (grid - pgd) / (1.0 + grid);
    worst = std::max(worst, gap);
    if (gap > 1e-2) ++bad;
  }
  const double secs = seconds_since(t0);
  report(2, "inner-max oracle equivalence", bad == 0 && secs < 30.0,
         fmt("20 nets, worst (grid - pgd)/(1 + grid) = %.2e, %zu over 1e-2", worst, bad), secs);
}

void proposition1() {
  const auto t0 = Clock::now();
  using namespace prop1;
  const auto inst = make_instance(200, 1, 0);
  const auto c = closed_form_minimizer(inst);
  const double best = piecewise_adversarial_risk(inst, c);
  double grid_min = 1e300;
  for (int i = 0; i <= 60; ++i)
    for (int j = 0; j <= 60; ++j)
      for (int k = 0; k <= 60; ++k)
        grid_min = std::min(grid_min, piecewise_adversarial_risk(
                                          inst, {-1.5 + 0.05 * i, -1.5 + 0.05 * j, -1.5 + 0.05 * k}));
  const bool a = grid_min >= best - 1e-9;

  const auto model = piecewise_model(c, 1);
  const double l2 = l2_risk_at_atoms([&](ConstVec x) { return model.value(x); }, 1);
  const bool b = std::abs(l2 - l2_risk_prop1(c.c2)) <= 1e-12 && l2 >= 1.0;

  Vector ord_l2, pre_l2, ratio;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto row = run_demo(200, seed);
    ord_l2.push_back(row.ordinary_l2);
    pre_l2.push_back(row.preprocessed_l2);
    ratio.push_back(row.ordinary_risk / row.oracle_risk);
  }
  const double mo = median(ord_l2), mp = median(pre_l2);
  const bool cc = mo >= 0.5 && mp <= 0.2;
  const double secs = seconds_since(t0);
  report(3, "Proposition-1 reproduction", a && b && cc && secs < 300.0,
         fmt("(a) %s min grid risk %.6f vs oracle %.6f; (b) %s L2 %.12f = 1 + c2^2 (c2 = %.5f); "
             "(c) %s median L2 ordinary %.4f (>= 0.5), preprocessed %.4f (<= 0.2); "
             "median trained/oracle adversarial risk %.4f",
             a ? "ok" : "FAIL", grid_min, best, b ? "ok" : "FAIL", l2, c.c2, cc ? "ok" : "FAIL", mo,
             mp, median(ratio)),
         secs);
}

void case1_trend() {
  const auto t0 = Clock::now();
  ExperimentConfig cfg = load_experiment(ADVREG_SOURCE_DIR "/configs/case1.json");
  cfg.sweep.cases = {TargetCase::case1};
  cfg.sweep.sample_sizes = {400, 1600};
  cfg.sweep.noise_variances = {0.01};
  cfg.sweep.schemes = {Scheme::adversarial_preprocessed};
  cfg.sweep.seeds = {0, 1, 2, 3, 4};
  const auto res = run_experiment(cfg);
  Vector at400, at1600;
  for (const auto& r : res.detail) {
    if (!r.ok()) continue;
    (r.n == 400 ? at400 : at1600).push_back(r.sup_risk);
  }
  const bool complete = at400.size() == 5 && at1600.size() == 5;
  const double m400 = complete ? median(at400) : NAN, m1600 = complete ? median(at1600) : NAN;
  const double secs = seconds_since(t0);
  report(4, "Case 1 trend (preprocessed, sigma2 = 0.01)", complete && m1600 < m400 && secs < 900.0,
         fmt("median sup-risk n=400: %.4f, n=1600: %.4f (h = %.3f, k = %zu, width %zu, %zu epochs)",
             m400, m1600, cfg.training.perturbation.radius, cfg.training.preprocessing.k,
             cfg.training.architecture.width, cfg.training.epochs),
         secs);
}

void corner_volume() {
  const auto t0 = Clock::now();
  struct Case {
    double p;
    std::size_t d;
    double h;
  };
  std::string detail;
  bool ok = true;
  for (const Case c : {Case{kInfNorm, 2, 0.5}, Case{2.0, 2, 0.3}, Case{1.0, 3, 0.4}}) {
    Rng rng(stream_seed(99, c.d, static_cast<std::uint64_t>(c.h * 10)));
    const Vector corner(c.d, 0.0);
    Vector x(c.d);
    std::size_t hit = 0;
    constexpr std::size_t n = 1000000;
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : x) v = c.h * uniform01(rng);
      hit += lp_distance(x, corner, c.p) <= c.h;
    }
    // samples drawn from the bounding box [0, h]^d
    const double mc = std::pow(c.h, static_cast<double>(c.d)) * static_cast<double>(hit) / n;
    const double v = lp_corner_volume(c.p, c.d, c.h);
    const double rel = std::abs(v - mc) / mc;
    ok = ok && rel <= 0.01;
    detail += fmt("(p=%s,d=%zu,h=%.1f) %.6f vs MC %.6f rel %.4f; ", std::isinf(c.p) ? "inf" : fmt("%g", c.p).c_str(),
                  c.d, c.h, v, mc, rel);
  }
  const double secs = seconds_since(t0);
  report(5, "corner-volume constant", ok && secs < 10.0, detail, secs);
}

void rate_fit() {
  const auto t0 = Clock::now();
  Vector ns{400, 800, 1200, 1600}, exact;
  for (double n : ns) exact.push_back(std::pow(n, -2.0 / 3.0));
  const double e1 = fit_rate(ns, exact).fitted_exponent;
  Rng rng(314);
  std::normal_distribution<double> noise(0.0, 0.05);
  Vector ns2, noisy;
  for (double n = 100; n <= 25600; n *= 2) {
    ns2.push_back(n);
    noisy.push_back(std::pow(n, -0.5) * (1.0 + noise(rng)));
  }
  const double e2 = fit_rate(ns2, noisy).fitted_exponent;
  const bool ok = std::abs(e1 - 2.0 / 3.0) <= 1e-9 && e2 >= 0.4 && e2 <= 0.6;
  report(6, "rate-fit exactness", ok,
         fmt("exact n^-2/3 -> %.12f (err %.1e); 5%% noisy n^-1/2 -> %.4f", e1, std::abs(e1 - 2.0 / 3.0), e2),
         seconds_since(t0));
}

void risk_domination() {
  const auto t0 = Clock::now();
  Rng rng(2718);
  std::size_t bad = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + rng() % 3;
    const double a = 4 * uniform01(rng) - 2, b = 12 * uniform01(rng), c = 2 * uniform01(rng) - 1;
    const ScalarFn fstar = [](ConstVec x) { return std::sin(3.0 * x[0]) + x[x.size() - 1]; };
    const ScalarFn fhat = [=](ConstVec x) { return a * std::cos(b * x[0]) + c * x[x.size() - 1]; };
    const PointSet pts = sample_uniform_cube(d, 1000, stream_seed(t, 7));
    if (!(sup_abs_error(fhat, fstar, pts) >= lp_error(fhat, fstar, 2.0, pts))) ++bad;
  }
  report(7, "risk-estimator domination", bad == 0, fmt("100 pairs, %zu with sup < L2", bad),
         seconds_since(t0));
}

void assumption4() {
  const auto t0 = Clock::now();
  const auto ra = check_assumption4(LossSpec::absolute(), 5.0);
  const auto rq = check_assumption4(LossSpec::quantile(0.3), 5.0);
  const auto rc = check_assumption4(LossSpec::cauchy(1.0), 5.0);
  LossSpec wrong = LossSpec::cauchy(1.0);
  wrong.lower_const = 0.5;  // documented value is log(101)/100
  const auto rw = check_assumption4(wrong, 5.0);
  const bool ok = ra.passed() && rq.passed() && rc.passed() && !rw.passed();
  report(8, "Assumption-4 checker", ok,
         fmt("absolute %s, quantile(0.3) %s, cauchy(1) %s (c = %.5f, q = 2); cauchy with c = 0.5 %s "
             "(%zu lower-bound violations)",
             ra.passed() ? "pass" : "fail", rq.passed() ? "pass" : "fail",
             rc.passed() ? "pass" : "fail", LossSpec::cauchy(1.0).lower_const,
             rw.passed() ? "not flagged" : "flagged", rw.lower_bound_violations),
         seconds_since(t0));
}

std::string without_timing(const ExperimentResults& r) {
  ExperimentResults copy = r;
  for (auto* rows : {&copy.detail, &copy.aggregate})
    for (auto& row : *rows) row.wall_ms = 0.0;
  std::ostringstream os;
  write_results_csv(os, copy);
  return os.str();
}

void determinism() {
  const auto t0 = Clock::now();
  ExperimentConfig cfg = load_experiment(ADVREG_SOURCE_DIR "/configs/case1.json");
  cfg.training.epochs = 10;
  std::size_t jobs = 0;
  for (const auto& cell : expand(cfg)) jobs += cell.seeds.size();
  const std::string a = without_timing(run_experiment(cfg, {1, false, ""}));
  const std::string b = without_timing(run_experiment(cfg, {2, false, ""}));
  const double secs = seconds_since(t0);
  report(9, "determinism", a == b,
         fmt("desk grid of configs/case1.json (%zu runs, epochs reduced to %zu), 1 vs 2 workers: %s "
             "(%zu bytes)",
             jobs, cfg.training.epochs, a == b ? "byte-identical" : "DIFFERENT", a.size()),
         secs);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  gradient_correctness();
  inner_max_oracle();
  corner_volume();
  rate_fit();
  risk_domination();
  assumption4();
  proposition1();
  case1_trend();
  determinism();
  std::printf("%d criteria failed\n", failures);
  return failures;
}

#pragma once

// Sweep runner for the simulation study: JSON configuration, per-seed
// training/evaluation jobs, and the results CSV (detail + aggregate rows).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "datagen.hpp"
#include "network.hpp"
#include "riskeval.hpp"
#include "train.hpp"

namespace advreg {

using nlohmann::json;

struct Sweep {
  std::vector<TargetCase> cases{TargetCase::case1};
  std::vector<std::size_t> sample_sizes{400, 1600};
  std::vector<double> noise_variances{0.0001, 0.01, 1.0};
  std::vector<Scheme> schemes{Scheme::adversarial_ordinary, Scheme::adversarial_preprocessed,
                              Scheme::least_squares};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string output_dir;  // empty: $ADVREG_OUTPUT_DIR, else "results"
  bool plot = true;
  bool save_networks = false;
  std::size_t eval_points = 10000;
  Sweep sweep;                    // desk-scale grid
  std::optional<Sweep> full_sweep;  // selected by --full-grid
  TrainConfig training;           // scheme and seed are set per cell
};

/// One (case, n, sigma^2, scheme) combination with its seeds.
struct Cell {
  TargetCase target = TargetCase::case1;
  std::size_t n = 0;
  double sigma2 = 0.0;
  Scheme scheme = Scheme::adversarial_preprocessed;
  std::vector<std::uint64_t> seeds;
  TrainConfig training;
};

// ---- JSON ----------------------------------------------------------------

namespace detail {

inline json order_to_json(double p) { return std::isinf(p) ? json("inf") : json(p); }

inline double order_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInfNorm;
    throw ConfigError("norm order must be a number or \"inf\"");
  }
  return j.get<double>();
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

inline json to_json(const LossSpec& l) {
  return {{"kind", to_string(l.kind)},     {"param", l.param},
          {"lipschitz", l.lipschitz},      {"lower_const", l.lower_const},
          {"lower_exp", l.lower_exp}};
}

inline LossSpec loss_from_json(const json& j) {
  const LossKind kind = loss_kind_from_string(j.at("kind").get<std::string>());
  const double param = detail::get_or(j, "param", 0.0);
  LossSpec l;
  switch (kind) {
    case LossKind::squared: l = LossSpec::squared(); break;
    case LossKind::absolute: l = LossSpec::absolute(); break;
    case LossKind::quantile: l = LossSpec::quantile(param); break;
    case LossKind::cauchy: l = LossSpec::cauchy(param); break;
    case LossKind::huber: l = LossSpec::huber(param); break;
  }
  l.lipschitz = detail::get_or(j, "lipschitz", l.lipschitz);
  l.lower_const = detail::get_or(j, "lower_const", l.lower_const);
  l.lower_exp = detail::get_or(j, "lower_exp", l.lower_exp);
  return l;
}

inline json to_json(const PerturbationSpec& p) {
  return {{"radius", p.radius},
          {"order", detail::order_to_json(p.order)},
          {"steps", p.steps},
          {"step_size", p.step_size},
          {"restarts", p.restarts},
          {"method", p.method == InnerMaxMethod::grid ? "grid" : "pgd"},
          {"grid_points", p.grid_points}};
}

inline PerturbationSpec perturbation_from_json(const json& j) {
  const double h = j.at("radius").get<double>();
  PerturbationSpec p = PerturbationSpec::with_radius(
      h, j.contains("order") ? detail::order_from_json(j.at("order")) : kInfNorm);
  p.steps = detail::get_or(j, "steps", p.steps);
  p.step_size = detail::get_or(j, "step_size", p.step_size);
  p.restarts = detail::get_or(j, "restarts", p.restarts);
  const std::string method = detail::get_or<std::string>(j, "method", "pgd");
  if (method != "pgd" && method != "grid") throw ConfigError("unknown inner-max method " + method);
  p.method = method == "grid" ? InnerMaxMethod::grid : InnerMaxMethod::pgd;
  p.grid_points = detail::get_or(j, "grid_points", p.grid_points);
  return p;
}

inline json to_json(const TrainConfig& t) {
  return {
      {"architecture",
       {{"depth", t.architecture.depth},
        {"width", t.architecture.width},
        {"output_bound", t.architecture.output_bound}}},
      {"epochs", t.epochs},
      {"batch_size", t.batch_size},
      {"learning_rate", t.learning_rate},
      {"final_lr_fraction", t.final_lr_fraction},
      {"optimizer",
       {{"kind", t.optimizer.kind == OptimizerKind::adam ? "adam" : "sgd"},
        {"beta1", t.optimizer.beta1},
        {"beta2", t.optimizer.beta2},
        {"epsilon", t.optimizer.epsilon}}},
      {"loss", to_json(t.loss)},
      {"perturbation", to_json(t.perturbation)},
      {"preprocessing", {{"k", t.preprocessing.k}, {"split", t.preprocessing.split}}},
      {"warm_start", t.warm_start},
  };
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig t;
  if (j.contains("architecture")) {
    const json& a = j.at("architecture");
    t.architecture.depth = detail::get_or(a, "depth", t.architecture.depth);
    t.architecture.width = detail::get_or(a, "width", t.architecture.width);
    t.architecture.output_bound = detail::get_or(a, "output_bound", t.architecture.output_bound);
  }
  t.epochs = detail::get_or(j, "epochs", t.epochs);
  t.batch_size = detail::get_or(j, "batch_size", t.batch_size);
  t.learning_rate = detail::get_or(j, "learning_rate", t.learning_rate);
  t.final_lr_fraction = detail::get_or(j, "final_lr_fraction", t.final_lr_fraction);
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    const std::string kind = detail::get_or<std::string>(o, "kind", "adam");
    if (kind != "adam" && kind != "sgd") throw ConfigError("unknown optimizer " + kind);
    t.optimizer.kind = kind == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
    t.optimizer.beta1 = detail::get_or(o, "beta1", t.optimizer.beta1);
    t.optimizer.beta2 = detail::get_or(o, "beta2", t.optimizer.beta2);
    t.optimizer.epsilon = detail::get_or(o, "epsilon", t.optimizer.epsilon);
  }
  if (j.contains("loss")) t.loss = loss_from_json(j.at("loss"));
  if (j.contains("perturbation")) t.perturbation = perturbation_from_json(j.at("perturbation"));
  if (j.contains("preprocessing")) {
    t.preprocessing.k = detail::get_or(j.at("preprocessing"), "k", t.preprocessing.k);
    t.preprocessing.split = detail::get_or(j.at("preprocessing"), "split", t.preprocessing.split);
  }
  t.warm_start = detail::get_or(j, "warm_start", t.warm_start);
  return t;
}

inline json to_json(const Sweep& s) {
  json cases = json::array(), schemes = json::array();
  for (auto c : s.cases) cases.push_back(to_string(c));
  for (auto v : s.schemes) schemes.push_back(to_string(v));
  return {{"cases", cases},
          {"sample_sizes", s.sample_sizes},
          {"noise_variances", s.noise_variances},
          {"schemes", schemes},
          {"seeds", s.seeds}};
}

inline Sweep sweep_from_json(const json& j, const Sweep& base = {}) {
  Sweep s = base;
  if (j.contains("cases")) {
    s.cases.clear();
    for (const auto& c : j.at("cases")) s.cases.push_back(target_case_from_string(c.get<std::string>()));
  }
  if (j.contains("sample_sizes")) s.sample_sizes = j.at("sample_sizes").get<std::vector<std::size_t>>();
  if (j.contains("noise_variances"))
    s.noise_variances = j.at("noise_variances").get<std::vector<double>>();
  if (j.contains("schemes")) {
    s.schemes.clear();
    for (const auto& v : j.at("schemes")) s.schemes.push_back(scheme_from_string(v.get<std::string>()));
  }
  if (j.contains("seeds")) {
    const json& seeds = j.at("seeds");
    if (seeds.is_number_integer()) {
      // a count: seeds 0..count-1
      s.seeds.clear();
      for (std::uint64_t i = 0; i < seeds.get<std::uint64_t>(); ++i) s.seeds.push_back(i);
    } else {
      s.seeds = seeds.get<std::vector<std::uint64_t>>();
    }
  }
  return s;
}

inline json to_json(const ExperimentConfig& c) {
  json j{{"name", c.name},
         {"output_dir", c.output_dir},
         {"plot", c.plot},
         {"save_networks", c.save_networks},
         {"eval_points", c.eval_points},
         {"sweep", to_json(c.sweep)},
         {"training", to_json(c.training)}};
  if (c.full_sweep) j["full_sweep"] = to_json(*c.full_sweep);
  return j;
}

inline void validate(const ExperimentConfig& c) {
  auto check = [](const Sweep& s, const char* which) {
    const std::string w = which;
    if (s.cases.empty() || s.sample_sizes.empty() || s.noise_variances.empty() ||
        s.schemes.empty() || s.seeds.empty())
      throw ConfigError(w + ": every sweep axis needs at least one value");
    for (auto c : s.cases)
      if (case_dimension(c) == 0)
        throw ConfigError(w + ": only case1, case2 and case3 can be swept");
    for (auto n : s.sample_sizes)
      if (n < 2) throw ConfigError(w + ": sample sizes must be >= 2");
    for (auto v : s.noise_variances)
      if (!(v >= 0.0)) throw ConfigError(w + ": noise variances must be >= 0");
  };
  check(c.sweep, "sweep");
  if (c.full_sweep) check(*c.full_sweep, "full_sweep");
  if (c.eval_points < 1) throw ConfigError("eval_points must be >= 1");
  try {
    c.training.validate();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }
}

inline ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c;
  c.name = detail::get_or<std::string>(j, "name", c.name);
  c.output_dir = detail::get_or<std::string>(j, "output_dir", c.output_dir);
  c.plot = detail::get_or(j, "plot", c.plot);
  c.save_networks = detail::get_or(j, "save_networks", c.save_networks);
  c.eval_points = detail::get_or(j, "eval_points", c.eval_points);
  if (j.contains("sweep")) c.sweep = sweep_from_json(j.at("sweep"));
  if (j.contains("full_sweep")) c.full_sweep = sweep_from_json(j.at("full_sweep"), c.sweep);
  if (j.contains("training")) c.training = train_config_from_json(j.at("training"));
  validate(c);
  return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return experiment_from_json(json::parse(in, nullptr, true, /*ignore_comments=*/true));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline std::vector<Cell> expand(const ExperimentConfig& c, bool full_grid = false) {
  const Sweep& s = full_grid && c.full_sweep ? *c.full_sweep : c.sweep;
  std::vector<Cell> cells;
  for (auto target : s.cases)
    for (auto n : s.sample_sizes)
      for (auto sigma2 : s.noise_variances)
        for (auto scheme : s.schemes) {
          Cell cell{target, n, sigma2, scheme, s.seeds, c.training};
          cell.training.scheme = scheme;
          cells.push_back(std::move(cell));
        }
  return cells;
}

// ---- results -------------------------------------------------------------

struct ResultRow {
  std::string target;
  std::size_t n = 0;
  double sigma2 = 0.0;
  std::string scheme;
  std::string seed;  // numeric seed, or "agg" for aggregate rows
  double sup_risk = 0.0;
  double l2_risk = 0.0;
  double train_risk_final = 0.0;
  double wall_ms = 0.0;
  // aggregate rows only
  double sup_risk_std = 0.0;
  double l2_risk_std = 0.0;
  double train_risk_final_std = 0.0;
  std::size_t count = 0;
  std::string status = "ok";

  bool is_aggregate() const { return seed == "agg"; }
  bool ok() const { return status == "ok"; }
  auto key() const { return std::tie(target, n, sigma2, scheme); }
};

struct ExperimentResults {
  std::vector<ResultRow> detail;
  std::vector<ResultRow> aggregate;
  json metadata;

  bool all_ok() const {
    return std::all_of(detail.begin(), detail.end(), [](const ResultRow& r) { return r.ok(); });
  }
};

inline const std::vector<std::string>& results_columns() {
  static const std::vector<std::string> cols{
      "case",     "n",       "sigma2",           "scheme",  "seed",
      "sup_risk", "l2_risk", "train_risk_final", "wall_ms", "sup_risk_std",
      "l2_risk_std", "train_risk_final_std", "count", "status"};
  return cols;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Mean and sample standard deviation per cell over the successful rows.
inline std::vector<ResultRow> aggregate(const std::vector<ResultRow>& detail) {
  std::map<std::tuple<std::string, std::size_t, double, std::string>, std::vector<const ResultRow*>>
      groups;
  std::vector<std::tuple<std::string, std::size_t, double, std::string>> order;
  for (const auto& r : detail) {
    auto k = std::make_tuple(r.target, r.n, r.sigma2, r.scheme);
    if (!groups.contains(k)) order.push_back(k);
    auto& g = groups[k];
    if (r.ok()) g.push_back(&r);
  }
  std::vector<ResultRow> out;
  for (const auto& k : order) {
    const auto& rows = groups[k];
    ResultRow a;
    std::tie(a.target, a.n, a.sigma2, a.scheme) = k;
    a.seed = "agg";
    a.count = rows.size();
    a.status = rows.empty() ? "error: no successful seeds" : "ok";
    auto stats = [&](auto field, double& mean, double& sd) {
      mean = sd = 0.0;
      if (rows.empty()) return;
      Vector v;
      for (const auto* r : rows) v.push_back(r->*field);
      mean = pairwise_sum(v) / static_cast<double>(v.size());
      if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      }
    };
    double unused = 0.0;
    stats(&ResultRow::sup_risk, a.sup_risk, a.sup_risk_std);
    stats(&ResultRow::l2_risk, a.l2_risk, a.l2_risk_std);
    stats(&ResultRow::train_risk_final, a.train_risk_final, a.train_risk_final_std);
    stats(&ResultRow::wall_ms, a.wall_ms, unused);
    out.push_back(std::move(a));
  }
  return out;
}

inline std::string csv_line(const ResultRow& r) {
  std::ostringstream os;
  os << r.target << ',' << r.n << ',' << format_number(r.sigma2) << ',' << r.scheme << ','
     << r.seed << ',' << format_number(r.sup_risk) << ',' << format_number(r.l2_risk) << ','
     << format_number(r.train_risk_final) << ',' << format_number(std::round(r.wall_ms)) << ',';
  if (r.is_aggregate())
    os << format_number(r.sup_risk_std) << ',' << format_number(r.l2_risk_std) << ','
       << format_number(r.train_risk_final_std) << ',' << r.count;
  else
    os << ",,,";
  std::string status = r.status;
  std::replace(status.begin(), status.end(), ',', ';');
  std::replace(status.begin(), status.end(), '\n', ' ');
  os << ',' << status;
  return os.str();
}

/// Metadata comment lines (prefixed '#'), header, detail rows, aggregate rows.
inline void write_results_csv(std::ostream& out, const ExperimentResults& res) {
  for (const auto& [k, v] : res.metadata.items()) out << "# " << k << ": " << v.dump() << '\n';
  const auto& cols = results_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : res.detail) out << csv_line(r) << '\n';
  for (const auto& r : res.aggregate) out << csv_line(r) << '\n';
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline ExperimentResults read_results_csv(std::istream& in) {
  ExperimentResults res;
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv(line);
    break;
  }
  if (header != results_columns()) throw ConfigError("not a results CSV (unexpected header)");
  auto num = [](const std::string& s) { return s.empty() ? 0.0 : std::stod(s); };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto c = split_csv(line);
    if (c.size() != header.size()) throw ConfigError("ragged results row: " + line);
    ResultRow r;
    r.target = c[0];
    r.n = static_cast<std::size_t>(std::stoull(c[1]));
    r.sigma2 = num(c[2]);
    r.scheme = c[3];
    r.seed = c[4];
    r.sup_risk = num(c[5]);
    r.l2_risk = num(c[6]);
    r.train_risk_final = num(c[7]);
    r.wall_ms = num(c[8]);
    r.sup_risk_std = num(c[9]);
    r.l2_risk_std = num(c[10]);
    r.train_risk_final_std = num(c[11]);
    r.count = c[12].empty() ? 0 : static_cast<std::size_t>(std::stoull(c[12]));
    r.status = c[13];
    (r.is_aggregate() ? res.aggregate : res.detail).push_back(std::move(r));
  }
  return res;
}

// ---- running -------------------------------------------------------------

struct RunOptions {
  std::size_t workers = 1;
  bool full_grid = false;
  std::string output_dir;  // overrides the config when non-empty
};

inline std::string resolve_output_dir(const ExperimentConfig& c, const RunOptions& opt) {
  if (!opt.output_dir.empty()) return opt.output_dir;
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv("ADVREG_OUTPUT_DIR"); env != nullptr && *env != '\0')
    return env;
  return "results";
}

inline std::uint64_t eval_seed(std::uint64_t seed) { return stream_seed(seed, 0xE7A1); }

struct JobOutput {
  ResultRow row;
  std::vector<EpochRecord> history;
  std::optional<std::pair<NetworkShape, NetworkParams>> network;
};

/// Trains one (cell, seed) and evaluates sup and L2 risks on a shared uniform
/// sample of `eval_points` points (seeded by the data seed only, so all schemes
/// see the same evaluation points).
inline JobOutput run_job(const Cell& cell, std::uint64_t seed, std::size_t eval_points) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  JobOutput out;
  ResultRow& r = out.row;
  r.target = to_string(cell.target);
  r.n = cell.n;
  r.sigma2 = cell.sigma2;
  r.scheme = to_string(cell.scheme);
  r.seed = std::to_string(seed);
  try {
    DataGenSpec gen;
    gen.target = cell.target;
    gen.n = cell.n;
    gen.noise = NoiseSpec::gaussian(cell.sigma2);
    gen.seed = seed;
    const Dataset data = sample(gen);
    TrainConfig cfg = cell.training;
    cfg.scheme = cell.scheme;
    cfg.seed = seed;
    const TrainResult fit = train(cfg, data);
    NetworkModel model(fit.shape, fit.params);
    const RiskReport rep = evaluate_risks([&](ConstVec x) { return model.value(x); }, data.truth,
                                          data.dim(), eval_points, eval_seed(seed));
    r.sup_risk = rep.sup_risk;
    r.l2_risk = rep.l2_risk;
    r.train_risk_final = empirical_risk(RiskContext::from(cfg), model, fit.training_data,
                                        fit.preprocessor.get());
    out.history = fit.history;
    out.network.emplace(fit.shape, fit.params);
  } catch (const std::exception& e) {
    r.status = std::string("error: ") + e.what();
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  return out;
}

inline json run_metadata(const ExperimentConfig& c, bool full_grid) {
  return {{"experiment", c.name},
          {"grid", full_grid && c.full_sweep ? "full" : "desk"},
          {"eval_points", c.eval_points},
          {"input_distribution", "uniform"},
          {"noise", "gaussian"},
          {"training", to_json(c.training)}};
}

/// Runs every (cell, seed) job over `workers` threads. Rows are sorted by
/// (case, n, sigma2, scheme, seed) regardless of completion order. When
/// `out_dir` is non-empty, per-run histories (and optionally networks) are
/// written below it.
inline ExperimentResults run_experiment(const ExperimentConfig& c, const RunOptions& opt = {},
                                        const std::string& out_dir = "") {
  validate(c);
  const auto cells = expand(c, opt.full_grid);
  std::vector<std::pair<const Cell*, std::uint64_t>> jobs;
  for (const auto& cell : cells)
    for (auto s : cell.seeds) jobs.emplace_back(&cell, s);

  std::vector<JobOutput> outputs(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++)
      outputs[j] = run_job(*jobs[j].first, jobs[j].second, c.eval_points);
  };
  {
    const std::size_t w = std::max<std::size_t>(1, std::min(opt.workers, jobs.size()));
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < w; ++i) pool.emplace_back(worker);
    worker();
  }

  ExperimentResults res;
  res.metadata = run_metadata(c, opt.full_grid);
  for (auto& o : outputs) res.detail.push_back(o.row);
  auto sort_key = [](const ResultRow& r) {
    return std::make_tuple(r.target, r.n, r.sigma2, r.scheme, std::stoull(r.seed));
  };
  std::sort(res.detail.begin(), res.detail.end(),
            [&](const ResultRow& a, const ResultRow& b) { return sort_key(a) < sort_key(b); });
  res.aggregate = aggregate(res.detail);

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "history");
    if (c.save_networks) fs::create_directories(fs::path(out_dir) / "networks");
    for (const auto& o : outputs) {
      if (!o.row.ok()) continue;
      const std::string stem = o.row.target + "_n" + std::to_string(o.row.n) + "_s2-" +
                               format_number(o.row.sigma2) + "_" + o.row.scheme + "_seed" +
                               o.row.seed;
      std::ofstream h(fs::path(out_dir) / "history" / (stem + ".csv"));
      write_history_csv(h, o.history);
      if (c.save_networks && o.network)
        save_network((fs::path(out_dir) / "networks" / (stem + ".json")).string(),
                     o.network->first, o.network->second);
    }
  }
  return res;
}

}  // namespace advreg

// advreg: experiment runner, Proposition-1 demo, rate fitting and plotting.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <advreg/advreg.hpp>

namespace fs = std::filesystem;
using namespace advreg;

namespace {

void write_atomically(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::string slug(double v) {
  std::string s = format_number(v);
  for (char& c : s)
    if (c == '+') c = 'p';
  return s;
}

ExperimentResults load_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_results_csv(in);
}

int cmd_run(const std::string& config_path, std::size_t workers, bool full_grid,
            const std::string& output_dir) {
  const ExperimentConfig cfg = load_experiment(config_path);
  RunOptions opt{workers, full_grid, output_dir};
  const std::string dir = resolve_output_dir(cfg, opt);
  const auto cells = expand(cfg, full_grid);
  std::size_t jobs = 0;
  for (const auto& c : cells) jobs += c.seeds.size();
  std::cerr << "running " << cells.size() << " cells, " << jobs << " jobs on " << workers
            << " worker(s); output in " << dir << '\n';

  const ExperimentResults res = run_experiment(cfg, opt, dir);
  std::ostringstream csv;
  write_results_csv(csv, res);
  write_atomically(fs::path(dir) / "results.csv", csv.str());

  if (cfg.plot) {
    std::map<std::pair<std::string, double>, std::size_t> groups;
    for (const auto& r : res.aggregate) ++groups[{r.target, r.sigma2}];
    for (const auto& [key, count] : groups) {
      PlotFilter f{key.first, key.second};
      try {
        write_atomically(fs::path(dir) / ("plot_" + key.first + "_s2-" + slug(key.second) + ".svg"),
                         emit_plot(res, f));
      } catch (const ConfigError& e) {
        std::cerr << "plot skipped for " << key.first << " sigma2=" << format_number(key.second)
                  << ": " << e.what() << '\n';
      }
    }
  }

  std::size_t failed = 0;
  for (const auto& r : res.detail)
    if (!r.ok()) {
      ++failed;
      std::cerr << "FAILED " << r.target << " n=" << r.n << " sigma2=" << format_number(r.sigma2)
                << ' ' << r.scheme << " seed=" << r.seed << ": " << r.status << '\n';
    }
  std::cout << (fs::path(dir) / "results.csv").string() << ": " << res.detail.size()
            << " rows, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

int cmd_prop1(std::size_t n, std::uint64_t seed, std::size_t seeds, std::size_t dim,
              const std::string& out_path) {
  std::ostringstream csv;
  csv << prop1::DemoRow::csv_header() << '\n';
  for (std::uint64_t s = seed; s < seed + seeds; ++s) {
    const auto row = prop1::run_demo(n, s, dim);
    csv << row.seed << ',' << format_number(row.oracle_risk) << ','
        << format_number(row.oracle_c2) << ',' << format_number(row.oracle_l2) << ','
        << format_number(row.ordinary_risk) << ',' << format_number(row.ordinary_l2) << ','
        << format_number(row.preprocessed_risk) << ',' << format_number(row.preprocessed_l2)
        << '\n';
  }
  if (out_path.empty() || out_path == "-")
    std::cout << csv.str();
  else
    write_atomically(out_path, csv.str());
  return 0;
}

// Plain two-column CSV: n,risk (header optional).
bool read_plain_pairs(const std::string& path, Vector& ns, Vector& risks) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() != 2) return false;
    try {
      std::size_t used = 0;
      const double a = std::stod(cells[0], &used);
      const double b = std::stod(cells[1]);
      ns.push_back(a);
      risks.push_back(b);
    } catch (const std::invalid_argument&) {
      if (!ns.empty()) return false;  // header only allowed first
    }
  }
  return !ns.empty();
}

int cmd_rate_fit(const std::string& path, const std::optional<std::string>& target,
                 const std::optional<double>& sigma2, const std::optional<std::string>& scheme,
                 const std::string& metric) {
  if (metric != "sup" && metric != "l2") throw ConfigError("metric must be sup or l2");
  {
    std::ifstream probe(path);
    if (!probe) throw ConfigError("cannot open " + path);
  }
  Vector ns, risks;
  if (read_plain_pairs(path, ns, risks)) {
    const RateFit fit = fit_rate(ns, risks);
    std::printf("exponent %.12g r_squared %.6f\n", fit.fitted_exponent, fit.r_squared);
    return 0;
  }
  const ExperimentResults res = load_results(path);
  const auto rows = select_aggregates(res, PlotFilter{target, sigma2});
  std::map<std::tuple<std::string, double, std::string>, std::pair<Vector, Vector>> groups;
  for (const auto& r : rows) {
    if (scheme && r.scheme != *scheme) continue;
    auto& g = groups[{r.target, r.sigma2, r.scheme}];
    g.first.push_back(static_cast<double>(r.n));
    g.second.push_back(metric == "sup" ? r.sup_risk : r.l2_risk);
  }
  if (groups.empty()) throw ConfigError("filter selects no aggregate rows");
  std::printf("case,sigma2,scheme,exponent,r_squared\n");
  for (const auto& [k, v] : groups) {
    const auto& [t, s2, sc] = k;
    if (v.first.size() < 2) {
      std::printf("%s,%s,%s,,\n", t.c_str(), format_number(s2).c_str(), sc.c_str());
      continue;
    }
    const RateFit fit = fit_rate(v.first, v.second);
    std::printf("%s,%s,%s,%.12g,%.6f\n", t.c_str(), format_number(s2).c_str(), sc.c_str(),
                fit.fitted_exponent, fit.r_squared);
  }
  return 0;
}

int cmd_plot(const std::string& path, const std::string& out, const std::optional<std::string>& target,
             const std::optional<double>& sigma2) {
  const std::string svg = emit_plot(load_results(path), PlotFilter{target, sigma2});
  if (out.empty() || out == "-")
    std::cout << svg;
  else
    write_atomically(out, svg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial nonparametric regression experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a simulation sweep from a JSON config");
  std::string config_path, output_dir;
  std::size_t workers = 1;
  bool full_grid = false;
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--workers,-j", workers, "Concurrent training jobs")->check(CLI::PositiveNumber);
  run->add_flag("--full-grid", full_grid, "Use the config's full_sweep instead of the desk sweep");
  run->add_option("--output-dir,-o", output_dir,
                  "Output directory (default: config, then $ADVREG_OUTPUT_DIR, then ./results)");

  auto* demo = app.add_subcommand("prop1-demo", "Oracle vs. trained networks on the two-atom construction");
  std::size_t n = 200, seeds = 1, dim = 1;
  std::uint64_t seed = 0;
  std::string demo_out;
  demo->add_option("--n", n, "Sample size")->check(CLI::Range(2, 1000000));
  demo->add_option("--seed", seed, "First seed");
  demo->add_option("--seeds", seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  demo->add_option("--dim", dim, "Input dimension")->check(CLI::PositiveNumber);
  demo->add_option("--output,-o", demo_out, "CSV path (default stdout)");

  auto* rate = app.add_subcommand("rate-fit", "Fit risk ~ n^-r on a log-log scale");
  std::string rate_csv, metric = "sup";
  std::optional<std::string> f_case, f_scheme;
  std::optional<double> f_sigma2;
  rate->add_option("csv", rate_csv, "Results CSV or plain n,risk CSV")->required();
  rate->add_option("--case", f_case, "Filter by case");
  rate->add_option("--sigma2", f_sigma2, "Filter by noise variance");
  rate->add_option("--scheme", f_scheme, "Filter by scheme");
  rate->add_option("--metric", metric, "sup or l2");

  auto* plot = app.add_subcommand("plot", "SVG of mean sup-risk against n");
  std::string plot_csv, plot_out;
  std::optional<std::string> p_case;
  std::optional<double> p_sigma2;
  plot->add_option("csv", plot_csv, "Results CSV")->required();
  plot->add_option("--output,-o", plot_out, "SVG path (default stdout)");
  plot->add_option("--case", p_case, "Filter by case");
  plot->add_option("--sigma2", p_sigma2, "Filter by noise variance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, workers, full_grid, output_dir);
    if (*demo) return cmd_prop1(n, seed, seeds, dim, demo_out);
    if (*rate) return cmd_rate_fit(rate_csv, f_case, f_sigma2, f_scheme, metric);
    if (*plot) return cmd_plot(plot_csv, plot_out, p_case, p_sigma2);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

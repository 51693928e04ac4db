#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <cstdlib>
#include <filesystem>
#include <regex>
#include <sstream>

#include <advreg/experiment.hpp>
#include <advreg/plot.hpp>

using namespace advreg;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.name = "tiny";
  c.eval_points = 200;
  c.sweep.cases = {TargetCase::case1};
  c.sweep.sample_sizes = {30};
  c.sweep.noise_variances = {0.01};
  c.sweep.schemes = {Scheme::adversarial_preprocessed};
  c.sweep.seeds = {0, 1};
  c.training.architecture = {3, 6, 1000.0};
  c.training.epochs = 2;
  return c;
}

std::string to_csv(const ExperimentResults& r) {
  std::ostringstream os;
  write_results_csv(os, r);
  return os.str();
}

std::string strip_wall(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') {
      auto cells = split_csv(line);
      if (cells.size() > 8) cells[8].clear();
      line.clear();
      for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
    }
    out += line + '\n';
  }
  return out;
}

ExperimentResults synthetic(std::size_t schemes, const std::vector<std::size_t>& ns) {
  ExperimentResults r;
  const char* names[] = {"adversarial_ordinary", "adversarial_preprocessed", "least_squares"};
  for (std::size_t s = 0; s < schemes; ++s)
    for (std::size_t n : ns)
      for (int seed = 0; seed < 3; ++seed) {
        ResultRow row;
        row.target = "case1";
        row.n = n;
        row.sigma2 = 0.01;
        row.scheme = names[s];
        row.seed = std::to_string(seed);
        row.sup_risk = (1.0 + 0.2 * static_cast<double>(s)) / std::sqrt(static_cast<double>(n)) +
                       0.001 * seed;
        row.l2_risk = row.sup_risk / 2;
        r.detail.push_back(row);
      }
  r.aggregate = aggregate(r.detail);
  return r;
}

}  // namespace

TEST(Config, CheckedInCase1ExpandsToFullGrid) {
  const auto cfg = load_experiment(ADVREG_SOURCE_DIR "/configs/case1.json");
  std::size_t jobs = 0;
  for (const auto& cell : expand(cfg, true)) jobs += cell.seeds.size();
  EXPECT_EQ(jobs, 360u);
  jobs = 0;
  for (const auto& cell : expand(cfg, false)) jobs += cell.seeds.size();
  EXPECT_EQ(jobs, 2u * 3 * 3 * 5);
  EXPECT_EQ(cfg.training.perturbation.radius, 0.125);
  EXPECT_EQ(cfg.training.preprocessing.k, 3u);
  EXPECT_EQ(cfg.training.architecture.width, 40u);
  EXPECT_EQ(cfg.eval_points, 10000u);
}

TEST(Config, RoundTrip) {
  auto cfg = load_experiment(ADVREG_SOURCE_DIR "/configs/case1.json");
  cfg.training.loss = LossSpec::quantile(0.3);
  cfg.training.perturbation = PerturbationSpec::with_radius(0.2, 2.0);
  const json once = to_json(cfg);
  const json twice = to_json(experiment_from_json(json::parse(once.dump())));
  EXPECT_EQ(once, twice);
}

TEST(Config, Errors) {
  EXPECT_THROW(load_experiment("/nonexistent/config.json"), ConfigError);
  json j = to_json(tiny_config());
  j["sweep"]["schemes"] = json::array({"bogus"});
  EXPECT_THROW(experiment_from_json(j), ConfigError);
  j = to_json(tiny_config());
  j["sweep"]["sample_sizes"] = json::array();
  EXPECT_THROW(experiment_from_json(j), ConfigError);
  j = to_json(tiny_config());
  j["training"]["epochs"] = 0;
  EXPECT_THROW(experiment_from_json(j), ConfigError);
  j = to_json(tiny_config());
  j["training"]["perturbation"]["order"] = "two";
  EXPECT_THROW(experiment_from_json(j), ConfigError);
}

TEST(Run, CountingContract) {
  const auto res = run_experiment(tiny_config());
  EXPECT_EQ(res.detail.size(), 2u);
  ASSERT_EQ(res.aggregate.size(), 1u);
  EXPECT_EQ(res.aggregate[0].count, 2u);
  EXPECT_TRUE(res.all_ok());
}

TEST(Run, FailedCellRecordedAndRunContinues) {
  auto cfg = tiny_config();
  cfg.sweep.sample_sizes = {2, 30};  // k = 3 > n = 2
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.detail.size(), 4u);
  EXPECT_FALSE(res.all_ok());
  std::size_t failed = 0;
  for (const auto& r : res.detail) failed += !r.ok();
  EXPECT_EQ(failed, 2u);
  for (const auto& a : res.aggregate) EXPECT_EQ(a.ok(), a.n == 30);
}

TEST(Run, DeterministicModuloWallTime) {
  auto cfg = tiny_config();
  cfg.sweep.schemes = {Scheme::adversarial_ordinary, Scheme::least_squares};
  const std::string a = to_csv(run_experiment(cfg, {1, false, ""}));
  const std::string b = to_csv(run_experiment(cfg, {2, false, ""}));
  EXPECT_EQ(strip_wall(a), strip_wall(b));
}

TEST(Run, WritesHistories) {
  const auto dir = std::filesystem::temp_directory_path() / "advreg_test_histories";
  std::filesystem::remove_all(dir);
  auto cfg = tiny_config();
  cfg.save_networks = true;
  run_experiment(cfg, {}, dir.string());
  EXPECT_TRUE(std::filesystem::exists(
      dir / "history" / "case1_n30_s2-0.01_adversarial_preprocessed_seed1.csv"));
  EXPECT_TRUE(std::filesystem::exists(
      dir / "networks" / "case1_n30_s2-0.01_adversarial_preprocessed_seed0.json"));
  std::filesystem::remove_all(dir);
}

TEST(Csv, HeaderAndRoundTrip) {
  const auto res = synthetic(2, {100, 200});
  const std::string csv = to_csv(res);
  std::istringstream in(csv);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first.rfind("case,n,sigma2,scheme,seed,sup_risk,l2_risk,train_risk_final,wall_ms", 0), 0u);
  std::istringstream again(csv);
  const auto back = read_results_csv(again);
  EXPECT_EQ(back.detail.size(), res.detail.size());
  EXPECT_EQ(back.aggregate.size(), res.aggregate.size());
  EXPECT_EQ(to_csv(back), csv);
}

TEST(Csv, AggregatesRecomputeFromDetail) {
  auto cfg = tiny_config();
  cfg.sweep.seeds = {0, 1, 2};
  std::istringstream in(to_csv(run_experiment(cfg)));
  const auto back = read_results_csv(in);
  const auto re = aggregate(back.detail);
  ASSERT_EQ(re.size(), back.aggregate.size());
  for (std::size_t i = 0; i < re.size(); ++i) {
    EXPECT_NEAR(re[i].sup_risk, back.aggregate[i].sup_risk, 1e-9 * re[i].sup_risk);
    EXPECT_NEAR(re[i].sup_risk_std, back.aggregate[i].sup_risk_std, 1e-8 * re[i].sup_risk);
    EXPECT_NEAR(re[i].l2_risk, back.aggregate[i].l2_risk, 1e-9 * re[i].l2_risk);
    EXPECT_EQ(re[i].count, back.aggregate[i].count);
  }
}

TEST(Csv, RejectsForeignHeader) {
  std::istringstream in("a,b,c\n1,2,3\n");
  EXPECT_THROW(read_results_csv(in), ConfigError);
}

TEST(OutputDir, Precedence) {
  ExperimentConfig c;
  ::setenv("ADVREG_OUTPUT_DIR", "/tmp/from_env", 1);
  EXPECT_EQ(resolve_output_dir(c, {}), "/tmp/from_env");
  c.output_dir = "from_config";
  EXPECT_EQ(resolve_output_dir(c, {}), "from_config");
  EXPECT_EQ(resolve_output_dir(c, {1, false, "from_flag"}), "from_flag");
  ::unsetenv("ADVREG_OUTPUT_DIR");
  EXPECT_EQ(resolve_output_dir(ExperimentConfig{}, {}), "results");
}

TEST(Plot, ElementCounts) {
  const std::string svg = emit_plot(synthetic(3, {400, 800, 1200, 1600}), {});
  auto count = [&](const std::string& pat) {
    const std::regex re(pat);
    return std::distance(std::sregex_iterator(svg.begin(), svg.end(), re), std::sregex_iterator());
  };
  EXPECT_EQ(count("<polyline "), 3);
  EXPECT_EQ(count("class=\"whisker\""), 12);
}

TEST(Plot, WellFormedXml) {
  const std::string svg = emit_plot(synthetic(3, {400, 1600}), PlotFilter{"case1", 0.01});
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  ASSERT_NO_THROW(boost::property_tree::read_xml(in, tree));
  EXPECT_EQ(tree.get_child("svg").count("polyline"), 3u);
}

TEST(Plot, MonotoneSeriesGivesMonotoneCoordinates) {
  const std::string svg = emit_plot(synthetic(1, {100, 400, 900, 1600}), {});
  const std::regex pts("points=\"([^\"]*)\"");
  std::smatch m;
  ASSERT_TRUE(std::regex_search(svg, m, pts));
  std::istringstream in(m[1].str());
  std::string pair;
  double px = -1, py = -1;
  while (in >> pair) {
    const double x = std::stod(pair.substr(0, pair.find(',')));
    const double y = std::stod(pair.substr(pair.find(',') + 1));
    EXPECT_GT(x, px);
    EXPECT_GT(y, py);  // decreasing risk: SVG y grows downward
    px = x;
    py = y;
  }
}

TEST(Plot, Errors) {
  EXPECT_THROW(emit_plot(synthetic(3, {400, 1600}), PlotFilter{"case2", std::nullopt}), ConfigError);
  EXPECT_THROW(emit_plot(synthetic(3, {400}), {}), ConfigError);
  EXPECT_THROW(emit_plot(ExperimentResults{}, {}), ConfigError);
}

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "lrsense/config.hpp"
#include "lrsense/experiments.hpp"
#include "lrsense/image.hpp"
#include "lrsense/stats.hpp"
#include "support/oracles.hpp"

using namespace lrsense;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lrsense_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentGrid tiny_grid(Problem p) {
  ExperimentGrid g;
  g.problem = p;
  g.n = 10;
  g.m = p == Problem::Sensing ? 200 : 60;
  g.m_val = g.m / 10;
  g.ranks = {1};
  g.sigma2s = {p == Problem::Sensing ? 0.1 : 1e-4};
  g.trials = 1;
  g.gd = default_gd(p);
  g.gd.iterations = 150;
  return g;
}

}  // namespace

TEST(Stats, MeanStddevMedian) {
  const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(stats::mean(x), 5.0);
  EXPECT_NEAR(stats::stddev(x), std::sqrt(32.0 / 7.0), 1e-14);
  EXPECT_DOUBLE_EQ(stats::median(x), 4.5);
  EXPECT_DOUBLE_EQ(stats::median(std::vector<double>{3, 1, 2}), 2.0);
}

TEST(Stats, RanksAverageTies) {
  const auto r = stats::ranks(std::vector<double>{10, 20, 20, 5});
  EXPECT_EQ(r, (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Stats, SpearmanKnownValues) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(stats::spearman(x, std::vector<double>{1, 4, 9, 16, 25}), 1.0);
  EXPECT_DOUBLE_EQ(stats::spearman(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0);
  // Hand computation: ranks of y are (2,1,4,3,5), sum d^2 = 4, rho = 1 - 6*4/(5*24).
  EXPECT_NEAR(stats::spearman(x, std::vector<double>{2, 1, 4, 3, 5}), 0.8, 1e-14);
}

TEST(Stats, FitRecoversExactLine) {
  const std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(-1.5 * v + 2.0);
  const auto fit = stats::fit_line(x, y);
  EXPECT_NEAR(fit.slope, -1.5, 1e-14);
  EXPECT_NEAR(fit.intercept, 2.0, 1e-14);
  EXPECT_NEAR(fit.half_width_95, 0.0, 1e-12);
}

TEST(Stats, FitHalfWidthUsesStudentT) {
  // x = 1..4, y = (1, 3, 2, 4): slope 0.8, SSE 1.8, Sxx 5, t_{0.975, 2} = 4.302652729911275.
  const auto fit = stats::fit_line(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4});
  EXPECT_NEAR(fit.slope, 0.8, 1e-14);
  EXPECT_NEAR(fit.slope_stderr, std::sqrt(1.8 / 2.0 / 5.0), 1e-14);
  EXPECT_NEAR(fit.half_width_95, 4.302652729911275 * std::sqrt(0.18), 1e-9);
}

TEST(Stats, FitNeedsThreePoints) {
  EXPECT_THROW(stats::fit_line(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
}

TEST(Config, ParsesCommentsListsAndOverrides) {
  std::istringstream in(
      "# run config\n"
      "problem = completion\n"
      "ranks = 1, 5, 10\n"
      "\n"
      "sigma2_values = 1e-5,2e-5  # trailing\n"
      "eta = +0.5\n");
  KeyValueConfig cfg = KeyValueConfig::parse(in);
  EXPECT_EQ(cfg.get_string("problem", ""), "completion");
  EXPECT_EQ(cfg.get_ints("ranks", {}), (std::vector<int>{1, 5, 10}));
  EXPECT_EQ(cfg.get_doubles("sigma2_values", {}), (std::vector<double>{1e-5, 2e-5}));
  EXPECT_DOUBLE_EQ(cfg.get_double("eta", 0.0), 0.5);
  EXPECT_EQ(cfg.get_int("missing", 7), 7);
  cfg.apply_override("eta=0.25");
  EXPECT_DOUBLE_EQ(cfg.get_double("eta", 0.0), 0.25);
}

TEST(Config, Errors) {
  std::istringstream bad_line("just words\n");
  EXPECT_THROW(KeyValueConfig::parse(bad_line), Error);
  std::istringstream bad_int("n = 5x\n");
  const KeyValueConfig cfg = KeyValueConfig::parse(bad_int);
  EXPECT_THROW(cfg.get_int("n", 0), Error);
  EXPECT_THROW(cfg.require_known({"m"}), Error);
  EXPECT_NO_THROW(cfg.require_known({"n"}));
  KeyValueConfig c2;
  EXPECT_THROW(c2.apply_override("novalue"), Error);
  EXPECT_THROW(KeyValueConfig::load("/nonexistent/lrsense.cfg"), Error);
}

TEST(Config, TextRoundTrip) {
  KeyValueConfig cfg;
  cfg.set("n", "50");
  cfg.set("ranks", "1, 2");
  std::istringstream in(cfg.to_text());
  const KeyValueConfig back = KeyValueConfig::parse(in);
  EXPECT_EQ(back.values(), cfg.values());
}

TEST(Image, PngSignatureWritten) {
  const auto dir = scratch("png");
  Eigen::MatrixXd m(2, 3);
  m << 0, 1, 2, 3, 4, std::nan("");
  image::write_heatmap_png(dir / "h.png", m, 4);
  image::write_log_curves_png(dir / "c.png", {{{1, 2, 3}, {1e-3, 1e-1, 10}, {255, 0, 0}}});
  for (const char* f : {"h.png", "c.png"}) {
    std::ifstream in(dir / f, std::ios::binary);
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    EXPECT_EQ(sig[1], 'P');
    EXPECT_EQ(sig[2], 'N');
    EXPECT_EQ(sig[3], 'G');
  }
  EXPECT_THROW(image::write_heatmap_png(dir / "e.png", Eigen::MatrixXd(0, 0)), Error);
}

TEST(Seeds, DerivationIsStableAndDistinct) {
  const TrialSeeds a = derive_trial_seeds(1, 5, 0, 0);
  const TrialSeeds b = derive_trial_seeds(1, 5, 0, 0);
  const TrialSeeds c = derive_trial_seeds(1, 5, 0, 1);
  EXPECT_EQ(a.truth.seed, b.truth.seed);
  EXPECT_NE(a.truth.seed, c.truth.seed);
  EXPECT_NE(a.truth.seed, a.noise.seed);
  auto mix = [](std::uint64_t x, std::uint64_t v) { return splitmix64(x ^ splitmix64(v)); };
  EXPECT_EQ(a.truth.seed, mix(mix(mix(mix(1, 5), 0), 0), hash_label("truth")));
}

TEST(Problem, Parsing) {
  EXPECT_EQ(parse_problem("sensing"), Problem::Sensing);
  EXPECT_EQ(parse_problem("completion"), Problem::Completion);
  EXPECT_THROW(parse_problem("phase-retrieval"), Error);
  EXPECT_EQ(parse_axis("m"), ScalingAxis::M);
  EXPECT_THROW(parse_axis("n"), Error);
}

TEST(Grid, ValidationRejectsBadGrids) {
  ExperimentGrid g = tiny_grid(Problem::Sensing);
  g.ranks = {11};
  EXPECT_THROW(g.validate(), Error);
  g = tiny_grid(Problem::Sensing);
  g.m_val = g.m;
  EXPECT_THROW(g.validate(), Error);
  g = tiny_grid(Problem::Completion);
  g.m = 101;
  EXPECT_THROW(g.validate(), Error);
  g = tiny_grid(Problem::Sensing);
  g.trials = 0;
  EXPECT_THROW(g.validate(), Error);
  g = tiny_grid(Problem::Sensing);
  g.sigma2s = {-1.0};
  EXPECT_THROW(g.validate(), Error);
}

TEST(Cell, FullScaleSensingCell) {
  ExperimentGrid g;
  g.ranks = {5};
  g.sigma2s = {0.1};
  g.gd = default_gd(Problem::Sensing);
  const TrialResult tr = run_cell(g, 5, 0, 0);
  EXPECT_FALSE(tr.failed);
  EXPECT_TRUE(std::isfinite(tr.error_at_t_hat));
  EXPECT_TRUE(std::isfinite(tr.error_at_t_tilde));
  EXPECT_LT(tr.t_hat, g.gd.iterations);
  EXPECT_GE(tr.gap, 0.0);
}

TEST(Cell, NoiselessColumn) {
  ExperimentGrid g = tiny_grid(Problem::Sensing);
  g.sigma2s = {0.0};
  g.gd.iterations = 400;
  const TrialResult tr = run_cell(g, 1, 0, 0);
  EXPECT_FALSE(tr.failed);
  EXPECT_LT(tr.error_at_t_hat, 1e-3);
  EXPECT_GT(tr.t_hat, g.gd.iterations / 2);
}

TEST(Cell, DeterministicReplay) {
  const ExperimentGrid g = tiny_grid(Problem::Completion);
  const TrialResult a = run_cell(g, 1, 0, 0);
  const TrialResult b = run_cell(g, 1, 0, 0);
  EXPECT_EQ(a.t_hat, b.t_hat);
  EXPECT_EQ(a.t_tilde, b.t_tilde);
  EXPECT_EQ(a.error_at_t_hat, b.error_at_t_hat);
  EXPECT_EQ(a.error_at_t_tilde, b.error_at_t_tilde);
  EXPECT_EQ(a.delta_val, b.delta_val);
}

TEST(Cell, DivergenceIsFlagged) {
  ExperimentGrid g = tiny_grid(Problem::Sensing);
  g.gd.eta = 500.0;
  g.gd.alpha = 1.0;
  const TrialResult tr = run_cell(g, 1, 0, 0);
  EXPECT_TRUE(tr.failed);
  EXPECT_FALSE(tr.failure.empty());
}

TEST(Grid, SingleCellReport) {
  const ExperimentGrid g = tiny_grid(Problem::Sensing);
  const GridReport rep = run_grid(g);
  ASSERT_EQ(rep.cells.size(), 1u);
  EXPECT_EQ(rep.cells[0].ok_trials, 1);
  EXPECT_EQ(rep.selected_heatmap.rows(), 1);
  EXPECT_EQ(rep.selected_heatmap.cols(), 1);
  EXPECT_TRUE(rep.spearman_vs_rank.empty());
  EXPECT_TRUE(rep.spearman_vs_sigma.empty());
  const auto dir = scratch("grid");
  write_grid_outputs(rep, dir, 0.8);
  for (const char* f : {"trials.csv", "cells.csv", "heatmap_oracle.csv", "heatmap_selected.csv", "heatmap_oracle.png",
                        "heatmap_selected.png", "report.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
}

TEST(Grid, WorkerCountDoesNotChangeResults) {
  ExperimentGrid g = tiny_grid(Problem::Completion);
  g.ranks = {1, 2};
  g.sigma2s = {1e-5, 1e-4};
  g.trials = 2;
  g.gd.iterations = 60;
  const GridReport one = run_grid(g);
  g.workers = 3;
  const GridReport three = run_grid(g);
  ASSERT_EQ(one.trials.size(), three.trials.size());
  for (std::size_t i = 0; i < one.trials.size(); ++i) {
    EXPECT_EQ(one.trials[i].error_at_t_hat, three.trials[i].error_at_t_hat);
  }
  EXPECT_TRUE(one.selected_heatmap == three.selected_heatmap);
}

TEST(Grid, AggregateSelectedDominatesOracle) {
  ExperimentGrid g = tiny_grid(Problem::Sensing);
  g.ranks = {1, 2};
  g.trials = 3;
  const GridReport rep = run_grid(g);
  for (const auto& c : rep.cells) EXPECT_GE(c.mean_selected, c.mean_oracle - c.mc_tolerance);
}

TEST(OverfitDemo, NoiselessSwitchesAssertionsOff) {
  OverfitDemoConfig demo = default_overfit_demo();
  demo.pipeline.n = 10;
  demo.pipeline.m = 200;
  demo.pipeline.m_val = 20;
  demo.pipeline.r_star = 2;
  demo.pipeline.gd.r = 10;
  demo.pipeline.sigma2 = 0.0;
  demo.pipeline.gd.iterations = 50;
  const OverfitReport rep = run_overfit_demo(demo);
  EXPECT_FALSE(rep.asserted);
  EXPECT_TRUE(rep.assertions.empty());
  EXPECT_TRUE(rep.passed());
}

TEST(OverfitDemo, ReplayGivesIdenticalCurves) {
  OverfitDemoConfig demo = default_overfit_demo();
  demo.pipeline.n = 12;
  demo.pipeline.m = 240;
  demo.pipeline.m_val = 24;
  demo.pipeline.r_star = 2;
  demo.pipeline.gd.r = 12;
  demo.pipeline.gd.iterations = 80;
  const OverfitReport a = run_overfit_demo(demo);
  const OverfitReport b = run_overfit_demo(demo);
  const auto dir_a = scratch("demo_a"), dir_b = scratch("demo_b");
  write_overfit_outputs(a, dir_a);
  write_overfit_outputs(b, dir_b);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  EXPECT_EQ(slurp(dir_a / "trajectory.csv"), slurp(dir_b / "trajectory.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir_a / "curves.png"));
}

TEST(Scaling, RejectsTooFewPointsOrTrials) {
  ScalingSpec s = default_scaling(ScalingAxis::Sigma2);
  s.values = {0.1, 0.2, 0.4};
  EXPECT_THROW(run_scaling_study(s), Error);
  s = default_scaling(ScalingAxis::Sigma2);
  s.trials = 9;
  EXPECT_THROW(run_scaling_study(s), Error);
}

TEST(Scaling, DefaultSweeps) {
  const ScalingSpec s = default_scaling(ScalingAxis::Sigma2);
  EXPECT_EQ(s.values, (std::vector<double>{0.1, 0.2, 0.4, 0.8}));
  EXPECT_DOUBLE_EQ(s.expected_slope, 1.0);
  EXPECT_DOUBLE_EQ(s.tolerance, 0.3);
  const ScalingSpec m = default_scaling(ScalingAxis::M);
  EXPECT_DOUBLE_EQ(m.expected_slope, -1.0);
  EXPECT_DOUBLE_EQ(m.tolerance, 0.4);
  EXPECT_EQ(default_scaling(ScalingAxis::Rank).values, (std::vector<double>{2, 4, 8, 16}));
}

TEST(RipProbe, SmallProbeProducesEstimates) {
  RipProbeSpec spec;
  spec.n = 10;
  spec.m = 300;
  spec.ks = {1, 2};
  spec.trials = 20;
  const RipProbeReport rep = run_rip_probe(spec);
  ASSERT_EQ(rep.estimates.size(), 2u);
  ASSERT_EQ(rep.bounds.size(), 2u);
  for (const auto& e : rep.estimates) EXPECT_EQ(e.trials, 20);
}

TEST(Workers, EnvironmentOverride) {
  ::setenv("LRSENSE_WORKERS", "3", 1);
  EXPECT_EQ(workers_from_env(1), 3);
  ::setenv("LRSENSE_WORKERS", "zero", 1);
  EXPECT_THROW(workers_from_env(1), Error);
  ::unsetenv("LRSENSE_WORKERS");
  EXPECT_EQ(workers_from_env(2), 2);
}

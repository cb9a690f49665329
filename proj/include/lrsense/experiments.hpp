#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrsense/config.hpp"
#include "lrsense/core.hpp"
#include "lrsense/operators.hpp"
#include "lrsense/recovery.hpp"
#include "lrsense/stats.hpp"
#include "lrsense/validation.hpp"

namespace lrsense {

enum class Problem { Sensing, Completion };

const char* to_string(Problem p);
Problem parse_problem(const std::string& s);

/// Gradient-descent settings shared by every run of an experiment. r == 0
/// means r = n.
struct GdTemplate {
  int r = 0;
  double eta = 0.5;
  double alpha = 1e-6;
  int iterations = 500;
  int record_every = 1;
};

/// Default step settings: sensing uses alpha = 1e-6, completion alpha = 1e-3.
GdTemplate default_gd(Problem p);

/// Independent streams for one end-to-end run.
struct TrialSeeds {
  RngSpec truth;
  RngSpec op;
  RngSpec noise;
  RngSpec split;
  RngSpec init;
};

/// base_seed folded through splitmix64 with (r*, sigma2 index, trial, label):
///   s = mix(mix(mix(mix(base, r*), sigma_index), trial), fnv1a(label))
/// where mix(a, b) = splitmix64(a ^ splitmix64(b)).
TrialSeeds derive_trial_seeds(std::uint64_t base_seed, int r_star, int sigma_index, int trial);

struct PipelineSpec {
  Problem problem = Problem::Sensing;
  int n = 50;
  int m = 1000;
  int m_val = 100;  // 0 disables the hold-out split
  int r_star = 5;
  double sigma2 = 0.0;
  GdTemplate gd;
  TrialSeeds seeds;
  bool record_phase = false;
};

/// Everything one run produces. Operators and vectors are kept so hooks and
/// follow-up checks can reference them.
struct PipelineRun {
  GroundTruth truth;
  Eigen::VectorXd noise;
  SensingOperator train_op;
  Eigen::VectorXd y_train;
  std::optional<SensingOperator> val_op;
  Eigen::VectorXd y_val;
  Eigen::VectorXd e_val;
  Trajectory trajectory;
  std::optional<SelectionResult> selection;
  /// Max over recorded iterates of the validation concentration deviation.
  std::optional<double> delta_val;
  std::optional<SelectionBound> bound;
};

/// Truth -> operator -> measurements -> split -> GD -> selection.
PipelineRun run_pipeline(const PipelineSpec& spec);

struct ExperimentGrid {
  Problem problem = Problem::Sensing;
  int n = 50;
  int m = 1000;
  int m_val = 100;
  std::vector<int> ranks;
  std::vector<double> sigma2s;
  int trials = 10;
  GdTemplate gd;
  std::uint64_t base_seed = 1;
  int workers = 1;

  void validate() const;
};

struct TrialResult {
  int r_star = 0;
  int sigma_index = 0;
  double sigma2 = 0.0;
  int trial = 0;
  TrialSeeds seeds;
  bool failed = false;
  std::string failure;
  int t_hat = 0;
  int t_tilde = 0;
  double error_at_t_hat = 0.0;
  double error_at_t_tilde = 0.0;
  double gap = 0.0;
  double kappa = 0.0;
  double delta_val = 0.0;
  double theoretical_delta_val = 0.0;
  SelectionBound bound;
};

/// One Monte-Carlo trial of one grid cell. Divergence and non-finite values
/// come back as a flagged result instead of an exception.
TrialResult run_cell(const ExperimentGrid& grid, int r_star, int sigma_index, int trial);

struct GridCellResult {
  int r_star = 0;
  double sigma2 = 0.0;
  int ok_trials = 0;
  int failed_trials = 0;
  double mean_oracle = 0.0;
  double std_oracle = 0.0;
  double mean_selected = 0.0;
  double std_selected = 0.0;
  double mean_gap = 0.0;
  double mc_tolerance = 0.0;  // 2 * standard error of the gap
};

struct GridReport {
  ExperimentGrid grid;
  std::vector<TrialResult> trials;  // ordered by (rank, sigma, trial)
  std::vector<GridCellResult> cells;  // ordered by (rank, sigma)
  Eigen::MatrixXd oracle_heatmap;    // ranks x sigma2s, NaN when a cell has no valid trial
  Eigen::MatrixXd selected_heatmap;
  std::vector<double> spearman_vs_rank;   // per sigma2 column
  std::vector<double> spearman_vs_sigma;  // per rank row
};

GridReport run_grid(const ExperimentGrid& grid);

/// Writes trials.csv, cells.csv, heatmap_{oracle,selected}.{csv,png} and report.json.
void write_grid_outputs(const GridReport& report, const std::filesystem::path& dir, double min_spearman);

struct OverfitDemoConfig {
  PipelineSpec pipeline;
  double max_final_ratio = 1.5;   // recovery_error(T) >= ratio * recovery_error(t_tilde)
  int max_valley_distance = 10;   // |index(t_hat) - index(t_tilde)| in recorded iterates
  double max_selected_ratio = 1.5;
};

OverfitDemoConfig default_overfit_demo();

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct OverfitReport {
  PipelineRun run;
  bool asserted = false;  // false when sigma = 0
  std::vector<Assertion> assertions;
  bool passed() const;
};

OverfitReport run_overfit_demo(const OverfitDemoConfig& config);
void write_overfit_outputs(const OverfitReport& report, const std::filesystem::path& dir);

enum class ScalingAxis { Sigma2, Rank, M };

const char* to_string(ScalingAxis a);
ScalingAxis parse_axis(const std::string& s);

struct ScalingSpec {
  ScalingAxis axis = ScalingAxis::Sigma2;
  std::vector<double> values;
  Problem problem = Problem::Sensing;
  int n = 50;
  int m = 1000;
  double val_fraction = 0.1;
  int r_star = 5;
  double sigma2 = 0.25;
  int trials = 10;
  GdTemplate gd;
  std::uint64_t base_seed = 1;
  int workers = 1;
  double expected_slope = 1.0;
  double tolerance = 0.3;
};

/// Default sweep for one axis with its expected exponent and tolerance.
ScalingSpec default_scaling(ScalingAxis axis);

struct ScalingPoint {
  double value = 0.0;
  double mean_selected = 0.0;
  double mean_oracle = 0.0;
  int ok_trials = 0;
};

struct ScalingReport {
  ScalingSpec spec;
  std::vector<ScalingPoint> points;
  std::vector<TrialResult> trials;
  stats::LinearFit fit;  // log(mean selected) vs log(value)
  bool slope_ok = false;
  int bound_checked = 0;
  int bound_violations = 0;
  int bound_vacuous = 0;
  int failed_trials = 0;
  bool passed() const { return slope_ok && bound_violations == 0 && failed_trials == 0; }
};

/// Throws InsufficientPoints unless there are >= 4 values and >= 10 trials.
ScalingReport run_scaling_study(const ScalingSpec& spec);
void write_scaling_outputs(const ScalingReport& report, const std::filesystem::path& dir);

struct RipProbeSpec {
  Problem problem = Problem::Sensing;
  int n = 50;
  int m = 1000;
  std::vector<int> ks{1, 2, 5};
  int trials = 200;
  std::uint64_t seed = 1;
  std::optional<double> max_delta;
};

struct RipProbeReport {
  RipProbeSpec spec;
  std::vector<RipEstimate> estimates;
  std::vector<PerturbationBounds> bounds;  // one random rank-k X and full-rank Z per k
  std::vector<Assertion> assertions;
  bool passed() const;
};

RipProbeReport run_rip_probe(const RipProbeSpec& spec);
void write_rip_outputs(const RipProbeReport& report, const std::filesystem::path& dir);

/// Worker count from LRSENSE_WORKERS, else the given fallback.
int workers_from_env(int fallback);

inline constexpr int kReportSchemaVersion = 1;

}  // namespace lrsense

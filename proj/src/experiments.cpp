#include "lrsense/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <thread>

#include "json.hpp"

#include "lrsense/image.hpp"

namespace lrsense {

using nlohmann::json;

const char* to_string(Problem p) { return p == Problem::Sensing ? "sensing" : "completion"; }

Problem parse_problem(const std::string& s) {
  if (s == "sensing") return Problem::Sensing;
  if (s == "completion") return Problem::Completion;
  throw Error(ErrorCode::InvalidConfig, "problem must be 'sensing' or 'completion', got '" + s + "'");
}

const char* to_string(ScalingAxis a) {
  switch (a) {
    case ScalingAxis::Sigma2: return "sigma2";
    case ScalingAxis::Rank: return "rank";
    case ScalingAxis::M: return "m";
  }
  return "?";
}

ScalingAxis parse_axis(const std::string& s) {
  if (s == "sigma2") return ScalingAxis::Sigma2;
  if (s == "rank") return ScalingAxis::Rank;
  if (s == "m") return ScalingAxis::M;
  throw Error(ErrorCode::InvalidConfig, "axis must be sigma2, rank or m, got '" + s + "'");
}

GdTemplate default_gd(Problem p) {
  GdTemplate g;
  g.alpha = p == Problem::Sensing ? 1e-6 : 1e-3;
  return g;
}

TrialSeeds derive_trial_seeds(std::uint64_t base_seed, int r_star, int sigma_index, int trial) {
  std::uint64_t s = mix_seed(base_seed, static_cast<std::uint64_t>(r_star));
  s = mix_seed(s, static_cast<std::uint64_t>(sigma_index));
  s = mix_seed(s, static_cast<std::uint64_t>(trial));
  auto stream = [s](const char* label) { return RngSpec{mix_seed(s, hash_label(label)), label}; };
  return {stream("truth"), stream("operator"), stream("noise"), stream("split"), stream("init")};
}

namespace {

json seeds_json(const TrialSeeds& s) {
  return {{"truth", s.truth.seed}, {"operator", s.op.seed}, {"noise", s.noise.seed},
          {"split", s.split.seed}, {"init", s.init.seed}};
}

json gd_json(const GdTemplate& g) {
  return {{"r", g.r}, {"eta", g.eta}, {"alpha", g.alpha}, {"iterations", g.iterations},
          {"record_every", g.record_every}};
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json assertions_json(const std::vector<Assertion>& as) {
  json out = json::array();
  for (const auto& a : as) out.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  workers = std::clamp(workers, 1, std::max(count, 1));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

void fill_trial_from_run(TrialResult& tr, const PipelineRun& run, int m_train) {
  const auto& sel = *run.selection;
  tr.t_hat = sel.t_hat;
  tr.t_tilde = *sel.t_tilde;
  tr.error_at_t_hat = *sel.error_at_t_hat;
  tr.error_at_t_tilde = *sel.error_at_t_tilde;
  tr.gap = *sel.gap;
  tr.kappa = run.truth.kappa;
  tr.delta_val = run.delta_val.value_or(0.0);
  tr.theoretical_delta_val = theoretical_delta_val(run.truth.kappa, run.truth.n(), run.truth.true_rank, m_train);
  if (run.bound) tr.bound = *run.bound;
}

}  // namespace

PipelineRun run_pipeline(const PipelineSpec& spec) {
  if (spec.m_val < 0 || spec.m_val >= spec.m) {
    throw Error(ErrorCode::InvalidSplitSize, "m_val must satisfy 0 <= m_val < m");
  }
  if (spec.sigma2 < 0.0) throw Error(ErrorCode::InvalidConfig, "sigma2 must be non-negative");
  PipelineRun run;
  run.truth = generate_ground_truth(spec.n, spec.r_star, spec.seeds.truth);
  SensingOperator op = spec.problem == Problem::Sensing ? build_gaussian_operator(spec.n, spec.m, spec.seeds.op)
                                                        : build_completion_operator(spec.n, spec.m, spec.seeds.op);
  const double sigma = std::sqrt(spec.sigma2);
  run.noise = gaussian_noise(spec.m, sigma, spec.seeds.noise);
  const Eigen::VectorXd y = op.apply(run.truth.x_nat) + run.noise;

  if (spec.m_val > 0) {
    MeasurementSplit split = split_measurements(op, y, spec.m_val, spec.seeds.split);
    run.train_op = std::move(split.train_op);
    run.y_train = std::move(split.y_train);
    run.val_op = std::move(split.val_op);
    run.y_val = std::move(split.y_val);
    run.e_val = gather(run.noise, split.spec.val_indices);
  } else {
    run.train_op = std::move(op);
    run.y_train = y;
  }

  GdConfig cfg;
  cfg.r = spec.gd.r > 0 ? spec.gd.r : spec.n;
  cfg.eta = spec.gd.eta;
  cfg.alpha = spec.gd.alpha;
  cfg.iterations = spec.gd.iterations;
  cfg.record_every = spec.gd.record_every;
  cfg.init_rng = spec.seeds.init;

  std::vector<IterateHook> hooks;
  hooks.push_back(ground_truth_hook(run.truth, spec.record_phase));
  double max_dev = 0.0;
  if (run.val_op) {
    hooks.push_back(validation_hook(*run.val_op, run.y_val));
    hooks.push_back([&](const Factor& u, IterateRecord&) {
      const Eigen::MatrixXd d = u.gram().mat() - run.truth.x_nat.mat();
      const auto dev = check_val_concentration(*run.val_op, run.e_val, std::span(&d, 1), sigma);
      max_dev = std::max(max_dev, dev.front());
    });
  }
  run.trajectory = run_gd(run.train_op, run.y_train, cfg, hooks);

  if (run.val_op) {
    run.selection = select_iterate(run.trajectory);
    run.delta_val = max_dev;
    // Per-measurement noise relative to the operator's energy scale.
    const double noise_term = spec.sigma2 / run.val_op->measurement_energy();
    run.bound = check_selection_bound(*run.selection->error_at_t_hat, *run.selection->error_at_t_tilde, max_dev,
                                      noise_term);
  }
  return run;
}

void ExperimentGrid::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (n < 1) fail("n must be >= 1");
  if (m < 2) fail("m must be >= 2");
  if (problem == Problem::Completion && m > n * n) fail("completion requires m <= n^2");
  if (m_val < 1 || m_val >= m) fail("m_val must satisfy 1 <= m_val < m");
  if (ranks.empty() || sigma2s.empty()) fail("grid needs at least one rank and one sigma2");
  for (int r : ranks) {
    if (r < 1 || r > n) fail("every rank must satisfy 1 <= r* <= n");
    if (gd.r > 0 && gd.r < r) fail("factor rank r must be >= every r*");
  }
  for (double s : sigma2s) {
    if (!(s >= 0.0) || !std::isfinite(s)) fail("sigma2 values must be finite and non-negative");
  }
  if (trials < 1) fail("trials must be >= 1");
  GdConfig probe;
  probe.r = gd.r > 0 ? gd.r : n;
  probe.eta = gd.eta;
  probe.alpha = gd.alpha;
  probe.iterations = gd.iterations;
  probe.record_every = gd.record_every;
  probe.validate(n);
}

TrialResult run_cell(const ExperimentGrid& grid, int r_star, int sigma_index, int trial) {
  if (sigma_index < 0 || sigma_index >= static_cast<int>(grid.sigma2s.size())) {
    throw Error(ErrorCode::InvalidConfig, "sigma index out of range");
  }
  TrialResult tr;
  tr.r_star = r_star;
  tr.sigma_index = sigma_index;
  tr.sigma2 = grid.sigma2s[sigma_index];
  tr.trial = trial;
  tr.seeds = derive_trial_seeds(grid.base_seed, r_star, sigma_index, trial);

  PipelineSpec spec;
  spec.problem = grid.problem;
  spec.n = grid.n;
  spec.m = grid.m;
  spec.m_val = grid.m_val;
  spec.r_star = r_star;
  spec.sigma2 = tr.sigma2;
  spec.gd = grid.gd;
  spec.seeds = tr.seeds;
  try {
    const PipelineRun run = run_pipeline(spec);
    fill_trial_from_run(tr, run, grid.m - grid.m_val);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Divergence && e.code() != ErrorCode::NonFiniteValue) throw;
    tr.failed = true;
    tr.failure = e.what();
  }
  return tr;
}

GridReport run_grid(const ExperimentGrid& grid) {
  grid.validate();
  const int nr = static_cast<int>(grid.ranks.size());
  const int ns = static_cast<int>(grid.sigma2s.size());
  const int total = nr * ns * grid.trials;

  GridReport rep;
  rep.grid = grid;
  rep.trials.resize(total);
  parallel_for(total, grid.workers, [&](int idx) {
    const int trial = idx % grid.trials;
    const int si = (idx / grid.trials) % ns;
    const int ri = idx / (grid.trials * ns);
    rep.trials[idx] = run_cell(grid, grid.ranks[ri], si, trial);
  });

  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.oracle_heatmap = Eigen::MatrixXd::Constant(nr, ns, nan);
  rep.selected_heatmap = Eigen::MatrixXd::Constant(nr, ns, nan);
  for (int ri = 0; ri < nr; ++ri) {
    for (int si = 0; si < ns; ++si) {
      GridCellResult cell;
      cell.r_star = grid.ranks[ri];
      cell.sigma2 = grid.sigma2s[si];
      std::vector<double> oracle, selected, gaps;
      for (int t = 0; t < grid.trials; ++t) {
        const auto& tr = rep.trials[(ri * ns + si) * grid.trials + t];
        if (tr.failed) {
          ++cell.failed_trials;
          continue;
        }
        oracle.push_back(tr.error_at_t_tilde);
        selected.push_back(tr.error_at_t_hat);
        gaps.push_back(tr.gap);
      }
      cell.ok_trials = static_cast<int>(oracle.size());
      if (cell.ok_trials > 0) {
        cell.mean_oracle = stats::mean(oracle);
        cell.std_oracle = stats::stddev(oracle);
        cell.mean_selected = stats::mean(selected);
        cell.std_selected = stats::stddev(selected);
        cell.mean_gap = stats::mean(gaps);
        cell.mc_tolerance = 2.0 * stats::stddev(gaps) / std::sqrt(static_cast<double>(cell.ok_trials));
        rep.oracle_heatmap(ri, si) = cell.mean_oracle;
        rep.selected_heatmap(ri, si) = cell.mean_selected;
      }
      rep.cells.push_back(cell);
    }
  }

  std::vector<double> rank_axis(grid.ranks.begin(), grid.ranks.end());
  if (nr >= 2) {
    for (int si = 0; si < ns; ++si) {
      std::vector<double> col(rep.selected_heatmap.col(si).data(), rep.selected_heatmap.col(si).data() + nr);
      rep.spearman_vs_rank.push_back(stats::spearman(rank_axis, col));
    }
  }
  if (ns >= 2) {
    for (int ri = 0; ri < nr; ++ri) {
      std::vector<double> row(ns);
      for (int si = 0; si < ns; ++si) row[si] = rep.selected_heatmap(ri, si);
      rep.spearman_vs_sigma.push_back(stats::spearman(grid.sigma2s, row));
    }
  }
  return rep;
}

namespace {

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& mat, const std::vector<int>& ranks,
                      const std::vector<double>& sigma2s) {
  auto out = open_out(path);
  out << "r_star";
  for (double s : sigma2s) out << ",sigma2=" << s;
  out << '\n';
  for (int i = 0; i < mat.rows(); ++i) {
    out << ranks[i];
    for (int j = 0; j < mat.cols(); ++j) {
      out << ',';
      if (std::isfinite(mat(i, j))) out << mat(i, j);
    }
    out << '\n';
  }
}

void write_trials_csv(const std::filesystem::path& path, const std::vector<TrialResult>& trials) {
  auto out = open_out(path);
  out << "r_star,sigma2,trial,seed_truth,seed_operator,seed_noise,seed_split,seed_init,failed,t_hat,t_tilde,"
         "error_t_hat,error_t_tilde,gap,kappa,delta_val,bound_rhs,bound_holds\n";
  for (const auto& t : trials) {
    out << t.r_star << ',' << t.sigma2 << ',' << t.trial << ',' << t.seeds.truth.seed << ',' << t.seeds.op.seed
        << ',' << t.seeds.noise.seed << ',' << t.seeds.split.seed << ',' << t.seeds.init.seed << ','
        << (t.failed ? 1 : 0) << ',';
    if (t.failed) {
      out << ",,,,,,,,\n";
      continue;
    }
    out << t.t_hat << ',' << t.t_tilde << ',' << t.error_at_t_hat << ',' << t.error_at_t_tilde << ',' << t.gap << ','
        << t.kappa << ',' << t.delta_val << ',';
    if (std::isfinite(t.bound.rhs)) out << t.bound.rhs;
    out << ',' << (t.bound.holds ? 1 : 0) << '\n';
  }
}

json trial_json(const TrialResult& t) {
  json j = {{"r_star", t.r_star}, {"sigma2", t.sigma2}, {"trial", t.trial}, {"seeds", seeds_json(t.seeds)},
            {"failed", t.failed}};
  if (t.failed) {
    j["failure"] = t.failure;
    return j;
  }
  j["t_hat"] = t.t_hat;
  j["t_tilde"] = t.t_tilde;
  j["error_t_hat"] = t.error_at_t_hat;
  j["error_t_tilde"] = t.error_at_t_tilde;
  j["gap"] = t.gap;
  j["kappa"] = t.kappa;
  j["delta_val"] = t.delta_val;
  j["theoretical_delta_val"] = t.theoretical_delta_val;
  j["bound"] = {{"lhs", t.bound.lhs}, {"rhs", finite_or_null(t.bound.rhs)}, {"vacuous", t.bound.vacuous},
                {"holds", t.bound.holds}};
  return j;
}

}  // namespace

void write_grid_outputs(const GridReport& rep, const std::filesystem::path& dir, double min_spearman) {
  std::filesystem::create_directories(dir);
  const auto& g = rep.grid;
  write_trials_csv(dir / "trials.csv", rep.trials);
  {
    auto out = open_out(dir / "cells.csv");
    out << "r_star,sigma2,ok_trials,failed_trials,mean_oracle,std_oracle,mean_selected,std_selected,mean_gap,"
           "mc_tolerance\n";
    for (const auto& c : rep.cells) {
      out << c.r_star << ',' << c.sigma2 << ',' << c.ok_trials << ',' << c.failed_trials << ',' << c.mean_oracle << ','
          << c.std_oracle << ',' << c.mean_selected << ',' << c.std_selected << ',' << c.mean_gap << ','
          << c.mc_tolerance << '\n';
    }
  }
  write_matrix_csv(dir / "heatmap_oracle.csv", rep.oracle_heatmap, g.ranks, g.sigma2s);
  write_matrix_csv(dir / "heatmap_selected.csv", rep.selected_heatmap, g.ranks, g.sigma2s);
  image::write_heatmap_png(dir / "heatmap_oracle.png", rep.oracle_heatmap);
  image::write_heatmap_png(dir / "heatmap_selected.png", rep.selected_heatmap);

  std::vector<Assertion> as;
  for (std::size_t i = 0; i < rep.spearman_vs_rank.size(); ++i) {
    const double rho = rep.spearman_vs_rank[i];
    as.push_back({"spearman_vs_rank[sigma2=" + std::to_string(g.sigma2s[i]) + "]", rho >= min_spearman,
                  "rho = " + std::to_string(rho)});
  }
  for (std::size_t i = 0; i < rep.spearman_vs_sigma.size(); ++i) {
    const double rho = rep.spearman_vs_sigma[i];
    as.push_back({"spearman_vs_sigma2[r*=" + std::to_string(g.ranks[i]) + "]", rho >= min_spearman,
                  "rho = " + std::to_string(rho)});
  }
  for (const auto& c : rep.cells) {
    if (c.ok_trials == 0) continue;
    const bool ok = c.mean_selected >= c.mean_oracle - c.mc_tolerance;
    if (!ok) {
      as.push_back({"aggregate_sanity[r*=" + std::to_string(c.r_star) + ",sigma2=" + std::to_string(c.sigma2) + "]",
                    false, "mean selected below mean oracle"});
    }
  }

  json cells = json::array();
  for (const auto& c : rep.cells) {
    cells.push_back({{"r_star", c.r_star}, {"sigma2", c.sigma2}, {"ok_trials", c.ok_trials},
                     {"failed_trials", c.failed_trials}, {"mean_oracle", c.mean_oracle},
                     {"std_oracle", c.std_oracle}, {"mean_selected", c.mean_selected},
                     {"std_selected", c.std_selected}, {"mean_gap", c.mean_gap},
                     {"mc_tolerance", c.mc_tolerance}});
  }
  json trials = json::array();
  json failed = json::array();
  for (const auto& t : rep.trials) {
    trials.push_back(trial_json(t));
    if (t.failed) failed.push_back({{"r_star", t.r_star}, {"sigma2", t.sigma2}, {"trial", t.trial}});
  }
  bool passed = true;
  for (const auto& a : as) passed = passed && a.passed;
  json report = {
      {"schema_version", kReportSchemaVersion},
      {"command", "grid"},
      {"config",
       {{"problem", to_string(g.problem)}, {"n", g.n}, {"m", g.m}, {"m_val", g.m_val}, {"ranks", g.ranks},
        {"sigma2_values", g.sigma2s}, {"trials", g.trials}, {"base_seed", g.base_seed}, {"gd", gd_json(g.gd)}}},
      {"results",
       {{"cells", cells},
        {"trials", trials},
        {"failed_trials", failed},
        {"spearman_vs_rank", rep.spearman_vs_rank},
        {"spearman_vs_sigma2", rep.spearman_vs_sigma},
        {"heatmaps", {{"oracle", "heatmap_oracle.csv"}, {"selected", "heatmap_selected.csv"}}}}},
      {"assertions", assertions_json(as)},
      {"passed", passed},
  };
  write_json(dir / "report.json", report);
}

OverfitDemoConfig default_overfit_demo() {
  OverfitDemoConfig cfg;
  auto& p = cfg.pipeline;
  p.problem = Problem::Sensing;
  p.n = 50;
  p.m = 1000;
  p.m_val = 100;
  p.r_star = 5;
  p.sigma2 = 0.3 * 0.3;
  p.gd = default_gd(Problem::Sensing);
  p.gd.r = p.n;
  p.seeds = derive_trial_seeds(1, p.r_star, 0, 0);
  p.record_phase = true;
  return cfg;
}

bool OverfitReport::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

OverfitReport run_overfit_demo(const OverfitDemoConfig& config) {
  OverfitReport rep;
  rep.run = run_pipeline(config.pipeline);
  if (!rep.run.selection) throw Error(ErrorCode::InvalidConfig, "overfit demo needs a validation split (m_val > 0)");
  rep.asserted = config.pipeline.sigma2 > 0.0;
  if (!rep.asserted) return rep;

  const auto& recs = rep.run.trajectory.records;
  const auto& sel = *rep.run.selection;
  auto index_of = [&](int t) {
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (recs[i].t == t) return static_cast<int>(i);
    }
    return -1;
  };
  const int i_tilde = index_of(*sel.t_tilde);
  const int i_hat = index_of(sel.t_hat);
  const double best = *sel.error_at_t_tilde;
  const double final_err = *recs.back().recovery_error;

  rep.assertions.push_back({"interior_oracle_minimum", i_tilde > 0 && i_tilde + 1 < static_cast<int>(recs.size()),
                            "t_tilde = " + std::to_string(*sel.t_tilde)});
  rep.assertions.push_back({"overfit_final_ratio", final_err >= config.max_final_ratio * best,
                            "error(T) / error(t_tilde) = " + std::to_string(final_err / best)});
  rep.assertions.push_back({"valley_proximity", std::abs(i_hat - i_tilde) <= config.max_valley_distance,
                            "|t_hat - t_tilde| = " + std::to_string(std::abs(i_hat - i_tilde)) + " records"});
  rep.assertions.push_back({"selected_error_ratio", *sel.error_at_t_hat <= config.max_selected_ratio * best,
                            "error(t_hat) / error(t_tilde) = " + std::to_string(*sel.error_at_t_hat / best)});
  return rep;
}

void write_overfit_outputs(const OverfitReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& traj = rep.run.trajectory;
  {
    auto out = open_out(dir / "trajectory.csv");
    write_trajectory_csv(out, traj);
  }
  image::Series train{{}, {}, {31, 119, 180}};
  image::Series val{{}, {}, {214, 39, 40}};
  image::Series err{{}, {}, {0, 0, 0}};
  for (const auto& r : traj.records) {
    train.x.push_back(r.t);
    train.y.push_back(r.train_loss);
    if (r.val_loss) {
      val.x.push_back(r.t);
      // Per-measurement scale so the curve shares the training loss axis.
      val.y.push_back(2.0 * *r.val_loss / rep.run.val_op->m());
    }
    if (r.recovery_error) {
      err.x.push_back(r.t);
      err.y.push_back(*r.recovery_error);
    }
  }
  image::write_log_curves_png(dir / "curves.png", {train, val, err});

  const auto& sel = *rep.run.selection;
  json report = {
      {"schema_version", kReportSchemaVersion},
      {"command", "demo-overfit"},
      {"config",
       {{"problem", to_string(rep.run.train_op.kind() == OperatorKind::DenseGaussian ? Problem::Sensing
                                                                                     : Problem::Completion)},
        {"n", rep.run.truth.n()},
        {"r_star", rep.run.truth.true_rank},
        {"m_train", rep.run.train_op.m()},
        {"m_val", rep.run.val_op->m()},
        {"gd",
         {{"r", traj.config.r}, {"eta", traj.config.eta}, {"alpha", traj.config.alpha},
          {"iterations", traj.config.iterations}, {"record_every", traj.config.record_every},
          {"init_seed", traj.config.init_rng.seed}}}}},
      {"results",
       {{"t_hat", sel.t_hat},
        {"t_tilde", *sel.t_tilde},
        {"error_t_hat", *sel.error_at_t_hat},
        {"error_t_tilde", *sel.error_at_t_tilde},
        {"error_final", *traj.records.back().recovery_error},
        {"gap", *sel.gap},
        {"kappa", rep.run.truth.kappa},
        {"delta_val", rep.run.delta_val.value_or(0.0)},
        {"bound_holds", rep.run.bound ? rep.run.bound->holds : true},
        {"trajectory", "trajectory.csv"}}},
      {"assertions", assertions_json(rep.assertions)},
      {"passed", rep.passed()},
  };
  write_json(dir / "report.json", report);
}

ScalingSpec default_scaling(ScalingAxis axis) {
  ScalingSpec s;
  s.axis = axis;
  s.gd = default_gd(Problem::Sensing);
  switch (axis) {
    case ScalingAxis::Sigma2:
      s.values = {0.1, 0.2, 0.4, 0.8};
      s.expected_slope = 1.0;
      s.tolerance = 0.3;
      break;
    case ScalingAxis::Rank:
      s.values = {2, 4, 8, 16};
      s.sigma2 = 0.25;
      s.expected_slope = 1.0;
      s.tolerance = 0.4;
      break;
    case ScalingAxis::M:
      s.values = {500, 1000, 2000, 4000};
      s.sigma2 = 0.25;
      s.expected_slope = -1.0;
      s.tolerance = 0.4;
      break;
  }
  return s;
}

ScalingReport run_scaling_study(const ScalingSpec& spec) {
  if (spec.values.size() < 4) throw Error(ErrorCode::InsufficientPoints, "scaling study needs at least 4 points");
  if (spec.trials < 10) throw Error(ErrorCode::InsufficientPoints, "scaling study needs at least 10 trials per point");
  for (double v : spec.values) {
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidConfig, "scaling values must be positive for a log-log fit");
  }
  const int np = static_cast<int>(spec.values.size());
  const int total = np * spec.trials;
  ScalingReport rep;
  rep.spec = spec;
  rep.trials.resize(total);
  const std::uint64_t base = mix_seed(spec.base_seed, hash_label(to_string(spec.axis)));

  parallel_for(total, spec.workers, [&](int idx) {
    const int pi = idx / spec.trials;
    const int trial = idx % spec.trials;
    const double v = spec.values[pi];
    ExperimentGrid g;
    g.problem = spec.problem;
    g.n = spec.n;
    g.m = spec.axis == ScalingAxis::M ? static_cast<int>(std::lround(v)) : spec.m;
    g.m_val = std::max(1, static_cast<int>(std::lround(spec.val_fraction * g.m)));
    const int r_star = spec.axis == ScalingAxis::Rank ? static_cast<int>(std::lround(v)) : spec.r_star;
    g.ranks = {r_star};
    g.sigma2s.assign(np, spec.sigma2);
    if (spec.axis == ScalingAxis::Sigma2) g.sigma2s = spec.values;
    g.trials = spec.trials;
    g.gd = spec.gd;
    g.base_seed = base;
    g.validate();
    rep.trials[idx] = run_cell(g, r_star, pi, trial);
  });

  std::vector<double> lx, ly;
  for (int pi = 0; pi < np; ++pi) {
    ScalingPoint p;
    p.value = spec.values[pi];
    std::vector<double> sel, orc;
    for (int t = 0; t < spec.trials; ++t) {
      const auto& tr = rep.trials[pi * spec.trials + t];
      if (tr.failed) {
        ++rep.failed_trials;
        continue;
      }
      sel.push_back(tr.error_at_t_hat);
      orc.push_back(tr.error_at_t_tilde);
      ++rep.bound_checked;
      if (tr.bound.vacuous) ++rep.bound_vacuous;
      if (!tr.bound.holds) ++rep.bound_violations;
    }
    p.ok_trials = static_cast<int>(sel.size());
    p.mean_selected = stats::mean(sel);
    p.mean_oracle = stats::mean(orc);
    rep.points.push_back(p);
    if (p.ok_trials > 0 && p.mean_selected > 0.0) {
      lx.push_back(std::log(p.value));
      ly.push_back(std::log(p.mean_selected));
    }
  }
  rep.fit = stats::fit_line(lx, ly);
  rep.slope_ok = std::abs(rep.fit.slope - spec.expected_slope) <= spec.tolerance;
  return rep;
}

void write_scaling_outputs(const ScalingReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_trials_csv(dir / "trials.csv", rep.trials);
  {
    auto out = open_out(dir / "points.csv");
    out << to_string(rep.spec.axis) << ",ok_trials,mean_selected,mean_oracle\n";
    for (const auto& p : rep.points) {
      out << p.value << ',' << p.ok_trials << ',' << p.mean_selected << ',' << p.mean_oracle << '\n';
    }
  }
  const auto& s = rep.spec;
  std::vector<Assertion> as{
      {"slope", rep.slope_ok,
       "slope " + std::to_string(rep.fit.slope) + " vs expected " + std::to_string(s.expected_slope) + " +/- " +
           std::to_string(s.tolerance)},
      {"selection_bound", rep.bound_violations == 0,
       std::to_string(rep.bound_violations) + " violations in " + std::to_string(rep.bound_checked) + " runs (" +
           std::to_string(rep.bound_vacuous) + " vacuous)"},
      {"no_failed_trials", rep.failed_trials == 0, std::to_string(rep.failed_trials) + " failed"},
  };
  json points = json::array();
  for (const auto& p : rep.points) {
    points.push_back({{"value", p.value}, {"ok_trials", p.ok_trials}, {"mean_selected", p.mean_selected},
                      {"mean_oracle", p.mean_oracle}});
  }
  json trials = json::array();
  for (const auto& t : rep.trials) trials.push_back(trial_json(t));
  json report = {
      {"schema_version", kReportSchemaVersion},
      {"command", "scaling"},
      {"config",
       {{"axis", to_string(s.axis)}, {"values", s.values}, {"problem", to_string(s.problem)}, {"n", s.n}, {"m", s.m},
        {"val_fraction", s.val_fraction}, {"r_star", s.r_star}, {"sigma2", s.sigma2}, {"trials", s.trials},
        {"base_seed", s.base_seed}, {"gd", gd_json(s.gd)}, {"expected_slope", s.expected_slope},
        {"tolerance", s.tolerance}}},
      {"results",
       {{"points", points},
        {"slope", rep.fit.slope},
        {"intercept", rep.fit.intercept},
        {"slope_stderr", rep.fit.slope_stderr},
        {"slope_half_width_95", rep.fit.half_width_95},
        {"bound_checked", rep.bound_checked},
        {"bound_violations", rep.bound_violations},
        {"bound_vacuous", rep.bound_vacuous},
        {"trials", trials}}},
      {"assertions", assertions_json(as)},
      {"passed", rep.passed()},
  };
  write_json(dir / "report.json", report);
}

bool RipProbeReport::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

RipProbeReport run_rip_probe(const RipProbeSpec& spec) {
  RipProbeReport rep;
  rep.spec = spec;
  const RngSpec root{spec.seed, "rip-probe"};
  const SensingOperator op = spec.problem == Problem::Sensing
                                 ? build_gaussian_operator(spec.n, spec.m, root.child("operator"))
                                 : build_completion_operator(spec.n, spec.m, root.child("operator"));
  for (int k : spec.ks) {
    RipEstimate est = estimate_rip(op, k, spec.trials, root.child("estimate", static_cast<std::uint64_t>(k)));
    auto gen = root.child("bounds", static_cast<std::uint64_t>(k)).engine();
    const Eigen::MatrixXd g = standard_normal(spec.n, k, gen);
    const Eigen::MatrixXd x = SymMatrix::gram(g).mat() / SymMatrix::gram(g).fro_norm();
    const Eigen::MatrixXd z = SymMatrix::symmetrize(standard_normal(spec.n, spec.n, gen)).mat();
    rep.bounds.push_back(check_perturbation_bounds(op, x, z, k));
    rep.assertions.push_back({"delta_hat_finite[k=" + std::to_string(k) + "]", std::isfinite(est.delta_hat),
                              "delta_hat = " + std::to_string(est.delta_hat)});
    if (spec.max_delta) {
      rep.assertions.push_back({"delta_hat_below_max[k=" + std::to_string(k) + "]", est.delta_hat <= *spec.max_delta,
                                "delta_hat = " + std::to_string(est.delta_hat)});
    }
    rep.estimates.push_back(std::move(est));
  }
  return rep;
}

void write_rip_outputs(const RipProbeReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "rip_ratios.csv");
    out << "k,trial,ratio\n";
    for (const auto& e : rep.estimates) {
      for (std::size_t t = 0; t < e.ratios.size(); ++t) out << e.k << ',' << t << ',' << e.ratios[t] << '\n';
    }
  }
  json ests = json::array();
  for (std::size_t i = 0; i < rep.estimates.size(); ++i) {
    const auto& e = rep.estimates[i];
    const auto& b = rep.bounds[i];
    ests.push_back({{"k", e.k},
                    {"trials", e.trials},
                    {"delta_hat", e.delta_hat},
                    {"median_deviation", e.median_deviation()},
                    {"spec_over_fro", b.fro_x > 0 ? b.spec_x / b.fro_x : 0.0},
                    {"spec_over_nuclear", b.nuc_z > 0 ? b.spec_z / b.nuc_z : 0.0}});
  }
  const auto& s = rep.spec;
  json report = {
      {"schema_version", kReportSchemaVersion},
      {"command", "rip-probe"},
      {"config",
       {{"problem", to_string(s.problem)}, {"n", s.n}, {"m", s.m}, {"ks", s.ks}, {"trials", s.trials},
        {"seed", s.seed}, {"max_delta", s.max_delta ? json(*s.max_delta) : json(nullptr)}}},
      {"results", {{"estimates", ests}, {"ratios", "rip_ratios.csv"}}},
      {"assertions", assertions_json(rep.assertions)},
      {"passed", rep.passed()},
  };
  write_json(dir / "report.json", report);
}

int workers_from_env(int fallback) {
  const char* env = std::getenv("LRSENSE_WORKERS");
  if (!env || !*env) return fallback;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) {
    throw Error(ErrorCode::InvalidConfig, std::string("LRSENSE_WORKERS must be a positive integer, got '") + env + "'");
  }
  return static_cast<int>(v);
}

}  // namespace lrsense

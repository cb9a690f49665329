// lrsense: reproduce over-parameterized low-rank recovery experiments.
//
//   lrsense demo-overfit [--config FILE] [--set key=value]... [--out DIR]
//   lrsense grid         ...
//   lrsense scaling      ...
//   lrsense rip-probe    ...
//
// Exit status: 0 when every assertion of the invoked suite passes, 1 when an
// assertion fails, 2 on configuration or runtime errors.

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lrsense/config.hpp"
#include "lrsense/experiments.hpp"

namespace {

using namespace lrsense;

const std::set<std::string> kCommonKeys{"problem", "n", "m", "m_val", "r", "eta", "alpha",
                                        "iterations", "record_every", "seed", "workers"};

std::set<std::string> with_common(std::set<std::string> keys) {
  keys.insert(kCommonKeys.begin(), kCommonKeys.end());
  return keys;
}

struct Invocation {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
};

KeyValueConfig load_config(const Invocation& inv, const std::set<std::string>& known) {
  KeyValueConfig cfg = inv.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(inv.config_path);
  for (const auto& o : inv.overrides) cfg.apply_override(o);
  cfg.require_known(known);
  return cfg;
}

GdTemplate read_gd(const KeyValueConfig& cfg, Problem problem) {
  GdTemplate g = default_gd(problem);
  g.r = cfg.get_int("r", g.r);
  g.eta = cfg.get_double("eta", g.eta);
  g.alpha = cfg.get_double("alpha", g.alpha);
  g.iterations = cfg.get_int("iterations", g.iterations);
  g.record_every = cfg.get_int("record_every", g.record_every);
  return g;
}

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return out;
}

void write_snapshot(const std::filesystem::path& dir, const KeyValueConfig& cfg) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "config.txt");
  out << cfg.to_text();
}

// Records which known keys fell back to built-in defaults.
void label_defaults(const std::filesystem::path& dir, const KeyValueConfig& cfg, const std::set<std::string>& known) {
  const auto path = dir / "report.json";
  std::ifstream in(path);
  nlohmann::json j = nlohmann::json::parse(in);
  nlohmann::json defaults = nlohmann::json::array();
  for (const auto& k : known) {
    if (!cfg.has(k)) defaults.push_back(k);
  }
  j["defaults_used"] = defaults;
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

void print_assertions(const std::filesystem::path& dir) {
  std::ifstream in(dir / "report.json");
  const auto j = nlohmann::json::parse(in);
  for (const auto& a : j["assertions"]) {
    std::cout << (a["passed"].get<bool>() ? "PASS " : "FAIL ") << a["name"].get<std::string>() << "  "
              << a["detail"].get<std::string>() << '\n';
  }
  std::cout << "report: " << (dir / "report.json").string() << '\n';
}

int cmd_demo(const Invocation& inv) {
  const auto known = with_common({"r_star", "sigma", "max_final_ratio", "max_valley_distance", "max_selected_ratio"});
  const KeyValueConfig cfg = load_config(inv, known);
  OverfitDemoConfig demo = default_overfit_demo();
  auto& p = demo.pipeline;
  p.problem = parse_problem(cfg.get_string("problem", "sensing"));
  p.n = cfg.get_int("n", p.n);
  p.m = cfg.get_int("m", p.m);
  p.m_val = cfg.get_int("m_val", p.m_val);
  p.r_star = cfg.get_int("r_star", p.r_star);
  const double sigma = cfg.get_double("sigma", std::sqrt(p.sigma2));
  p.sigma2 = sigma * sigma;
  p.gd = read_gd(cfg, p.problem);
  if (!cfg.has("r")) p.gd.r = p.n;
  p.seeds = derive_trial_seeds(cfg.get_u64("seed", 1), p.r_star, 0, 0);
  demo.max_final_ratio = cfg.get_double("max_final_ratio", demo.max_final_ratio);
  demo.max_valley_distance = cfg.get_int("max_valley_distance", demo.max_valley_distance);
  demo.max_selected_ratio = cfg.get_double("max_selected_ratio", demo.max_selected_ratio);

  const std::filesystem::path dir = inv.out_dir.empty() ? "runs/demo-overfit" : inv.out_dir;
  write_snapshot(dir, cfg);
  const OverfitReport rep = run_overfit_demo(demo);
  write_overfit_outputs(rep, dir);
  label_defaults(dir, cfg, known);
  print_assertions(dir);
  return rep.passed() ? 0 : 1;
}

int cmd_grid(const Invocation& inv) {
  const auto known = with_common({"ranks", "sigma2_values", "trials", "min_spearman"});
  const KeyValueConfig cfg = load_config(inv, known);
  ExperimentGrid g;
  g.problem = parse_problem(cfg.get_string("problem", "sensing"));
  g.n = cfg.get_int("n", g.n);
  g.m = cfg.get_int("m", g.m);
  g.m_val = cfg.get_int("m_val", g.m_val);
  std::vector<int> default_ranks;
  for (int r = 1; r <= 20; ++r) default_ranks.push_back(r);
  g.ranks = cfg.get_ints("ranks", default_ranks);
  g.sigma2s = cfg.get_doubles("sigma2_values", g.problem == Problem::Sensing ? linspace(0.1, 1.0, 10)
                                                                                : linspace(1e-5, 1e-4, 10));
  g.trials = cfg.get_int("trials", g.trials);
  g.gd = read_gd(cfg, g.problem);
  g.base_seed = cfg.get_u64("seed", g.base_seed);
  g.workers = cfg.get_int("workers", workers_from_env(1));
  const double min_spearman = cfg.get_double("min_spearman", 0.8);

  const std::filesystem::path dir = inv.out_dir.empty() ? "runs/grid" : inv.out_dir;
  write_snapshot(dir, cfg);
  const GridReport rep = run_grid(g);
  write_grid_outputs(rep, dir, min_spearman);
  label_defaults(dir, cfg, known);
  print_assertions(dir);
  std::ifstream in(dir / "report.json");
  return nlohmann::json::parse(in)["passed"].get<bool>() ? 0 : 1;
}

int cmd_scaling(const Invocation& inv) {
  const auto known = with_common({"axis", "values", "r_star", "sigma2", "trials", "val_fraction", "expected_slope",
                                  "tolerance"});
  const KeyValueConfig cfg = load_config(inv, known);
  ScalingSpec s = default_scaling(parse_axis(cfg.get_string("axis", "sigma2")));
  s.problem = parse_problem(cfg.get_string("problem", "sensing"));
  s.values = cfg.get_doubles("values", s.values);
  s.n = cfg.get_int("n", s.n);
  s.m = cfg.get_int("m", s.m);
  if (cfg.has("m_val")) s.val_fraction = static_cast<double>(cfg.get_int("m_val", 0)) / s.m;
  s.val_fraction = cfg.get_double("val_fraction", s.val_fraction);
  s.r_star = cfg.get_int("r_star", s.r_star);
  s.sigma2 = cfg.get_double("sigma2", s.sigma2);
  s.trials = cfg.get_int("trials", s.trials);
  s.gd = read_gd(cfg, s.problem);
  s.base_seed = cfg.get_u64("seed", s.base_seed);
  s.workers = cfg.get_int("workers", workers_from_env(1));
  s.expected_slope = cfg.get_double("expected_slope", s.expected_slope);
  s.tolerance = cfg.get_double("tolerance", s.tolerance);

  const std::filesystem::path dir = inv.out_dir.empty() ? "runs/scaling" : inv.out_dir;
  write_snapshot(dir, cfg);
  const ScalingReport rep = run_scaling_study(s);
  write_scaling_outputs(rep, dir);
  label_defaults(dir, cfg, known);
  print_assertions(dir);
  return rep.passed() ? 0 : 1;
}

int cmd_rip(const Invocation& inv) {
  // No gradient descent runs here, so the GD and split keys do not apply.
  const std::set<std::string> known{"problem", "n", "m", "seed", "ks", "trials", "max_delta"};
  const KeyValueConfig cfg = load_config(inv, known);
  RipProbeSpec s;
  s.problem = parse_problem(cfg.get_string("problem", "sensing"));
  s.n = cfg.get_int("n", s.n);
  s.m = cfg.get_int("m", s.m);
  s.ks = cfg.get_ints("ks", s.ks);
  s.trials = cfg.get_int("trials", s.trials);
  s.seed = cfg.get_u64("seed", s.seed);
  if (cfg.has("max_delta")) s.max_delta = cfg.get_double("max_delta", 0.0);

  const std::filesystem::path dir = inv.out_dir.empty() ? "runs/rip-probe" : inv.out_dir;
  write_snapshot(dir, cfg);
  const RipProbeReport rep = run_rip_probe(s);
  write_rip_outputs(rep, dir);
  label_defaults(dir, cfg, known);
  print_assertions(dir);
  return rep.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Over-parameterized low-rank matrix recovery with hold-out early stopping"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const Invocation&);
  };
  const Sub subs[] = {
      {"demo-overfit", "single run showing train/val/recovery curves and the overfitting signature", cmd_demo},
      {"grid", "recovery-error heatmaps over true rank x noise variance", cmd_grid},
      {"scaling", "log-log slope of selected error along one axis (sigma2, rank or m)", cmd_scaling},
      {"rip-probe", "Monte-Carlo RIP lower bounds and perturbation-bound ratios", cmd_rip},
  };
  std::vector<Invocation> invs(std::size(subs));
  std::vector<CLI::App*> apps;
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    CLI::App* sub = app.add_subcommand(subs[i].name, subs[i].help);
    sub->add_option("-c,--config", invs[i].config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", invs[i].overrides, "override a config key (key=value), repeatable");
    sub->add_option("-o,--out", invs[i].out_dir, "run directory for outputs");
    apps.push_back(sub);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < apps.size(); ++i) {
      if (apps[i]->parsed()) return subs[i].run(invs[i]);
    }
  } catch (const std::exception& e) {
    std::cerr << "lrsense: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

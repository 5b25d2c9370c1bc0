// smtl: generate planted worlds, fit estimators, run sweeps and plot them.
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smtl/error.hpp"
#include "smtl/estimators.hpp"
#include "smtl/experiment.hpp"
#include "smtl/io.hpp"
#include "smtl/svg_plot.hpp"
#include "smtl/world_gen.hpp"

namespace {

using namespace smtl;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitCheckFailed = 3;

struct Globals {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int workers = 0;
};

ExperimentConfig config_or_default(const Globals& g) {
  ExperimentConfig c;
  if (!g.config.empty()) c = load_config(g.config);
  if (!g.out.empty()) c.out_dir = g.out;
  if (g.workers > 0) c.workers = g.workers;
  return c;
}

ExperimentConfig require_config(const Globals& g) {
  if (g.config.empty()) throw ParameterError("--config is required for this command");
  return config_or_default(g);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_gen_world(const Globals& g) {
  ExperimentConfig c;
  if (!g.config.empty()) c = load_config(g.config);
  const std::string out = g.out.empty() ? "world" : g.out;
  const PlantedWorld world = gen_world(c.world, g.seed);
  save_world(out, world);
  const WorldDiagnostics diag = diagnostics(world);
  std::cout << "world " << to_string(world.spec.kind) << " d=" << world.d() << " n=" << world.n()
            << " r=" << world.r() << " -> " << out << "\n"
            << "nu2=" << format_double(diag.nu2) << " lambda=" << format_double(diag.lambda)
            << " condition=" << format_double(condition_number(world)) << "\n";
  return kExitOk;
}

int cmd_sample(const Globals& g, const std::string& world_dir, long m) {
  if (m < 1) throw ParameterError("--m must be at least 1");
  const PlantedWorld world = load_world(world_dir);
  const Datasets data = sample_datasets(world, m, g.seed);
  const std::string out = g.out.empty() ? world_dir + "/data.csv" : g.out;
  save_datasets(out, data);
  std::cout << "sampled " << data.size() << " tasks x " << m << " -> " << out << "\n";
  return kExitOk;
}

struct FitArgs {
  std::string data;
  std::string world;
  std::string estimator = "lowrank_bm";
  long r = 0;
  double B = 1.0;
  std::optional<double> kappa;
  std::optional<long> s;
  int restarts = 5;
  int max_iters = 5000;
};

int cmd_fit(const Globals& g, const FitArgs& a) {
  const Datasets data = load_datasets(a.data);
  std::optional<PlantedWorld> world;
  if (!a.world.empty()) world = load_world(a.world);
  const Eigen::Index r = a.r > 0 ? a.r : (world ? world->r() : 0);
  if (a.estimator != "local" && r < 1) throw ParameterError("--r is required (or pass --world)");
  SolverOptions opts;
  opts.seed = g.seed;
  opts.restarts = a.restarts;
  opts.max_iters = a.max_iters;
  EstimatorReport report;
  if (a.estimator == "local") {
    report = fit_local(data, a.B, opts);
  } else if (a.estimator == "lowrank_bm") {
    report = fit_lowrank_bm(data, r, a.B, opts);
  } else if (a.estimator == "lowrank_iht") {
    report = fit_lowrank_iht(data, r, a.B, opts);
  } else if (a.estimator == "clustered") {
    report = fit_clustered(data, r, a.B, opts);
  } else if (a.estimator == "nuclear") {
    double kappa = 0.0;
    if (a.kappa) {
      kappa = *a.kappa;
    } else if (world) {
      kappa = condition_number(*world);
    } else {
      throw ParameterError("nuclear needs --kappa or --world");
    }
    std::optional<Eigen::Index> s;
    if (a.s) s = *a.s;
    report = fit_nuclear(data, r, kappa, a.B, s, opts);
  } else {
    throw ParameterError("unknown estimator '" + a.estimator + "'");
  }
  nlohmann::json echo{{"estimator", a.estimator}, {"r", r},        {"B", a.B},
                      {"seed", g.seed},           {"restarts", a.restarts}, {"max_iters", a.max_iters}};
  if (a.kappa) echo["kappa"] = *a.kappa;
  if (a.s) echo["s"] = *a.s;
  const std::string out = g.out.empty() ? "fit" : g.out;
  save_report(out, report, echo.dump());
  std::cout << report.estimator << " objective=" << format_double(report.objective_trace.empty() ? 0.0 : report.objective_trace.back())
            << " converged=" << (report.converged ? "true" : "false") << " -> " << out << "\n";
  for (const std::string& w : report.warnings) std::cerr << "warning: " << w << "\n";
  return kExitOk;
}

int cmd_eval(const Globals& g, const std::string& world_dir, const std::string& report_dir,
             const std::string& metrics, long n_mc) {
  const PlantedWorld world = load_world(world_dir);
  const EstimatorReport report = load_report(report_dir);
  std::vector<std::string> list = split_list(metrics);
  if (list.empty()) {
    list = {"excess_risk", "param_error", "subspace_error_F", "subspace_error_op"};
    if (world.cluster_map) list.push_back("cluster_accuracy");
  }
  std::cout << "metric,value,std_error,status\n";
  for (const MetricRow& row : evaluate_report(report, world, list, n_mc, g.seed))
    std::cout << row.metric << ',' << format_double(row.value) << ',' << format_double(row.std_error) << ','
              << row.status << '\n';
  return kExitOk;
}

int cmd_sweep(const Globals& g) {
  const ExperimentConfig c = require_config(g);
  const ExperimentResult result = run_experiment(c);
  std::size_t failed = 0;
  for (const MetricRow& row : result.rows) failed += row.status == "failed";
  std::cout << "cells computed " << result.cells_computed << ", skipped " << result.cells_skipped << ", rows "
            << result.rows.size() << " -> " << (c.out_dir / "results.csv").string() << "\n";
  if (c.estimators.size() >= 2) {
    std::vector<std::string> names;
    for (const EstimatorSpec& e : c.estimators) names.push_back(e.name);
    for (const WinRate& w : compare_rows(result.rows, names).win_rates)
      std::cout << "win-rate " << w.metric << " " << w.estimator << " vs " << w.baseline << ": " << w.wins << "/"
                << w.comparisons << (w.skipped ? " (" + std::to_string(w.skipped) + " below floor)" : "") << "\n";
  }
  if (failed > 0) {
    std::cerr << failed << " rows failed\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_plot(const Globals& g, std::string results, const std::string& x, const std::string& metric,
             const std::string& estimators, const std::string& title) {
  if (results.empty()) results = (config_or_default(g).out_dir / "results.csv").string();
  std::vector<std::string> axes;
  const std::vector<MetricRow> rows = read_results_csv(results, &axes);
  std::vector<std::string> xs = x.empty() ? axes : std::vector<std::string>{x};
  std::vector<std::string> metrics;
  if (metric.empty()) {
    for (const MetricRow& row : rows)
      if (std::find(metrics.begin(), metrics.end(), row.metric) == metrics.end()) metrics.push_back(row.metric);
  } else {
    metrics = {metric};
  }
  std::vector<PlotSpec> specs;
  for (const std::string& axis : xs)
    for (const std::string& m : metrics) specs.push_back({axis, m, split_list(estimators), title});
  const std::filesystem::path out =
      g.out.empty() ? std::filesystem::path(results).parent_path() / "plots" : std::filesystem::path(g.out);
  for (const auto& path : emit_plots(rows, axes, specs, out)) std::cout << path.string() << "\n";
  return kExitOk;
}

int cmd_report(const Globals& g, bool check) {
  const ExperimentConfig c = require_config(g);
  std::vector<std::string> axes;
  const std::vector<MetricRow> rows = read_results_csv(c.out_dir / "results.csv", &axes);

  // Mean and spread over seeds per (point, estimator, metric), in file order.
  struct Acc {
    double sum = 0.0;
    double sum2 = 0.0;
    int count = 0;
    int failed = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (const MetricRow& row : rows) {
    std::string key;
    for (std::size_t k = 0; k < axes.size(); ++k) key += axes[k] + "=" + format_double(row.point[k]) + " ";
    key += row.estimator + " " + row.metric;
    if (!acc.count(key)) order.push_back(key);
    Acc& a = acc[key];
    if (row.status == "failed" || !std::isfinite(row.value)) {
      ++a.failed;
      continue;
    }
    a.sum += row.value;
    a.sum2 += row.value * row.value;
    ++a.count;
  }
  for (const std::string& key : order) {
    const Acc& a = acc[key];
    const double mean = a.count ? a.sum / a.count : 0.0;
    const double var = a.count > 1 ? std::max(0.0, (a.sum2 - a.count * mean * mean) / (a.count - 1)) : 0.0;
    std::cout << key << ": mean " << mean << " sd " << std::sqrt(var) << " (" << a.count << " seeds";
    if (a.failed) std::cout << ", " << a.failed << " failed";
    std::cout << ")\n";
  }
  for (const SweepAxis& axis : c.sweep) {
    if (axis.values.size() < 3 || axes.size() != 1) continue;
    for (const EstimatorSpec& e : c.estimators)
      for (const std::string& m : c.metrics) {
        try {
          const ScalingFit fit = fit_scaling_exponent(rows, axes, axis.key, m, e.name);
          std::cout << "slope " << m << " vs " << axis.key << " [" << e.name << "]: " << format_double(fit.slope)
                    << " (r2 " << format_double(fit.r_squared) << ")\n";
        } catch (const ParameterError& err) {
          std::cout << "slope " << m << " vs " << axis.key << " [" << e.name << "]: n/a (" << err.what() << ")\n";
        }
      }
  }
  if (!check) return kExitOk;
  if (c.checks.empty()) throw ParameterError("--check given but the config has no checks");
  bool all = true;
  for (const CheckResult& r : evaluate_checks(c.checks, rows, axes)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    all = all && r.passed;
  }
  return all ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smtl: shared-representation multi-task learning experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON experiment config");
  app.add_option("--out", g.out, "Output directory or file");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--workers", g.workers, "Parallel sweep cells")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-world", "Generate a planted world from the config's world section");

  auto* sample = app.add_subcommand("sample", "Draw per-task datasets from a saved world");
  std::string world_dir;
  long m = 0;
  sample->add_option("--world", world_dir, "World directory")->required();
  sample->add_option("--m", m, "Samples per task")->required();

  auto* fit = app.add_subcommand("fit", "Fit one estimator on a dataset file");
  FitArgs fa;
  fit->add_option("--data", fa.data, "Dataset CSV")->required();
  fit->add_option("--world", fa.world, "World directory (supplies r and kappa)");
  fit->add_option("--estimator", fa.estimator, "local|lowrank_bm|lowrank_iht|clustered|nuclear");
  fit->add_option("--r", fa.r, "Representation rank");
  fit->add_option("--B", fa.B, "Head norm bound");
  fit->add_option("--kappa", fa.kappa, "Nuclear radius multiplier");
  fit->add_option("--s", fa.s, "Truncation rank for the nuclear estimator");
  fit->add_option("--restarts", fa.restarts, "Random restarts");
  fit->add_option("--max-iters", fa.max_iters, "Iteration cap");

  auto* eval = app.add_subcommand("eval", "Score a saved fit against its world");
  std::string report_dir;
  std::string metrics;
  long n_mc = 100000;
  eval->add_option("--world", world_dir, "World directory")->required();
  eval->add_option("--report", report_dir, "Fit directory")->required();
  eval->add_option("--metrics", metrics, "Comma-separated metric names");
  eval->add_option("--n-mc", n_mc, "Monte-Carlo samples for logistic excess risk");

  auto* sweep = app.add_subcommand("sweep", "Run (or resume) the config's sweep");

  auto* plot = app.add_subcommand("plot", "Log-log SVG charts from results.csv");
  std::string results;
  std::string x;
  std::string metric;
  std::string estimators;
  std::string title;
  plot->add_option("--results", results, "results.csv (default: <config out>/results.csv)");
  plot->add_option("--x", x, "Sweep axis (default: every axis)");
  plot->add_option("--metric", metric, "Metric (default: every metric)");
  plot->add_option("--estimators", estimators, "Comma-separated estimator filter");
  plot->add_option("--title", title, "Chart title");

  auto* report = app.add_subcommand("report", "Summarize results.csv; --check evaluates the config's checks");
  bool check = false;
  report->add_flag("--check", check, "Exit 3 when any check fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_world(g);
    if (*sample) return cmd_sample(g, world_dir, m);
    if (*fit) return cmd_fit(g, fa);
    if (*eval) return cmd_eval(g, world_dir, report_dir, metrics, n_mc);
    if (*sweep) return cmd_sweep(g);
    if (*plot) return cmd_plot(g, results, x, metric, estimators, title);
    if (*report) return cmd_report(g, check);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const GenerationError& e) {
    std::cerr << "generation failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

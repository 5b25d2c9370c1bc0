#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "smtl/estimators.hpp"
#include "smtl/world_gen.hpp"

namespace smtl {

/// Estimator names accepted in configs: local, lowrank_bm, lowrank_iht,
/// clustered, nuclear, nuclear_svd. `nuclear_svd` scores the top-s
/// truncation of the nuclear fit and shares its solve with `nuclear`.
struct EstimatorSpec {
  std::string name;
  SolverOptions opts;
  /// Nuclear radius multiplier; unset means the planted condition number.
  std::optional<double> kappa;
  std::optional<Eigen::Index> s;
};

/// Swept parameter: "n", "m" or "eps".
struct SweepAxis {
  std::string key;
  std::vector<double> values;
};

/// Where a check reads its numbers from and what it accepts.
///  slope:        fit_scaling_exponent(x, metric, estimator) within [min, max]
///  mean_ratio:   mean(metric | x = at) / mean(metric | x = over) within [min, max]
///  paired_factor: estimator <= factor * baseline in at least min_fraction of cells
struct CheckSpec {
  std::string name;
  std::string type;
  std::string x;
  std::string metric;
  std::string estimator;
  std::string baseline;
  double at = 0.0;
  double over = 0.0;
  double factor = 1.0;
  double min_fraction = 1.0;
  double min = -1e300;
  double max = 1e300;
};

struct ExperimentConfig {
  WorldSpec world;
  /// Samples per task when m is not swept.
  Eigen::Index m = 20;
  std::vector<EstimatorSpec> estimators;
  std::vector<SweepAxis> sweep;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> metrics;
  std::filesystem::path out_dir = "results";
  int workers = 1;
  /// Monte-Carlo samples for logistic excess risk.
  std::int64_t n_mc = 100000;
  std::vector<CheckSpec> checks;
};

/// JSON config. Unknown estimators, metrics or sweep keys and empty sweep
/// axes are rejected with ParameterError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON rendering; parse_config(config_to_json(c)) round-trips.
std::string config_to_json(const ExperimentConfig& config);

/// One coordinate per sweep axis, in config order.
using SweepPoint = std::vector<double>;

/// All sweep points (cartesian product, first axis slowest).
std::vector<SweepPoint> sweep_points(const ExperimentConfig& config);

/// Hash of the world spec with swept fields removed; anchors every stream.
std::uint64_t world_hash(const ExperimentConfig& config);

/// The world, data and solver options a cell uses. Worlds and data are shared
/// across sweep points that differ only in m or eps (common random numbers).
WorldSpec cell_world_spec(const ExperimentConfig& config, const SweepPoint& point);
Eigen::Index cell_samples(const ExperimentConfig& config, const SweepPoint& point);
PlantedWorld cell_world(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed);
Datasets cell_data(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed,
                   const PlantedWorld& world);

struct MetricRow {
  SweepPoint point;
  std::uint64_t seed = 0;
  std::string estimator;
  std::string metric;
  /// NaN for failed runs (written as an empty field).
  double value = 0.0;
  double std_error = 0.0;
  /// ok | not_converged | failed | bound_violated
  std::string status = "ok";
};

struct TimingRow {
  SweepPoint point;
  std::uint64_t seed = 0;
  std::string estimator;
  double wall_time = 0.0;
};

struct ExperimentResult {
  std::vector<std::string> axes;
  std::vector<MetricRow> rows;
  std::vector<TimingRow> timings;
  int cells_computed = 0;
  int cells_skipped = 0;
};

/// Runs every (sweep point x seed) cell not already present in
/// out_dir/results.csv, then rewrites results.csv and timings.csv in
/// canonical order. Estimator failures become status=failed rows.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Metrics of a single fitted model against its planted world.
std::vector<MetricRow> evaluate_report(const EstimatorReport& report, const PlantedWorld& world,
                                       const std::vector<std::string>& metrics, std::int64_t n_mc,
                                       std::uint64_t seed);

void write_results_csv(const std::filesystem::path& path, const std::vector<std::string>& axes,
                       const std::vector<MetricRow>& rows);
/// Returns the axis names through `axes`.
std::vector<MetricRow> read_results_csv(const std::filesystem::path& path,
                                        std::vector<std::string>* axes = nullptr);

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<std::string> warnings;
};

/// OLS of log(mean metric over seeds) on log(x). Failed rows are ignored;
/// non-positive means are dropped with a warning; needs >= 3 usable points.
/// `estimator` may be empty when the rows hold a single estimator.
ScalingFit fit_scaling_exponent(const std::vector<MetricRow>& rows,
                                const std::vector<std::string>& axes, const std::string& x_axis,
                                const std::string& metric, const std::string& estimator = {});

struct PairedRow {
  SweepPoint point;
  std::uint64_t seed = 0;
  std::string metric;
  /// In config estimator order; NaN when missing or failed.
  std::vector<double> values;
};

struct WinRate {
  std::string metric;
  std::string estimator;
  std::string baseline;
  int wins = 0;
  int comparisons = 0;
  /// Pairs where both values are below the floor count as ties and are skipped.
  int skipped = 0;
  double rate() const { return comparisons > 0 ? static_cast<double>(wins) / comparisons : 0.0; }
};

struct BaselineComparison {
  std::vector<std::string> estimators;
  std::vector<PairedRow> table;
  std::vector<WinRate> win_rates;
};

/// Pairs rows by (point, seed, metric). The first estimator is the baseline;
/// lower is better except for cluster_accuracy.
BaselineComparison compare_rows(const std::vector<MetricRow>& rows,
                                const std::vector<std::string>& estimators, double floor = 1e-8);

/// run_experiment followed by compare_rows; also writes comparison.csv.
BaselineComparison compare_baselines(const ExperimentConfig& config);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckResult> evaluate_checks(const std::vector<CheckSpec>& checks,
                                         const std::vector<MetricRow>& rows,
                                         const std::vector<std::string>& axes);

}  // namespace smtl

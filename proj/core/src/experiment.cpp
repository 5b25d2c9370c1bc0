#include "smtl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "smtl/error.hpp"
#include "smtl/io.hpp"
#include "smtl/matrix_kit.hpp"
#include "smtl/rng.hpp"

namespace smtl {

namespace {

using nlohmann::json;

const std::vector<std::string> kEstimators = {"local",     "lowrank_bm", "lowrank_iht",
                                              "clustered", "nuclear",    "nuclear_svd"};
const std::vector<std::string> kMetrics = {"excess_risk", "param_error", "subspace_error_F",
                                           "subspace_error_op", "cluster_accuracy"};
const std::vector<std::string> kAxes = {"n", "m", "eps"};

bool contains(const std::vector<std::string>& list, const std::string& s) {
  return std::find(list.begin(), list.end(), s) != list.end();
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i > 0 ? sep : "") + parts[i];
  return out;
}

std::string point_key(const SweepPoint& point) {
  std::vector<std::string> parts;
  for (double v : point) parts.push_back(format_double(v));
  return join(parts, ",");
}

EstimatorSpec parse_estimator(const json& j) {
  EstimatorSpec e;
  if (j.is_string()) {
    e.name = j.get<std::string>();
  } else {
    require(j.is_object() && j.contains("name"), "config: estimator entries need a name");
    e.name = j.at("name").get<std::string>();
    e.opts.max_iters = j.value("max_iters", e.opts.max_iters);
    if (j.contains("tol_grad")) e.opts.tol_grad = j.at("tol_grad").get<double>();
    e.opts.step_init = j.value("step_init", e.opts.step_init);
    e.opts.restarts = j.value("restarts", e.opts.restarts);
    if (j.contains("kappa") && !j.at("kappa").is_string()) e.kappa = j.at("kappa").get<double>();
    if (j.contains("s") && !j.at("s").is_null()) e.s = j.at("s").get<Eigen::Index>();
  }
  if (!contains(kEstimators, e.name)) throw ParameterError("config: unknown estimator '" + e.name + "'");
  require(e.opts.max_iters >= 1, "config: max_iters must be positive");
  require(e.opts.restarts >= 1, "config: restarts must be positive");
  return e;
}

json estimator_json(const EstimatorSpec& e) {
  json j;
  j["name"] = e.name;
  j["max_iters"] = e.opts.max_iters;
  if (e.opts.tol_grad) j["tol_grad"] = *e.opts.tol_grad;
  j["step_init"] = e.opts.step_init;
  j["restarts"] = e.opts.restarts;
  j["kappa"] = e.kappa ? json(*e.kappa) : json("planted");
  j["s"] = e.s ? json(*e.s) : json(nullptr);
  return j;
}

json world_json(const WorldSpec& w) {
  json j;
  j["kind"] = to_string(w.kind);
  j["d"] = w.d;
  j["n"] = w.n;
  j["r"] = w.r;
  j["B"] = w.B;
  j["family"] = to_string(w.family);
  j["eps"] = w.eps;
  j["head_style"] = to_string(w.head_style);
  j["separation"] = w.separation;
  return j;
}

CheckSpec parse_check(const json& j) {
  CheckSpec c;
  c.type = j.at("type").get<std::string>();
  require(c.type == "slope" || c.type == "mean_ratio" || c.type == "paired_factor" ||
              c.type == "monotone_decreasing" || c.type == "fraction_below",
          "config: unknown check type '" + c.type + "'");
  c.name = j.value("name", c.type);
  c.x = j.value("x", std::string{});
  c.metric = j.at("metric").get<std::string>();
  c.estimator = j.value("estimator", std::string{});
  c.baseline = j.value("baseline", std::string{});
  c.at = j.value("at", 0.0);
  c.over = j.value("over", 0.0);
  c.factor = j.value("factor", 1.0);
  c.min_fraction = j.value("min_fraction", 1.0);
  c.min = j.value("min", -1e300);
  c.max = j.value("max", 1e300);
  return c;
}

json check_json(const CheckSpec& c) {
  json j;
  j["name"] = c.name;
  j["type"] = c.type;
  j["x"] = c.x;
  j["metric"] = c.metric;
  j["estimator"] = c.estimator;
  j["baseline"] = c.baseline;
  j["at"] = c.at;
  j["over"] = c.over;
  j["factor"] = c.factor;
  j["min_fraction"] = c.min_fraction;
  j["min"] = c.min;
  j["max"] = c.max;
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    if (j.contains("world")) {
      const json& w = j.at("world");
      c.world.kind = parse_world_kind(w.value("kind", std::string("lowrank")));
      c.world.d = w.value("d", c.world.d);
      c.world.n = w.value("n", c.world.n);
      c.world.r = w.value("r", c.world.r);
      c.world.B = w.value("B", c.world.B);
      c.world.family = parse_family(w.value("family", std::string("quadratic")));
      c.world.eps = w.value("eps", c.world.eps);
      c.world.head_style = parse_head_style(w.value("head_style", std::string("gaussian")));
      c.world.separation = w.value("separation", c.world.separation);
    }
    c.m = j.value("m", c.m);
    if (j.contains("estimators"))
      for (const json& e : j.at("estimators")) c.estimators.push_back(parse_estimator(e));
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      if (s.is_array()) {
        for (const json& a : s) c.sweep.push_back({a.at("axis").get<std::string>(), a.at("values").get<std::vector<double>>()});
      } else {
        for (const auto& [key, values] : s.items()) c.sweep.push_back({key, values.get<std::vector<double>>()});
      }
    }
    if (j.contains("seeds")) {
      const json& s = j.at("seeds");
      if (s.is_array()) {
        c.seeds = s.get<std::vector<std::uint64_t>>();
      } else {
        const auto count = s.at("count").get<std::uint64_t>();
        const auto start = s.value("start", std::uint64_t{0});
        for (std::uint64_t k = 0; k < count; ++k) c.seeds.push_back(start + k);
      }
    } else {
      c.seeds = {0};
    }
    c.metrics = j.value("metrics", std::vector<std::string>{"param_error"});
    c.out_dir = j.value("out", std::string("results"));
    c.workers = j.value("workers", 1);
    c.n_mc = j.value("n_mc", c.n_mc);
    if (j.contains("checks"))
      for (const json& ch : j.at("checks")) c.checks.push_back(parse_check(ch));
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }

  require(!c.estimators.empty(), "config: at least one estimator is required");
  require(!c.seeds.empty(), "config: seeds must be non-empty");
  require(!c.metrics.empty(), "config: metrics must be non-empty");
  require(c.m >= 1, "config: m must be at least 1");
  require(c.workers >= 1, "config: workers must be at least 1");
  require(c.n_mc >= 100, "config: n_mc must be at least 100");
  for (const std::string& m : c.metrics) {
    if (!contains(kMetrics, m)) throw ParameterError("config: unknown metric '" + m + "'");
    if (m == "cluster_accuracy" && c.world.kind != WorldKind::Clustered)
      throw ParameterError("config: cluster_accuracy needs a clustered world");
  }
  std::set<std::string> seen;
  for (const SweepAxis& a : c.sweep) {
    if (!contains(kAxes, a.key)) throw ParameterError("config: unknown sweep axis '" + a.key + "'");
    if (!seen.insert(a.key).second) throw ParameterError("config: sweep axis '" + a.key + "' repeated");
    if (a.values.empty()) throw ParameterError("config: sweep axis '" + a.key + "' is empty");
    for (double v : a.values) {
      if (a.key != "eps")
        require(v >= 1.0 && v == std::floor(v), "config: sweep axis '" + a.key + "' needs positive integers");
      else
        require(v >= 0.0, "config: eps values must be non-negative");
    }
  }
  std::set<std::string> names;
  for (const EstimatorSpec& e : c.estimators)
    if (!names.insert(e.name).second) throw ParameterError("config: estimator '" + e.name + "' listed twice");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParameterError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["world"] = world_json(c.world);
  j["m"] = c.m;
  j["estimators"] = json::array();
  for (const EstimatorSpec& e : c.estimators) j["estimators"].push_back(estimator_json(e));
  j["sweep"] = json::array();
  for (const SweepAxis& a : c.sweep) j["sweep"].push_back({{"axis", a.key}, {"values", a.values}});
  j["seeds"] = c.seeds;
  j["metrics"] = c.metrics;
  j["out"] = c.out_dir.string();
  j["workers"] = c.workers;
  j["n_mc"] = c.n_mc;
  j["checks"] = json::array();
  for (const CheckSpec& ch : c.checks) j["checks"].push_back(check_json(ch));
  return j.dump(2);
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& config) {
  std::vector<SweepPoint> points{{}};
  for (const SweepAxis& axis : config.sweep) {
    std::vector<SweepPoint> next;
    for (const SweepPoint& p : points)
      for (double v : axis.values) {
        SweepPoint q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  return points;
}

std::uint64_t world_hash(const ExperimentConfig& config) {
  json w = world_json(config.world);
  for (const SweepAxis& a : config.sweep) w.erase(a.key);
  return hash_string(w.dump());
}

WorldSpec cell_world_spec(const ExperimentConfig& config, const SweepPoint& point) {
  require(point.size() == config.sweep.size(), "cell_world_spec: point has the wrong number of coordinates");
  WorldSpec spec = config.world;
  for (std::size_t k = 0; k < point.size(); ++k) {
    if (config.sweep[k].key == "n") spec.n = static_cast<Eigen::Index>(point[k]);
    if (config.sweep[k].key == "eps") spec.eps = point[k];
  }
  return spec;
}

Eigen::Index cell_samples(const ExperimentConfig& config, const SweepPoint& point) {
  require(point.size() == config.sweep.size(), "cell_samples: point has the wrong number of coordinates");
  for (std::size_t k = 0; k < point.size(); ++k)
    if (config.sweep[k].key == "m") return static_cast<Eigen::Index>(point[k]);
  return config.m;
}

PlantedWorld cell_world(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed) {
  return gen_world(cell_world_spec(config, point), derive_seed(world_hash(config), seed));
}

Datasets cell_data(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed,
                   const PlantedWorld& world) {
  return sample_datasets(world, cell_samples(config, point),
                         derive_seed(world_hash(config), seed, hash_string("data")));
}

namespace {

// Best agreement between two labelings over relabelings of `labels`.
double relabeled_accuracy(const std::vector<int>& labels, const std::vector<int>& truth, int r) {
  std::vector<std::vector<int>> confusion(static_cast<std::size_t>(r), std::vector<int>(static_cast<std::size_t>(r), 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= r) continue;
    ++confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(truth[i])];
  }
  std::vector<int> perm(static_cast<std::size_t>(r));
  std::iota(perm.begin(), perm.end(), 0);
  int best = 0;
  if (r <= 8) {
    do {
      int hits = 0;
      for (int a = 0; a < r; ++a) hits += confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])];
      best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    // Greedy matching on the confusion matrix for large r.
    std::vector<bool> used_a(static_cast<std::size_t>(r), false);
    std::vector<bool> used_b(static_cast<std::size_t>(r), false);
    for (int step = 0; step < r; ++step) {
      int ba = -1;
      int bb = -1;
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
          if (!used_a[static_cast<std::size_t>(a)] && !used_b[static_cast<std::size_t>(b)] &&
              (ba < 0 || confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] >
                             confusion[static_cast<std::size_t>(ba)][static_cast<std::size_t>(bb)])) {
            ba = a;
            bb = b;
          }
      used_a[static_cast<std::size_t>(ba)] = used_b[static_cast<std::size_t>(bb)] = true;
      best += confusion[static_cast<std::size_t>(ba)][static_cast<std::size_t>(bb)];
    }
  }
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

MonteCarloEstimate logistic_excess(const StackedModel& W, const PlantedWorld& world, std::int64_t n_mc,
                                   std::uint64_t seed) {
  Engine rng(derive_seed(seed, hash_string("excess_mc")));
  std::uniform_int_distribution<Eigen::Index> pick(0, world.n() - 1);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::int64_t k = 0; k < n_mc; ++k) {
    const Eigen::Index i = pick(rng);
    const Vector w_star = world.W_star.col(i);
    const Sample s = draw_sample(w_star, world.family(), world.eps(), rng);
    const double v = sample_loss(world.family(), W.col(i), s) - sample_loss(world.family(), w_star, s);
    const double delta = v - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (v - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc))};
}

}  // namespace

std::vector<MetricRow> evaluate_report(const EstimatorReport& report, const PlantedWorld& world,
                                       const std::vector<std::string>& metrics, std::int64_t n_mc,
                                       std::uint64_t seed) {
  const StackedModel& W = report.W_hat;
  require(W.rows() == world.d() && W.cols() == world.n(), "evaluate_report: model and world shapes differ");
  const Eigen::Index r = world.r();
  const double n = static_cast<double>(world.n());
  const double param_error = (W - world.W_star).squaredNorm() / n;
  const Orthonormalized U_hat = extract_representation(W, r);
  const double sub_F = dist_F2(U_hat.basis, world.U_star) / static_cast<double>(r);
  const std::string base_status = report.converged ? "ok" : "not_converged";

  std::vector<MetricRow> out;
  for (const std::string& metric : metrics) {
    MetricRow row;
    row.estimator = report.estimator;
    row.metric = metric;
    row.status = base_status;
    if (metric == "excess_risk") {
      if (world.family() == Family::Quadratic) {
        row.value = population_risk_quadratic(W, world) - population_risk_quadratic(world.W_star, world);
      } else {
        const MonteCarloEstimate mc = logistic_excess(W, world, n_mc, seed);
        row.value = mc.estimate;
        row.std_error = mc.std_error;
      }
    } else if (metric == "param_error") {
      row.value = param_error;
    } else if (metric == "subspace_error_F") {
      row.value = sub_F;
      // Bound between subspace and parameter error for rank <= r models.
      const double nu2 = diagnostics(world).nu2;
      if (numerical_rank(W) <= r && nu2 > 0.0 && sub_F > param_error / nu2 + 1e-9) row.status = "bound_violated";
    } else if (metric == "subspace_error_op") {
      row.value = dist_op2(U_hat.basis, world.U_star);
    } else if (metric == "cluster_accuracy") {
      require(world.cluster_map && world.centers, "evaluate_report: cluster_accuracy needs a clustered world");
      std::vector<int> labels;
      if (report.assignment) {
        labels = *report.assignment;
      } else {
        // Nearest planted center for estimators without an assignment.
        const Matrix& C = *world.centers;
        for (Eigen::Index i = 0; i < W.cols(); ++i) {
          Eigen::Index best = 0;
          (C.colwise() - W.col(i)).colwise().squaredNorm().minCoeff(&best);
          labels.push_back(static_cast<int>(best));
        }
      }
      row.value = relabeled_accuracy(labels, *world.cluster_map, static_cast<int>(r));
    } else {
      throw ParameterError("evaluate_report: unknown metric '" + metric + "'");
    }
    out.push_back(std::move(row));
  }
  return out;
}

namespace {

std::string cell_estimator_key(const SweepPoint& p, std::uint64_t seed, const std::string& est) {
  return point_key(p) + "|" + std::to_string(seed) + "|" + est;
}

void write_row(std::ostream& os, const MetricRow& row) {
  for (double v : row.point) os << format_double(v) << ',';
  os << row.seed << ',' << row.estimator << ',' << row.metric << ',';
  if (std::isfinite(row.value)) os << format_double(row.value);
  os << ',';
  if (std::isfinite(row.value)) os << format_double(row.std_error);
  os << ',' << row.status << '\n';
}

void write_timing_row(std::ostream& os, const TimingRow& row) {
  for (double v : row.point) os << format_double(v) << ',';
  os << row.seed << ',' << row.estimator << ',' << format_double(row.wall_time) << '\n';
}

std::string results_header(const std::vector<std::string>& axes) {
  std::string h;
  for (const std::string& a : axes) h += a + ",";
  return h + "seed,estimator,metric,value,std_error,status";
}

std::string timings_header(const std::vector<std::string>& axes) {
  std::string h;
  for (const std::string& a : axes) h += a + ",";
  return h + "seed,estimator,wall_time";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<TimingRow> read_timings_csv(const std::filesystem::path& path, std::size_t n_axes) {
  std::vector<TimingRow> out;
  std::ifstream is(path);
  if (!is) return out;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != n_axes + 3) throw ParameterError("timings.csv: malformed row");
    TimingRow t;
    for (std::size_t k = 0; k < n_axes; ++k) t.point.push_back(parse_double(f[k]));
    t.seed = std::stoull(f[n_axes]);
    t.estimator = f[n_axes + 1];
    t.wall_time = parse_double(f[n_axes + 2]);
    out.push_back(std::move(t));
  }
  return out;
}

struct CellOutput {
  std::vector<MetricRow> rows;
  std::vector<TimingRow> timings;
};

std::string nuclear_cache_key(const EstimatorSpec& e) {
  json j = estimator_json(e);
  j.erase("name");
  return j.dump();
}

CellOutput run_cell(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed,
                    const std::set<std::string>& pending) {
  CellOutput out;
  auto failed_rows = [&](const std::string& estimator) {
    for (const std::string& metric : config.metrics) {
      MetricRow row;
      row.point = point;
      row.seed = seed;
      row.estimator = estimator;
      row.metric = metric;
      row.value = nan();
      row.std_error = nan();
      row.status = "failed";
      out.rows.push_back(std::move(row));
    }
    out.timings.push_back({point, seed, estimator, 0.0});
  };

  std::optional<PlantedWorld> world;
  Datasets data;
  try {
    world = cell_world(config, point, seed);
    data = cell_data(config, point, seed, *world);
  } catch (const std::exception&) {
    for (const EstimatorSpec& e : config.estimators)
      if (pending.count(e.name)) failed_rows(e.name);
    return out;
  }

  const std::uint64_t solver_base = derive_seed(world_hash(config) ^ hash_string(point_key(point)), seed);
  std::map<std::string, EstimatorReport> nuclear_cache;
  for (const EstimatorSpec& e : config.estimators) {
    if (!pending.count(e.name)) continue;
    try {
      SolverOptions opts = e.opts;
      opts.seed = derive_seed(solver_base, hash_string(e.name));
      const double B = world->B();
      const Eigen::Index r = world->r();
      EstimatorReport report;
      if (e.name == "local") {
        report = fit_local(data, B, opts);
      } else if (e.name == "lowrank_bm") {
        report = fit_lowrank_bm(data, r, B, opts);
      } else if (e.name == "lowrank_iht") {
        report = fit_lowrank_iht(data, r, B, opts);
      } else if (e.name == "clustered") {
        report = fit_clustered(data, r, B, opts);
      } else {
        const std::string key = nuclear_cache_key(e);
        auto it = nuclear_cache.find(key);
        if (it == nuclear_cache.end()) {
          opts.seed = derive_seed(solver_base, hash_string("nuclear"));
          const double kappa = e.kappa ? *e.kappa : condition_number(*world);
          it = nuclear_cache.emplace(key, fit_nuclear(data, r, kappa, B, e.s, opts)).first;
        }
        report = it->second;
        if (e.name == "nuclear_svd") {
          report.estimator = "nuclear_svd";
          report.W_hat = *report.W_svd;
        }
      }
      std::vector<MetricRow> rows =
          evaluate_report(report, *world, config.metrics, config.n_mc, derive_seed(solver_base, hash_string("eval")));
      for (MetricRow& row : rows) {
        row.point = point;
        row.seed = seed;
        row.estimator = e.name;
        out.rows.push_back(std::move(row));
      }
      out.timings.push_back({point, seed, e.name, report.wall_time});
    } catch (const std::exception&) {
      failed_rows(e.name);
    }
  }
  return out;
}

}  // namespace

void write_results_csv(const std::filesystem::path& path, const std::vector<std::string>& axes,
                       const std::vector<MetricRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParameterError("cannot open " + path.string() + " for writing");
  os << results_header(axes) << '\n';
  for (const MetricRow& row : rows) write_row(os, row);
}

std::vector<MetricRow> read_results_csv(const std::filesystem::path& path, std::vector<std::string>* axes) {
  std::ifstream is(path);
  if (!is) throw ParameterError("cannot open " + path.string() + " for reading");
  std::string line;
  if (!std::getline(is, line)) throw ParameterError(path.string() + ": empty results file");
  const auto header = split_csv(line);
  const auto seed_pos = std::find(header.begin(), header.end(), "seed");
  if (seed_pos == header.end() || header.end() - seed_pos != 6)
    throw ParameterError(path.string() + ": header must end with seed,estimator,metric,value,std_error,status");
  const auto n_axes = static_cast<std::size_t>(seed_pos - header.begin());
  if (axes != nullptr) axes->assign(header.begin(), seed_pos);
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != n_axes + 6) throw ParameterError(path.string() + ": malformed row '" + line + "'");
    MetricRow row;
    for (std::size_t k = 0; k < n_axes; ++k) row.point.push_back(parse_double(f[k]));
    row.seed = std::stoull(f[n_axes]);
    row.estimator = f[n_axes + 1];
    row.metric = f[n_axes + 2];
    row.value = f[n_axes + 3].empty() ? nan() : parse_double(f[n_axes + 3]);
    row.std_error = f[n_axes + 4].empty() ? nan() : parse_double(f[n_axes + 4]);
    row.status = f[n_axes + 5];
    rows.push_back(std::move(row));
  }
  return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult result;
  for (const SweepAxis& a : config.sweep) result.axes.push_back(a.key);
  std::filesystem::create_directories(config.out_dir);
  const auto results_path = config.out_dir / "results.csv";
  const auto timings_path = config.out_dir / "timings.csv";

  // Previously completed rows, keyed by (point, seed, estimator).
  std::map<std::string, std::vector<MetricRow>> done_rows;
  std::map<std::string, TimingRow> done_timings;
  if (std::filesystem::exists(results_path)) {
    std::vector<std::string> axes;
    for (MetricRow& row : read_results_csv(results_path, &axes)) {
      if (axes != result.axes)
        throw ParameterError(results_path.string() + " was written for different sweep axes");
      done_rows[cell_estimator_key(row.point, row.seed, row.estimator)].push_back(std::move(row));
    }
    for (TimingRow& t : read_timings_csv(timings_path, result.axes.size()))
      done_timings[cell_estimator_key(t.point, t.seed, t.estimator)] = std::move(t);
  }

  struct Cell {
    SweepPoint point;
    std::uint64_t seed;
    std::set<std::string> pending;
  };
  const std::vector<SweepPoint> points = sweep_points(config);
  std::vector<Cell> cells;
  for (const SweepPoint& p : points)
    for (std::uint64_t seed : config.seeds) {
      Cell cell{p, seed, {}};
      for (const EstimatorSpec& e : config.estimators) {
        const auto it = done_rows.find(cell_estimator_key(p, seed, e.name));
        std::set<std::string> have;
        if (it != done_rows.end())
          for (const MetricRow& row : it->second) have.insert(row.metric);
        bool complete = true;
        for (const std::string& m : config.metrics) complete = complete && have.count(m) > 0;
        if (!complete) cell.pending.insert(e.name);
      }
      if (cell.pending.empty()) {
        ++result.cells_skipped;
      } else {
        cells.push_back(std::move(cell));
      }
    }

  // Single serialized writer: rows are appended as cells finish so an
  // interrupted sweep can resume; the canonical rewrite happens at the end.
  std::mutex writer;
  std::vector<CellOutput> outputs(cells.size());
  if (!cells.empty()) {
    const bool fresh_results = !std::filesystem::exists(results_path);
    const bool fresh_timings = !std::filesystem::exists(timings_path);
    std::ofstream results_os(results_path, std::ios::binary | std::ios::app);
    std::ofstream timings_os(timings_path, std::ios::binary | std::ios::app);
    if (!results_os || !timings_os) throw ParameterError("cannot write into " + config.out_dir.string());
    if (fresh_results) results_os << results_header(result.axes) << '\n';
    if (fresh_timings) timings_os << timings_header(result.axes) << '\n';
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t k = next++; k < cells.size(); k = next++) {
        CellOutput out = run_cell(config, cells[k].point, cells[k].seed, cells[k].pending);
        std::lock_guard<std::mutex> lock(writer);
        for (const MetricRow& row : out.rows) write_row(results_os, row);
        for (const TimingRow& t : out.timings) write_timing_row(timings_os, t);
        results_os.flush();
        timings_os.flush();
        outputs[k] = std::move(out);
      }
    };
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), cells.size());
    std::vector<std::thread> threads;
    for (std::size_t w = 1; w < n_workers; ++w) threads.emplace_back(worker);
    worker();
    for (std::thread& t : threads) t.join();
    result.cells_computed = static_cast<int>(cells.size());
  }

  for (CellOutput& out : outputs) {
    for (MetricRow& row : out.rows)
      done_rows[cell_estimator_key(row.point, row.seed, row.estimator)].push_back(std::move(row));
    for (TimingRow& t : out.timings) done_timings[cell_estimator_key(t.point, t.seed, t.estimator)] = std::move(t);
  }

  // Canonical order: sweep point, seed, estimator, metric (all in config order).
  for (const SweepPoint& p : points)
    for (std::uint64_t seed : config.seeds)
      for (const EstimatorSpec& e : config.estimators) {
        const std::string key = cell_estimator_key(p, seed, e.name);
        const auto it = done_rows.find(key);
        if (it == done_rows.end()) continue;
        for (const std::string& m : config.metrics) {
          // Last written row wins, so a recomputed metric replaces a stale one.
          const auto& rows = it->second;
          const auto found = std::find_if(rows.rbegin(), rows.rend(), [&](const MetricRow& r) { return r.metric == m; });
          if (found != rows.rend()) result.rows.push_back(*found);
        }
        const auto t = done_timings.find(key);
        if (t != done_timings.end()) result.timings.push_back(t->second);
      }

  write_results_csv(results_path, result.axes, result.rows);
  std::ofstream timings_os(timings_path, std::ios::binary);
  timings_os << timings_header(result.axes) << '\n';
  for (const TimingRow& t : result.timings) write_timing_row(timings_os, t);
  std::ofstream config_os(config.out_dir / "config.json", std::ios::binary);
  config_os << config_to_json(config) << '\n';
  return result;
}

namespace {

std::size_t axis_index(const std::vector<std::string>& axes, const std::string& axis) {
  const auto it = std::find(axes.begin(), axes.end(), axis);
  if (it == axes.end()) throw ParameterError("no sweep axis named '" + axis + "'");
  return static_cast<std::size_t>(it - axes.begin());
}

bool usable(const MetricRow& row) { return row.status != "failed" && std::isfinite(row.value); }

// Mean metric value per x for one estimator.
std::map<double, std::pair<double, int>> means_by_x(const std::vector<MetricRow>& rows, std::size_t xi,
                                                   const std::string& metric, const std::string& estimator) {
  std::map<double, std::pair<double, int>> acc;
  for (const MetricRow& row : rows) {
    if (row.metric != metric || row.estimator != estimator || !usable(row)) continue;
    auto& [sum, count] = acc[row.point[xi]];
    sum += row.value;
    ++count;
  }
  return acc;
}

std::string only_estimator(const std::vector<MetricRow>& rows, const std::string& metric) {
  std::set<std::string> names;
  for (const MetricRow& row : rows)
    if (row.metric == metric) names.insert(row.estimator);
  if (names.size() != 1)
    throw ParameterError("rows hold " + std::to_string(names.size()) + " estimators for metric '" + metric +
                         "'; name one explicitly");
  return *names.begin();
}

}  // namespace

ScalingFit fit_scaling_exponent(const std::vector<MetricRow>& rows, const std::vector<std::string>& axes,
                                const std::string& x_axis, const std::string& metric,
                                const std::string& estimator) {
  const std::size_t xi = axis_index(axes, x_axis);
  const std::string est = estimator.empty() ? only_estimator(rows, metric) : estimator;
  for (std::size_t k = 0; k < axes.size(); ++k) {
    if (k == xi) continue;
    std::set<double> values;
    for (const MetricRow& row : rows)
      if (row.metric == metric && row.estimator == est) values.insert(row.point[k]);
    if (values.size() > 1)
      throw ParameterError("rows vary along axis '" + axes[k] + "'; filter them before fitting over '" + x_axis + "'");
  }
  ScalingFit fit;
  for (const auto& [x, acc] : means_by_x(rows, xi, metric, est)) {
    const double mean = acc.first / acc.second;
    if (x <= 0.0 || mean <= 0.0) {
      fit.warnings.push_back("excluded " + x_axis + "=" + format_double(x) + " (non-positive value)");
      continue;
    }
    fit.x.push_back(x);
    fit.mean.push_back(mean);
  }
  if (fit.x.size() < 3)
    throw ParameterError("fit_scaling_exponent: need at least 3 positive points for " + metric + " over " + x_axis);
  const auto k = static_cast<double>(fit.x.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    sx += std::log(fit.x[i]);
    sy += std::log(fit.mean[i]);
  }
  const double mx = sx / k;
  const double my = sy / k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    const double dx = std::log(fit.x[i]) - mx;
    const double dy = std::log(fit.mean[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

BaselineComparison compare_rows(const std::vector<MetricRow>& rows, const std::vector<std::string>& estimators,
                                double floor) {
  require(estimators.size() >= 2, "compare_baselines: at least two estimators are required");
  BaselineComparison cmp;
  cmp.estimators = estimators;
  std::map<std::string, std::size_t> index;
  std::vector<std::string> order;
  for (const MetricRow& row : rows) {
    const auto e = std::find(estimators.begin(), estimators.end(), row.estimator);
    if (e == estimators.end()) continue;
    const std::string key = point_key(row.point) + "|" + std::to_string(row.seed) + "|" + row.metric;
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, cmp.table.size()).first;
      cmp.table.push_back({row.point, row.seed, row.metric, std::vector<double>(estimators.size(), nan())});
    }
    cmp.table[it->second].values[static_cast<std::size_t>(e - estimators.begin())] = usable(row) ? row.value : nan();
  }
  std::vector<std::string> metrics;
  for (const PairedRow& p : cmp.table)
    if (!contains(metrics, p.metric)) metrics.push_back(p.metric);
  for (const std::string& metric : metrics)
    for (std::size_t e = 1; e < estimators.size(); ++e) {
      WinRate w{metric, estimators[e], estimators[0]};
      for (const PairedRow& p : cmp.table) {
        if (p.metric != metric) continue;
        const double a = p.values[e];
        const double b = p.values[0];
        if (!std::isfinite(a) || !std::isfinite(b)) continue;
        const bool higher_better = metric == "cluster_accuracy";
        if (!higher_better && std::abs(a) < floor && std::abs(b) < floor) {
          ++w.skipped;
          continue;
        }
        ++w.comparisons;
        if (higher_better ? a > b : a < b) ++w.wins;
      }
      cmp.win_rates.push_back(w);
    }
  return cmp;
}

BaselineComparison compare_baselines(const ExperimentConfig& config) {
  const ExperimentResult result = run_experiment(config);
  std::vector<std::string> names;
  for (const EstimatorSpec& e : config.estimators) names.push_back(e.name);
  BaselineComparison cmp = compare_rows(result.rows, names);
  std::ofstream os(config.out_dir / "comparison.csv", std::ios::binary);
  for (const std::string& a : result.axes) os << a << ',';
  os << "seed,metric";
  for (const std::string& e : names) os << ',' << e;
  os << '\n';
  for (const PairedRow& p : cmp.table) {
    for (double v : p.point) os << format_double(v) << ',';
    os << p.seed << ',' << p.metric;
    for (double v : p.values) os << ',' << (std::isfinite(v) ? format_double(v) : std::string{});
    os << '\n';
  }
  return cmp;
}

std::vector<CheckResult> evaluate_checks(const std::vector<CheckSpec>& checks, const std::vector<MetricRow>& rows,
                                         const std::vector<std::string>& axes) {
  std::vector<CheckResult> out;
  for (const CheckSpec& c : checks) {
    CheckResult res{c.name, false, {}};
    try {
      const std::string est = c.estimator.empty() ? only_estimator(rows, c.metric) : c.estimator;
      if (c.type == "slope") {
        const ScalingFit fit = fit_scaling_exponent(rows, axes, c.x, c.metric, est);
        res.passed = fit.slope >= c.min && fit.slope <= c.max;
        res.detail = "slope " + format_double(fit.slope) + " (r2 " + format_double(fit.r_squared) + ")";
      } else if (c.type == "mean_ratio") {
        const std::size_t xi = axis_index(axes, c.x);
        const auto num = means_by_x(rows, xi, c.metric, est);
        const auto den = means_by_x(rows, xi, c.metric, c.baseline.empty() ? est : c.baseline);
        const double over = c.baseline.empty() ? c.over : (c.over != 0.0 ? c.over : c.at);
        const auto a = num.find(c.at);
        const auto b = den.find(over);
        if (a == num.end() || b == den.end()) throw ParameterError("mean_ratio: missing sweep point");
        const double ratio = (a->second.first / a->second.second) / (b->second.first / b->second.second);
        res.passed = ratio >= c.min && ratio <= c.max;
        res.detail = "ratio " + format_double(ratio);
      } else if (c.type == "monotone_decreasing") {
        const auto means = means_by_x(rows, axis_index(axes, c.x), c.metric, est);
        res.passed = means.size() >= 2;
        double previous = std::numeric_limits<double>::infinity();
        for (const auto& [x, acc] : means) {
          const double mean = acc.first / acc.second;
          res.detail += (res.detail.empty() ? "" : " ") + format_double(mean);
          res.passed = res.passed && mean < previous;
          previous = mean;
        }
      } else if (c.type == "paired_factor") {
        const BaselineComparison cmp = compare_rows(rows, {c.baseline, est}, 0.0);
        int good = 0;
        int total = 0;
        for (const PairedRow& p : cmp.table) {
          if (p.metric != c.metric) continue;
          ++total;
          if (std::isfinite(p.values[0]) && std::isfinite(p.values[1]) && p.values[1] <= c.factor * p.values[0]) ++good;
        }
        res.passed = total > 0 && good >= c.min_fraction * total;
        res.detail = std::to_string(good) + "/" + std::to_string(total);
      } else if (c.type == "fraction_below") {
        int good = 0;
        int total = 0;
        for (const MetricRow& row : rows) {
          if (row.metric != c.metric || row.estimator != est) continue;
          ++total;
          if (usable(row) && row.value <= c.max) ++good;
        }
        res.passed = total > 0 && good >= c.min_fraction * total;
        res.detail = std::to_string(good) + "/" + std::to_string(total);
      }
    } catch (const std::exception& e) {
      res.passed = false;
      res.detail = e.what();
    }
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace smtl

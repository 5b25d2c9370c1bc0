#include "smtl/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "smtl/error.hpp"

namespace smtl {

namespace {

using nlohmann::json;

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParameterError("cannot open " + path.string() + " for reading");
  return is;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParameterError("cannot open " + path.string() + " for writing");
  return os;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool next_content_line(std::istream& is, std::string& line) {
  while (std::getline(is, line)) {
    if (!trim(line).empty()) return true;
  }
  return false;
}

void write_row(std::ostream& os, const auto& values, Eigen::Index count) {
  for (Eigen::Index j = 0; j < count; ++j) {
    if (j > 0) os << ',';
    os << format_double(values(j));
  }
  os << '\n';
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    if (t == "inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ParameterError("cannot parse '" + t + "' as a number");
  }
  return value;
}

void write_matrix_csv(std::ostream& os, const Matrix& M) {
  os << "# " << M.rows() << ' ' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) write_row(os, M.row(i), M.cols());
}

Matrix read_matrix_csv(std::istream& is) {
  std::string line;
  if (!next_content_line(is, line) || line.rfind('#', 0) != 0)
    throw ParameterError("matrix CSV: missing '# rows cols' header");
  std::istringstream header(line.substr(1));
  Eigen::Index rows = -1;
  Eigen::Index cols = -1;
  header >> rows >> cols;
  if (!header || rows < 0 || cols < 0) throw ParameterError("matrix CSV: malformed header '" + line + "'");
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!next_content_line(is, line)) throw ParameterError("matrix CSV: fewer rows than declared");
    const auto fields = split(line, ',');
    if (static_cast<Eigen::Index>(fields.size()) != cols)
      throw ParameterError("matrix CSV: row " + std::to_string(i) + " has the wrong field count");
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = parse_double(fields[static_cast<std::size_t>(j)]);
  }
  return M;
}

void save_matrix(const std::filesystem::path& path, const Matrix& M) {
  auto os = open_out(path);
  write_matrix_csv(os, M);
}

Matrix load_matrix(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_matrix_csv(is);
}

void write_datasets_csv(std::ostream& os, const Datasets& data) {
  for (const TaskDataset& t : data) {
    os << "# " << t.task_id() << ' ' << to_string(t.family()) << ' ' << t.dim() << ' ' << t.size()
       << '\n';
    for (Eigen::Index j = 0; j < t.size(); ++j) {
      for (Eigen::Index k = 0; k < t.dim(); ++k) os << format_double(t.inputs()(j, k)) << ',';
      os << format_double(t.labels()(j)) << '\n';
    }
  }
}

Datasets read_datasets_csv(std::istream& is) {
  Datasets out;
  std::string line;
  while (next_content_line(is, line)) {
    if (line.rfind('#', 0) != 0) throw ParameterError("dataset CSV: expected a '# task_id family d m' header");
    std::istringstream header(line.substr(1));
    int task_id = 0;
    std::string family;
    Eigen::Index d = 0;
    Eigen::Index m = 0;
    header >> task_id >> family >> d >> m;
    if (!header || d < 1 || m < 1) throw ParameterError("dataset CSV: malformed header '" + line + "'");
    Matrix X(m, d);
    Vector y(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!next_content_line(is, line)) throw ParameterError("dataset CSV: truncated task block");
      const auto fields = split(line, ',');
      if (static_cast<Eigen::Index>(fields.size()) != d + 1)
        throw ParameterError("dataset CSV: sample row has the wrong field count");
      for (Eigen::Index k = 0; k < d; ++k) X(j, k) = parse_double(fields[static_cast<std::size_t>(k)]);
      y(j) = parse_double(fields.back());
    }
    out.emplace_back(std::move(X), std::move(y), parse_family(family), task_id);
  }
  return out;
}

void save_datasets(const std::filesystem::path& path, const Datasets& data) {
  auto os = open_out(path);
  write_datasets_csv(os, data);
}

Datasets load_datasets(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_datasets_csv(is);
}

void save_world(const std::filesystem::path& dir, const PlantedWorld& world) {
  std::filesystem::create_directories(dir);
  json meta;
  meta["kind"] = to_string(world.spec.kind);
  meta["d"] = world.spec.d;
  meta["n"] = world.spec.n;
  meta["r"] = world.spec.r;
  meta["B"] = world.spec.B;
  meta["family"] = to_string(world.spec.family);
  meta["eps"] = world.spec.eps;
  meta["head_style"] = to_string(world.spec.head_style);
  meta["separation"] = world.spec.separation;
  meta["seed"] = world.seed;
  auto os = open_out(dir / "world.json");
  os << meta.dump(2) << '\n';
  save_matrix(dir / "U_star.csv", world.U_star.basis());
  save_matrix(dir / "V_star.csv", world.V_star);
  if (world.centers && world.cluster_map) {
    save_matrix(dir / "centers.csv", *world.centers);
    auto cm = open_out(dir / "cluster_map.csv");
    cm << "# task_id cluster\n";
    for (std::size_t i = 0; i < world.cluster_map->size(); ++i) cm << i << ',' << (*world.cluster_map)[i] << '\n';
  }
}

PlantedWorld load_world(const std::filesystem::path& dir) {
  auto is = open_in(dir / "world.json");
  const json meta = json::parse(is);
  PlantedWorld world;
  world.spec.kind = parse_world_kind(meta.at("kind").get<std::string>());
  world.spec.d = meta.at("d").get<Eigen::Index>();
  world.spec.n = meta.at("n").get<Eigen::Index>();
  world.spec.r = meta.at("r").get<Eigen::Index>();
  world.spec.B = meta.at("B").get<double>();
  world.spec.family = parse_family(meta.at("family").get<std::string>());
  world.spec.eps = meta.at("eps").get<double>();
  world.spec.head_style = parse_head_style(meta.at("head_style").get<std::string>());
  world.spec.separation = meta.at("separation").get<double>();
  world.seed = meta.at("seed").get<std::uint64_t>();
  world.U_star = Representation(load_matrix(dir / "U_star.csv"));
  world.V_star = load_matrix(dir / "V_star.csv");
  if (std::filesystem::exists(dir / "centers.csv")) {
    world.centers = load_matrix(dir / "centers.csv");
    auto cm = open_in(dir / "cluster_map.csv");
    std::string line;
    std::vector<int> map;
    while (next_content_line(cm, line)) {
      if (line.rfind('#', 0) == 0) continue;
      const auto fields = split(line, ',');
      if (fields.size() != 2) throw ParameterError("cluster_map.csv: malformed row");
      map.push_back(static_cast<int>(parse_double(fields[1])));
    }
    world.W_star.resize(world.centers->rows(), static_cast<Eigen::Index>(map.size()));
    for (std::size_t i = 0; i < map.size(); ++i)
      world.W_star.col(static_cast<Eigen::Index>(i)) = world.centers->col(map[i]);
    world.cluster_map = std::move(map);
  } else {
    world.W_star = world.U_star.basis() * world.V_star;
  }
  if (world.W_star.rows() != world.spec.d || world.W_star.cols() != world.spec.n)
    throw ParameterError("world directory " + dir.string() + ": matrix shapes disagree with world.json");
  return world;
}

void save_report(const std::filesystem::path& dir, const EstimatorReport& report,
                 const std::string& options_echo) {
  std::filesystem::create_directories(dir);
  save_matrix(dir / "W_hat.csv", report.W_hat);
  if (report.U_hat) save_matrix(dir / "U_hat.csv", report.U_hat->basis());
  if (report.W_svd) save_matrix(dir / "W_svd.csv", *report.W_svd);
  if (report.assignment) {
    auto os = open_out(dir / "assignment.csv");
    os << "# task_id cluster\n";
    for (std::size_t i = 0; i < report.assignment->size(); ++i) os << i << ',' << (*report.assignment)[i] << '\n';
  }
  {
    auto os = open_out(dir / "trace.csv");
    os << "iteration,objective,grad_norm,step\n";
    for (const TraceRow& row : report.trace)
      os << row.iteration << ',' << format_double(row.objective) << ',' << format_double(row.grad_norm)
         << ',' << format_double(row.step) << '\n';
  }
  json meta;
  meta["estimator"] = report.estimator;
  meta["converged"] = report.converged;
  meta["wall_time"] = report.wall_time;
  meta["warnings"] = report.warnings;
  meta["options"] = json::parse(options_echo);
  auto os = open_out(dir / "report.json");
  os << meta.dump(2) << '\n';
}

EstimatorReport load_report(const std::filesystem::path& dir) {
  EstimatorReport report;
  report.W_hat = load_matrix(dir / "W_hat.csv");
  if (std::filesystem::exists(dir / "U_hat.csv")) report.U_hat = Representation(load_matrix(dir / "U_hat.csv"));
  if (std::filesystem::exists(dir / "W_svd.csv")) report.W_svd = load_matrix(dir / "W_svd.csv");
  if (std::filesystem::exists(dir / "assignment.csv")) {
    auto is = open_in(dir / "assignment.csv");
    std::string line;
    std::vector<int> a;
    while (next_content_line(is, line)) {
      if (line.rfind('#', 0) == 0) continue;
      const auto fields = split(line, ',');
      a.push_back(static_cast<int>(parse_double(fields.at(1))));
    }
    report.assignment = std::move(a);
  }
  if (std::filesystem::exists(dir / "trace.csv")) {
    auto is = open_in(dir / "trace.csv");
    std::string line;
    std::getline(is, line);
    while (next_content_line(is, line)) {
      const auto f = split(line, ',');
      if (f.size() != 4) throw ParameterError("trace.csv: malformed row");
      report.trace.push_back({static_cast<int>(parse_double(f[0])), parse_double(f[1]), parse_double(f[2]),
                              parse_double(f[3])});
      report.objective_trace.push_back(report.trace.back().objective);
    }
  }
  auto is = open_in(dir / "report.json");
  const json meta = json::parse(is);
  report.estimator = meta.value("estimator", std::string{});
  report.converged = meta.value("converged", false);
  report.wall_time = meta.value("wall_time", 0.0);
  report.warnings = meta.value("warnings", std::vector<std::string>{});
  return report;
}

}  // namespace smtl

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "smtl/estimators.hpp"
#include "smtl/task_models.hpp"
#include "smtl/types.hpp"
#include "smtl/world_gen.hpp"

namespace smtl {

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

/// `# rows cols` header, then one comma-separated line per row.
void write_matrix_csv(std::ostream& os, const Matrix& M);
Matrix read_matrix_csv(std::istream& is);
void save_matrix(const std::filesystem::path& path, const Matrix& M);
Matrix load_matrix(const std::filesystem::path& path);

/// Blocks of `# task_id family d m` followed by m lines `x_1,...,x_d,y`.
void write_datasets_csv(std::ostream& os, const Datasets& data);
Datasets read_datasets_csv(std::istream& is);
void save_datasets(const std::filesystem::path& path, const Datasets& data);
Datasets load_datasets(const std::filesystem::path& path);

/// world.json, U_star.csv, V_star.csv and, for clustered worlds, centers.csv
/// and cluster_map.csv.
void save_world(const std::filesystem::path& dir, const PlantedWorld& world);
PlantedWorld load_world(const std::filesystem::path& dir);

/// W_hat.csv, optional U_hat.csv / assignment.csv / W_svd.csv, trace.csv and
/// report.json. `options_echo` is embedded verbatim as JSON text.
void save_report(const std::filesystem::path& dir, const EstimatorReport& report,
                 const std::string& options_echo = "{}");
EstimatorReport load_report(const std::filesystem::path& dir);

}  // namespace smtl

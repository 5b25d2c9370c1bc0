#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "smtl/experiment.hpp"

namespace smtl {

struct PlotSpec {
  std::string x_axis;
  std::string metric;
  /// Empty selects every estimator present in the rows.
  std::vector<std::string> estimators;
  std::string title;
  int width = 640;
  int height = 420;
};

/// Log-log chart: one faint dot per (seed, x), one mean line per estimator,
/// legend and colors ordered by estimator name. Output bytes depend only on
/// the inputs. Failed rows and non-positive values are left out; an empty
/// selection throws ParameterError naming the filter.
std::string render_svg(const std::vector<MetricRow>& rows, const std::vector<std::string>& axes,
                       const PlotSpec& spec);

/// Writes `<metric>_vs_<x_axis>.svg` into out_dir for each spec.
std::vector<std::filesystem::path> emit_plots(const std::vector<MetricRow>& rows,
                                              const std::vector<std::string>& axes,
                                              const std::vector<PlotSpec>& specs,
                                              const std::filesystem::path& out_dir);

}  // namespace smtl

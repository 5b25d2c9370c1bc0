#include "smtl/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "smtl/error.hpp"

namespace smtl {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo;
  double hi;
};

// Log10 range padded so single-value data still has a visible span.
Range log_range(const std::set<double>& values) {
  double lo = std::log10(*values.begin());
  double hi = std::log10(*values.rbegin());
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return {lo, hi};
}

}  // namespace

std::string render_svg(const std::vector<MetricRow>& rows, const std::vector<std::string>& axes,
                       const PlotSpec& spec) {
  const auto xit = std::find(axes.begin(), axes.end(), spec.x_axis);
  if (xit == axes.end()) throw ParameterError("plot: no sweep axis named '" + spec.x_axis + "'");
  const auto xi = static_cast<std::size_t>(xit - axes.begin());

  // estimator -> x -> per-seed values
  std::map<std::string, std::map<double, std::vector<double>>> series;
  std::set<double> xs;
  std::set<double> ys;
  for (const MetricRow& row : rows) {
    if (row.metric != spec.metric || row.status == "failed" || !std::isfinite(row.value)) continue;
    if (!spec.estimators.empty() &&
        std::find(spec.estimators.begin(), spec.estimators.end(), row.estimator) == spec.estimators.end())
      continue;
    const double x = row.point[xi];
    if (x <= 0.0 || row.value <= 0.0) continue;
    series[row.estimator][x].push_back(row.value);
    xs.insert(x);
    ys.insert(row.value);
  }
  if (series.empty()) {
    std::string filter = "metric=" + spec.metric + ", x=" + spec.x_axis;
    if (!spec.estimators.empty()) {
      filter += ", estimators=";
      for (std::size_t k = 0; k < spec.estimators.size(); ++k) filter += (k > 0 ? "|" : "") + spec.estimators[k];
    }
    throw ParameterError("plot: no positive rows match " + filter);
  }

  const double W = spec.width;
  const double H = spec.height;
  const double left = 70.0, right = 150.0, top = 40.0, bottom = 50.0;
  const double pw = W - left - right;
  const double ph = H - top - bottom;
  const Range rx = log_range(xs);
  const Range ry = log_range(ys);
  auto px = [&](double x) { return left + (std::log10(x) - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double y) { return top + ph - (std::log10(y) - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + label(W) + "\" height=\"" + label(H) +
         "\" viewBox=\"0 0 " + label(W) + " " + label(H) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::string title = spec.title.empty() ? spec.metric + " vs " + spec.x_axis : spec.title;
  svg += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
         "</text>\n";
  svg += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";

  // Decade ticks; the data extremes are labeled when no decade falls inside.
  auto ticks = [](const Range& r, const std::set<double>& data) {
    std::vector<double> t;
    for (int e = static_cast<int>(std::ceil(r.lo)); e <= static_cast<int>(std::floor(r.hi)); ++e)
      t.push_back(std::pow(10.0, e));
    if (t.empty()) t = {*data.begin(), *data.rbegin()};
    if (t.size() == 2 && t[0] == t[1]) t.pop_back();
    return t;
  };
  for (double t : ticks(rx, xs)) {
    svg += "<line x1=\"" + fmt(px(t)) + "\" y1=\"" + fmt(top + ph) + "\" x2=\"" + fmt(px(t)) + "\" y2=\"" +
           fmt(top + ph + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(px(t)) + "\" y=\"" + fmt(top + ph + 18) + "\" text-anchor=\"middle\">" + label(t) +
           "</text>\n";
  }
  for (double t : ticks(ry, ys)) {
    svg += "<line x1=\"" + fmt(left - 5) + "\" y1=\"" + fmt(py(t)) + "\" x2=\"" + fmt(left) + "\" y2=\"" +
           fmt(py(t)) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(left - 8) + "\" y=\"" + fmt(py(t) + 4) + "\" text-anchor=\"end\">" + label(t) +
           "</text>\n";
  }
  svg += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(H - 10) + "\" text-anchor=\"middle\">" +
         escape(spec.x_axis) + " (log)</text>\n";
  svg += "<text x=\"16\" y=\"" + fmt(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fmt(top + ph / 2) + ")\">" + escape(spec.metric) + " (log)</text>\n";

  // std::map iterates estimators in name order, which fixes colors and legend.
  std::size_t k = 0;
  for (const auto& [name, by_x] : series) {
    const std::string color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    svg += "<g class=\"series\" data-estimator=\"" + escape(name) + "\">\n";
    std::string points;
    for (auto [x, values] : by_x) {
      // Sorted so the bytes do not depend on row order.
      std::sort(values.begin(), values.end());
      for (double y : values)
        svg += "<circle cx=\"" + fmt(px(x)) + "\" cy=\"" + fmt(py(y)) + "\" r=\"2\" fill=\"" + color +
               "\" fill-opacity=\"0.35\"/>\n";
      double mean = 0.0;
      for (double y : values) mean += y;
      mean /= static_cast<double>(values.size());
      points += (points.empty() ? "" : " ") + fmt(px(x)) + "," + fmt(py(mean));
    }
    svg += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "</g>\n";
    const double ly = top + 10 + 18 * static_cast<double>(k);
    svg += "<line x1=\"" + fmt(left + pw + 12) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(left + pw + 32) +
           "\" y2=\"" + fmt(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fmt(left + pw + 38) + "\" y=\"" + fmt(ly + 4) + "\">" + escape(name) + "</text>\n";
    ++k;
  }
  svg += "</svg>\n";
  return svg;
}

std::vector<std::filesystem::path> emit_plots(const std::vector<MetricRow>& rows, const std::vector<std::string>& axes,
                                              const std::vector<PlotSpec>& specs,
                                              const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const PlotSpec& spec : specs) {
    const std::string svg = render_svg(rows, axes, spec);
    const auto path = out_dir / (spec.metric + "_vs_" + spec.x_axis + ".svg");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParameterError("cannot open " + path.string() + " for writing");
    os << svg;
    written.push_back(path);
  }
  return written;
}

}  // namespace smtl

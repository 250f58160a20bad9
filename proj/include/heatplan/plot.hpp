#pragma once

// Minimal self-contained SVG charts: scatter per controller and temperature
// trajectories, each written with a sidecar CSV of the exact plotted points.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "heatplan/env.hpp"
#include "heatplan/error.hpp"
#include "heatplan/sweep.hpp"

namespace heatplan {

enum class PlotKind { ScatterByAxis, Trajectory };

inline std::optional<PlotKind> parse_plot_kind(std::string_view s) {
  if (s == "scatter_by_axis") return PlotKind::ScatterByAxis;
  if (s == "trajectory") return PlotKind::Trajectory;
  return std::nullopt;
}

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  bool connect = false;  // polyline instead of markers
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  std::optional<double> reference_y;  // dashed horizontal line, e.g. the target temperature
};

namespace detail {

/// Tick positions on a 1-2-5 ladder covering [lo, hi].
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (raw <= step) break;
  }
  std::vector<double> ticks;
  for (double t = std::floor(lo / step) * step; t <= hi + step * 1e-9; t += step) ticks.push_back(t);
  if (ticks.front() > lo) ticks.insert(ticks.begin(), ticks.front() - step);
  if (ticks.back() < hi) ticks.push_back(ticks.back() + step);
  return ticks;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline constexpr const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace detail

inline std::string render_svg(const ChartSpec& chart) {
  using detail::num;
  constexpr double W = 720, H = 480, left = 80, right = 160, top = 50, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;

  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : chart.series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (chart.reference_y) {
    ymin = std::min(ymin, *chart.reference_y);
    ymax = std::max(ymax, *chart.reference_y);
  }
  const auto xt = detail::nice_ticks(xmin, xmax);
  const auto yt = detail::nice_ticks(ymin, ymax);
  const double x0 = xt.front(), x1 = xt.back(), y0 = yt.front(), y1 = yt.back();
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">"
    << detail::escape_xml(chart.title) << "</text>\n";
  for (double t : xt) {
    o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << top << "\" x2=\"" << num(px(t)) << "\" y2=\"" << top + ph
      << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << num(px(t)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << num(t)
      << "</text>\n";
  }
  for (double t : yt) {
    o << "<line x1=\"" << left << "\" y1=\"" << num(py(t)) << "\" x2=\"" << left + pw << "\" y2=\"" << num(py(t))
      << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << left - 8 << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << num(t)
      << "</text>\n";
  }
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
    << detail::escape_xml(chart.x_label) << "</text>\n";
  o << "<text transform=\"translate(20," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << detail::escape_xml(chart.y_label) << "</text>\n";
  if (chart.reference_y)
    o << "<line x1=\"" << left << "\" y1=\"" << num(py(*chart.reference_y)) << "\" x2=\"" << left + pw << "\" y2=\""
      << num(py(*chart.reference_y)) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";

  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    const char* color = detail::kPalette[i % std::size(detail::kPalette)];
    if (s.connect) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (const auto& [x, y] : s.points) o << num(px(x)) << ',' << num(py(y)) << ' ';
      o << "\"/>\n";
    } else {
      for (const auto& [x, y] : s.points)
        o << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"4\" fill=\"" << color
          << "\" fill-opacity=\"0.75\"/>\n";
    }
    const double ly = top + 10 + 20.0 * static_cast<double>(i);
    o << "<rect x=\"" << left + pw + 15 << "\" y=\"" << ly << "\" width=\"14\" height=\"10\" fill=\"" << color
      << "\"/>\n";
    o << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly + 9 << "\">" << detail::escape_xml(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Sidecar path: the plot path with its extension replaced by .csv.
inline std::filesystem::path sidecar_path(const std::filesystem::path& plot) {
  std::filesystem::path p = plot;
  p.replace_extension(".csv");
  if (p == plot) p += ".csv";
  return p;
}

/// Writes `path` (SVG) and its sidecar CSV `series,x,y`.
inline void emit_chart(const ChartSpec& chart, const std::filesystem::path& path) {
  bool any = false;
  for (const auto& s : chart.series) any = any || !s.points.empty();
  if (!any) throw ConfigError("emit_plot: nothing to plot");
  const std::string svg = render_svg(chart);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << svg;
  if (!os) throw IoError("failed writing '" + path.string() + "'");

  const auto side = sidecar_path(path);
  std::ofstream cs(side, std::ios::binary);
  if (!cs) throw IoError("cannot open '" + side.string() + "' for writing");
  cs << "series,x,y\n";
  for (const auto& s : chart.series)
    for (const auto& [x, y] : s.points) cs << s.label << ',' << detail::fmt_double(x) << ',' << detail::fmt_double(y) << '\n';
}

inline std::string axis_label(SweepAxis a) {
  switch (a) {
    case SweepAxis::InitialTemp: return "Initial temperature (degC)";
    case SweepAxis::Deadline: return "Deadline (steps)";
    case SweepAxis::TargetTemp: return "Target temperature (degC)";
  }
  return "";
}

/// Energy versus the swept setting, one marker series per controller.
inline ChartSpec scatter_chart(const std::vector<SweepRow>& rows, SweepAxis axis) {
  ChartSpec chart;
  chart.title = "Total energy versus " + std::string(axis_name(axis));
  chart.x_label = axis_label(axis);
  chart.y_label = "Total energy (Wh)";
  std::map<std::string, PlotSeries> by_controller;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    auto [it, inserted] = by_controller.try_emplace(r.controller);
    if (inserted) {
      it->second.label = r.controller;
      order.push_back(r.controller);
    }
    it->second.points.emplace_back(r.axis_value(axis), r.energy_wh);
  }
  for (const auto& name : order) chart.series.push_back(std::move(by_controller[name]));
  return chart;
}

inline void emit_scatter_plot(const std::vector<SweepRow>& rows, SweepAxis axis, const std::filesystem::path& path) {
  if (rows.empty()) throw ConfigError("emit_plot: no rows");
  emit_chart(scatter_chart(rows, axis), path);
}

struct LabeledTrajectory {
  std::string label;
  std::vector<Celsius> temps;  // temps[t] at step t
};

/// Temperature versus step, one line per trajectory, dashed target line.
inline void emit_trajectory_plot(const std::vector<LabeledTrajectory>& trajs, std::optional<Celsius> target,
                                 const std::filesystem::path& path) {
  if (trajs.empty()) throw ConfigError("emit_plot: no trajectories");
  ChartSpec chart;
  chart.title = "Single-episode temperature trajectories";
  chart.x_label = "Step";
  chart.y_label = "Temperature (degC)";
  chart.reference_y = target;
  for (const auto& t : trajs) {
    PlotSeries s{t.label, {}, true};
    for (std::size_t i = 0; i < t.temps.size(); ++i) s.points.emplace_back(static_cast<double>(i), t.temps[i]);
    chart.series.push_back(std::move(s));
  }
  emit_chart(chart, path);
}

/// Reads the temp_c column of a trajectory CSV.
inline std::vector<Celsius> read_trajectory_temps(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "step,temp_c,action,power_w,reward,cum_energy_wh")
    throw ConfigError("trajectory CSV: unexpected header");
  std::vector<Celsius> temps;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw ConfigError("trajectory CSV: expected 6 fields");
    temps.push_back(detail::parse_number<double>(f[1], "temp_c"));
  }
  return temps;
}

}  // namespace heatplan

#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cop2l/errors.hpp"
#include "cop2l/serialize.hpp"

namespace cop2l {

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

// Renders the per-task certificate picture: one panel per task, checkpoint
// task on the x axis, the certificate bound and the observed test error as
// two series. Pure text assembly with fixed-precision coordinates, so a
// given table always produces identical bytes.
inline std::string render_bound_figure(const std::vector<MetricsRow>& rows,
                                       const std::string& engine_version,
                                       const std::string& config_hash) {
  if (rows.empty()) throw CsvFormatError("bound figure: empty metrics table");
  bool any_bound = false;
  int task_count = 0;
  int final_checkpoint = 0;
  std::map<std::pair<int, int>, MetricsRow> by_cell;
  for (const auto& row : rows) {
    any_bound = any_bound || row.has_bound;
    task_count = std::max(task_count, row.task);
    final_checkpoint = std::max(final_checkpoint, row.checkpoint_task);
    by_cell[{row.checkpoint_task, row.task}] = row;
  }
  if (!any_bound)
    throw CsvFormatError("bound figure: metrics table has no bound values");

  const double panel_w = 220.0;
  const double panel_h = 170.0;
  const double gap = 24.0;
  const double left = 46.0;
  const double top = 56.0;
  const double plot_l = 34.0;   // inside a panel
  const double plot_r = 210.0;
  const double plot_t = 24.0;
  const double plot_b = 140.0;
  const double width = left + task_count * (panel_w + gap);
  const double height = top + panel_h + 58.0;

  std::string svg;
  svg += "<!-- engine_version=" + engine_version + " config_hash=" + config_hash +
         " -->\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         detail::svg_num(width) + "\" height=\"" + detail::svg_num(height) +
         "\" viewBox=\"0 0 " + detail::svg_num(width) + " " +
         detail::svg_num(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"" + detail::svg_num(left) +
         "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" "
         "fill=\"#161616\">certificate bounds and test error per task</text>\n";

  // Legend.
  double lx = left;
  svg += "<line x1=\"" + detail::svg_num(lx) + "\" y1=\"40\" x2=\"" +
         detail::svg_num(lx + 22) +
         "\" y2=\"40\" stroke=\"#8a3ffc\" stroke-width=\"2\"/>\n";
  svg += "<text x=\"" + detail::svg_num(lx + 28) +
         "\" y=\"44\" font-family=\"sans-serif\" font-size=\"11\" "
         "fill=\"#161616\">bound</text>\n";
  svg += "<line x1=\"" + detail::svg_num(lx + 86) + "\" y1=\"40\" x2=\"" +
         detail::svg_num(lx + 108) +
         "\" y2=\"40\" stroke=\"#0f62fe\" stroke-width=\"2\"/>\n";
  svg += "<text x=\"" + detail::svg_num(lx + 114) +
         "\" y=\"44\" font-family=\"sans-serif\" font-size=\"11\" "
         "fill=\"#161616\">test error</text>\n";

  for (int tau = 1; tau <= task_count; ++tau) {
    const double px = left + (tau - 1) * (panel_w + gap);
    const double py = top;
    auto sx = [&](int checkpoint) {
      if (final_checkpoint == tau)
        return px + (plot_l + plot_r) / 2.0;
      return px + plot_l + (plot_r - plot_l) *
                               (static_cast<double>(checkpoint - tau) /
                                static_cast<double>(final_checkpoint - tau));
    };
    auto sy = [&](double value) {
      double clamped = std::min(1.0, std::max(0.0, value));
      return py + plot_b - (plot_b - plot_t) * clamped;
    };

    svg += "<g>\n";
    svg += "<rect x=\"" + detail::svg_num(px + plot_l) + "\" y=\"" +
           detail::svg_num(py + plot_t) + "\" width=\"" +
           detail::svg_num(plot_r - plot_l) + "\" height=\"" +
           detail::svg_num(plot_b - plot_t) +
           "\" fill=\"none\" stroke=\"#c6c6c6\"/>\n";
    svg += "<text x=\"" + detail::svg_num(px + plot_l) + "\" y=\"" +
           detail::svg_num(py + plot_t - 8) +
           "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#161616\">task " +
           std::to_string(tau) + "</text>\n";
    for (double tick : {0.0, 0.5, 1.0}) {
      svg += "<line x1=\"" + detail::svg_num(px + plot_l) + "\" y1=\"" +
             detail::svg_num(sy(tick)) + "\" x2=\"" + detail::svg_num(px + plot_r) +
             "\" y2=\"" + detail::svg_num(sy(tick)) +
             "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
      svg += "<text x=\"" + detail::svg_num(px + plot_l - 6) + "\" y=\"" +
             detail::svg_num(sy(tick) + 4) +
             "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#525252\" "
             "text-anchor=\"end\">" +
             detail::svg_num(tick) + "</text>\n";
    }
    for (int checkpoint = tau; checkpoint <= final_checkpoint; ++checkpoint) {
      svg += "<text x=\"" + detail::svg_num(sx(checkpoint)) + "\" y=\"" +
             detail::svg_num(py + plot_b + 16) +
             "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#525252\" "
             "text-anchor=\"middle\">" +
             std::to_string(checkpoint) + "</text>\n";
    }
    svg += "<text x=\"" + detail::svg_num(px + (plot_l + plot_r) / 2.0) + "\" y=\"" +
           detail::svg_num(py + plot_b + 34) +
           "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#525252\" "
           "text-anchor=\"middle\">checkpoint task</text>\n";

    std::string bound_points;
    std::string error_points;
    std::string markers;
    for (int checkpoint = tau; checkpoint <= final_checkpoint; ++checkpoint) {
      auto it = by_cell.find({checkpoint, tau});
      if (it == by_cell.end()) continue;
      const MetricsRow& row = it->second;
      double x = sx(checkpoint);
      double ey = sy(1.0 - row.accuracy);
      error_points += detail::svg_num(x) + "," + detail::svg_num(ey) + " ";
      markers += "<circle cx=\"" + detail::svg_num(x) + "\" cy=\"" +
                 detail::svg_num(ey) + "\" r=\"2.5\" fill=\"#0f62fe\"/>\n";
      if (row.has_bound) {
        double by = sy(row.bound);
        bound_points += detail::svg_num(x) + "," + detail::svg_num(by) + " ";
        markers += "<circle cx=\"" + detail::svg_num(x) + "\" cy=\"" +
                   detail::svg_num(by) + "\" r=\"2.5\" fill=\"#8a3ffc\"/>\n";
      }
    }
    if (!bound_points.empty())
      svg += "<polyline points=\"" + bound_points +
             "\" fill=\"none\" stroke=\"#8a3ffc\" stroke-width=\"2\"/>\n";
    if (!error_points.empty())
      svg += "<polyline points=\"" + error_points +
             "\" fill=\"none\" stroke=\"#0f62fe\" stroke-width=\"2\"/>\n";
    svg += markers;
    svg += "</g>\n";
  }

  svg += "<text x=\"" + detail::svg_num(left) + "\" y=\"" +
         detail::svg_num(height - 12) +
         "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#8d8d8d\">engine " +
         engine_version + "  config " + config_hash + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace cop2l

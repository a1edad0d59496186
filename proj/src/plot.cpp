#include "evtap/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "evtap/errors.hpp"

namespace evtap {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string step_color(int step, int steps) {
  const double u = steps > 1 ? static_cast<double>(step) / (steps - 1) : 0.0;
  const int g = static_cast<int>(std::lround(200.0 * u));
  const int b = static_cast<int>(std::lround(255.0 * (1.0 - u)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#00%02x%02x", g, b);
  return buf;
}

}  // namespace

std::string render_trajectory_svg(std::span<const Trajectory> trajectories,
                                  const EventStream& events, const PlotOptions& opts) {
  if (opts.cell < 1) throw ConfigError("plot cell size must be >= 1");
  const int W = events.width();
  const int H = events.height();
  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) +
         "\" height=\"" + std::to_string(H) + "\" viewBox=\"0 0 " + std::to_string(W) + " " +
         std::to_string(H) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(W) + "\" height=\"" +
         std::to_string(H) + "\" fill=\"#ffffff\"/>\n";

  const int cw = (W + opts.cell - 1) / opts.cell;
  const int ch = (H + opts.cell - 1) / opts.cell;
  std::vector<std::size_t> density(static_cast<std::size_t>(cw) * ch, 0);
  for (const Event& e : events.events())
    density[static_cast<std::size_t>(e.y / opts.cell) * cw + e.x / opts.cell]++;
  const std::size_t peak = density.empty() ? 0 : *std::max_element(density.begin(), density.end());
  svg += "<g id=\"events\">\n";
  if (peak > 0) {
    for (int cy = 0; cy < ch; ++cy)
      for (int cx = 0; cx < cw; ++cx) {
        const std::size_t n = density[static_cast<std::size_t>(cy) * cw + cx];
        if (n == 0) continue;
        // sqrt keeps sparse regions visible next to dense ones
        const double u = std::sqrt(static_cast<double>(n) / peak);
        const int gray = 235 - static_cast<int>(std::lround(175.0 * u));
        char fill[16];
        std::snprintf(fill, sizeof fill, "#%02x%02x%02x", gray, gray, gray);
        svg += "<rect x=\"" + std::to_string(cx * opts.cell) + "\" y=\"" +
               std::to_string(cy * opts.cell) + "\" width=\"" + std::to_string(opts.cell) +
               "\" height=\"" + std::to_string(opts.cell) + "\" fill=\"" + fill + "\"/>\n";
      }
  }
  svg += "</g>\n<g id=\"trajectories\" fill=\"none\">\n";
  for (const Trajectory& tr : trajectories) {
    svg += "<polyline data-point=\"" + std::to_string(tr.point_id) + "\" points=\"";
    for (int k = 0; k < tr.steps(); ++k) {
      if (k > 0) svg += ' ';
      svg += num(tr.coords[k].x) + ',' + num(tr.coords[k].y);
    }
    svg += "\" stroke=\"#5a6f8c\" stroke-width=\"0.5\"/>\n";
    for (int k = 0; k < tr.steps(); ++k)
      svg += "<circle cx=\"" + num(tr.coords[k].x) + "\" cy=\"" + num(tr.coords[k].y) +
             "\" r=\"0.8\" fill=\"" + step_color(k, tr.steps()) + "\"/>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace evtap

#pragma once

#include <span>
#include <string>

#include "evtap/event_core.hpp"
#include "evtap/tracker.hpp"

namespace evtap {

struct PlotOptions {
  int cell = 4;  // background density cell size, px
};

/// SVG overlay: event density as gray cells, one polyline per trajectory
/// and a marker per step colored from blue (first step) to green (last).
/// Output bytes depend only on the inputs.
std::string render_trajectory_svg(std::span<const Trajectory> trajectories,
                                  const EventStream& events, const PlotOptions& opts = {});

}  // namespace evtap

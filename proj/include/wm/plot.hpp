#pragma once

#include "wm/io.hpp"

#include <climits>
#include <string>

namespace wm {

struct PlotOptions {
  int epoch_from = 1;
  int epoch_to = INT_MAX;
  std::string title;
};

/// SVG of track mean trajectories (one polyline per track), 2-sigma ellipses
/// coloured by the most likely type, and observations when a dataset is given
/// (dots, or crosses for clutter when the truth is known). Coordinates are the
/// data's own units. Throws Unsupported unless poses are 2-D.
std::string render_svg(std::span<const TrackReport> tracks, const Dataset* data,
                       const GroundTruth* truth, const PlotOptions& opt = {});

}  // namespace wm

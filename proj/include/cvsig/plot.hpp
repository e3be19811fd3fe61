#pragma once

// Two-panel SVG of one reconstruction: activity and sleep on top, observed
// heart rate with two predicted overlays below.

#include <cstddef>
#include <string>
#include <vector>

namespace cvsig::plot {

struct ReconstructionPlot {
  std::string title;
  std::size_t start_minute = 0;
  std::vector<double> steps;  // transformed steps per minute
  std::vector<double> asleep;
  std::vector<double> restless;
  std::vector<double> observed;  // NaN where missing
  std::vector<double> own_prediction;
  std::vector<double> other_prediction;
  std::string own_label = "own signature";
  std::string other_label = "other signature";
  std::string value_label = "heart rate (bpm)";

  void validate() const;
};

std::string render_svg(const ReconstructionPlot& plot);

}  // namespace cvsig::plot

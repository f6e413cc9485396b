#pragma once

#include <string>
#include <vector>

namespace swarmvv {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Standalone SVG line chart. Non-finite points are skipped.
std::string render_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<PlotSeries>& series);

}  // namespace swarmvv

#pragma once

#include <string>
#include <vector>

namespace adalab {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = true;  ///< nonpositive values are dropped on a log axis
};

/// Self-contained SVG line chart. Every series becomes exactly one <polyline>
/// carrying class="series", plus a legend entry.
std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series);

}  // namespace adalab

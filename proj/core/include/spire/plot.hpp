#pragma once

#include <string>
#include <vector>

namespace spire {

struct PlotSeries {
  std::vector<double> y;
  std::vector<double> band;  // optional symmetric band (e.g. SEM); empty = none
  std::string label;
  std::string color = "#4363d8";
};

// Static SVG line plot with optional shaded bands.
void svg_line_plot(const std::string& path, const std::string& title,
                   const std::vector<PlotSeries>& series, const std::string& x_label,
                   const std::string& y_label);

struct PlotBar {
  std::string label;
  double value = 0;
  double err = 0;
  std::string color = "#4363d8";
};

// Static SVG bar chart with error whiskers.
void svg_bar_chart(const std::string& path, const std::string& title,
                   const std::vector<PlotBar>& bars, const std::string& y_label);

}  // namespace spire

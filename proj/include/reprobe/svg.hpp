#pragma once

#include <string>
#include <utility>
#include <vector>

namespace reprobe::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  // Optional shaded band; same length as x when present.
  std::vector<double> lo;
  std::vector<double> hi;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;  // non-positive x values are pinned to the left edge
  std::vector<Series> series;
  std::vector<std::pair<double, std::string>> hlines;  // y value, caption
};

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per series label
};

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> series_labels;
  std::vector<BarGroup> groups;
};

std::string render(const LineChart& chart);
std::string render(const BarChart& chart);

std::string escape_xml(const std::string& s);

}  // namespace reprobe::svg

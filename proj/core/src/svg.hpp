#pragma once

// Minimal static-SVG line plots for the sweep artifacts.

#include <string>
#include <vector>

namespace sparsegain::detail {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct LinePlot {
  std::string title, xlabel, ylabel;
  bool log_y = false;
  std::vector<Series> series;

  void add(std::string label, std::vector<double> x, std::vector<double> y);
  std::string render(int width = 640, int height = 420) const;
};

}  // namespace sparsegain::detail

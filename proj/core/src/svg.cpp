#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace sparsegain::detail {

void LinePlot::add(std::string label, std::vector<double> x,
                   std::vector<double> y) {
  series.push_back({std::move(label), std::move(x), std::move(y)});
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
                         "#bcbd22", "#e377c2"};

}  // namespace

std::string LinePlot::render(int width, int height) const {
  const double ml = 70, mr = 20, mt = 34, mb = 48;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      double yv = s.y[i];
      if (log_y && !(yv > 0)) continue;
      if (log_y) yv = std::log10(yv);
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, yv);
      ymax = std::max(ymax, yv);
    }
  if (!(xmin < xmax)) {
    xmin -= 1;
    xmax += 1;
  }
  if (!(ymin < ymax)) {
    ymin -= 1;
    ymax += 1;
  }
  const double xpad = 0.03 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) {
    if (log_y) y = std::log10(std::max(y, 1e-300));
    return mt + ph - (y - ymin) / (ymax - ymin) * ph;
  };

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
     << "' height='" << height << "' font-family='sans-serif' font-size='11'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << width / 2 << "' y='18' text-anchor='middle' "
     << "font-size='13'>" << title << "</text>\n";

  // Axes box and ticks.
  os << "<rect x='" << ml << "' y='" << mt << "' width='" << pw
     << "' height='" << ph << "' fill='none' stroke='#444'/>\n";
  const int nticks = 6;
  for (int t = 0; t <= nticks; ++t) {
    const double fx = xmin + (xmax - xmin) * t / nticks;
    os << "<line x1='" << px(fx) << "' y1='" << mt + ph << "' x2='" << px(fx)
       << "' y2='" << mt + ph + 4 << "' stroke='#444'/>\n";
    os << "<text x='" << px(fx) << "' y='" << mt + ph + 16
       << "' text-anchor='middle'>" << fmt(fx) << "</text>\n";
    const double fy = ymin + (ymax - ymin) * t / nticks;
    const double yval = log_y ? std::pow(10.0, fy) : fy;
    const double ypix = mt + ph - (fy - ymin) / (ymax - ymin) * ph;
    os << "<line x1='" << ml - 4 << "' y1='" << ypix << "' x2='" << ml
       << "' y2='" << ypix << "' stroke='#444'/>\n";
    os << "<text x='" << ml - 7 << "' y='" << ypix + 4
       << "' text-anchor='end'>" << fmt(yval) << "</text>\n";
  }
  os << "<text x='" << ml + pw / 2 << "' y='" << height - 8
     << "' text-anchor='middle'>" << xlabel << "</text>\n";
  os << "<text x='16' y='" << mt + ph / 2
     << "' text-anchor='middle' transform='rotate(-90 16 " << mt + ph / 2
     << ")'>" << ylabel << (log_y ? " (log)" : "") << "</text>\n";

  int ci = 0;
  for (const auto& s : series) {
    const char* color = kColors[ci % 10];
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' "
       << "points='";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (log_y && !(s.y[i] > 0)) continue;
      os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    os << "'/>\n";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (log_y && !(s.y[i] > 0)) continue;
      os << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i])
         << "' r='2.4' fill='" << color << "'/>\n";
    }
    os << "<text x='" << ml + pw - 6 << "' y='" << mt + 14 + 14 * ci
       << "' text-anchor='end' fill='" << color << "'>" << s.label
       << "</text>\n";
    ++ci;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace sparsegain::detail

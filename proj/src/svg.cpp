#include "asymcity/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace asymcity::svg {
namespace {

std::string rgb(double t) {
  // Dark blue -> teal -> yellow.
  static constexpr std::array<std::array<double, 3>, 3> stops = {{
      {{68, 1, 84}},
      {{33, 145, 140}},
      {{253, 231, 37}},
  }};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double pos = t * 2.0;
  const int lo = std::min(1, static_cast<int>(pos));
  const double frac = pos - lo;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[lo][0] + frac * (stops[lo + 1][0] - stops[lo][0]))),
                static_cast<int>(std::lround(stops[lo][1] + frac * (stops[lo + 1][1] - stops[lo][1]))),
                static_cast<int>(std::lround(stops[lo][2] + frac * (stops[lo + 1][2] - stops[lo][2]))));
  return buf;
}

const char* palette(int k) {
  static constexpr const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[static_cast<std::size_t>(k) % std::size(colors)];
}

std::string header(double width, double height) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  return out.str();
}

}  // namespace

std::string distance_heatmap(const SquareMatrix& m) {
  constexpr double cell = 40.0;
  double max_v = 0.0;
  for (double v : m.data) max_v = std::max(max_v, v);
  std::ostringstream out;
  out << header(cell * m.n, cell * m.n);
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.n; ++j) {
      const double v = m.at(i, j);
      out << "<rect class=\"cell\" x=\"" << j * cell << "\" y=\"" << i * cell << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << rgb(max_v > 0.0 ? v / max_v : 0.0)
          << "\"><title>" << i << "," << j << ": " << v << "</title></rect>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string exposure_heatmap(const ExposureMap& map) {
  constexpr double cell = 6.0;
  std::ostringstream out;
  out << header(cell * map.nx, cell * map.ny);
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      const auto& v = map.at(ix, iy);
      // SVG y grows downward; flip so north is up.
      out << "<rect class=\"cell\" x=\"" << ix * cell << "\" y=\"" << (map.ny - 1 - iy) * cell
          << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
          << (v ? rgb(*v) : std::string("#bbbbbb")) << "\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string embedding_scatter(const std::vector<Point2>& points, const std::vector<int>& origins) {
  constexpr double size = 480.0;
  constexpr double margin = 20.0;
  double lo_x = 0.0, hi_x = 0.0, lo_y = 0.0, hi_y = 0.0;
  if (!points.empty()) {
    lo_x = hi_x = points[0][0];
    lo_y = hi_y = points[0][1];
  }
  for (const auto& p : points) {
    lo_x = std::min(lo_x, p[0]);
    hi_x = std::max(hi_x, p[0]);
    lo_y = std::min(lo_y, p[1]);
    hi_y = std::max(hi_y, p[1]);
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
  std::ostringstream out;
  out << header(size, size);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double x = margin + (points[i][0] - lo_x) / span * (size - 2 * margin);
    const double y = size - margin - (points[i][1] - lo_y) / span * (size - 2 * margin);
    out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << palette(origins[i])
        << "\" data-origin=\"" << origins[i] << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace asymcity::svg

#include "softcast/svg_plot.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

namespace softcast {

namespace {

constexpr double kSize = 560.0;
constexpr double kMargin = 60.0;

const char* const kPalette[] = {"#1a9850", "#91cf60", "#fee08b", "#fc8d59", "#d73027",
                                "#4575b4", "#762a83", "#8c510a", "#01665e", "#999999"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_grid_svg(const RiskGrid& grid, std::span<const Point> points,
                            const std::string& title) {
  const double lo = grid.is_clarke() ? 0.0 : grid.domain_min();
  const double hi = grid.domain_max();
  auto sx = [&](double v) { return kMargin + (v - lo) / (hi - lo) * kSize; };
  auto sy = [&](double v) { return kMargin + kSize - (v - lo) / (hi - lo) * kSize; };
  const double total = kSize + 2 * kMargin;

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(total) + "\" height=\"" + num(total) +
       "\" viewBox=\"0 0 " + num(total) + " " + num(total) + "\">\n";
  s += "<style>\n";
  for (std::size_t k = 0; k < grid.labels().size(); ++k)
    s += ".zone-" + escape(grid.labels()[k]) + " { fill: " + kPalette[k % std::size(kPalette)] +
         "; stroke: #333333; stroke-width: 0.3; }\n";
  s += ".boundary { fill: none; stroke: #000000; stroke-width: 1; }\n";
  s += ".axis { stroke: #000000; stroke-width: 1.5; }\n";
  s += "</style>\n";
  s += "<text x=\"" + num(total / 2) + "\" y=\"30.00\" text-anchor=\"middle\" font-size=\"16\">" +
       escape(title) + "</text>\n";

  // Axes and ticks.
  s += "<rect x=\"" + num(kMargin) + "\" y=\"" + num(kMargin) + "\" width=\"" + num(kSize) +
       "\" height=\"" + num(kSize) + "\" fill=\"none\" class=\"axis\"/>\n";
  for (int i = 0; i <= 6; ++i) {
    const double v = lo + (hi - lo) * i / 6.0;
    s += "<text x=\"" + num(sx(v)) + "\" y=\"" + num(kMargin + kSize + 18) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + num(v) + "</text>\n";
    s += "<text x=\"" + num(kMargin - 6) + "\" y=\"" + num(sy(v) + 4) +
         "\" text-anchor=\"end\" font-size=\"11\">" + num(v) + "</text>\n";
  }
  s += "<text x=\"" + num(total / 2) + "\" y=\"" + num(total - 12) +
       "\" text-anchor=\"middle\" font-size=\"13\">reference</text>\n";
  s += "<text x=\"16.00\" y=\"" + num(total / 2) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16.00 " +
       num(total / 2) + ")\">prediction</text>\n";

  s += "<g id=\"boundaries\">\n";
  s += "<line class=\"boundary\" stroke-dasharray=\"4 4\" x1=\"" + num(sx(lo)) + "\" y1=\"" + num(sy(lo)) +
       "\" x2=\"" + num(sx(hi)) + "\" y2=\"" + num(sy(hi)) + "\"/>\n";
  for (const auto& line : grid.boundaries()) {
    s += "<polyline class=\"boundary\" points=\"";
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) s += ' ';
      s += num(sx(std::clamp(line[i].x, lo, hi))) + "," + num(sy(std::clamp(line[i].y, lo, hi)));
    }
    s += "\"/>\n";
  }
  s += "</g>\n";

  s += "<g id=\"points\">\n";
  for (const auto& p : points) {
    const double t = std::clamp(p.x, grid.domain_min(), grid.domain_max());
    const double q = std::clamp(p.y, grid.domain_min(), grid.domain_max());
    s += "<circle class=\"zone-" + escape(grid.zone(t, q)) + "\" cx=\"" + num(sx(t)) + "\" cy=\"" +
         num(sy(q)) + "\" r=\"2.5\"/>\n";
  }
  s += "</g>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace softcast

#pragma once

// Plain SVG figures rendered from the CSV outputs: a target density heatmap
// with weighted particle markers, and mean/band lines on a log scale.

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nsflows/core.hpp"

namespace nsflows::svg {

struct Marker {
  double x = 0.0;
  double y = 0.0;
  double weight = 0.0;
};

struct Panel {
  std::string title;
  std::vector<Marker> particles;
};

namespace detail {

inline std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace detail

/// One heatmap panel per entry of `panels`, side by side. The background is
/// the density of `gm` on a grid x grid lattice over [lo, hi]^2 (darker is
/// higher); markers have area proportional to weight.
[[nodiscard]] inline std::string density_panels(const GaussianMixture& gm, const std::vector<Panel>& panels,
                                                const std::vector<Marker>& data = {}, int grid = 200,
                                                double lo = -3.0, double hi = 3.0) {
  using detail::num;
  const double size = 400.0;
  const double pad = 30.0;
  const double cell = size / grid;
  const double width = pad + static_cast<double>(panels.size()) * (size + pad);
  const double height = size + 2 * pad;

  std::vector<double> dens(static_cast<std::size_t>(grid * grid));
  double dmax = 0.0;
  for (int r = 0; r < grid; ++r) {
    for (int c = 0; c < grid; ++c) {
      Point p(2);
      p << lo + (c + 0.5) * (hi - lo) / grid, hi - (r + 0.5) * (hi - lo) / grid;
      dens[static_cast<std::size_t>(r * grid + c)] = gm.density(p);
      dmax = std::max(dmax, dens[static_cast<std::size_t>(r * grid + c)]);
    }
  }

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // 25 grey levels.
  auto shade_at = [&](int r, int c) {
    const double t = dens[static_cast<std::size_t>(r * grid + c)] / (dmax > 0 ? dmax : 1.0);
    return 255 - 8 * static_cast<int>(std::lround(24.0 * t));
  };
  out << "<defs><g id=\"heat\">\n";
  for (int r = 0; r < grid; ++r) {
    // Merge runs of equal shade along each row.
    int c = 0;
    while (c < grid) {
      const int shade = shade_at(r, c);
      int end = c + 1;
      while (end < grid && shade_at(r, end) == shade) ++end;
      if (shade < 255) {
        out << "<rect x=\"" << num(c * cell) << "\" y=\"" << num(r * cell) << "\" width=\"" << num((end - c) * cell)
            << "\" height=\"" << num(cell) << "\" fill=\"rgb(" << shade << ',' << shade << ',' << shade << ")\"/>\n";
      }
      c = end;
    }
  }
  out << "</g></defs>\n";

  auto to_px = [&](double v, bool vertical) {
    const double t = (v - lo) / (hi - lo);
    return vertical ? size * (1.0 - t) : size * t;
  };
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const double ox = pad + static_cast<double>(k) * (size + pad);
    out << "<g transform=\"translate(" << num(ox) << ',' << num(pad) << ")\">\n";
    out << "<rect width=\"" << num(size) << "\" height=\"" << num(size) << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<use href=\"#heat\"/>\n";
    for (const auto& d : data) {
      if (d.x < lo || d.x > hi || d.y < lo || d.y > hi) continue;
      out << "<circle cx=\"" << num(to_px(d.x, false)) << "\" cy=\"" << num(to_px(d.y, true))
          << "\" r=\"1.2\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n";
    }
    for (const auto& m : panels[k].particles) {
      if (m.weight <= 0.0 || m.x < lo || m.x > hi || m.y < lo || m.y > hi) continue;
      out << "<circle cx=\"" << num(to_px(m.x, false)) << "\" cy=\"" << num(to_px(m.y, true)) << "\" r=\""
          << num(2.0 + 18.0 * std::sqrt(m.weight)) << "\" fill=\"crimson\" fill-opacity=\"0.6\" stroke=\"black\" "
          << "stroke-width=\"0.5\"/>\n";
    }
    out << "<text x=\"" << num(size / 2) << "\" y=\"-8\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"14\">" << panels[k].title << "</text>\n";
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

struct BandPoint {
  double n = 0.0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Mean lines with shaded bands per series; y on a log10 axis.
[[nodiscard]] inline std::string band_chart(const std::map<std::string, std::vector<BandPoint>>& series,
                                            const std::string& title, const std::string& y_label = "W2 to truth") {
  using detail::num;
  const double w = 560.0;
  const double h = 380.0;
  const double left = 70.0;
  const double right = 150.0;
  const double top = 40.0;
  const double bottom = 50.0;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& [name, pts] : series) {
    (void)name;
    for (const auto& p : pts) {
      xmin = std::min(xmin, p.n);
      xmax = std::max(xmax, p.n);
      ymin = std::min(ymin, std::max(p.lower, 1e-12));
      ymax = std::max(ymax, std::max(p.upper, 1e-12));
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0.1;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  double lmin = std::floor(std::log10(ymin));
  double lmax = std::ceil(std::log10(ymax));
  if (lmax == lmin) lmax = lmin + 1;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * w; };
  auto py = [&](double y) { return top + h - (std::log10(std::max(y, 1e-12)) - lmin) / (lmax - lmin) * h; };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(left + w + right) << "\" height=\""
      << num(top + h + bottom) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double l = lmin; l <= lmax + 1e-9; l += 1.0) {
    out << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + w) << "\" y1=\"" << num(py(std::pow(10, l)))
        << "\" y2=\"" << num(py(std::pow(10, l))) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(std::pow(10, l)) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" << static_cast<int>(l)
        << "</text>\n";
  }
  out << "<text x=\"" << num(left + w / 2) << "\" y=\"" << num(top + h + 35)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">n</text>\n";
  out << "<text x=\"15\" y=\"" << num(top + h / 2) << "\" transform=\"rotate(-90 15 " << num(top + h / 2)
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << y_label << "</text>\n";
  out << "<text x=\"" << num(left + w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"14\">" << title << "</text>\n";

  std::size_t k = 0;
  for (const auto& [name, raw] : series) {
    auto pts = raw;
    std::sort(pts.begin(), pts.end(), [](const BandPoint& a, const BandPoint& b) { return a.n < b.n; });
    const char* colour = palette[k % 5];
    std::ostringstream band;
    for (const auto& p : pts) band << num(px(p.n)) << ',' << num(py(p.upper)) << ' ';
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) band << num(px(it->n)) << ',' << num(py(it->lower)) << ' ';
    out << "<polygon points=\"" << band.str() << "\" fill=\"" << colour << "\" fill-opacity=\"0.2\"/>\n";
    std::ostringstream line;
    for (const auto& p : pts) line << num(px(p.n)) << ',' << num(py(p.mean)) << ' ';
    out << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    for (const auto& p : pts) {
      out << "<text x=\"" << num(px(p.n)) << "\" y=\"" << num(top + h + 16)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << p.n << "</text>\n";
    }
    out << "<text x=\"" << num(left + w + 12) << "\" y=\"" << num(top + 20 + 18.0 * static_cast<double>(k))
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << colour << "\">" << name << "</text>\n";
    ++k;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace nsflows::svg

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pwmsi::svg {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  std::vector<Series> series;
  /// Restrict to this x interval; empty means the full data range.
  std::pair<double, double> x_range{0.0, 0.0};
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Keeps the min and max of each bucket so that switching edges survive
/// decimation.
inline std::vector<std::pair<double, double>> decimate(const Series& s, double x0, double x1,
                                                       std::size_t buckets) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    if (s.x[i] >= x0 && s.x[i] <= x1 && std::isfinite(s.y[i])) pts.emplace_back(s.x[i], s.y[i]);
  }
  if (pts.size() <= 2 * buckets) return pts;
  std::vector<std::pair<double, double>> out;
  const double per = static_cast<double>(pts.size()) / static_cast<double>(buckets);
  for (std::size_t b = 0; b < buckets; ++b) {
    const auto lo = static_cast<std::size_t>(static_cast<double>(b) * per);
    const auto hi = std::min(pts.size(), static_cast<std::size_t>(static_cast<double>(b + 1) * per));
    if (lo >= hi) continue;
    auto mn = lo, mx = lo;
    for (auto i = lo; i < hi; ++i) {
      if (pts[i].second < pts[mn].second) mn = i;
      if (pts[i].second > pts[mx].second) mx = i;
    }
    out.push_back(pts[std::min(mn, mx)]);
    if (mn != mx) out.push_back(pts[std::max(mn, mx)]);
  }
  return out;
}

}  // namespace detail

/// Renders panels stacked vertically, each with its own axes and legend.
inline std::string render(std::span<const Panel> panels, double width = 900.0, double panel_height = 230.0) {
  const double ml = 70, mr = 20, mt = 28, mb = 30;
  const double total = panel_height * static_cast<double>(panels.size());
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(width) + "\" height=\"" +
                    detail::num(total) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double top = panel_height * static_cast<double>(p);
    double x0 = panel.x_range.first, x1 = panel.x_range.second;
    if (!(x1 > x0)) {
      x0 = std::numeric_limits<double>::infinity();
      x1 = -x0;
      for (const auto& s : panel.series) {
        if (s.x.empty()) continue;
        x0 = std::min(x0, s.x.front());
        x1 = std::max(x1, s.x.back());
      }
      if (!(x1 > x0)) x1 = x0 + 1.0;
    }
    std::vector<std::vector<std::pair<double, double>>> data;
    double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
    for (const auto& s : panel.series) {
      data.push_back(detail::decimate(s, x0, x1, 1500));
      for (const auto& [x, y] : data.back()) {
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
    if (!(y1 > y0)) {
      const double c = std::isfinite(y0) ? y0 : 0.0;
      y0 = c - 1.0;
      y1 = c + 1.0;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    const double pw = width - ml - mr, ph = panel_height - mt - mb;
    const double ox = ml, oy = top + mt;
    auto sx = [&](double x) { return ox + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return oy + (y1 - y) / (y1 - y0) * ph; };

    out += "<text x=\"" + detail::num(ox) + "\" y=\"" + detail::num(top + 16) + "\" font-weight=\"bold\">" +
           detail::escape(panel.title) + "</text>\n";
    out += "<rect x=\"" + detail::num(ox) + "\" y=\"" + detail::num(oy) + "\" width=\"" + detail::num(pw) +
           "\" height=\"" + detail::num(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x0 + (x1 - x0) * i / 4.0;
      const double yv = y0 + (y1 - y0) * i / 4.0;
      out += "<text x=\"" + detail::num(sx(xv)) + "\" y=\"" + detail::num(oy + ph + 14) +
             "\" text-anchor=\"middle\">" + detail::tick_label(xv) + "</text>\n";
      out += "<text x=\"" + detail::num(ox - 4) + "\" y=\"" + detail::num(sy(yv) + 4) +
             "\" text-anchor=\"end\">" + detail::tick_label(yv) + "</text>\n";
      out += "<line x1=\"" + detail::num(ox) + "\" x2=\"" + detail::num(ox + pw) + "\" y1=\"" +
             detail::num(sy(yv)) + "\" y2=\"" + detail::num(sy(yv)) + "\" stroke=\"#ddd\"/>\n";
    }
    for (std::size_t s = 0; s < panel.series.size(); ++s) {
      const auto& series = panel.series[s];
      std::string pts;
      for (const auto& [x, y] : data[s]) pts += detail::num(sx(x)) + "," + detail::num(sy(y)) + " ";
      out += "<polyline fill=\"none\" stroke-width=\"1\" stroke=\"" + series.color + "\" points=\"" + pts +
             "\"/>\n";
      const double ly = oy + 12 + 13.0 * static_cast<double>(s);
      out += "<line x1=\"" + detail::num(ox + pw - 150) + "\" x2=\"" + detail::num(ox + pw - 130) + "\" y1=\"" +
             detail::num(ly - 4) + "\" y2=\"" + detail::num(ly - 4) + "\" stroke=\"" + series.color +
             "\" stroke-width=\"2\"/>\n";
      out += "<text x=\"" + detail::num(ox + pw - 125) + "\" y=\"" + detail::num(ly) + "\">" +
             detail::escape(series.label) + "</text>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace pwmsi::svg

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace apex::svg {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal line-chart writer: axes with ticks, legend, one polyline per series.
class LineChart {
 public:
  LineChart(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add(Series series) { series_.push_back(std::move(series)); }
  void equal_axes(bool on) { equal_axes_ = on; }

  void write(const std::string& path) const {
    const double width = 860, height = 540;
    const double ml = 70, mr = 160, mt = 48, mb = 56;

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
    double y0 = x0, y1 = -x0;
    for (const Series& s : series_) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, s.y[i]);
        y1 = std::max(y1, s.y[i]);
      }
    }
    if (!std::isfinite(x0)) {
      x0 = 0;
      x1 = 1;
      y0 = 0;
      y1 = 1;
    }
    if (x1 - x0 < 1e-12) x1 = x0 + 1.0;
    if (y1 - y0 < 1e-12) y1 = y0 + 1.0;
    // pad the value range a little
    const double ypad = 0.05 * (y1 - y0);
    y0 -= ypad;
    y1 += ypad;

    double sx = (width - ml - mr) / (x1 - x0);
    double sy = (height - mt - mb) / (y1 - y0);
    if (equal_axes_) sx = sy = std::min(sx, sy);

    auto px = [&](double x) { return ml + (x - x0) * sx; };
    auto py = [&](double y) { return height - mb - (y - y0) * sy; };

    std::ofstream out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
        << "font-family=\"sans-serif\">" << title_ << "</text>\n";

    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
      const double xv = x0 + (x1 - x0) * t / 5.0;
      const double yv = y0 + (y1 - y0) * t / 5.0;
      out << "<text x=\"" << px(xv) << "\" y=\"" << height - mb + 18
          << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
          << format(xv) << "</text>\n";
      out << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
          << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << format(yv)
          << "</text>\n";
      out << "<line x1=\"" << px(xv) << "\" y1=\"" << height - mb << "\" x2=\"" << px(xv)
          << "\" y2=\"" << height - mb + 4 << "\" stroke=\"black\"/>\n";
      out << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(yv) << "\" x2=\"" << ml << "\" y2=\""
          << py(yv) << "\" stroke=\"black\"/>\n";
    }
    out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 14
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label_
        << "</text>\n";
    out << "<text x=\"18\" y=\"" << (mt + height - mb) / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
        << "transform=\"rotate(-90 18 " << (mt + height - mb) / 2 << ")\">" << y_label_
        << "</text>\n";

    // series
    for (const Series& s : series_) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\" points=\"";
      bool pen_down = false;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
          pen_down = false;
          continue;
        }
        out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        pen_down = true;
      }
      (void)pen_down;
      out << "\"/>\n";
    }

    // legend
    double ly = mt + 10;
    for (const Series& s : series_) {
      out << "<line x1=\"" << width - mr + 12 << "\" y1=\"" << ly << "\" x2=\""
          << width - mr + 36 << "\" y2=\"" << ly << "\" stroke=\"" << s.color
          << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << width - mr + 42 << "\" y=\"" << ly + 4
          << "\" font-size=\"12\" font-family=\"sans-serif\">" << s.label << "</text>\n";
      ly += 20;
    }
    out << "</svg>\n";
  }

  static const char* palette(int i) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return colors[i % 8];
  }

 private:
  static std::string format(double v) {
    char buf[32];
    if (std::abs(v) >= 1000.0 || (std::abs(v) < 0.01 && v != 0.0)) {
      std::snprintf(buf, sizeof(buf), "%.3g", v);
    } else {
      std::snprintf(buf, sizeof(buf), "%.4g", v);
    }
    return buf;
  }

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  bool equal_axes_ = false;
};

}  // namespace apex::svg

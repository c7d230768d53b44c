#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinojump {

/// Bare-bones SVG line plot: axes with ticks, labels, and a handful of
/// polyline series. Enough for the emitted diagnostics, no styling knobs.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add_series(const std::string& name, const std::vector<double>& x,
                  const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("SvgPlot: x/y size mismatch");
    series_.push_back({name, x, y});
  }

  void write(const std::string& path) const {
    if (series_.empty()) throw std::invalid_argument("SvgPlot: nothing to plot");
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
    double y0 = x0, y1 = -x0;
    bool any = false;
    for (const Series& s : series_)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, s.y[i]);
        y1 = std::max(y1, s.y[i]);
        any = true;
      }
    if (!any) throw std::invalid_argument("SvgPlot: all series empty");
    if (x1 - x0 < 1e-12) x1 = x0 + 1.0;
    if (y1 - y0 < 1e-12) y1 = y0 + 1.0;

    const double w = 720, h = 480, ml = 70, mr = 160, mt = 40, mb = 55;
    auto sx = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
    auto sy = [&](double y) { return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">"
        << title_ << "</text>\n";
    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
        << h - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double xv = x0 + (x1 - x0) * i / 5.0;
      const double yv = y0 + (y1 - y0) * i / 5.0;
      out << "<line x1=\"" << sx(xv) << "\" y1=\"" << h - mb << "\" x2=\"" << sx(xv) << "\" y2=\""
          << h - mb + 5 << "\" stroke=\"black\"/>\n";
      out << "<text x=\"" << sx(xv) << "\" y=\"" << h - mb + 20
          << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
      out << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(yv) << "\" x2=\"" << ml << "\" y2=\""
          << sy(yv) << "\" stroke=\"black\"/>\n";
      out << "<text x=\"" << ml - 8 << "\" y=\"" << sy(yv) + 4
          << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv) << "</text>\n";
    }
    out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
        << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label_ << "</text>\n";
    out << "<text x=\"18\" y=\"" << (mt + h - mb) / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
        << (mt + h - mb) / 2 << ")\">" << y_label_ << "</text>\n";

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf"};
    for (std::size_t si = 0; si < series_.size(); ++si) {
      const Series& s = series_[si];
      const char* color = colors[si % 7];
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
      out << "\"/>\n";
      out << "<text x=\"" << w - mr + 12 << "\" y=\"" << mt + 16 + 18 * si
          << "\" font-size=\"12\" fill=\"" << color << "\">" << s.name << "</text>\n";
    }
    out << "</svg>\n";

    std::ofstream f(path);
    if (!f) throw std::runtime_error("SvgPlot: cannot open " + path);
    f << out.str();
  }

 private:
  struct Series {
    std::string name;
    std::vector<double> x, y;
  };

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
  }

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
};

}  // namespace kinojump

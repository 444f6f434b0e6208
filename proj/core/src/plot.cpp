#include "spire/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "spire/errors.hpp"

namespace spire {

namespace {

constexpr double kW = 720, kH = 400;
constexpr double kL = 70, kR = 20, kT = 40, kB = 50;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

struct Frame {
  double xmin, xmax, ymin, ymax;
  double px(double x) const { return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR); }
  double py(double y) const { return kH - kB - (y - ymin) / (ymax - ymin) * (kH - kT - kB); }
};

void open_svg(std::ofstream& out, const std::string& path, const std::string& title) {
  out.open(path, std::ios::trunc);
  if (!out) throw IoError("cannot write plot " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
      << "' viewBox='0 0 " << kW << " " << kH << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-family='sans-serif' "
      << "font-size='15'>" << title << "</text>\n";
}

void axes(std::ofstream& out, const Frame& f, const std::string& x_label,
          const std::string& y_label) {
  out << "<line x1='" << kL << "' y1='" << kH - kB << "' x2='" << kW - kR << "' y2='" << kH - kB
      << "' stroke='black'/>\n"
      << "<line x1='" << kL << "' y1='" << kT << "' x2='" << kL << "' y2='" << kH - kB
      << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    double y = f.ymin + (f.ymax - f.ymin) * i / 4.0;
    out << "<text x='" << kL - 8 << "' y='" << f.py(y) + 4
        << "' text-anchor='end' font-family='sans-serif' font-size='11'>" << fmt(y)
        << "</text>\n";
    out << "<line x1='" << kL - 4 << "' y1='" << f.py(y) << "' x2='" << kL << "' y2='" << f.py(y)
        << "' stroke='black'/>\n";
  }
  out << "<text x='" << (kL + kW - kR) / 2 << "' y='" << kH - 12
      << "' text-anchor='middle' font-family='sans-serif' font-size='12'>" << x_label
      << "</text>\n";
  out << "<text x='16' y='" << (kT + kH - kB) / 2
      << "' text-anchor='middle' font-family='sans-serif' font-size='12' transform='rotate(-90 16 "
      << (kT + kH - kB) / 2 << ")'>" << y_label << "</text>\n";
}

}  // namespace

void svg_line_plot(const std::string& path, const std::string& title,
                   const std::vector<PlotSeries>& series, const std::string& x_label,
                   const std::string& y_label) {
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  std::size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.y.size());
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      double b = i < s.band.size() ? s.band[i] : 0.0;
      ymin = std::min(ymin, s.y[i] - b);
      ymax = std::max(ymax, s.y[i] + b);
    }
  }
  if (n == 0 || !std::isfinite(ymin)) {
    ymin = 0;
    ymax = 1;
    n = 1;
  }
  if (ymax - ymin < 1e-12) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  double pad = 0.05 * (ymax - ymin);
  Frame f{0.0, static_cast<double>(std::max<std::size_t>(n - 1, 1)), ymin - pad, ymax + pad};

  std::ofstream out;
  open_svg(out, path, title);
  axes(out, f, x_label, y_label);
  for (const auto& s : series) {
    if (!s.band.empty()) {
      out << "<polygon fill='" << s.color << "' fill-opacity='0.18' stroke='none' points='";
      for (std::size_t i = 0; i < s.y.size(); ++i)
        out << f.px(static_cast<double>(i)) << "," << f.py(s.y[i] + s.band[i]) << " ";
      for (std::size_t i = s.y.size(); i-- > 0;)
        out << f.px(static_cast<double>(i)) << "," << f.py(s.y[i] - s.band[i]) << " ";
      out << "'/>\n";
    }
    out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.y.size(); ++i)
      out << f.px(static_cast<double>(i)) << "," << f.py(s.y[i]) << " ";
    out << "'/>\n";
  }
  double ly = kT + 6;
  for (const auto& s : series) {
    out << "<rect x='" << kW - kR - 150 << "' y='" << ly - 9
        << "' width='12' height='12' fill='" << s.color << "'/>\n"
        << "<text x='" << kW - kR - 134 << "' y='" << ly + 1
        << "' font-family='sans-serif' font-size='11'>" << s.label << "</text>\n";
    ly += 16;
  }
  out << "</svg>\n";
}

void svg_bar_chart(const std::string& path, const std::string& title,
                   const std::vector<PlotBar>& bars, const std::string& y_label) {
  double ymin = 0, ymax = 0;
  for (const auto& b : bars) {
    ymin = std::min(ymin, b.value - b.err);
    ymax = std::max(ymax, b.value + b.err);
  }
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  double pad = 0.08 * (ymax - ymin);
  Frame f{0, 1, ymin, ymax + pad};

  std::ofstream out;
  open_svg(out, path, title);
  axes(out, f, "", y_label);
  const double span = kW - kL - kR;
  const double slot = span / std::max<std::size_t>(bars.size(), 1);
  const double width = slot * 0.6;
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    double cx = kL + slot * (static_cast<double>(i) + 0.5);
    double y0 = f.py(std::max(0.0, f.ymin));
    double y1 = f.py(b.value);
    out << "<rect x='" << cx - width / 2 << "' y='" << std::min(y0, y1) << "' width='" << width
        << "' height='" << std::abs(y0 - y1) << "' fill='" << b.color << "'/>\n";
    if (b.err > 0) {
      out << "<line x1='" << cx << "' y1='" << f.py(b.value - b.err) << "' x2='" << cx << "' y2='"
          << f.py(b.value + b.err) << "' stroke='black'/>\n"
          << "<line x1='" << cx - 5 << "' y1='" << f.py(b.value + b.err) << "' x2='" << cx + 5
          << "' y2='" << f.py(b.value + b.err) << "' stroke='black'/>\n"
          << "<line x1='" << cx - 5 << "' y1='" << f.py(b.value - b.err) << "' x2='" << cx + 5
          << "' y2='" << f.py(b.value - b.err) << "' stroke='black'/>\n";
    }
    out << "<text x='" << cx << "' y='" << kH - kB + 16
        << "' text-anchor='middle' font-family='sans-serif' font-size='10'>" << b.label
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace spire

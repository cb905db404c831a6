#include "qnode/expr/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace qnode::expr {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
    return;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

}  // namespace

std::string SvgPlot::render(double px, double py, double width, double height) const {
  double x_lo = x_lo_, x_hi = x_hi_, y_lo = y_lo_, y_hi = y_hi_;
  if (!fixed_x_ || !fixed_y_) {
    double ax = std::numeric_limits<double>::infinity(), bx = -ax, ay = ax, by = -ax;
    for (const auto& s : series_) {
      for (double v : s.x) if (std::isfinite(v)) ax = std::min(ax, v), bx = std::max(bx, v);
      for (double v : s.y) if (std::isfinite(v)) ay = std::min(ay, v), by = std::max(by, v);
    }
    if (!std::isfinite(ax)) ax = 0, bx = 1, ay = 0, by = 1;
    if (!fixed_x_) x_lo = ax, x_hi = bx;
    if (!fixed_y_) {
      y_lo = ay, y_hi = by;
      pad_range(y_lo, y_hi);
    }
    if (!(x_hi > x_lo)) pad_range(x_lo, x_hi);
  }

  const double left = 48, right = 10, top = 24, bottom = 34;
  const double w = width - left - right, h = height - top - bottom;
  auto sx = [&](double v) { return left + (v - x_lo) / (x_hi - x_lo) * w; };
  auto sy = [&](double v) { return top + (1.0 - (v - y_lo) / (y_hi - y_lo)) * h; };

  std::ostringstream out;
  out << "<g transform=\"translate(" << num(px) << "," << num(py) << ")\">\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << num(w) << "\" height=\""
      << num(h) << "\" fill=\"white\" stroke=\"#444\"/>\n";
  out << "<text x=\"" << num(left + w / 2) << "\" y=\"16\" text-anchor=\"middle\" font-size=\"12\">"
      << escape(title_) << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_lo + (x_hi - x_lo) * i / 4.0;
    const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
    out << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(top + h + 12)
        << "\" text-anchor=\"middle\" font-size=\"9\">" << tick_label(xv) << "</text>\n";
    out << "<text x=\"" << num(left - 4) << "\" y=\"" << num(sy(yv) + 3)
        << "\" text-anchor=\"end\" font-size=\"9\">" << tick_label(yv) << "</text>\n";
  }
  out << "<text x=\"" << num(left + w / 2) << "\" y=\"" << num(height - 4)
      << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(x_label_) << "</text>\n";
  out << "<text x=\"10\" y=\"" << num(top + h / 2) << "\" font-size=\"10\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 10 " << num(top + h / 2) << ")\">" << escape(y_label_) << "</text>\n";

  out << "<clipPath id=\"c" << num(px) << "_" << num(py) << "\"><rect x=\"" << left << "\" y=\""
      << top << "\" width=\"" << num(w) << "\" height=\"" << num(h) << "\"/></clipPath>\n";
  out << "<g clip-path=\"url(#c" << num(px) << "_" << num(py) << ")\">\n";
  for (const auto& s : series_) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.scatter) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        out << "<circle cx=\"" << num(sx(s.x[i])) << "\" cy=\"" << num(sy(s.y[i])) << "\" r=\""
            << s.radius << "\" fill=\"" << s.color << "\" fill-opacity=\"0.6\"/>\n";
      }
      continue;
    }
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << s.width << "\"";
    if (!s.dash.empty()) out << " stroke-dasharray=\"" << s.dash << "\"";
    out << " points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      out << num(sx(s.x[i])) << ',' << num(sy(s.y[i])) << ' ';
    }
    out << "\"/>\n";
  }
  out << "</g>\n";

  double ly = top + 10;
  for (const auto& s : series_) {
    if (s.label.empty()) continue;
    out << "<line x1=\"" << num(left + w - 70) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(left + w - 56) << "\" y2=\"" << num(ly) << "\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"";
    if (!s.dash.empty()) out << " stroke-dasharray=\"" << s.dash << "\"";
    out << "/>\n<text x=\"" << num(left + w - 52) << "\" y=\"" << num(ly + 3)
        << "\" font-size=\"9\">" << escape(s.label) << "</text>\n";
    ly += 12;
  }
  out << "</g>\n";
  return out.str();
}

std::string SvgFigure::render() const {
  const std::size_t cols = std::max<std::size_t>(1, std::min(columns_, std::max<std::size_t>(1, panels_.size())));
  const std::size_t rows = (panels_.size() + cols - 1) / cols;
  const double header = title_.empty() ? 0.0 : 24.0;
  const double width = cols * panel_w_;
  const double height = header + std::max<std::size_t>(rows, 1) * panel_h_;
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height)
      << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title_.empty()) {
    out << "<text x=\"" << num(width / 2) << "\" y=\"17\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(title_) << "</text>\n";
  }
  for (std::size_t i = 0; i < panels_.size(); ++i) {
    out << panels_[i].render((i % cols) * panel_w_, header + (i / cols) * panel_h_, panel_w_, panel_h_);
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace qnode::expr

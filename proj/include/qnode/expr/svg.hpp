#pragma once

#include <string>
#include <vector>

namespace qnode::expr {

// Line colors for the figure protocol.
inline constexpr const char* kColorReconstruction = "#2ca02c";  // model, training window
inline constexpr const char* kColorExtrapolation = "#1f77b4";   // model, beyond it
inline constexpr const char* kColorTruthTraining = "#000000";
inline constexpr const char* kColorTruthExtrapolation = "#d62728";

struct SvgSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#000000";
  std::string label;
  double width = 1.5;
  std::string dash;    // stroke-dasharray, empty for solid
  bool scatter = false;
  double radius = 1.5;
};

/// One set of axes with line and scatter series.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add(SvgSeries series) { series_.push_back(std::move(series)); }
  void set_x_range(double lo, double hi) { x_lo_ = lo, x_hi_ = hi, fixed_x_ = true; }
  void set_y_range(double lo, double hi) { y_lo_ = lo, y_hi_ = hi, fixed_y_ = true; }

  /// SVG group for a panel of the given size placed at (x, y).
  std::string render(double x, double y, double width, double height) const;

 private:
  std::string title_, x_label_, y_label_;
  std::vector<SvgSeries> series_;
  double x_lo_ = 0, x_hi_ = 1, y_lo_ = 0, y_hi_ = 1;
  bool fixed_x_ = false, fixed_y_ = false;
};

/// Grid of panels rendered into a standalone SVG document.
class SvgFigure {
 public:
  SvgFigure(std::size_t columns, double panel_width = 320, double panel_height = 240)
      : columns_(columns), panel_w_(panel_width), panel_h_(panel_height) {}

  void add(SvgPlot plot) { panels_.push_back(std::move(plot)); }
  void set_title(std::string title) { title_ = std::move(title); }
  std::string render() const;

 private:
  std::size_t columns_;
  double panel_w_, panel_h_;
  std::string title_;
  std::vector<SvgPlot> panels_;
};

}  // namespace qnode::expr

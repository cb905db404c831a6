#include "qnode/expr/report.hpp"

#include <fstream>

#include "qnode/error.hpp"
#include "qnode/train/trainer.hpp"
#include "qnode/util/binary_io.hpp"

namespace qnode::expr {

using train::format_double;

namespace {

class Csv {
 public:
  Csv(const std::filesystem::path& path, const std::string& header) : out_(path, std::ios::trunc) {
    if (!out_) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    out_ << header << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(fields), first = false), ...);
    out_ << '\n';
  }
  void raw(const std::string& line) { out_ << line << '\n'; }
  ~Csv() { out_.flush(); }

  static std::string cell(double v) { return format_double(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }

 private:
  std::ofstream out_;
};

std::string latent_header(const std::string& prefix, std::size_t dim) {
  std::string h = prefix;
  for (std::size_t d = 0; d < dim; ++d) h += ",h" + std::to_string(d);
  return h;
}

std::string latent_cells(const std::vector<double>& state) {
  std::string s;
  for (double v : state) s += "," + format_double(v);
  return s;
}

SvgSeries line(std::vector<double> x, std::vector<double> y, const std::string& color,
                const std::string& label = "", double width = 1.5, const std::string& dash = "") {
  SvgSeries s;
  s.x = std::move(x);
  s.y = std::move(y);
  s.color = color;
  s.label = label;
  s.width = width;
  s.dash = dash;
  return s;
}

// Splits a series at the end of the training window; the boundary point is
// shared so the two polylines join.
void add_windowed(SvgPlot& plot, const std::vector<double>& t, const std::vector<double>& y,
                  std::size_t training_points, const char* train_color, const char* extra_color,
                  const std::string& dash = "", const std::string& label = "") {
  const std::size_t split = std::min(training_points, t.size());
  plot.add(line({t.begin(), t.begin() + split}, {y.begin(), y.begin() + split}, train_color, label,
                1.5, dash));
  if (split < t.size()) {
    const std::size_t from = split == 0 ? 0 : split - 1;
    plot.add(line({t.begin() + from, t.end()}, {y.begin() + from, y.end()}, extra_color, "", 1.5, dash));
  }
}

struct Components {
  std::vector<double> x, y, z;
};

Components components(const Trajectory& t) {
  Components c;
  for (const auto& p : t.points) {
    c.x.push_back(p.x);
    c.y.push_back(p.y);
    c.z.push_back(p.z);
  }
  return c;
}

void add_bloch_components(SvgPlot& plot, const Trajectory& t, std::size_t training_points,
                          const char* train_color, const char* extra_color, bool labels) {
  const Components c = components(t);
  add_windowed(plot, t.times, c.x, training_points, train_color, extra_color, "", labels ? "x" : "");
  add_windowed(plot, t.times, c.y, training_points, train_color, extra_color, "5,3", labels ? "y" : "");
  add_windowed(plot, t.times, c.z, training_points, train_color, extra_color, "1,2", labels ? "z" : "");
}

}  // namespace

std::string window_name(std::size_t index, std::size_t training_points) {
  return index < training_points ? "train" : "extrapolate";
}

void write_generated_csv(const std::filesystem::path& dir, const GeneratedSet& set) {
  Csv all(dir / "generated.csv", "sample,index,time,window,x,y,z,norm");
  const std::size_t dim = set.samples.empty() ? 0 : set.samples.front().latent.states.front().size();
  Csv latent(dir / "generated_latent.csv", latent_header("sample,index,time", dim));
  for (std::size_t s = 0; s < set.samples.size(); ++s) {
    const auto& sample = set.samples[s];
    Csv one(dir / ("trajectory_" + std::to_string(s) + ".csv"), "index,time,window,x,y,z,norm");
    for (std::size_t i = 0; i < set.times.size(); ++i) {
      const auto& p = sample.observed.points[i];
      const std::string w = window_name(i, set.training_points);
      all.row(s, i, set.times[i], w, p.x, p.y, p.z, p.norm());
      one.row(i, set.times[i], w, p.x, p.y, p.z, p.norm());
      latent.raw(std::to_string(s) + "," + std::to_string(i) + "," + format_double(set.times[i]) +
                 latent_cells(sample.latent.states[i]));
    }
  }
}

void write_hup_csv(const std::filesystem::path& dir, const HupResult& hup, double training_end) {
  Csv records(dir / "hup.csv",
              "trajectory,time,window,var_x,var_z,sum,satisfied,ensemble_var_x,ensemble_var_z");
  for (const auto& r : hup.records) {
    records.row(r.trajectory, r.time, std::string(r.time <= training_end ? "train" : "extrapolate"),
                r.var_x, r.var_z, r.sum, r.satisfied, r.ensemble_var_x, r.ensemble_var_z);
  }
  Csv minima(dir / "hup_min.csv", "time,window,min_sum");
  for (std::size_t i = 0; i < hup.min_sum_per_time.size(); ++i) {
    minima.row(hup.times[i], std::string(hup.times[i] <= training_end ? "train" : "extrapolate"),
               hup.min_sum_per_time[i]);
  }
}

void write_interpolation_csv(const std::filesystem::path& path, const std::filesystem::path& latent_path,
                             const InterpolationResult& result, std::size_t training_points) {
  Csv obs(path, "entry,s,index,time,window,x,y,z,norm");
  const std::size_t dim = result.entries.empty() ? 0 : result.entries.front().h0.size();
  Csv latent(latent_path, latent_header("entry,s,index,time", dim));
  const double denom = static_cast<double>(kInterpolationEntries - 1);
  for (std::size_t k = 0; k < result.entries.size(); ++k) {
    const auto& e = result.entries[k];
    const double s = static_cast<double>(k) / denom;
    for (std::size_t i = 0; i < e.decoded.size(); ++i) {
      const auto& p = e.decoded.points[i];
      obs.row(k + 1, s, i, e.decoded.times[i], window_name(i, training_points), p.x, p.y, p.z, e.norms[i]);
      latent.raw(std::to_string(k + 1) + "," + format_double(s) + "," + std::to_string(i) + "," +
                 format_double(e.latent.times[i]) + latent_cells(e.latent.states[i]));
    }
  }
}

void write_latent_csv(const std::filesystem::path& path,
                      std::span<const lode::LatentTrajectory> latents) {
  const std::size_t dim = latents.empty() ? 0 : latents.front().states.front().size();
  Csv out(path, latent_header("trajectory,index,time", dim));
  for (std::size_t k = 0; k < latents.size(); ++k) {
    for (std::size_t i = 0; i < latents[k].times.size(); ++i) {
      out.raw(std::to_string(k) + "," + std::to_string(i) + "," + format_double(latents[k].times[i]) +
              latent_cells(latents[k].states[i]));
    }
  }
}

void write_extrapolation_csv(const std::filesystem::path& path,
                             std::span<const ExtrapolationReport> reports) {
  Csv out(path, "trajectory,index,time,window,x,y,z,true_x,true_y,true_z");
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.predicted.size(); ++i) {
      const auto& p = r.predicted.points[i];
      const auto& q = r.truth.points[i];
      out.row(r.trajectory, i, r.predicted.times[i], window_name(i, r.training_points), p.x, p.y,
              p.z, q.x, q.y, q.z);
    }
  }
}

std::string generated_figure(const GeneratedSet& set) {
  SvgFigure fig(3);
  fig.set_title("Generated dynamics (green: training window, blue: extrapolation)");
  for (std::size_t s = 0; s < set.samples.size(); ++s) {
    SvgPlot plot("sample " + std::to_string(s), "time", "<sigma>");
    plot.set_y_range(-1.1, 1.1);
    add_bloch_components(plot, set.samples[s].observed, set.training_points, kColorReconstruction,
                         kColorExtrapolation, s == 0);
    fig.add(std::move(plot));
  }
  return fig.render();
}

std::string generated_norm_figure(const GeneratedSet& set) {
  SvgFigure fig(3, 320, 180);
  fig.set_title("Bloch-vector norm of generated dynamics");
  for (std::size_t s = 0; s < set.samples.size(); ++s) {
    SvgPlot plot("sample " + std::to_string(s), "time", "||psi||");
    plot.set_y_range(0.0, 1.2);
    add_windowed(plot, set.times, norm_series(set.samples[s].observed), set.training_points,
                 kColorReconstruction, kColorExtrapolation);
    fig.add(std::move(plot));
  }
  return fig.render();
}

std::string hup_figure(const HupResult& hup, double training_end) {
  SvgFigure fig(2, 380, 320);
  fig.set_title("Uncertainty bound: var(x) + var(z) >= 1");
  SvgPlot plane("var(x) vs var(z)", "var(x)", "var(z)");
  plane.set_x_range(0.0, 1.05);
  plane.set_y_range(0.0, 1.05);
  SvgSeries train_pts = line({}, {}, kColorReconstruction, "training");
  SvgSeries extra_pts = line({}, {}, kColorExtrapolation, "extrapolation");
  train_pts.scatter = extra_pts.scatter = true;
  for (const auto& r : hup.records) {
    auto& s = r.time <= training_end ? train_pts : extra_pts;
    s.x.push_back(r.var_x);
    s.y.push_back(r.var_z);
  }
  plane.add(std::move(train_pts));
  plane.add(std::move(extra_pts));
  plane.add(line({0.0, 1.0}, {1.0, 0.0}, "#d62728", "sum = 1", 1.5, "4,3"));
  fig.add(std::move(plane));

  SvgPlot over_time("min over trajectories of var(x)+var(z)", "time", "sum");
  std::size_t training_points = 0;
  for (double t : hup.times) training_points += t <= training_end ? 1 : 0;
  add_windowed(over_time, hup.times, hup.min_sum_per_time, training_points, kColorReconstruction,
               kColorExtrapolation);
  if (!hup.times.empty()) {
    over_time.add(line({hup.times.front(), hup.times.back()}, {1.0, 1.0}, "#d62728", "bound", 1.5, "4,3"));
  }
  fig.add(std::move(over_time));
  return fig.render();
}

std::string interpolation_figure(const InterpolationResult& result, std::size_t training_points) {
  SvgFigure fig(kInterpolationEntries, 240, 180);
  fig.set_title("Latent slerp interpolation: latent path, decoded dynamics, norm");
  for (std::size_t k = 0; k < result.entries.size(); ++k) {
    const auto& e = result.entries[k];
    SvgPlot plot("h" + std::to_string(k + 1) + " latent", "time", "h");
    for (std::size_t d = 0; d < e.h0.size(); ++d) {
      std::vector<double> y;
      for (const auto& s : e.latent.states) y.push_back(s[d]);
      add_windowed(plot, e.latent.times, y, training_points, kColorReconstruction, kColorExtrapolation);
    }
    fig.add(std::move(plot));
  }
  for (std::size_t k = 0; k < result.entries.size(); ++k) {
    SvgPlot plot("h" + std::to_string(k + 1) + " decoded", "time", "<sigma>");
    plot.set_y_range(-1.1, 1.1);
    add_bloch_components(plot, result.entries[k].decoded, training_points, kColorReconstruction,
                         kColorExtrapolation, false);
    fig.add(std::move(plot));
  }
  for (std::size_t k = 0; k < result.entries.size(); ++k) {
    SvgPlot plot("h" + std::to_string(k + 1) + " norm", "time", "||psi||");
    plot.set_y_range(0.0, 1.2);
    add_windowed(plot, result.entries[k].decoded.times, result.entries[k].norms, training_points,
                 kColorReconstruction, kColorExtrapolation);
    fig.add(std::move(plot));
  }
  return fig.render();
}

std::string latent_figure(std::span<const lode::LatentTrajectory> latents, std::size_t max_rows) {
  if (latents.empty()) return SvgFigure(1).render();
  const std::size_t dim = latents.front().states.front().size();
  SvgFigure fig(std::min<std::size_t>(dim, 4));
  fig.set_title("Latent trajectories of training data");
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  for (std::size_t d = 0; d < dim; ++d) {
    SvgPlot plot("h" + std::to_string(d), "time", "value");
    for (std::size_t k = 0; k < std::min(max_rows, latents.size()); ++k) {
      std::vector<double> y;
      for (const auto& s : latents[k].states) y.push_back(s[d]);
      plot.add(line(latents[k].times, y, palette[k % 10], "", 0.8));
    }
    fig.add(std::move(plot));
  }
  return fig.render();
}

std::string extrapolation_figure(std::span<const ExtrapolationReport> reports) {
  SvgFigure fig(3);
  fig.set_title("Reconstruction (green) and extrapolation (blue) against exact dynamics (black/red)");
  for (const auto& r : reports) {
    SvgPlot plot("trajectory " + std::to_string(r.trajectory), "time", "<sigma>");
    plot.set_y_range(-1.1, 1.1);
    add_bloch_components(plot, r.truth, r.training_points, kColorTruthTraining,
                         kColorTruthExtrapolation, false);
    add_bloch_components(plot, r.predicted, r.training_points, kColorReconstruction,
                         kColorExtrapolation, false);
    fig.add(std::move(plot));
  }
  return fig.render();
}

}  // namespace qnode::expr

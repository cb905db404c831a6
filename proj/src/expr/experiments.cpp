#include "qnode/expr/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qnode/error.hpp"
#include "qnode/util/seed.hpp"

namespace qnode::expr {

namespace {

double window_mse(const Trajectory& a, const Trajectory& b, std::size_t begin, std::size_t end) {
  if (end <= begin) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double dx = a.points[i].x - b.points[i].x;
    const double dy = a.points[i].y - b.points[i].y;
    const double dz = a.points[i].z - b.points[i].z;
    s += dx * dx + dy * dy + dz * dz;
  }
  return s / (3.0 * static_cast<double>(end - begin));
}

std::size_t count_training_points(std::span<const double> grid, double training_end) {
  return static_cast<std::size_t>(
      std::count_if(grid.begin(), grid.end(), [&](double t) { return t <= training_end; }));
}

}  // namespace

std::vector<double> norm_series(const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.points.size());
  for (const auto& p : traj.points) out.push_back(p.norm());
  return out;
}

std::vector<double> experiment_grid(std::span<const double> training_times, double t_end) {
  return lode::extend_grid(training_times, t_end);
}

GeneratedSet exp_generate(const lode::Qnode& model, std::size_t n, std::uint64_t seed,
                          std::span<const double> training_times, double t_end) {
  GeneratedSet set;
  set.times = experiment_grid(training_times, t_end);
  set.training_points = training_times.size();
  set.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(util::derive_seed(seed, "expr.generate", i));
    auto [latent, observed] = model.generate(set.times, rng);
    set.samples.push_back({std::move(latent), std::move(observed)});
  }
  return set;
}

double mean_norm_deviation(const GeneratedSet& set) {
  if (set.samples.empty()) return 0.0;
  double s = 0.0;
  std::size_t count = 0;
  for (const auto& sample : set.samples) {
    for (std::size_t i = 0; i < set.training_points; ++i) {
      s += std::abs(sample.observed.points[i].norm() - 1.0);
      ++count;
    }
  }
  return s / static_cast<double>(count);
}

HupResult hup_analysis(std::span<const Trajectory> trajectories, double tol) {
  HupResult result;
  result.tol = tol;
  if (trajectories.empty()) return result;
  const std::size_t n = trajectories.front().size();
  result.times = trajectories.front().times;
  result.min_sum_per_time.assign(n, std::numeric_limits<double>::infinity());

  std::vector<double> ens_x(n, 0.0), ens_z(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = 0.0, mz = 0.0;
    for (const auto& t : trajectories) {
      if (t.size() != n) fail(ErrorKind::ShapeMismatch, "hup_analysis: trajectories differ in length");
      mx += t.points[i].x;
      mz += t.points[i].z;
    }
    const double m = static_cast<double>(trajectories.size());
    mx /= m;
    mz /= m;
    for (const auto& t : trajectories) {
      ens_x[i] += (t.points[i].x - mx) * (t.points[i].x - mx) / m;
      ens_z[i] += (t.points[i].z - mz) * (t.points[i].z - mz) / m;
    }
  }

  std::size_t satisfied = 0;
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const Trajectory& t = trajectories[k];
    for (std::size_t i = 0; i < n; ++i) {
      HupRecord r;
      r.trajectory = k;
      r.time = t.times[i];
      r.var_x = 1.0 - t.points[i].x * t.points[i].x;
      r.var_z = 1.0 - t.points[i].z * t.points[i].z;
      r.sum = r.var_x + r.var_z;
      r.satisfied = r.sum >= 1.0 - tol;
      r.ensemble_var_x = ens_x[i];
      r.ensemble_var_z = ens_z[i];
      satisfied += r.satisfied ? 1 : 0;
      result.min_sum_per_time[i] = std::min(result.min_sum_per_time[i], r.sum);
      result.records.push_back(r);
    }
  }
  result.fraction = static_cast<double>(satisfied) / static_cast<double>(result.records.size());
  return result;
}

HupResult exp_hup(const lode::Qnode& model, std::size_t n, std::uint64_t seed, double tol,
                  std::span<const double> training_times, double t_end) {
  const GeneratedSet set = exp_generate(model, n, seed, training_times, t_end);
  std::vector<Trajectory> observed;
  observed.reserve(set.samples.size());
  for (const auto& s : set.samples) observed.push_back(s.observed);
  HupResult result = hup_analysis(observed, tol);
  if (observed.empty()) result.times = set.times;
  return result;
}

InterpolationResult exp_interpolate(const lode::Qnode& model, const Trajectory& a,
                                    const Trajectory& b, double t_end) {
  const std::vector<double> ha = model.encode(a).first;
  const std::vector<double> hb = model.encode(b).first;
  const std::vector<double> grid = experiment_grid(a.times, t_end);
  InterpolationResult result;
  for (std::size_t k = 0; k < kInterpolationEntries; ++k) {
    InterpolationEntry e;
    if (k == 0) {
      e.h0 = ha;
    } else if (k + 1 == kInterpolationEntries) {
      e.h0 = hb;
    } else {
      e.h0 = lode::slerp(ha, hb, static_cast<double>(k) / static_cast<double>(kInterpolationEntries - 1));
    }
    e.latent = model.solve(e.h0, grid);
    e.decoded = model.decode(e.latent);
    e.norms = norm_series(e.decoded);
    result.entries.push_back(std::move(e));
  }
  return result;
}

double mean_norm_deviation(const InterpolationEntry& entry) {
  if (entry.norms.empty()) return 0.0;
  double s = 0.0;
  for (double v : entry.norms) s += std::abs(v - 1.0);
  return s / static_cast<double>(entry.norms.size());
}

std::pair<std::size_t, std::size_t> most_distant_pair(const qsim::Dataset& dataset) {
  if (dataset.size() < 2) fail(ErrorKind::InvalidArgument, "most_distant_pair: need two trajectories");
  std::pair<std::size_t, std::size_t> best{0, 1};
  double best_d = -1.0;
  for (std::size_t a = 0; a < dataset.size(); ++a) {
    for (std::size_t b = a + 1; b < dataset.size(); ++b) {
      const auto& pa = dataset.trajectories[a].points;
      const auto& pb = dataset.trajectories[b].points;
      double d = 0.0;
      for (std::size_t i = 0; i < pa.size(); ++i) {
        d += std::sqrt((pa[i].x - pb[i].x) * (pa[i].x - pb[i].x) +
                       (pa[i].y - pb[i].y) * (pa[i].y - pb[i].y) +
                       (pa[i].z - pb[i].z) * (pa[i].z - pb[i].z));
      }
      d /= static_cast<double>(pa.size());
      if (d > best_d) {
        best_d = d;
        best = {a, b};
      }
    }
  }
  return best;
}

std::vector<lode::LatentTrajectory> export_latent_trajectories(const lode::Qnode& model,
                                                               const qsim::Dataset& dataset) {
  std::vector<lode::LatentTrajectory> out;
  out.reserve(dataset.size());
  for (const auto& traj : dataset.trajectories) {
    out.push_back(model.solve(model.encode(traj).first, traj.times));
  }
  return out;
}

qsim::SystemSpec system_spec_of(const qsim::Dataset& dataset, std::size_t index) {
  if (index >= dataset.meta.size()) {
    fail(ErrorKind::InvalidArgument, "dataset has no metadata for trajectory " + std::to_string(index));
  }
  const auto& m = dataset.meta[index];
  qsim::SystemSpec spec{m.omega, m.delta, {}};
  if (dataset.config.regime == qsim::Regime::Open) {
    const auto flip = dataset.config.sampling.bit_flip_as_sigma_x ? qsim::ChannelKind::SigmaX
                                                                  : qsim::ChannelKind::SigmaMinus;
    spec.channels = {{flip, m.gamma}, {qsim::ChannelKind::SigmaZ, m.gamma}};
  }
  return spec;
}

Trajectory ground_truth(const qsim::Dataset& dataset, std::size_t index,
                        std::span<const double> times) {
  const auto spec = system_spec_of(dataset, index);
  const auto rho0 = qsim::DensityMatrix::from_bloch(dataset.trajectories[index].points.front());
  return qsim::evolve(spec, rho0, times, dataset.config.substeps);
}

ExtrapolationReport extrapolation_report(const lode::Qnode& model, const qsim::Dataset& dataset,
                                         std::size_t index, double t_end) {
  if (index >= dataset.size()) fail(ErrorKind::InvalidArgument, "extrapolation_report: index out of range");
  const Trajectory& observed = dataset.trajectories[index];
  ExtrapolationReport r;
  r.trajectory = index;
  std::mt19937_64 unused(0);
  r.predicted = model.reconstruct_extrapolate(observed, t_end, lode::LatentMode::PosteriorMean, unused);
  r.truth = ground_truth(dataset, index, r.predicted.times);
  r.training_points = count_training_points(r.predicted.times, observed.times.back());
  r.reconstruction_mse = window_mse(r.truth, r.predicted, 0, r.training_points);
  r.extrapolation_mse = window_mse(r.truth, r.predicted, r.training_points, r.predicted.size());
  return r;
}

}  // namespace qnode::expr

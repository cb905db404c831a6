#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "qnode/lode/model.hpp"
#include "qnode/qsim/dataset.hpp"
#include "qnode/trajectory.hpp"

namespace qnode::expr {

inline constexpr double kExtrapolationEnd = 6.0;

/// Euclidean norm of the Bloch vector at each time.
std::vector<double> norm_series(const Trajectory& traj);

/// Grid used by the experiments: the training grid continued at the same
/// spacing up to t_end (178 points for the default [0, 2] -> [0, 6]).
std::vector<double> experiment_grid(std::span<const double> training_times,
                                    double t_end = kExtrapolationEnd);

struct GeneratedSample {
  lode::LatentTrajectory latent;
  Trajectory observed;
};

struct GeneratedSet {
  std::vector<double> times;
  std::size_t training_points = 0;  // points with t in the training window
  std::vector<GeneratedSample> samples;
};

/// n prior samples, each with its own child seed, solved and decoded on the
/// experiment grid.
GeneratedSet exp_generate(const lode::Qnode& model, std::size_t n, std::uint64_t seed,
                          std::span<const double> training_times,
                          double t_end = kExtrapolationEnd);

/// Mean over samples and training-window times of | ||x(t)|| - 1 |.
double mean_norm_deviation(const GeneratedSet& set);

struct HupRecord {
  std::size_t trajectory = 0;
  double time = 0.0;
  double var_x = 0.0;
  double var_z = 0.0;
  double sum = 0.0;
  bool satisfied = false;
  // Across-trajectory variance of <sx>, <sz> at this time (auxiliary reading).
  double ensemble_var_x = 0.0;
  double ensemble_var_z = 0.0;
};

struct HupResult {
  std::vector<HupRecord> records;  // trajectory-major
  double fraction = 0.0;           // share of records with sum >= 1 - tol
  std::vector<double> times;
  std::vector<double> min_sum_per_time;
  double tol = 0.0;
};

/// var(s) = 1 - <s>^2 on raw decoded values, no clamping.
HupResult hup_analysis(std::span<const Trajectory> trajectories, double tol);

HupResult exp_hup(const lode::Qnode& model, std::size_t n, std::uint64_t seed, double tol,
                  std::span<const double> training_times, double t_end = kExtrapolationEnd);

struct InterpolationEntry {
  std::vector<double> h0;
  lode::LatentTrajectory latent;
  Trajectory decoded;
  std::vector<double> norms;
};

struct InterpolationResult {
  std::vector<InterpolationEntry> entries;  // 8: endpoints at 0 and 7
};

inline constexpr std::size_t kInterpolationEntries = 8;

/// Posterior means of both endpoints, slerp at s = k/7 for k = 1..6.
InterpolationResult exp_interpolate(const lode::Qnode& model, const Trajectory& a,
                                    const Trajectory& b, double t_end = kExtrapolationEnd);

/// Time average of | ||x(t)|| - 1 | for one entry.
double mean_norm_deviation(const InterpolationEntry& entry);

/// Pair with the largest mean Bloch-vector distance over the grid.
std::pair<std::size_t, std::size_t> most_distant_pair(const qsim::Dataset& dataset);

/// Posterior-mean latent path of every training trajectory on its grid.
std::vector<lode::LatentTrajectory> export_latent_trajectories(const lode::Qnode& model,
                                                               const qsim::Dataset& dataset);

/// System spec recorded for trajectory `index` (needs sidecar metadata).
qsim::SystemSpec system_spec_of(const qsim::Dataset& dataset, std::size_t index);

/// Exact evolution of trajectory `index` on `times`.
Trajectory ground_truth(const qsim::Dataset& dataset, std::size_t index,
                        std::span<const double> times);

struct ExtrapolationReport {
  std::size_t trajectory = 0;
  Trajectory truth;
  Trajectory predicted;
  std::size_t training_points = 0;
  double reconstruction_mse = 0.0;  // on the training window
  double extrapolation_mse = 0.0;   // strictly after it
};

/// Posterior-mean reconstruction of a dataset trajectory extended to t_end,
/// scored against exact evolution in both windows.
ExtrapolationReport extrapolation_report(const lode::Qnode& model, const qsim::Dataset& dataset,
                                         std::size_t index, double t_end = kExtrapolationEnd);

}  // namespace qnode::expr

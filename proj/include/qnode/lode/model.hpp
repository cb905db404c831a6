#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qnode/diff/params.hpp"
#include "qnode/diff/tensor.hpp"
#include "qnode/trajectory.hpp"

namespace qnode::lode {

enum class EncoderCell { Gru, Rnn };

std::string to_string(EncoderCell cell);
EncoderCell parse_encoder_cell(const std::string& s);

struct ModelConfig {
  std::size_t latent_dim = 4;
  std::size_t rnn_hidden = 48;
  std::size_t ode_hidden = 48;
  std::size_t dec_hidden = 48;
  double obs_sigma = 0.01;
  int substeps = 4;
  EncoderCell cell = EncoderCell::Gru;
  /// Train log(sigma) as a parameter instead of holding obs_sigma fixed.
  bool learn_obs_sigma = false;

  static ModelConfig closed_defaults() { return {}; }
  static ModelConfig open_defaults() {
    ModelConfig c;
    c.rnn_hidden = c.ode_hidden = c.dec_hidden = 53;
    return c;
  }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr double kLogvarMin = -20.0;
inline constexpr double kLogvarMax = 20.0;

std::vector<diff::ParamSpec> model_arch(const ModelConfig& config);

/// Posterior parameters, one row per batch element.
struct EncoderOutput {
  diff::Tensor mean;    // (B x L)
  diff::Tensor logvar;  // (B x L), clamped to [-20, 20]
};

/// Latent states at each grid time, one (B x L) tensor per time.
struct LatentPath {
  std::vector<double> times;
  std::vector<diff::Tensor> states;
};

/// Plain-value latent trajectory for one sequence.
struct LatentTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  friend bool operator==(const LatentTrajectory&, const LatentTrajectory&) = default;
};

/// Trajectories sharing one grid, laid out for the batched model.
struct ObservationBatch {
  std::vector<double> times;
  std::vector<diff::Tensor> steps;  // per time: (B x 3)
  diff::Tensor stacked;             // (N*B x 3), time-major
  std::size_t batch = 0;

  static ObservationBatch from(std::span<const Trajectory* const> trajectories);
  static ObservationBatch from(std::span<const Trajectory> trajectories);
};

enum class LatentMode { PosteriorMean, Sample };

/// mean + exp(logvar / 2) * eps with eps ~ N(0, I).
diff::Tensor reparam_sample(const EncoderOutput& enc, std::mt19937_64& rng);

/// KL(q || N(0, I)) summed over the batch.
diff::Tensor kl_divergence(const EncoderOutput& enc);

/// Gaussian log-likelihood of `target` under N(prediction, sigma^2), summed.
diff::Tensor gaussian_log_likelihood(const diff::Tensor& target, const diff::Tensor& prediction,
                                     const diff::Tensor& log_sigma);

/// ELBO summed over the batch: log-likelihood minus KL.
diff::Tensor elbo(const diff::Tensor& target, const diff::Tensor& prediction,
                  const EncoderOutput& enc, const diff::Tensor& log_sigma);

/// Spherical linear interpolation; falls back to linear for near-parallel inputs.
std::vector<double> slerp(std::span<const double> a, std::span<const double> b, double s);

/// Latent neural ODE with a backward-in-time recurrent encoder and an MLP
/// decoder applied at every time point.
class Qnode {
 public:
  Qnode(const ModelConfig& config, std::uint64_t seed);
  Qnode(const ModelConfig& config, diff::ParamStore params);

  const ModelConfig& config() const { return config_; }
  const diff::ParamStore& params() const { return params_; }
  diff::ParamStore& params() { return params_; }

  EncoderOutput encode(const ObservationBatch& batch) const;

  /// MLP over [h, t] with one tanh hidden layer.
  diff::Tensor latent_rhs(const diff::Tensor& h, double t) const;

  /// Fixed-step RK4 with config().substeps steps per output interval. Every
  /// step is recorded on the active tape.
  LatentPath solve(const diff::Tensor& h0, std::span<const double> times) const;

  /// Decoded observations, (N*B x 3) time-major.
  diff::Tensor decode_stacked(const LatentPath& path) const;
  std::vector<Trajectory> decode(const LatentPath& path) const;

  diff::Tensor log_sigma() const;

  /// Negative ELBO averaged over the batch.
  diff::Tensor neg_elbo(const ObservationBatch& batch, LatentMode mode, std::mt19937_64& rng) const;

  // Single-trajectory conveniences.
  std::pair<std::vector<double>, std::vector<double>> encode(const Trajectory& traj) const;
  LatentTrajectory solve(std::span<const double> h0, std::span<const double> times) const;
  Trajectory decode(const LatentTrajectory& path) const;

  /// h0 ~ N(0, I); solve; decode.
  std::pair<LatentTrajectory, Trajectory> generate(std::span<const double> times,
                                                   std::mt19937_64& rng) const;

  /// Encodes `traj`, then solves and decodes on [0, t_end] at the trajectory's
  /// own spacing. The first traj.size() grid times equal traj.times exactly.
  Trajectory reconstruct_extrapolate(const Trajectory& traj, double t_end, LatentMode mode,
                                     std::mt19937_64& rng) const;

 private:
  ModelConfig config_;
  diff::ParamStore params_;
};

/// traj.times followed by further points at the same spacing up to t_end.
std::vector<double> extend_grid(std::span<const double> times, double t_end);

std::vector<double> row(const diff::Tensor& t, std::size_t r);

/// Splits a (N*B x 3) time-major prediction into B trajectories.
std::vector<Trajectory> unstack(const diff::Tensor& stacked, std::span<const double> times);

}  // namespace qnode::lode

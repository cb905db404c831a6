#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qnode/diff/params.hpp"
#include "qnode/lode/model.hpp"
#include "qnode/qsim/dataset.hpp"

namespace qnode::train {

struct TrainConfig {
  double learning_rate = 4e-3;
  std::size_t epochs = 7500;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 100;
  qsim::Regime regime = qsim::Regime::Closed;
  /// Global-norm gradient clipping; off unless set.
  std::optional<double> clip_norm;

  static TrainConfig closed_defaults() { return {}; }
  static TrainConfig open_defaults() {
    TrainConfig c;
    c.learning_rate = 7e-3;
    c.regime = qsim::Regime::Open;
    return c;
  }
  void validate(std::size_t dataset_size) const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct MetricRecord {
  std::size_t epoch = 0;
  double neg_elbo = 0.0;
  double total_mse = 0.0;
  double average_mse = 0.0;
  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// Mean of the squared residuals over all N*3 components.
double traj_mse(const Trajectory& x, const Trajectory& xhat);

struct Evaluation {
  double neg_elbo = 0.0;  // mean over trajectories, posterior-mean latent
  double total_mse = 0.0;
  double average_mse = 0.0;
};

/// Posterior-mean reconstruction of every trajectory; total = sum of
/// traj_mse, average = total / M.
Evaluation evaluate(const lode::Qnode& model, const qsim::Dataset& dataset,
                    std::size_t chunk = 256);

struct MseSummary {
  double total = 0.0;
  double average = 0.0;
};
MseSummary dataset_mse(const lode::Qnode& model, const qsim::Dataset& dataset);

struct Checkpoint {
  lode::ModelConfig model;
  TrainConfig train;
  std::size_t epoch = 0;  // epochs completed
  std::vector<MetricRecord> history;
  std::string dataset_hash;
  diff::ParamStore params;
};

inline constexpr int kCheckpointFormatVersion = 1;

/// Writes `path` (QNP1 parameters with optimizer state) and `path`.json.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainResult {
  diff::ParamStore final_params;
  std::vector<MetricRecord> history;
  Checkpoint best;
  Checkpoint last;
  bool aborted = false;
  std::size_t failed_epoch = 0;
  std::string failure;
};

using EpochCallback = std::function<void(const MetricRecord&, const Checkpoint& current)>;

/// Minibatch Adam on the negative ELBO. Shuffles and reparameterization
/// noise use per-epoch child seeds, so a resumed run continues exactly where
/// an uninterrupted one would be.
class Trainer {
 public:
  Trainer(const qsim::Dataset& dataset, const lode::ModelConfig& model, const TrainConfig& config);
  /// Continues from `resume`; runs until config.epochs total epochs.
  /// `prior_best`, the best checkpoint of the earlier segment, replaces the
  /// resumed state as the baseline when its objective is lower.
  Trainer(const qsim::Dataset& dataset, Checkpoint resume, const TrainConfig& config,
          std::optional<Checkpoint> prior_best = std::nullopt);

  TrainResult run(const EpochCallback& on_epoch = {});

  const lode::Qnode& model() const { return model_; }

 private:
  double train_epoch(std::size_t epoch);
  Checkpoint snapshot() const;

  const qsim::Dataset& dataset_;
  TrainConfig config_;
  lode::Qnode model_;
  std::string dataset_hash_;
  std::size_t start_epoch_ = 0;
  std::vector<MetricRecord> history_;
  std::optional<Checkpoint> best_;
  double best_neg_elbo_ = 0.0;
};

TrainResult train(const qsim::Dataset& dataset, const lode::ModelConfig& model,
                  const TrainConfig& config);

/// Append-only `epoch,neg_elbo,total_mse,average_mse` stream.
class MetricsCsv {
 public:
  MetricsCsv(const std::filesystem::path& path, bool append);
  void write(const MetricRecord& record);

 private:
  std::ofstream out_;
};

std::string format_double(double v);

}  // namespace qnode::train

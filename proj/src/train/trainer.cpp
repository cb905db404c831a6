#include "qnode/train/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "qnode/error.hpp"
#include "qnode/train/serialization.hpp"
#include "qnode/util/binary_io.hpp"
#include "qnode/util/seed.hpp"

namespace qnode::train {

using nlohmann::json;

void TrainConfig::validate(std::size_t dataset_size) const {
  if (!(learning_rate > 0.0)) fail(ErrorKind::InvalidArgument, "train config: learning_rate must be > 0");
  if (epochs < 1) fail(ErrorKind::InvalidArgument, "train config: epochs must be >= 1");
  if (batch_size < 1 || batch_size > dataset_size) {
    fail(ErrorKind::InvalidArgument, "train config: batch_size must lie in [1, " +
                                         std::to_string(dataset_size) + "]");
  }
  if (clip_norm && !(*clip_norm > 0.0)) fail(ErrorKind::InvalidArgument, "train config: clip_norm must be > 0");
}

double traj_mse(const Trajectory& x, const Trajectory& xhat) {
  if (x.points.size() != xhat.points.size() || x.points.empty()) {
    fail(ErrorKind::ShapeMismatch, "traj_mse: trajectories differ in length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.points.size(); ++i) {
    const double dx = x.points[i].x - xhat.points[i].x;
    const double dy = x.points[i].y - xhat.points[i].y;
    const double dz = x.points[i].z - xhat.points[i].z;
    s += dx * dx + dy * dy + dz * dz;
  }
  return s / (3.0 * static_cast<double>(x.points.size()));
}

Evaluation evaluate(const lode::Qnode& model, const qsim::Dataset& dataset, std::size_t chunk) {
  if (dataset.size() == 0) fail(ErrorKind::InvalidArgument, "evaluate: empty dataset");
  Evaluation ev;
  for (std::size_t start = 0; start < dataset.size(); start += chunk) {
    const std::size_t end = std::min(dataset.size(), start + chunk);
    std::vector<const Trajectory*> members;
    for (std::size_t i = start; i < end; ++i) members.push_back(&dataset.trajectories[i]);
    const auto batch = lode::ObservationBatch::from(std::span<const Trajectory* const>(members));
    const lode::EncoderOutput enc = model.encode(batch);
    const lode::LatentPath path = model.solve(enc.mean, batch.times);
    const diff::Tensor prediction = model.decode_stacked(path);
    ev.neg_elbo -= lode::elbo(batch.stacked, prediction, enc, model.log_sigma()).item();
    const auto decoded = lode::unstack(prediction, batch.times);
    for (std::size_t k = 0; k < members.size(); ++k) ev.total_mse += traj_mse(*members[k], decoded[k]);
  }
  const double m = static_cast<double>(dataset.size());
  ev.neg_elbo /= m;
  ev.average_mse = ev.total_mse / m;
  return ev;
}

MseSummary dataset_mse(const lode::Qnode& model, const qsim::Dataset& dataset) {
  const Evaluation ev = evaluate(model, dataset);
  return {ev.total_mse, ev.average_mse};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto sections = diff::store_sections(ckpt.params, true);
  const auto bytes = diff::encode_sections(sections);
  util::write_file(path, bytes);
  json j;
  j["format"] = "QNP1";
  j["format_version"] = kCheckpointFormatVersion;
  j["params_sha256"] = util::sha256_hex(bytes);
  j["model"] = model_config_json(ckpt.model);
  j["train"] = train_config_json(ckpt.train);
  j["epoch"] = ckpt.epoch;
  j["optimizer_step"] = ckpt.params.step();
  j["dataset_hash"] = ckpt.dataset_hash;
  json hist = json::array();
  for (const auto& r : ckpt.history) {
    hist.push_back({r.epoch, r.neg_elbo, r.total_mse, r.average_mse});
  }
  j["history"] = std::move(hist);
  util::write_text_file(path.string() + ".json", j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = util::read_file(path);
  const auto sections = diff::decode_sections(bytes);
  json j;
  try {
    j = json::parse(util::read_text_file(path.string() + ".json"));
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptPayload, std::string("checkpoint sidecar: ") + e.what());
  }
  if (j.value("format_version", 0) != kCheckpointFormatVersion) {
    fail(ErrorKind::FormatVersionMismatch, "checkpoint sidecar: unsupported format_version");
  }
  if (j.value("params_sha256", std::string()) != util::sha256_hex(bytes)) {
    fail(ErrorKind::CorruptPayload, "checkpoint: parameter payload checksum mismatch");
  }
  Checkpoint ckpt;
  try {
    ckpt.model = model_config_from_json(j.at("model"));
    ckpt.train = train_config_from_json(j.at("train"));
    ckpt.epoch = j.at("epoch").get<std::size_t>();
    ckpt.dataset_hash = j.at("dataset_hash").get<std::string>();
    for (const auto& r : j.at("history")) {
      ckpt.history.push_back({r.at(0).get<std::size_t>(), r.at(1).get<double>(),
                              r.at(2).get<double>(), r.at(3).get<double>()});
    }
    ckpt.params = diff::store_from_sections(sections);
    if (ckpt.params.step() != j.at("optimizer_step").get<std::uint64_t>()) {
      fail(ErrorKind::CorruptPayload, "checkpoint sidecar: optimizer step disagrees with payload");
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptPayload, std::string("checkpoint sidecar: ") + e.what());
  }
  return ckpt;
}

Trainer::Trainer(const qsim::Dataset& dataset, const lode::ModelConfig& model,
                 const TrainConfig& config)
    : dataset_(dataset),
      config_(config),
      model_(model, util::derive_seed(config.seed, "model.init")),
      dataset_hash_(qsim::dataset_hash(dataset)) {
  config_.validate(dataset.size());
}

Trainer::Trainer(const qsim::Dataset& dataset, Checkpoint resume, const TrainConfig& config,
                 std::optional<Checkpoint> prior_best)
    : dataset_(dataset),
      config_(config),
      model_(resume.model, std::move(resume.params)),
      dataset_hash_(qsim::dataset_hash(dataset)),
      start_epoch_(resume.epoch),
      history_(std::move(resume.history)) {
  config_.validate(dataset.size());
  if (!resume.dataset_hash.empty() && resume.dataset_hash != dataset_hash_) {
    fail(ErrorKind::InvalidArgument, "resume: checkpoint was trained on a different dataset");
  }
  // Parameters of earlier epochs are not stored; the resumed state is the
  // baseline that later epochs must beat.
  if (!history_.empty()) {
    best_ = snapshot();
    best_neg_elbo_ = history_.back().neg_elbo;
  }
  if (prior_best) {
    if (prior_best->model != model_.config() || prior_best->dataset_hash != dataset_hash_ ||
        prior_best->epoch > start_epoch_ || prior_best->history.empty()) {
      fail(ErrorKind::InvalidArgument, "resume: best checkpoint does not belong to this run");
    }
    if (!best_ || prior_best->history.back().neg_elbo < best_neg_elbo_) {
      best_neg_elbo_ = prior_best->history.back().neg_elbo;
      best_ = std::move(*prior_best);
    }
  }
}

Checkpoint Trainer::snapshot() const {
  Checkpoint c;
  c.model = model_.config();
  c.train = config_;
  c.epoch = history_.empty() ? start_epoch_ : history_.back().epoch;
  c.history = history_;
  c.dataset_hash = dataset_hash_;
  c.params = model_.params().clone();
  return c;
}

double Trainer::train_epoch(std::size_t epoch) {
  std::vector<std::size_t> order(dataset_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(util::derive_seed(config_.seed, "train.shuffle", epoch));
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  std::mt19937_64 noise_rng(util::derive_seed(config_.seed, "train.noise", epoch));

  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    std::vector<const Trajectory*> members;
    for (std::size_t i = start; i < end; ++i) members.push_back(&dataset_.trajectories[order[i]]);
    const auto batch = lode::ObservationBatch::from(std::span<const Trajectory* const>(members));

    diff::Tape tape;
    diff::Tape::Scope scope(tape);
    model_.params().zero_grad();
    const diff::Tensor loss = model_.neg_elbo(batch, lode::LatentMode::Sample, noise_rng);
    tape.backward(loss);
    diff::GradientMap grads = model_.params().gradients();
    if (config_.clip_norm) diff::clip_global_norm(grads, *config_.clip_norm);
    diff::adam_step(model_.params(), grads, {config_.learning_rate});
    loss_sum += loss.item() * static_cast<double>(members.size());
  }
  return loss_sum / static_cast<double>(order.size());
}

TrainResult Trainer::run(const EpochCallback& on_epoch) {
  TrainResult result;
  for (std::size_t epoch = start_epoch_ + 1; epoch <= config_.epochs; ++epoch) {
    try {
      train_epoch(epoch);
      const Evaluation ev = evaluate(model_, dataset_, config_.batch_size);
      if (!std::isfinite(ev.neg_elbo) || !std::isfinite(ev.total_mse)) {
        fail(ErrorKind::NonFinite, "evaluation produced a non-finite metric");
      }
      history_.push_back({epoch, ev.neg_elbo, ev.total_mse, ev.average_mse});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      result.aborted = true;
      result.failed_epoch = epoch;
      result.failure = e.what();
      break;
    }
    const Checkpoint current = snapshot();
    if (!best_ || history_.back().neg_elbo < best_neg_elbo_) {
      best_ = current;
      best_neg_elbo_ = history_.back().neg_elbo;
    }
    if (on_epoch) on_epoch(history_.back(), current);
  }
  result.history = history_;
  result.last = snapshot();
  result.final_params = model_.params().clone();
  result.best = best_ ? std::move(*best_) : result.last;
  return result;
}

TrainResult train(const qsim::Dataset& dataset, const lode::ModelConfig& model,
                  const TrainConfig& config) {
  return Trainer(dataset, model, config).run();
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) fail(ErrorKind::InvalidArgument, "format_double failed");
  return std::string(buf, end);
}

MetricsCsv::MetricsCsv(const std::filesystem::path& path, bool append) {
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) fail(ErrorKind::IoError, "cannot open metrics file " + path.string());
  if (fresh) out_ << "epoch,neg_elbo,total_mse,average_mse\n";
}

void MetricsCsv::write(const MetricRecord& r) {
  out_ << r.epoch << ',' << format_double(r.neg_elbo) << ',' << format_double(r.total_mse) << ','
       << format_double(r.average_mse) << '\n';
  out_.flush();
  if (!out_) fail(ErrorKind::IoError, "metrics write failed");
}

}  // namespace qnode::train

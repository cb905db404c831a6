#include "qnode/lode/model.hpp"

#include <cmath>
#include <numbers>

#include "qnode/diff/layers.hpp"
#include "qnode/error.hpp"

namespace qnode::lode {

using diff::Tensor;

namespace {

constexpr const char* kEncoder = "enc.rnn";
constexpr const char* kOde = "ode";
constexpr const char* kDecoder = "dec";
constexpr const char* kLogSigma = "obs.log_sigma";

std::vector<std::size_t> ode_widths(const ModelConfig& c) {
  return {c.latent_dim + 1, c.ode_hidden, c.latent_dim};
}

std::vector<std::size_t> decoder_widths(const ModelConfig& c) {
  return {c.latent_dim, c.dec_hidden, 3};
}

Tensor row_tensor(std::span<const double> v) {
  return Tensor::constant({1, v.size()}, std::vector<double>(v.begin(), v.end()));
}

}  // namespace

std::string to_string(EncoderCell cell) { return cell == EncoderCell::Gru ? "gru" : "rnn"; }

EncoderCell parse_encoder_cell(const std::string& s) {
  if (s == "gru") return EncoderCell::Gru;
  if (s == "rnn") return EncoderCell::Rnn;
  fail(ErrorKind::InvalidArgument, "unknown encoder cell '" + s + "' (expected gru|rnn)");
}

void ModelConfig::validate() const {
  if (latent_dim < 1 || rnn_hidden < 1 || ode_hidden < 1 || dec_hidden < 1 || substeps < 1) {
    fail(ErrorKind::InvalidArgument, "model config: all extents must be >= 1");
  }
  if (!(obs_sigma > 0.0)) fail(ErrorKind::InvalidArgument, "model config: obs_sigma must be > 0");
}

std::vector<diff::ParamSpec> model_arch(const ModelConfig& c) {
  c.validate();
  std::vector<diff::ParamSpec> arch = c.cell == EncoderCell::Gru
                                          ? diff::gru_arch(kEncoder, 3, c.rnn_hidden)
                                          : diff::rnn_arch(kEncoder, 3, c.rnn_hidden);
  arch.push_back({"enc.head.W", {c.rnn_hidden, 2 * c.latent_dim}, diff::ParamRole::Weight});
  arch.push_back({"enc.head.b", {1, 2 * c.latent_dim}, diff::ParamRole::Bias});
  for (auto& s : diff::mlp_arch(kOde, ode_widths(c))) arch.push_back(s);
  for (auto& s : diff::mlp_arch(kDecoder, decoder_widths(c))) arch.push_back(s);
  return arch;
}

ObservationBatch ObservationBatch::from(std::span<const Trajectory* const> trajectories) {
  if (trajectories.empty()) fail(ErrorKind::InvalidArgument, "observation batch: empty");
  ObservationBatch b;
  b.batch = trajectories.size();
  b.times = trajectories.front()->times;
  const std::size_t n = b.times.size();
  if (n < 2) fail(ErrorKind::ShapeMismatch, "observation batch: need at least two time points");
  std::vector<double> all;
  all.reserve(n * b.batch * 3);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> step;
    step.reserve(b.batch * 3);
    for (const Trajectory* t : trajectories) {
      if (t->times != b.times || t->points.size() != n) {
        fail(ErrorKind::ShapeMismatch, "observation batch: trajectories must share one grid");
      }
      const BlochPoint& p = t->points[i];
      step.insert(step.end(), {p.x, p.y, p.z});
    }
    all.insert(all.end(), step.begin(), step.end());
    b.steps.push_back(Tensor::constant({b.batch, 3}, std::move(step)));
  }
  b.stacked = Tensor::constant({n * b.batch, 3}, std::move(all));
  return b;
}

ObservationBatch ObservationBatch::from(std::span<const Trajectory> trajectories) {
  std::vector<const Trajectory*> ptrs;
  for (const auto& t : trajectories) ptrs.push_back(&t);
  return from(std::span<const Trajectory* const>(ptrs));
}

Tensor reparam_sample(const EncoderOutput& enc, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(enc.mean.size());
  for (auto& e : eps) e = normal(rng);
  const Tensor noise = Tensor::constant(enc.mean.shape(), std::move(eps));
  return enc.mean + diff::exp(diff::scale(enc.logvar, 0.5)) * noise;
}

Tensor kl_divergence(const EncoderOutput& enc) {
  const Tensor terms = diff::exp(enc.logvar) + diff::square(enc.mean) - Tensor::scalar(1.0) - enc.logvar;
  return diff::scale(diff::sum(terms), 0.5);
}

Tensor gaussian_log_likelihood(const Tensor& target, const Tensor& prediction,
                               const Tensor& log_sigma) {
  if (target.shape() != prediction.shape()) {
    fail(ErrorKind::ShapeMismatch, "log-likelihood: target " + diff::shape_string(target.shape()) +
                                       " vs prediction " + diff::shape_string(prediction.shape()));
  }
  const double count = static_cast<double>(target.size());
  const Tensor sq = diff::sum(diff::square(target - prediction));
  // -sum r^2 / (2 sigma^2) - n log sigma - n/2 log 2 pi
  const Tensor inv_var = diff::exp(diff::scale(log_sigma, -2.0));
  return diff::scale(sq * inv_var, -0.5) - diff::scale(log_sigma, count) -
         Tensor::scalar(0.5 * count * std::log(2.0 * std::numbers::pi));
}

Tensor elbo(const Tensor& target, const Tensor& prediction, const EncoderOutput& enc,
            const Tensor& log_sigma) {
  return gaussian_log_likelihood(target, prediction, log_sigma) - kl_divergence(enc);
}

std::vector<double> slerp(std::span<const double> a, std::span<const double> b, double s) {
  if (a.size() != b.size()) fail(ErrorKind::ShapeMismatch, "slerp: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) fail(ErrorKind::ZeroVector, "slerp: zero-length endpoint");
  if (std::equal(a.begin(), a.end(), b.begin())) return {a.begin(), a.end()};
  const double cosine = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
  const double omega = std::acos(cosine);
  std::vector<double> out(a.size());
  if (omega < 1e-6) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1.0 - s) * a[i] + s * b[i];
    return out;
  }
  const double so = std::sin(omega);
  const double wa = std::sin((1.0 - s) * omega) / so;
  const double wb = std::sin(s * omega) / so;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

Qnode::Qnode(const ModelConfig& config, std::uint64_t seed)
    : config_(config), params_(diff::init_params(model_arch(config), seed)) {
  if (config_.learn_obs_sigma) params_.add(kLogSigma, {}, {std::log(config_.obs_sigma)});
}

Qnode::Qnode(const ModelConfig& config, diff::ParamStore params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  for (const auto& spec : model_arch(config_)) {
    if (!params_.contains(spec.name) || params_.get(spec.name).shape() != spec.shape) {
      fail(ErrorKind::ShapeMismatch, "model parameters: " + spec.name + " missing or mis-shaped");
    }
  }
  if (config_.learn_obs_sigma && !params_.contains(kLogSigma)) {
    fail(ErrorKind::ShapeMismatch, "model parameters: learned observation noise missing");
  }
}

EncoderOutput Qnode::encode(const ObservationBatch& batch) const {
  Tensor h = Tensor::zeros({batch.batch, config_.rnn_hidden});
  for (std::size_t i = batch.steps.size(); i-- > 0;) {
    h = config_.cell == EncoderCell::Gru ? diff::gru_cell(params_, kEncoder, batch.steps[i], h)
                                         : diff::rnn_cell(params_, kEncoder, batch.steps[i], h);
  }
  const Tensor head = diff::affine(params_, "enc.head.W", "enc.head.b", h);
  const std::size_t l = config_.latent_dim;
  return {diff::slice(head, 1, 0, l),
          diff::clamp(diff::slice(head, 1, l, 2 * l), kLogvarMin, kLogvarMax)};
}

Tensor Qnode::latent_rhs(const Tensor& h, double t) const {
  if (h.rank() != 2 || h.cols() != config_.latent_dim) {
    fail(ErrorKind::ShapeMismatch, "latent_rhs: state " + diff::shape_string(h.shape()));
  }
  const Tensor input = diff::concat({h, Tensor::filled({h.rows(), 1}, t)}, 1);
  return diff::mlp_forward(params_, kOde, input, ode_widths(config_));
}

LatentPath Qnode::solve(const Tensor& h0, std::span<const double> times) const {
  if (times.empty()) fail(ErrorKind::InvalidArgument, "solve: empty time grid");
  LatentPath path;
  path.times.assign(times.begin(), times.end());
  path.states.reserve(times.size());
  Tensor h = h0;
  path.states.push_back(h);
  const int substeps = config_.substeps;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double interval = times[i] - times[i - 1];
    if (!(interval > 0.0)) fail(ErrorKind::InvalidArgument, "solve: times must increase");
    const double dt = interval / substeps;
    for (int s = 0; s < substeps; ++s) {
      const double t = times[i - 1] + s * dt;
      const Tensor k1 = latent_rhs(h, t);
      const Tensor k2 = latent_rhs(h + diff::scale(k1, 0.5 * dt), t + 0.5 * dt);
      const Tensor k3 = latent_rhs(h + diff::scale(k2, 0.5 * dt), t + 0.5 * dt);
      const Tensor k4 = latent_rhs(h + diff::scale(k3, dt), t + dt);
      h = h + diff::scale(k1 + diff::scale(k2, 2.0) + diff::scale(k3, 2.0) + k4, dt / 6.0);
    }
    path.states.push_back(h);
  }
  return path;
}

Tensor Qnode::decode_stacked(const LatentPath& path) const {
  std::vector<Tensor> outputs;
  outputs.reserve(path.states.size());
  for (const auto& state : path.states) {
    outputs.push_back(diff::mlp_forward(params_, kDecoder, state, decoder_widths(config_)));
  }
  return diff::concat(outputs, 0);
}

std::vector<Trajectory> Qnode::decode(const LatentPath& path) const {
  return unstack(decode_stacked(path), path.times);
}

std::vector<Trajectory> unstack(const Tensor& stacked, std::span<const double> times) {
  const std::size_t n = times.size();
  if (n == 0 || stacked.rank() != 2 || stacked.cols() != 3 || stacked.rows() % n != 0) {
    fail(ErrorKind::ShapeMismatch, "unstack: prediction " + diff::shape_string(stacked.shape()));
  }
  const std::size_t b = stacked.rows() / n;
  std::vector<Trajectory> out(b);
  const auto v = stacked.values();
  for (std::size_t k = 0; k < b; ++k) {
    out[k].times.assign(times.begin(), times.end());
    out[k].points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = v.data() + (i * b + k) * 3;
      out[k].points[i] = {p[0], p[1], p[2]};
    }
  }
  return out;
}

Tensor Qnode::log_sigma() const {
  if (config_.learn_obs_sigma) return params_.get(kLogSigma);
  return Tensor::scalar(std::log(config_.obs_sigma));
}

Tensor Qnode::neg_elbo(const ObservationBatch& batch, LatentMode mode, std::mt19937_64& rng) const {
  const EncoderOutput enc = encode(batch);
  const Tensor h0 = mode == LatentMode::Sample ? reparam_sample(enc, rng) : enc.mean;
  const LatentPath path = solve(h0, batch.times);
  const Tensor prediction = decode_stacked(path);
  const Tensor total = elbo(batch.stacked, prediction, enc, log_sigma());
  return diff::scale(total, -1.0 / static_cast<double>(batch.batch));
}

std::pair<std::vector<double>, std::vector<double>> Qnode::encode(const Trajectory& traj) const {
  const Trajectory* one[] = {&traj};
  const EncoderOutput enc = encode(ObservationBatch::from(std::span<const Trajectory* const>(one)));
  return {row(enc.mean, 0), row(enc.logvar, 0)};
}

LatentTrajectory Qnode::solve(std::span<const double> h0, std::span<const double> times) const {
  if (h0.size() != config_.latent_dim) fail(ErrorKind::ShapeMismatch, "solve: h0 dimension");
  const LatentPath path = solve(row_tensor(h0), times);
  LatentTrajectory out;
  out.times = path.times;
  for (const auto& s : path.states) out.states.push_back(row(s, 0));
  return out;
}

Trajectory Qnode::decode(const LatentTrajectory& path) const {
  LatentPath p;
  p.times = path.times;
  for (const auto& s : path.states) {
    if (s.size() != config_.latent_dim) fail(ErrorKind::ShapeMismatch, "decode: state dimension");
    p.states.push_back(row_tensor(s));
  }
  return decode(p).front();
}

std::pair<LatentTrajectory, Trajectory> Qnode::generate(std::span<const double> times,
                                                        std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> h0(config_.latent_dim);
  for (auto& v : h0) v = normal(rng);
  LatentTrajectory latent = solve(h0, times);
  Trajectory observed = decode(latent);
  return {std::move(latent), std::move(observed)};
}

Trajectory Qnode::reconstruct_extrapolate(const Trajectory& traj, double t_end, LatentMode mode,
                                          std::mt19937_64& rng) const {
  const auto [mean, logvar] = encode(traj);
  std::vector<double> h0 = mean;
  if (mode == LatentMode::Sample) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < h0.size(); ++i) h0[i] += std::exp(0.5 * logvar[i]) * normal(rng);
  }
  return decode(solve(h0, extend_grid(traj.times, t_end)));
}

std::vector<double> extend_grid(std::span<const double> times, double t_end) {
  if (times.size() < 2) fail(ErrorKind::InvalidArgument, "extend_grid: need at least two times");
  std::vector<double> out(times.begin(), times.end());
  if (t_end <= times.back()) return out;
  const double spacing = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  const double span_steps = (t_end - times.front()) / spacing;
  auto last = static_cast<std::size_t>(std::floor(span_steps + 1e-6));
  for (std::size_t i = times.size(); i <= last; ++i) {
    out.push_back(times.front() + static_cast<double>(i) * spacing);
  }
  return out;
}

std::vector<double> row(const Tensor& t, std::size_t r) {
  const std::size_t c = t.cols();
  const auto v = t.values();
  return {v.begin() + static_cast<std::ptrdiff_t>(r * c), v.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)};
}

}  // namespace qnode::lode

#include "qnode/diff/params.hpp"

#include <cmath>
#include <random>

#include "qnode/error.hpp"
#include "qnode/util/binary_io.hpp"

namespace qnode::diff {

namespace {
constexpr std::string_view kMomentPrefix1 = "adam.m/";
constexpr std::string_view kMomentPrefix2 = "adam.v/";
constexpr std::string_view kStepSection = "adam.step";
}  // namespace

void ParamStore::add(const std::string& name, Shape shape, std::vector<double> values) {
  if (index_.contains(name)) fail(ErrorKind::InvalidArgument, "duplicate parameter " + name);
  Tensor t = Tensor::parameter(std::move(shape), std::move(values));
  const std::size_t n = t.size();
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(t), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
}

bool ParamStore::contains(const std::string& name) const { return index_.contains(name); }

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::InvalidArgument, "unknown parameter " + name);
  return entries_[it->second].value;
}

Tensor& ParamStore::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParamStore&>(*this).get(name));
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

GradientMap ParamStore::gradients() const {
  GradientMap out;
  for (const auto& e : entries_) out[e.name] = e.value.grad();
  return out;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& e : entries_) {
    out.add(e.name, e.value.shape(), std::vector<double>(e.value.values().begin(), e.value.values().end()));
    out.entries_.back().first_moment = e.first_moment;
    out.entries_.back().second_moment = e.second_moment;
  }
  out.step_ = step_;
  return out;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size() || a.step_ != b.step_) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.value.shape() != y.value.shape() ||
        !std::equal(x.value.values().begin(), x.value.values().end(), y.value.values().begin()) ||
        x.first_moment != y.first_moment || x.second_moment != y.second_moment) {
      return false;
    }
  }
  return true;
}

ParamStore init_params(const std::vector<ParamSpec>& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore store;
  for (const auto& spec : arch) {
    const std::size_t n = shape_size(spec.shape);
    std::vector<double> values(n, 0.0);
    if (spec.role == ParamRole::Weight) {
      if (spec.shape.size() != 2) {
        fail(ErrorKind::ShapeMismatch, "init_params: weight " + spec.name + " must be rank 2");
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : values) v = dist(rng);
    }
    store.add(spec.name, spec.shape, std::move(values));
  }
  return store;
}

void adam_step(ParamStore& store, const GradientMap& grads, const AdamConfig& config) {
  for (const auto& e : store.entries()) {
    auto it = grads.find(e.name);
    if (it == grads.end() || it->second.size() != e.value.size()) {
      fail(ErrorKind::ShapeMismatch, "adam_step: gradient for " + e.name + " missing or mis-sized");
    }
  }
  store.set_step(store.step() + 1);
  const double t = static_cast<double>(store.step());
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (auto& e : store.entries()) {
    const auto& g = grads.at(e.name);
    auto w = e.value.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      e.first_moment[i] = config.beta1 * e.first_moment[i] + (1.0 - config.beta1) * g[i];
      e.second_moment[i] = config.beta2 * e.second_moment[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = e.first_moment[i] / correction1;
      const double v_hat = e.second_moment[i] / correction2;
      w[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

double global_norm(const GradientMap& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads) {
    for (double v : g) s += v * v;
  }
  return std::sqrt(s);
}

void clip_global_norm(GradientMap& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm <= max_norm || norm == 0.0) return;
  const double factor = max_norm / norm;
  for (auto& [name, g] : grads) {
    for (double& v : g) v *= factor;
  }
}

std::vector<std::uint8_t> encode_sections(std::span<const Section> sections) {
  util::ByteWriter w;
  w.put_magic("QNP1");
  w.put_u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    if (s.name.size() > 0xffff) fail(ErrorKind::InvalidArgument, "section name too long");
    if (shape_size(s.shape) != s.values.size()) {
      fail(ErrorKind::ShapeMismatch, "section " + s.name + ": shape does not match payload");
    }
    w.put_u16(static_cast<std::uint16_t>(s.name.size()));
    w.put_string(s.name);
    w.put_u32(static_cast<std::uint32_t>(s.shape.size()));
    for (auto e : s.shape) w.put_u32(static_cast<std::uint32_t>(e));
    for (double v : s.values) w.put_f64(v);
  }
  return w.take();
}

std::vector<Section> decode_sections(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) fail(ErrorKind::CorruptPayload, "parameter file: truncated header");
  util::ByteReader r(bytes);
  if (!r.match_magic("QNP1")) {
    fail(ErrorKind::FormatVersionMismatch, "parameter file: bad magic (expected QNP1)");
  }
  const std::uint32_t count = r.get_u32();
  std::vector<Section> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    Section s;
    s.name = r.get_string(r.get_u16());
    const std::uint32_t rank = r.get_u32();
    if (rank > 8) fail(ErrorKind::CorruptPayload, "section " + s.name + ": implausible rank");
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t e = r.get_u32();
      s.shape.push_back(e);
      n *= e;
    }
    r.require(static_cast<std::size_t>(n * 8));
    s.values.resize(static_cast<std::size_t>(n));
    for (auto& v : s.values) v = r.get_f64();
    out.push_back(std::move(s));
  }
  if (r.remaining() != 0) fail(ErrorKind::CorruptPayload, "parameter file: trailing bytes");
  return out;
}

std::vector<Section> store_sections(const ParamStore& store, bool with_optimizer_state) {
  std::vector<Section> out;
  for (const auto& e : store.entries()) {
    out.push_back({e.name, e.value.shape(), {e.value.values().begin(), e.value.values().end()}});
  }
  if (with_optimizer_state) {
    for (const auto& e : store.entries()) {
      out.push_back({std::string(kMomentPrefix1) + e.name, e.value.shape(), e.first_moment});
      out.push_back({std::string(kMomentPrefix2) + e.name, e.value.shape(), e.second_moment});
    }
    out.push_back({std::string(kStepSection), {1}, {static_cast<double>(store.step())}});
  }
  return out;
}

ParamStore store_from_sections(const std::vector<Section>& sections) {
  ParamStore store;
  for (const auto& s : sections) {
    if (s.name == kStepSection) {
      if (s.values.size() != 1 || !(s.values[0] >= 0.0) || s.values[0] != std::floor(s.values[0])) {
        fail(ErrorKind::CorruptPayload, "optimizer step section is malformed");
      }
      store.set_step(static_cast<std::uint64_t>(s.values[0]));
      continue;
    }
    if (s.name.starts_with(kMomentPrefix1) || s.name.starts_with(kMomentPrefix2)) continue;
    store.add(s.name, s.shape, s.values);
  }
  for (const auto& s : sections) {
    const bool m1 = s.name.starts_with(kMomentPrefix1);
    const bool m2 = s.name.starts_with(kMomentPrefix2);
    if (!m1 && !m2) continue;
    const std::string target = s.name.substr(kMomentPrefix1.size());
    if (!store.contains(target)) {
      fail(ErrorKind::CorruptPayload, "optimizer state for unknown parameter " + target);
    }
    for (auto& e : store.entries()) {
      if (e.name != target) continue;
      if (s.values.size() != e.value.size()) {
        fail(ErrorKind::CorruptPayload, "optimizer state size mismatch for " + target);
      }
      (m1 ? e.first_moment : e.second_moment) = s.values;
    }
  }
  return store;
}

}  // namespace qnode::diff

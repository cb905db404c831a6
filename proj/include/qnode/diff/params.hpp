#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qnode/diff/tensor.hpp"

namespace qnode::diff {

enum class ParamRole { Weight, Bias };

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamRole role = ParamRole::Weight;
};

using GradientMap = std::map<std::string, std::vector<double>>;

/// Named trainable tensors in insertion order, with Adam moment buffers.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
  };

  void add(const std::string& name, Shape shape, std::vector<double> values);

  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }

  void zero_grad();
  GradientMap gradients() const;

  /// Deep copy: fresh leaves with the same values and optimizer state.
  ParamStore clone() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

/// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.
/// Weights are drawn in spec order from one stream seeded by `seed`.
ParamStore init_params(const std::vector<ParamSpec>& arch, std::uint64_t seed);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update; increments the store's step counter.
void adam_step(ParamStore& store, const GradientMap& grads, const AdamConfig& config);

double global_norm(const GradientMap& grads);
/// Rescales all gradients so their joint L2 norm is at most max_norm.
void clip_global_norm(GradientMap& grads, double max_norm);

// QNP1 container: named sections of f64 tensors.
struct Section {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

std::vector<std::uint8_t> encode_sections(std::span<const Section> sections);
std::vector<Section> decode_sections(std::span<const std::uint8_t> bytes);

/// Parameters plus "adam.m/<name>" and "adam.v/<name>" sections.
std::vector<Section> store_sections(const ParamStore& store, bool with_optimizer_state);
/// Inverse of store_sections. Optimizer sections are optional.
ParamStore store_from_sections(const std::vector<Section>& sections);

}  // namespace qnode::diff

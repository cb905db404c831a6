#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qnode/qsim/qubit.hpp"

namespace qnode::qsim {

enum class Regime { Closed, Open };
enum class InitialStateMode { HaarRandom, FibonacciGrid };
// Uniform is the default reading of "Gaussian with a range of a to b";
// TruncatedGaussian keeps the other reading available.
enum class ParameterDistribution { Uniform, TruncatedGaussian };

std::string to_string(Regime r);
std::string to_string(InitialStateMode m);
std::string to_string(ParameterDistribution d);
Regime parse_regime(const std::string& s);
InitialStateMode parse_initial_state_mode(const std::string& s);
ParameterDistribution parse_parameter_distribution(const std::string& s);

/// n pure states on the Bloch sphere.
std::vector<DensityMatrix> initial_states(std::size_t n, InitialStateMode mode, std::uint64_t seed);

struct SpecSampling {
  ParameterDistribution distribution = ParameterDistribution::Uniform;
  double hamiltonian_min = 1.5;
  double hamiltonian_max = 2.5;
  double gamma_min = 0.1;
  double gamma_max = 0.3;
  /// Substitute sigma_x for sigma_minus as the "bit-flip" operator.
  bool bit_flip_as_sigma_x = false;
};

/// omega, delta independent draws; Open systems carry one shared gamma on
/// both the amplitude-damping and dephasing channels.
std::vector<SystemSpec> sample_system_specs(std::size_t n, Regime regime, std::uint64_t seed,
                                            const SpecSampling& sampling = {});

struct GeneratorConfig {
  Regime regime = Regime::Closed;
  std::size_t n_systems = 30;
  std::size_t n_states = 36;
  std::size_t n_steps = 60;
  double t_end = 2.0;
  std::uint64_t seed = 0;
  InitialStateMode init_mode = InitialStateMode::HaarRandom;
  SpecSampling sampling;
  int substeps = kDefaultSubsteps;

  void validate() const;
};

struct TrajectoryMeta {
  std::size_t system_index = 0;
  std::size_t state_index = 0;
  double omega = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
  BlochPoint initial;
};

struct Dataset {
  std::vector<double> times;
  std::vector<Trajectory> trajectories;
  GeneratorConfig config;
  std::vector<TrajectoryMeta> meta;

  std::size_t size() const { return trajectories.size(); }
  std::size_t steps() const { return times.size(); }
  /// Subset with the given trajectory indices (meta follows).
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// n_systems x n_states trajectories; index j * n_states + k evolves system j
/// from initial state k on t_i = i * t_end / (n_steps - 1).
Dataset generate_dataset(const GeneratorConfig& config);

inline constexpr int kDatasetFormatVersion = 1;

/// QND1 container bytes (header, grid, trajectory-major payload).
std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
std::string dataset_hash(const Dataset& dataset);

/// Writes `path` (QND1) and `path` + ".json" (metadata sidecar). Returns the
/// content hash of the binary file.
std::string save_dataset(const std::filesystem::path& path, const Dataset& dataset);
/// Reads the binary file and, when present, the sidecar metadata.
Dataset load_dataset(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace qnode::qsim

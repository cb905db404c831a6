#include "qnode/qsim/dataset.hpp"

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "qnode/error.hpp"
#include "qnode/util/binary_io.hpp"
#include "qnode/util/seed.hpp"

namespace qnode::qsim {

using nlohmann::json;

std::string to_string(Regime r) { return r == Regime::Closed ? "closed" : "open"; }

std::string to_string(InitialStateMode m) {
  return m == InitialStateMode::HaarRandom ? "haar" : "fibonacci";
}

std::string to_string(ParameterDistribution d) {
  return d == ParameterDistribution::Uniform ? "uniform" : "truncated-gaussian";
}

Regime parse_regime(const std::string& s) {
  if (s == "closed") return Regime::Closed;
  if (s == "open") return Regime::Open;
  fail(ErrorKind::InvalidArgument, "unknown regime '" + s + "' (expected closed|open)");
}

InitialStateMode parse_initial_state_mode(const std::string& s) {
  if (s == "haar") return InitialStateMode::HaarRandom;
  if (s == "fibonacci") return InitialStateMode::FibonacciGrid;
  fail(ErrorKind::InvalidArgument, "unknown initial-state mode '" + s + "'");
}

ParameterDistribution parse_parameter_distribution(const std::string& s) {
  if (s == "uniform") return ParameterDistribution::Uniform;
  if (s == "truncated-gaussian") return ParameterDistribution::TruncatedGaussian;
  fail(ErrorKind::InvalidArgument, "unknown parameter distribution '" + s + "'");
}

std::vector<DensityMatrix> initial_states(std::size_t n, InitialStateMode mode,
                                          std::uint64_t seed) {
  if (n == 0) fail(ErrorKind::InvalidArgument, "initial_states: n must be >= 1");
  std::vector<DensityMatrix> out;
  out.reserve(n);
  if (mode == InitialStateMode::HaarRandom) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
      const ComplexMat2 u = haar_unitary(rng);
      out.push_back(DensityMatrix::pure(u.col(0)));
    }
    return out;
  }
  // Fibonacci lattice with both poles included; n = 1 is the north pole.
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = n == 1 ? 1.0 : 1.0 - 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    out.push_back(DensityMatrix::from_bloch({r * std::cos(phi), r * std::sin(phi), z}));
  }
  return out;
}

namespace {

double draw(std::mt19937_64& rng, ParameterDistribution dist, double lo, double hi) {
  if (dist == ParameterDistribution::Uniform) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  std::normal_distribution<double> normal(0.5 * (lo + hi), 0.25 * (hi - lo));
  for (;;) {
    const double v = normal(rng);
    if (v >= lo && v <= hi) return v;
  }
}

}  // namespace

std::vector<SystemSpec> sample_system_specs(std::size_t n, Regime regime, std::uint64_t seed,
                                            const SpecSampling& sampling) {
  if (n == 0) fail(ErrorKind::InvalidArgument, "sample_system_specs: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<SystemSpec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SystemSpec spec;
    spec.omega = draw(rng, sampling.distribution, sampling.hamiltonian_min, sampling.hamiltonian_max);
    spec.delta = draw(rng, sampling.distribution, sampling.hamiltonian_min, sampling.hamiltonian_max);
    if (regime == Regime::Open) {
      const double gamma = draw(rng, sampling.distribution, sampling.gamma_min, sampling.gamma_max);
      const ChannelKind flip =
          sampling.bit_flip_as_sigma_x ? ChannelKind::SigmaX : ChannelKind::SigmaMinus;
      spec.channels = {{flip, gamma}, {ChannelKind::SigmaZ, gamma}};
    }
    out.push_back(std::move(spec));
  }
  return out;
}

void GeneratorConfig::validate() const {
  if (n_systems == 0 || n_states == 0 || n_steps < 2 || !(t_end > 0.0) || substeps < 1) {
    fail(ErrorKind::InvalidArgument,
         "generator config: systems, states >= 1, steps >= 2, t_end > 0 required");
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.times = times;
  out.config = config;
  for (std::size_t idx : indices) {
    if (idx >= trajectories.size()) {
      fail(ErrorKind::InvalidArgument, "dataset subset: index out of range");
    }
    out.trajectories.push_back(trajectories[idx]);
    if (idx < meta.size()) out.meta.push_back(meta[idx]);
  }
  return out;
}

Dataset generate_dataset(const GeneratorConfig& config) {
  config.validate();
  Dataset ds;
  ds.config = config;
  ds.times = uniform_grid(config.t_end / static_cast<double>(config.n_steps - 1), config.n_steps);

  const auto specs = sample_system_specs(config.n_systems, config.regime,
                                         util::derive_seed(config.seed, "qsim.systems"),
                                         config.sampling);
  const auto states = initial_states(config.n_states, config.init_mode,
                                     util::derive_seed(config.seed, "qsim.states"));

  ds.trajectories.reserve(specs.size() * states.size());
  ds.meta.reserve(specs.size() * states.size());
  for (std::size_t j = 0; j < specs.size(); ++j) {
    for (std::size_t k = 0; k < states.size(); ++k) {
      ds.trajectories.push_back(evolve(specs[j], states[k], ds.times, config.substeps));
      TrajectoryMeta m;
      m.system_index = j;
      m.state_index = k;
      m.omega = specs[j].omega;
      m.delta = specs[j].delta;
      m.gamma = specs[j].channels.empty() ? 0.0 : specs[j].channels.front().gamma;
      m.initial = bloch(states[k]);
      ds.meta.push_back(m);
    }
  }
  return ds;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  util::ByteWriter w;
  w.put_magic("QND1");
  w.put_u32(static_cast<std::uint32_t>(ds.trajectories.size()));
  w.put_u32(static_cast<std::uint32_t>(ds.times.size()));
  w.put_u32(3);
  for (double t : ds.times) w.put_f64(t);
  for (const auto& traj : ds.trajectories) {
    if (traj.points.size() != ds.times.size()) {
      fail(ErrorKind::ShapeMismatch, "encode_dataset: trajectory length differs from grid");
    }
    for (const auto& p : traj.points) {
      w.put_f64(p.x);
      w.put_f64(p.y);
      w.put_f64(p.z);
    }
  }
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) fail(ErrorKind::CorruptPayload, "dataset: truncated header");
  util::ByteReader r(bytes);
  if (!r.match_magic("QND1")) {
    fail(ErrorKind::FormatVersionMismatch, "dataset: bad magic (expected QND1)");
  }
  const std::uint32_t m = r.get_u32();
  const std::uint32_t n = r.get_u32();
  const std::uint32_t c = r.get_u32();
  if (c != 3) fail(ErrorKind::CorruptPayload, "dataset: component count must be 3");
  const std::uint64_t expected = 8ULL * (n + std::uint64_t{m} * n * 3);
  if (r.remaining() != expected) {
    fail(ErrorKind::CorruptPayload, "dataset: payload size " + std::to_string(r.remaining()) +
                                        " does not match header (" + std::to_string(expected) + ")");
  }
  Dataset ds;
  ds.times.resize(n);
  for (auto& t : ds.times) t = r.get_f64();
  ds.trajectories.resize(m);
  for (auto& traj : ds.trajectories) {
    traj.times = ds.times;
    traj.points.resize(n);
    for (auto& p : traj.points) {
      p.x = r.get_f64();
      p.y = r.get_f64();
      p.z = r.get_f64();
    }
  }
  ds.config.n_steps = n;
  ds.config.t_end = n > 0 ? ds.times.back() : 0.0;
  return ds;
}

std::string dataset_hash(const Dataset& dataset) {
  return util::sha256_hex(encode_dataset(dataset));
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

namespace {

json sidecar_json(const Dataset& ds, const std::string& hash) {
  const auto& c = ds.config;
  json j;
  j["format"] = "QND1";
  j["format_version"] = kDatasetFormatVersion;
  j["content_sha256"] = hash;
  j["seed"] = c.seed;
  j["regime"] = to_string(c.regime);
  j["closed"] = c.regime == Regime::Closed;
  j["init_mode"] = to_string(c.init_mode);
  j["distribution"] = to_string(c.sampling.distribution);
  j["bit_flip_as_sigma_x"] = c.sampling.bit_flip_as_sigma_x;
  j["ranges"] = {{"hamiltonian", {c.sampling.hamiltonian_min, c.sampling.hamiltonian_max}},
                 {"gamma", {c.sampling.gamma_min, c.sampling.gamma_max}}};
  j["n_systems"] = c.n_systems;
  j["n_states"] = c.n_states;
  j["substeps"] = c.substeps;
  j["grid"] = {{"n_steps", c.n_steps},
               {"t_end", c.t_end},
               {"spacing", c.t_end / static_cast<double>(c.n_steps - 1)}};
  json rows = json::array();
  for (const auto& m : ds.meta) {
    rows.push_back({{"system", m.system_index},
                    {"state", m.state_index},
                    {"omega", m.omega},
                    {"delta", m.delta},
                    {"gamma", m.gamma},
                    {"initial", {m.initial.x, m.initial.y, m.initial.z}}});
  }
  j["trajectories"] = std::move(rows);
  return j;
}

void apply_sidecar(const json& j, Dataset& ds) {
  if (j.value("format_version", 0) != kDatasetFormatVersion) {
    fail(ErrorKind::FormatVersionMismatch, "dataset sidecar: unsupported format_version");
  }
  auto& c = ds.config;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.regime = parse_regime(j.at("regime").get<std::string>());
  c.init_mode = parse_initial_state_mode(j.at("init_mode").get<std::string>());
  c.sampling.distribution = parse_parameter_distribution(j.at("distribution").get<std::string>());
  c.sampling.bit_flip_as_sigma_x = j.value("bit_flip_as_sigma_x", false);
  c.sampling.hamiltonian_min = j.at("ranges").at("hamiltonian").at(0).get<double>();
  c.sampling.hamiltonian_max = j.at("ranges").at("hamiltonian").at(1).get<double>();
  c.sampling.gamma_min = j.at("ranges").at("gamma").at(0).get<double>();
  c.sampling.gamma_max = j.at("ranges").at("gamma").at(1).get<double>();
  c.n_systems = j.at("n_systems").get<std::size_t>();
  c.n_states = j.at("n_states").get<std::size_t>();
  c.substeps = j.value("substeps", kDefaultSubsteps);
  c.t_end = j.at("grid").at("t_end").get<double>();
  ds.meta.clear();
  for (const auto& row : j.at("trajectories")) {
    TrajectoryMeta m;
    m.system_index = row.at("system").get<std::size_t>();
    m.state_index = row.at("state").get<std::size_t>();
    m.omega = row.at("omega").get<double>();
    m.delta = row.at("delta").get<double>();
    m.gamma = row.at("gamma").get<double>();
    const auto& p = row.at("initial");
    m.initial = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
    ds.meta.push_back(m);
  }
  if (ds.meta.size() != ds.trajectories.size()) {
    fail(ErrorKind::CorruptPayload, "dataset sidecar: trajectory count differs from binary");
  }
}

}  // namespace

std::string save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  const auto bytes = encode_dataset(dataset);
  const std::string hash = util::sha256_hex(bytes);
  util::write_file(path, bytes);
  util::write_text_file(sidecar_path(path), sidecar_json(dataset, hash).dump(2) + "\n");
  return hash;
}

Dataset load_dataset(const std::filesystem::path& path) {
  const auto bytes = util::read_file(path);
  Dataset ds = decode_dataset(bytes);
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    json j;
    try {
      j = json::parse(util::read_text_file(side));
      apply_sidecar(j, ds);
    } catch (const json::exception& e) {
      fail(ErrorKind::CorruptPayload, std::string("dataset sidecar: ") + e.what());
    }
    if (j.contains("content_sha256") && j["content_sha256"] != util::sha256_hex(bytes)) {
      fail(ErrorKind::CorruptPayload, "dataset sidecar: content hash mismatch");
    }
  }
  return ds;
}

}  // namespace qnode::qsim

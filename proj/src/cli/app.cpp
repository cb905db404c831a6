#include "qnode/cli/app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "qnode/error.hpp"
#include "qnode/expr/experiments.hpp"
#include "qnode/expr/report.hpp"
#include "qnode/qsim/dataset.hpp"
#include "qnode/train/serialization.hpp"
#include "qnode/train/trainer.hpp"
#include "qnode/util/binary_io.hpp"
#include "qnode/util/seed.hpp"

namespace qnode::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "QND1";
constexpr const char* kParamsFormat = "QNP1";

json format_versions() {
  return {{"dataset", kDatasetFormat},
          {"params", kParamsFormat},
          {"checkpoint", train::kCheckpointFormatVersion},
          {"manifest", 1}};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) { util::write_text_file(path, j.dump(2) + "\n"); }

std::string file_sha256(const fs::path& path) { return util::sha256_hex(util::read_file(path)); }

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string regime = "closed";
  fs::path out;
  std::uint64_t seed = 0;
  std::size_t systems = 30;
  std::size_t states = 36;
  std::size_t steps = 60;
  double t_end = 2.0;
  std::string init = "haar";
  std::string distribution = "uniform";
  bool bit_flip_sigma_x = false;
  int substeps = qsim::kDefaultSubsteps;
};

void add_gen_data(CLI::App& app, GenDataArgs& a) {
  auto* c = app.add_subcommand("gen-data", "Simulate qubit trajectories and write a QND1 dataset");
  c->add_option("--regime", a.regime, "closed | open")->capture_default_str()
      ->check(CLI::IsMember({"closed", "open"}));
  c->add_option("--out", a.out, "Output dataset path")->required();
  c->add_option("--seed", a.seed, "Master seed")->capture_default_str();
  c->add_option("--systems", a.systems, "Number of sampled systems")->capture_default_str();
  c->add_option("--states", a.states, "Initial states per system")->capture_default_str();
  c->add_option("--steps", a.steps, "Time points per trajectory")->capture_default_str();
  c->add_option("--t-end", a.t_end, "End of the time grid")->capture_default_str();
  c->add_option("--init", a.init, "haar | fibonacci")->capture_default_str()
      ->check(CLI::IsMember({"haar", "fibonacci"}));
  c->add_option("--distribution", a.distribution, "uniform | truncated-gaussian")->capture_default_str()
      ->check(CLI::IsMember({"uniform", "truncated-gaussian"}));
  c->add_flag("--bit-flip-sigma-x", a.bit_flip_sigma_x, "Use sigma_x instead of sigma_minus as the flip channel");
  c->add_option("--substeps", a.substeps, "RK4 substeps per output interval")->capture_default_str();
}

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  qsim::GeneratorConfig g;
  g.regime = qsim::parse_regime(a.regime);
  g.n_systems = a.systems;
  g.n_states = a.states;
  g.n_steps = a.steps;
  g.t_end = a.t_end;
  g.seed = a.seed;
  g.init_mode = qsim::parse_initial_state_mode(a.init);
  g.sampling.distribution = qsim::parse_parameter_distribution(a.distribution);
  g.sampling.bit_flip_as_sigma_x = a.bit_flip_sigma_x;
  g.substeps = a.substeps;
  const qsim::Dataset ds = qsim::generate_dataset(g);
  if (a.out.has_parent_path()) ensure_dir(a.out.parent_path());
  const std::string hash = qsim::save_dataset(a.out, ds);
  out << "dataset " << a.out.string() << " shape (" << ds.size() << ", " << ds.steps() << ", 3)\n";
  out << "sha256 " << hash << "\n";
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  fs::path data;
  fs::path out;
  fs::path resume;
  std::uint64_t seed = 0;
  double lr = 0.0;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  std::size_t checkpoint_every = 0;
  double clip_norm = 0.0;
  std::size_t latent_dim = 0;
  std::size_t rnn_hidden = 0;
  std::size_t ode_hidden = 0;
  std::size_t dec_hidden = 0;
  double obs_sigma = 0.0;
  bool learn_obs_sigma = false;
  std::string cell = "gru";
  int substeps = 0;
  std::size_t log_every = 100;
  std::vector<CLI::Option*> opts;
};

CLI::Option* opt(TrainArgs& a, CLI::Option* o) {
  a.opts.push_back(o);
  return o;
}

bool given(const TrainArgs& a, const std::string& name) {
  for (const auto* o : a.opts) {
    if (o->check_lname(name)) return o->count() > 0;
  }
  return false;
}

void add_train(CLI::App& app, TrainArgs& a) {
  auto* c = app.add_subcommand("train", "Train a latent ODE model on a dataset");
  c->add_option("--data", a.data, "QND1 dataset")->required();
  c->add_option("--out", a.out, "Run directory")->required();
  c->add_option("--resume", a.resume, "Checkpoint to continue from");
  opt(a, c->add_option("--seed", a.seed, "Master seed"));
  opt(a, c->add_option("--lr", a.lr, "Adam learning rate (regime default)"));
  opt(a, c->add_option("--epochs", a.epochs, "Total epochs"));
  opt(a, c->add_option("--batch-size", a.batch_size, "Minibatch size"));
  opt(a, c->add_option("--checkpoint-every", a.checkpoint_every, "Epochs between checkpoints"));
  opt(a, c->add_option("--clip-norm", a.clip_norm, "Global gradient-norm clip"));
  opt(a, c->add_option("--latent-dim", a.latent_dim, "Latent dimension"));
  opt(a, c->add_option("--rnn-hidden", a.rnn_hidden, "Encoder hidden width"));
  opt(a, c->add_option("--ode-hidden", a.ode_hidden, "Latent ODE hidden width"));
  opt(a, c->add_option("--dec-hidden", a.dec_hidden, "Decoder hidden width"));
  opt(a, c->add_option("--obs-sigma", a.obs_sigma, "Observation noise"));
  opt(a, c->add_flag("--learn-obs-sigma", a.learn_obs_sigma, "Learn the observation noise"));
  opt(a, c->add_option("--cell", a.cell, "gru | rnn")->check(CLI::IsMember({"gru", "rnn"})));
  opt(a, c->add_option("--substeps", a.substeps, "Latent RK4 substeps per interval"));
  c->add_option("--log-every", a.log_every, "Epochs between progress lines (0 = silent)")
      ->capture_default_str();
}

fs::path checkpoint_name(const fs::path& dir, std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%06zu.qnp", epoch);
  return dir / "checkpoints" / buf;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const qsim::Dataset ds = qsim::load_dataset(a.data);
  const std::string hash = qsim::dataset_hash(ds);

  std::optional<train::Checkpoint> resume;
  if (!a.resume.empty()) resume = train::load_checkpoint(a.resume);

  const bool open = ds.config.regime == qsim::Regime::Open;
  lode::ModelConfig mc = resume ? resume->model
                                : (open ? lode::ModelConfig::open_defaults() : lode::ModelConfig::closed_defaults());
  train::TrainConfig tc = resume ? resume->train
                                 : (open ? train::TrainConfig::open_defaults() : train::TrainConfig::closed_defaults());
  tc.regime = ds.config.regime;

  if (given(a, "seed")) tc.seed = a.seed;
  if (given(a, "lr")) tc.learning_rate = a.lr;
  if (given(a, "epochs")) tc.epochs = a.epochs;
  if (given(a, "batch-size")) tc.batch_size = a.batch_size;
  if (given(a, "checkpoint-every")) tc.checkpoint_every = a.checkpoint_every;
  if (given(a, "clip-norm")) tc.clip_norm = a.clip_norm;
  const bool arch_given = given(a, "latent-dim") || given(a, "rnn-hidden") || given(a, "ode-hidden") ||
                          given(a, "dec-hidden") || given(a, "obs-sigma") || given(a, "learn-obs-sigma") ||
                          given(a, "cell") || given(a, "substeps");
  if (resume && arch_given) {
    fail(ErrorKind::InvalidArgument, "model options cannot change when resuming");
  }
  if (given(a, "latent-dim")) mc.latent_dim = a.latent_dim;
  if (given(a, "rnn-hidden")) mc.rnn_hidden = a.rnn_hidden;
  if (given(a, "ode-hidden")) mc.ode_hidden = a.ode_hidden;
  if (given(a, "dec-hidden")) mc.dec_hidden = a.dec_hidden;
  if (given(a, "obs-sigma")) mc.obs_sigma = a.obs_sigma;
  if (given(a, "learn-obs-sigma")) mc.learn_obs_sigma = a.learn_obs_sigma;
  if (given(a, "cell")) mc.cell = lode::parse_encoder_cell(a.cell);
  if (given(a, "substeps")) mc.substeps = a.substeps;
  if (resume && resume->train.seed != tc.seed) {
    fail(ErrorKind::InvalidArgument, "seed cannot change when resuming");
  }
  mc.validate();
  tc.validate(ds.size());

  ensure_dir(a.out / "checkpoints");
  const fs::path metrics_path = a.out / "metrics.csv";
  train::MetricsCsv metrics(metrics_path, resume.has_value());

  std::optional<train::Checkpoint> prior_best;
  if (resume && fs::exists(a.out / "best.qnp")) prior_best = train::load_checkpoint(a.out / "best.qnp");
  train::Trainer trainer = resume ? train::Trainer(ds, *resume, tc, std::move(prior_best)) : train::Trainer(ds, mc, tc);
  const std::size_t start_epoch = resume ? resume->epoch : 0;

  json outputs = json::array({"metrics.csv"});
  const auto result = trainer.run([&](const train::MetricRecord& r, const train::Checkpoint& current) {
    metrics.write(r);
    if (r.epoch % tc.checkpoint_every == 0 || r.epoch == tc.epochs) {
      const fs::path p = checkpoint_name(a.out, r.epoch);
      train::save_checkpoint(p, current);
      outputs.push_back(fs::relative(p, a.out).string());
    }
    if (a.log_every > 0 && (r.epoch % a.log_every == 0 || r.epoch == tc.epochs)) {
      out << "epoch " << r.epoch << " neg_elbo " << train::format_double(r.neg_elbo) << " average_mse "
          << train::format_double(r.average_mse) << "\n"
          << std::flush;
    }
  });

  train::save_checkpoint(a.out / "best.qnp", result.best);
  train::save_checkpoint(a.out / "last.qnp", result.last);
  outputs.push_back("best.qnp");
  outputs.push_back("last.qnp");

  json manifest = {
      {"command", "train"},
      {"format_versions", format_versions()},
      {"dataset", {{"path", a.data.string()}, {"sha256", hash}, {"trajectories", ds.size()}, {"steps", ds.steps()}}},
      {"model", train::model_config_json(mc)},
      {"train", train::train_config_json(tc)},
      {"seeds",
       {{"master", tc.seed},
        {"model.init", util::derive_seed(tc.seed, "model.init")},
        {"train.shuffle", "derive_seed(master, \"train.shuffle\", epoch)"},
        {"train.noise", "derive_seed(master, \"train.noise\", epoch)"}}},
      {"start_epoch", start_epoch},
      {"epochs_completed", result.last.epoch},
      {"status", result.aborted ? "aborted" : "completed"},
      {"best", {{"epoch", result.best.epoch}, {"path", "best.qnp"}}},
      {"outputs", outputs}};
  if (!result.best.history.empty()) manifest["best"]["neg_elbo"] = result.best.history.back().neg_elbo;
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    manifest["final_metrics"] = {{"epoch", last.epoch}, {"neg_elbo", last.neg_elbo},
                                 {"total_mse", last.total_mse}, {"average_mse", last.average_mse}};
  }
  if (resume) manifest["resumed_from"] = a.resume.string();
  if (result.aborted) {
    manifest["failure"] = {{"epoch", result.failed_epoch}, {"message", result.failure}};
  }
  write_json(a.out / "manifest.json", manifest);

  if (result.aborted) {
    err << "error: NonFinite: training aborted at epoch " << result.failed_epoch << ": " << result.failure
        << "\n";
    return 1;
  }
  out << "best epoch " << result.best.epoch << " -> " << (a.out / "best.qnp").string() << "\n";
  return 0;
}

// ------------------------------------------------------------- experiments

struct ExprArgs {
  fs::path ckpt;
  fs::path out;
  fs::path data;
  fs::path holdout;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double tol = 0.05;
  double t_end = expr::kExtrapolationEnd;
  std::size_t steps = 60;
  double t_train = 2.0;
  std::optional<std::size_t> a_index;
  std::optional<std::size_t> b_index;
  std::size_t n_generate = 9;
  std::size_t n_hup = 50;
  std::size_t n_extrapolate = 6;
};

CLI::App* add_expr_common(CLI::App& app, const std::string& name, const std::string& desc, ExprArgs& a,
                          bool needs_data) {
  auto* c = app.add_subcommand(name, desc);
  c->add_option("--ckpt", a.ckpt, "Checkpoint (QNP1 + sidecar)")->required();
  c->add_option("--out", a.out, "Output directory")->required();
  c->add_option("--seed", a.seed, "Master seed")->capture_default_str();
  c->add_option("--t-end", a.t_end, "End of the experiment grid")->capture_default_str();
  auto* d = c->add_option("--data", a.data, "QND1 dataset");
  if (needs_data) d->required();
  return c;
}

void add_grid_options(CLI::App* c, ExprArgs& a) {
  c->add_option("--steps", a.steps, "Training grid points (when no --data)")->capture_default_str();
  c->add_option("--t-train", a.t_train, "Training window end (when no --data)")->capture_default_str();
}

struct Loaded {
  lode::Qnode model;
  std::string params_sha256;
  std::string dataset_hash;
};

Loaded load_model(const fs::path& ckpt) {
  train::Checkpoint c = train::load_checkpoint(ckpt);
  const std::string sha = file_sha256(ckpt);
  std::string hash = c.dataset_hash;
  return {lode::Qnode(c.model, std::move(c.params)), sha, hash};
}

std::vector<double> training_grid(const ExprArgs& a, const std::optional<qsim::Dataset>& ds) {
  if (ds) return ds->times;
  if (a.steps < 2 || !(a.t_train > 0.0)) fail(ErrorKind::InvalidArgument, "grid needs --steps >= 2 and --t-train > 0");
  return uniform_grid(a.t_train / static_cast<double>(a.steps - 1), a.steps);
}

json expr_manifest(const std::string& command, const ExprArgs& a, const Loaded& m) {
  json j = {{"command", command},
            {"format_versions", format_versions()},
            {"checkpoint", {{"path", a.ckpt.string()}, {"sha256", m.params_sha256}, {"dataset_sha256", m.dataset_hash}}},
            {"seed", a.seed},
            {"t_end", a.t_end}};
  if (!a.data.empty()) j["data"] = a.data.string();
  return j;
}

void finish(const fs::path& dir, json manifest, const std::vector<std::string>& outputs) {
  manifest["outputs"] = outputs;
  write_json(dir / "manifest.json", manifest);
}

json run_generate(const lode::Qnode& model, const ExprArgs& a, std::size_t n, const std::vector<double>& grid,
                  const fs::path& dir) {
  ensure_dir(dir);
  const auto set = expr::exp_generate(model, n, a.seed, grid, a.t_end);
  expr::write_generated_csv(dir, set);
  util::write_text_file(dir / "generated.svg", expr::generated_figure(set));
  util::write_text_file(dir / "generated_norm.svg", expr::generated_norm_figure(set));
  std::vector<std::string> outputs = {"generated.csv", "generated_latent.csv", "generated.svg", "generated_norm.svg"};
  for (std::size_t i = 0; i < n; ++i) outputs.push_back("trajectory_" + std::to_string(i) + ".csv");
  return {{"n", n},
          {"grid_points", set.times.size()},
          {"training_points", set.training_points},
          {"seeds", {{"sample", "derive_seed(seed, \"expr.generate\", i)"}}},
          {"mean_norm_deviation_training_window", expr::mean_norm_deviation(set)},
          {"outputs", outputs}};
}

json run_hup(const lode::Qnode& model, const ExprArgs& a, std::size_t n, const std::vector<double>& grid,
             const std::optional<qsim::Dataset>& ds, const fs::path& dir) {
  ensure_dir(dir);
  const std::uint64_t seed = util::derive_seed(a.seed, "expr.hup");
  const auto hup = expr::exp_hup(model, n, seed, a.tol, grid, a.t_end);
  expr::write_hup_csv(dir, hup, grid.back());
  util::write_text_file(dir / "hup.svg", expr::hup_figure(hup, grid.back()));
  json j = {{"n", n},
            {"tol", a.tol},
            {"records", hup.records.size()},
            {"fraction_satisfied", hup.fraction},
            {"seeds", {{"hup", seed}}},
            {"outputs", {"hup.csv", "hup_min.csv", "hup.svg"}}};
  if (ds) {
    const fs::path control = dir / "control";
    ensure_dir(control);
    std::vector<Trajectory> truth;
    const std::vector<double> long_grid = expr::experiment_grid(grid, a.t_end);
    for (std::size_t k = 0; k < std::min(n, ds->size()); ++k) truth.push_back(expr::ground_truth(*ds, k, long_grid));
    const auto ctl = expr::hup_analysis(truth, 1e-9);
    expr::write_hup_csv(control, ctl, grid.back());
    j["control"] = {{"trajectories", truth.size()}, {"tol", 1e-9}, {"fraction_satisfied", ctl.fraction},
                    {"outputs", {"control/hup.csv", "control/hup_min.csv"}}};
  }
  return j;
}

json run_interpolate(const lode::Qnode& model, const ExprArgs& a, const qsim::Dataset& ds, const fs::path& dir) {
  ensure_dir(dir);
  std::size_t ia = 0, ib = 0;
  if (a.a_index && a.b_index) {
    ia = *a.a_index;
    ib = *a.b_index;
  } else if (a.a_index || a.b_index) {
    fail(ErrorKind::InvalidArgument, "interpolate needs both --a and --b, or neither");
  } else {
    std::tie(ia, ib) = expr::most_distant_pair(ds);
  }
  if (ia >= ds.size() || ib >= ds.size()) fail(ErrorKind::InvalidArgument, "trajectory index out of range");
  const auto res = expr::exp_interpolate(model, ds.trajectories[ia], ds.trajectories[ib], a.t_end);
  expr::write_interpolation_csv(dir / "interpolation.csv", dir / "interpolation_latent.csv", res, ds.steps());
  util::write_text_file(dir / "interpolation.svg", expr::interpolation_figure(res, ds.steps()));
  json dev = json::array();
  for (const auto& e : res.entries) dev.push_back(expr::mean_norm_deviation(e));
  return {{"a", ia},
          {"b", ib},
          {"entries", res.entries.size()},
          {"mean_norm_deviation", dev},
          {"outputs", {"interpolation.csv", "interpolation_latent.csv", "interpolation.svg"}}};
}

json run_latent(const lode::Qnode& model, const qsim::Dataset& ds, const fs::path& dir) {
  ensure_dir(dir);
  const auto latents = expr::export_latent_trajectories(model, ds);
  expr::write_latent_csv(dir / "latent.csv", latents);
  util::write_text_file(dir / "latent.svg", expr::latent_figure(latents));
  return {{"trajectories", latents.size()}, {"outputs", {"latent.csv", "latent.svg"}}};
}

json run_extrapolation(const lode::Qnode& model, const ExprArgs& a, const qsim::Dataset& ds, std::size_t n,
                       const fs::path& dir) {
  ensure_dir(dir);
  std::vector<expr::ExtrapolationReport> reports;
  json rows = json::array();
  for (std::size_t k = 0; k < std::min(n, ds.size()); ++k) {
    reports.push_back(expr::extrapolation_report(model, ds, k, a.t_end));
    rows.push_back({{"trajectory", k},
                    {"reconstruction_mse", reports.back().reconstruction_mse},
                    {"extrapolation_mse", reports.back().extrapolation_mse}});
  }
  expr::write_extrapolation_csv(dir / "extrapolation.csv", reports);
  util::write_text_file(dir / "extrapolation.svg", expr::extrapolation_figure(reports));
  return {{"reports", rows}, {"outputs", {"extrapolation.csv", "extrapolation.svg"}}};
}

std::optional<qsim::Dataset> maybe_dataset(const fs::path& p) {
  if (p.empty()) return std::nullopt;
  return qsim::load_dataset(p);
}

int cmd_generate(const ExprArgs& a, std::ostream& out) {
  const Loaded m = load_model(a.ckpt);
  const auto ds = maybe_dataset(a.data);
  const json r = run_generate(m.model, a, a.n, training_grid(a, ds), a.out);
  json man = expr_manifest("generate", a, m);
  man["result"] = r;
  finish(a.out, man, r["outputs"].get<std::vector<std::string>>());
  out << "generated " << a.n << " trajectories in " << a.out.string() << "\n";
  return 0;
}

int cmd_hup(const ExprArgs& a, std::ostream& out) {
  const Loaded m = load_model(a.ckpt);
  const auto ds = maybe_dataset(a.data);
  const json r = run_hup(m.model, a, a.n, training_grid(a, ds), ds, a.out);
  json man = expr_manifest("eval-hup", a, m);
  man["result"] = r;
  finish(a.out, man, r["outputs"].get<std::vector<std::string>>());
  out << "records " << r["records"].get<std::size_t>() << " fraction "
      << train::format_double(r["fraction_satisfied"].get<double>()) << "\n";
  return 0;
}

int cmd_interpolate(const ExprArgs& a, std::ostream& out) {
  const Loaded m = load_model(a.ckpt);
  const qsim::Dataset ds = qsim::load_dataset(a.data);
  const json r = run_interpolate(m.model, a, ds, a.out);
  json man = expr_manifest("interpolate", a, m);
  man["result"] = r;
  finish(a.out, man, r["outputs"].get<std::vector<std::string>>());
  out << "interpolated " << r["a"].get<std::size_t>() << " -> " << r["b"].get<std::size_t>() << "\n";
  return 0;
}

int cmd_latent(const ExprArgs& a, std::ostream& out) {
  const Loaded m = load_model(a.ckpt);
  const qsim::Dataset ds = qsim::load_dataset(a.data);
  const json r = run_latent(m.model, ds, a.out);
  json man = expr_manifest("export-latent", a, m);
  man["result"] = r;
  finish(a.out, man, r["outputs"].get<std::vector<std::string>>());
  out << "exported " << ds.size() << " latent trajectories\n";
  return 0;
}

int cmd_report(const ExprArgs& a, std::ostream& out) {
  const Loaded m = load_model(a.ckpt);
  const qsim::Dataset ds = qsim::load_dataset(a.data);
  const qsim::Dataset held = a.holdout.empty() ? ds : qsim::load_dataset(a.holdout);
  ensure_dir(a.out);
  const std::optional<qsim::Dataset> dso = ds;

  json sections;
  sections["generate"] = run_generate(m.model, a, a.n_generate, ds.times, a.out / "generate");
  sections["hup"] = run_hup(m.model, a, a.n_hup, ds.times, dso, a.out / "hup");
  sections["interpolate"] = run_interpolate(m.model, a, ds, a.out / "interpolate");
  sections["latent"] = run_latent(m.model, ds, a.out / "latent");
  sections["extrapolation"] = run_extrapolation(m.model, a, held, a.n_extrapolate, a.out / "extrapolation");

  std::vector<std::string> outputs;
  for (auto& [name, sec] : sections.items()) {
    json man = expr_manifest(name, a, m);
    man["result"] = sec;
    finish(a.out / name, man, sec["outputs"].get<std::vector<std::string>>());
    for (const auto& o : sec["outputs"]) outputs.push_back(name + "/" + o.get<std::string>());
    outputs.push_back(name + "/manifest.json");
  }
  json index = expr_manifest("report", a, m);
  if (!a.holdout.empty()) index["holdout"] = a.holdout.string();
  index["dataset_sha256"] = qsim::dataset_hash(ds);
  index["sections"] = sections;
  finish(a.out, index, outputs);
  out << "report written to " << a.out.string() << "\n";
  return 0;
}

std::string category_of(const std::exception& e) {
  if (const auto* q = dynamic_cast<const Error*>(&e)) return std::string(error_kind_name(q->kind()));
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return "CorruptPayload";
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return "IoError";
  return "Internal";
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app("Latent ODE models of open and closed qubit dynamics", "qnode");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file with one [section] per subcommand; flags take precedence");

  GenDataArgs gen;
  TrainArgs tr;
  ExprArgs gen_x, hup_x, int_x, lat_x, rep_x;
  add_gen_data(app, gen);
  add_train(app, tr);

  auto* g = add_expr_common(app, "generate", "Sample trajectories from the prior", gen_x, false);
  g->add_option("--n", gen_x.n, "Number of samples")->default_val(9);
  add_grid_options(g, gen_x);

  auto* h = add_expr_common(app, "eval-hup", "Check var(x) + var(z) >= 1 on prior samples", hup_x, false);
  h->add_option("--n", hup_x.n, "Number of samples")->default_val(50);
  h->add_option("--tol", hup_x.tol, "Tolerance on the bound")->capture_default_str();
  add_grid_options(h, hup_x);

  auto* ip = add_expr_common(app, "interpolate", "Slerp between two encoded trajectories", int_x, true);
  ip->add_option("--a", int_x.a_index, "First trajectory index");
  ip->add_option("--b", int_x.b_index, "Second trajectory index");

  add_expr_common(app, "export-latent", "Write latent paths of the training data", lat_x, true);

  auto* rp = add_expr_common(app, "report", "Run every experiment into one directory", rep_x, true);
  rp->add_option("--holdout", rep_x.holdout, "Dataset for the extrapolation check (default --data)");
  rp->add_option("--n-generate", rep_x.n_generate, "Prior samples to plot")->capture_default_str();
  rp->add_option("--n-hup", rep_x.n_hup, "Prior samples for the bound check")->capture_default_str();
  rp->add_option("--n-extrapolate", rep_x.n_extrapolate, "Trajectories to extrapolate")->capture_default_str();
  rp->add_option("--tol", rep_x.tol, "Tolerance on the bound")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::FileError& e) {
    err << "error: IoError: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const CLI::ParseError& e) {
    err << "error: InvalidArgument: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "gen-data") return cmd_gen_data(gen, out);
    if (name == "train") return cmd_train(tr, out, err);
    if (name == "generate") return cmd_generate(gen_x, out);
    if (name == "eval-hup") return cmd_hup(hup_x, out);
    if (name == "interpolate") return cmd_interpolate(int_x, out);
    if (name == "export-latent") return cmd_latent(lat_x, out);
    if (name == "report") return cmd_report(rep_x, out);
    fail(ErrorKind::InvalidArgument, "unknown subcommand " + name);
  } catch (const std::exception& e) {
    err << "error: " << category_of(e) << ": " << one_line(e.what()) << "\n";
    return 1;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("qnode");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace qnode::cli

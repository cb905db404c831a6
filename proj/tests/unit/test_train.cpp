#include <doctest.h>

#include <fstream>
#include <sstream>

#include "qnode/qsim/dataset.hpp"
#include "qnode/train/trainer.hpp"
#include "qnode/util/binary_io.hpp"
#include "qnode/util/seed.hpp"
#include "test_support.hpp"

using namespace qnode;
using namespace qnode::train;
using qnode::testing::error_kind_of;
using qnode::testing::TempDir;

namespace {

qsim::Dataset toy(std::size_t systems, std::size_t states, std::uint64_t seed = 2) {
  qsim::GeneratorConfig g;
  g.n_systems = systems;
  g.n_states = states;
  g.n_steps = 20;
  g.seed = seed;
  return qsim::generate_dataset(g);
}

lode::ModelConfig tiny() {
  lode::ModelConfig c;
  c.latent_dim = 2;
  c.rnn_hidden = c.ode_hidden = c.dec_hidden = 8;
  c.obs_sigma = 0.1;
  return c;
}

TrainConfig quick(std::size_t epochs, std::size_t batch) {
  TrainConfig t;
  t.learning_rate = 1e-2;
  t.epochs = epochs;
  t.batch_size = batch;
  t.seed = 5;
  t.checkpoint_every = 1;
  return t;
}

Trajectory constant_traj(double value, std::size_t n) {
  Trajectory t;
  t.times = uniform_grid(0.1, n);
  t.points.assign(n, {value, value, value});
  return t;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("trajectory MSE") {
  const auto x = constant_traj(0.2, 60);
  CHECK(traj_mse(x, x) == 0.0);
  CHECK(traj_mse(x, constant_traj(0.3, 60)) == doctest::Approx(0.01).epsilon(1e-12));
  auto y = x;
  y.points[17].y += 0.3;
  CHECK(traj_mse(x, y) == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(error_kind_of([&] { traj_mse(x, constant_traj(0.2, 59)); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("dataset MSE of an exact model") {
  // Zero parameters decode to the origin, which is exactly the data here.
  qsim::Dataset ds;
  ds.times = uniform_grid(0.1, 10);
  ds.trajectories = {constant_traj(0.0, 10), constant_traj(0.0, 10)};
  lode::Qnode model(tiny(), 1);
  for (auto& e : model.params().entries()) {
    for (auto& v : e.value.mutable_values()) v = 0.0;
  }
  const auto m = dataset_mse(model, ds);
  CHECK(m.total == 0.0);
  CHECK(m.average == 0.0);
}

TEST_CASE("config validation") {
  TrainConfig t = quick(1, 4);
  CHECK_NOTHROW(t.validate(4));
  t.batch_size = 5;
  CHECK(error_kind_of([&] { t.validate(4); }) == ErrorKind::InvalidArgument);
  t = quick(0, 1);
  CHECK(error_kind_of([&] { t.validate(4); }) == ErrorKind::InvalidArgument);
  t = quick(1, 1);
  t.learning_rate = 0.0;
  CHECK(error_kind_of([&] { t.validate(4); }) == ErrorKind::InvalidArgument);
  CHECK(TrainConfig::closed_defaults().learning_rate == 4e-3);
  CHECK(TrainConfig::open_defaults().learning_rate == 7e-3);
  CHECK(TrainConfig::closed_defaults().epochs == 7500);
  CHECK(TrainConfig::closed_defaults().batch_size == 256);
}

TEST_CASE("one epoch improves the objective") {
  const auto ds = toy(2, 2);
  const TrainConfig t = quick(1, 2);
  const lode::Qnode init(tiny(), util::derive_seed(t.seed, "model.init"));
  const double before = evaluate(init, ds).neg_elbo;
  const auto result = train::train(ds, tiny(), t);
  REQUIRE(result.history.size() == 1);
  CHECK(result.history[0].neg_elbo < before);
  CHECK(result.history[0].epoch == 1);
}

TEST_CASE("identical seeds give identical runs") {
  const auto ds = toy(2, 3);
  const auto a = train::train(ds, tiny(), quick(3, 2));
  const auto b = train::train(ds, tiny(), quick(3, 2));
  CHECK(a.history == b.history);
  CHECK(a.final_params == b.final_params);
  TrainConfig other = quick(3, 2);
  other.seed = 6;
  CHECK(!(train::train(ds, tiny(), other).history == a.history));
}

TEST_CASE("best checkpoint has the lowest objective") {
  const auto ds = toy(2, 2);
  const auto r = train::train(ds, tiny(), quick(4, 2));
  double lowest = r.history.front().neg_elbo;
  std::size_t epoch = 1;
  for (const auto& m : r.history) {
    if (m.neg_elbo < lowest) lowest = m.neg_elbo, epoch = m.epoch;
  }
  CHECK(r.best.epoch == epoch);
  CHECK(r.last.epoch == 4);
  CHECK(r.best.history.size() == epoch);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("train");
  const auto ds = toy(2, 2);
  const auto r = train::train(ds, tiny(), quick(2, 2));
  const auto path = dir / "c.qnp";
  save_checkpoint(path, r.last);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.params == r.last.params);
  CHECK(back.params.step() == r.last.params.step());
  CHECK(back.model == r.last.model);
  CHECK(back.train == r.last.train);
  CHECK(back.epoch == 2);
  CHECK(back.history == r.last.history);
  CHECK(back.dataset_hash == qsim::dataset_hash(ds));
  for (const auto& e : r.last.params.entries()) {
    const auto& v = back.params.get(e.name);
    CHECK(std::equal(v.values().begin(), v.values().end(), e.value.values().begin()));
  }

  auto bytes = util::read_file(path);
  util::write_file(dir / "t.qnp", std::span(bytes).first(bytes.size() / 2));
  std::filesystem::copy_file(dir / "c.qnp.json", dir / "t.qnp.json");
  CHECK(error_kind_of([&] { load_checkpoint(dir / "t.qnp"); }) == ErrorKind::CorruptPayload);
  auto wrong = bytes;
  wrong[0] = 'Z';
  util::write_file(dir / "w.qnp", wrong);
  std::filesystem::copy_file(dir / "c.qnp.json", dir / "w.qnp.json");
  CHECK(error_kind_of([&] { load_checkpoint(dir / "w.qnp"); }) == ErrorKind::FormatVersionMismatch);
  auto flipped = bytes;
  flipped.back() ^= 0x10;
  util::write_file(dir / "f.qnp", flipped);
  std::filesystem::copy_file(dir / "c.qnp.json", dir / "f.qnp.json");
  CHECK(error_kind_of([&] { load_checkpoint(dir / "f.qnp"); }) == ErrorKind::CorruptPayload);
  CHECK(error_kind_of([&] { load_checkpoint(dir / "none.qnp"); }) == ErrorKind::IoError);
}

TEST_CASE("resuming matches an uninterrupted run") {
  TempDir dir("resume");
  const auto ds = toy(2, 3);
  const auto full = train::train(ds, tiny(), quick(4, 2));
  const auto half = train::train(ds, tiny(), quick(2, 2));
  save_checkpoint(dir / "h.qnp", half.last);
  const Checkpoint ck = load_checkpoint(dir / "h.qnp");
  const auto rest = Trainer(ds, ck, quick(4, 2)).run();
  CHECK(rest.history == full.history);
  CHECK(rest.final_params == full.final_params);
  CHECK(rest.history.front().epoch == 1);
  CHECK(rest.last.epoch == 4);

  // An earlier best survives the resume unless a later epoch beats it.
  Checkpoint prior = half.best;
  prior.history.back().neg_elbo = -1e300;
  const auto kept = Trainer(ds, ck, quick(4, 2), prior).run();
  CHECK(kept.best.epoch == prior.epoch);
  CHECK(kept.best.params == prior.params);
  Checkpoint foreign = prior;
  foreign.model.latent_dim = 3;
  CHECK(error_kind_of([&] { Trainer(ds, ck, quick(4, 2), foreign); }) == ErrorKind::InvalidArgument);

  const auto other = toy(2, 3, 99);
  CHECK(error_kind_of([&] { Trainer(other, ck, quick(4, 2)); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("metrics stream") {
  TempDir dir("metrics");
  const auto path = dir / "m.csv";
  {
    MetricsCsv csv(path, false);
    csv.write({1, 2.5, 0.125, 0.1});
  }
  {
    MetricsCsv csv(path, true);
    csv.write({2, 1.5, 0.0625, 0.05});
  }
  CHECK(slurp(path) == "epoch,neg_elbo,total_mse,average_mse\n1,2.5,0.125,0.1\n2,1.5,0.0625,0.05\n");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
}

}  // TEST_SUITE

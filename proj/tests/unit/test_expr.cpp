#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "qnode/expr/experiments.hpp"
#include "qnode/expr/report.hpp"
#include "qnode/qsim/dataset.hpp"
#include "test_support.hpp"

using namespace qnode;
using namespace qnode::expr;
using qnode::testing::TempDir;

namespace {

lode::ModelConfig tiny() {
  lode::ModelConfig c;
  c.latent_dim = 3;
  c.rnn_hidden = c.ode_hidden = c.dec_hidden = 8;
  return c;
}

qsim::Dataset dataset(qsim::Regime regime, std::size_t systems, std::size_t states) {
  qsim::GeneratorConfig g;
  g.regime = regime;
  g.n_systems = systems;
  g.n_states = states;
  g.seed = 31;
  return qsim::generate_dataset(g);
}

std::string first_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("expr") {

TEST_CASE("norm series") {
  const auto closed = dataset(qsim::Regime::Closed, 1, 3);
  for (const auto& t : closed.trajectories) {
    for (double n : norm_series(t)) CHECK(std::abs(n - 1.0) < 1e-6);
  }
  Trajectory origin;
  origin.times = {0.0, 1.0};
  origin.points = {{0, 0, 0}, {0, 0, 0}};
  CHECK(norm_series(origin) == std::vector<double>{0.0, 0.0});

  const double gamma = 0.15;
  const auto grid = uniform_grid(2.0 / 59.0, 60);
  const auto deph = qsim::evolve({0.0, 0.0, {{qsim::ChannelKind::SigmaZ, gamma}}},
                                 qsim::DensityMatrix::from_bloch({1, 0, 0}), grid);
  const auto n = norm_series(deph);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(n[i] - std::exp(-2 * gamma * grid[i])) < 1e-6);
}

TEST_CASE("prior generation") {
  lode::Qnode model(tiny(), 3);
  const auto grid = uniform_grid(2.0 / 59.0, 60);
  CHECK(exp_generate(model, 0, 1, grid).samples.empty());
  const auto a = exp_generate(model, 4, 1, grid);
  const auto b = exp_generate(model, 4, 1, grid);
  REQUIRE(a.samples.size() == 4);
  CHECK(a.times.size() == 178);
  CHECK(a.training_points == 60);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.samples[i].observed == b.samples[i].observed);
    CHECK(a.samples[i].latent == b.samples[i].latent);
  }
  CHECK(!(a.samples[0].observed == a.samples[1].observed));
  CHECK(std::isfinite(mean_norm_deviation(a)));
}

TEST_CASE("uncertainty analysis") {
  const auto closed = dataset(qsim::Regime::Closed, 3, 4);
  CHECK(hup_analysis(closed.trajectories, 1e-9).fraction == 1.0);
  const auto open = dataset(qsim::Regime::Open, 3, 4);
  CHECK(hup_analysis(open.trajectories, 1e-9).fraction == 1.0);

  Trajectory edge;
  edge.times = {0.0};
  edge.points = {{0.6, 0.0, 0.8}};
  const auto r = hup_analysis(std::vector<Trajectory>{edge}, 0.0);
  CHECK(r.records[0].sum == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.records[0].var_x == doctest::Approx(0.64));

  Trajectory outside = edge;
  outside.points = {{0.9, 0.0, 0.9}};
  CHECK(hup_analysis(std::vector<Trajectory>{outside}, 0.05).fraction == 0.0);

  lode::Qnode model(tiny(), 2);
  const auto hup = exp_hup(model, 5, 9, 0.05, closed.times);
  CHECK(hup.records.size() == 5 * 178);
  CHECK(hup.min_sum_per_time.size() == 178);
  CHECK(hup.records[178].trajectory == 1);
}

TEST_CASE("interpolation") {
  const auto ds = dataset(qsim::Regime::Closed, 2, 2);
  lode::Qnode model(tiny(), 4);
  const auto same = exp_interpolate(model, ds.trajectories[1], ds.trajectories[1]);
  REQUIRE(same.entries.size() == 8);
  for (const auto& e : same.entries) {
    CHECK(e.decoded == same.entries[0].decoded);
    CHECK(e.decoded.size() == 178);
  }
  const auto diff = exp_interpolate(model, ds.trajectories[0], ds.trajectories[3]);
  std::mt19937_64 unused(0);
  CHECK(diff.entries[0].decoded ==
        model.reconstruct_extrapolate(ds.trajectories[0], kExtrapolationEnd, lode::LatentMode::PosteriorMean, unused));
  CHECK(diff.entries[7].decoded ==
        model.reconstruct_extrapolate(ds.trajectories[3], kExtrapolationEnd, lode::LatentMode::PosteriorMean, unused));
  for (const auto& e : diff.entries) CHECK(std::isfinite(mean_norm_deviation(e)));

  const auto [a, b] = most_distant_pair(ds);
  CHECK(a < b);
  CHECK(b < ds.size());
}

TEST_CASE("latent export") {
  const auto ds = dataset(qsim::Regime::Closed, 2, 3);
  lode::Qnode model(tiny(), 5);
  const auto a = export_latent_trajectories(model, ds);
  CHECK(a.size() == ds.size());
  for (const auto& l : a) {
    CHECK(l.states.size() == 60);
    CHECK(l.states[0].size() == 3);
  }
  CHECK(a == export_latent_trajectories(model, ds));
}

TEST_CASE("extrapolation report") {
  const auto ds = dataset(qsim::Regime::Open, 1, 2);
  lode::Qnode model(tiny(), 6);
  const auto r = extrapolation_report(model, ds, 1);
  CHECK(r.predicted.size() == 178);
  CHECK(r.training_points == 60);
  for (std::size_t i = 0; i < 60; ++i) {
    CHECK(std::abs(r.truth.points[i].x - ds.trajectories[1].points[i].x) < 1e-12);
    CHECK(std::abs(r.truth.points[i].z - ds.trajectories[1].points[i].z) < 1e-12);
  }
  CHECK(std::isfinite(r.reconstruction_mse));
  CHECK(std::isfinite(r.extrapolation_mse));
  CHECK(system_spec_of(ds, 1).channels.size() == 2);
}

TEST_CASE("tables and figures") {
  TempDir dir("expr");
  const auto ds = dataset(qsim::Regime::Closed, 1, 3);
  lode::Qnode model(tiny(), 7);
  const auto set = exp_generate(model, 3, 2, ds.times);
  write_generated_csv(dir.path(), set);
  CHECK(first_line(dir / "generated.csv") == "sample,index,time,window,x,y,z,norm");
  CHECK(line_count(dir / "generated.csv") == 1 + 3 * 178);
  CHECK(line_count(dir / "trajectory_2.csv") == 1 + 178);
  CHECK(first_line(dir / "generated_latent.csv") == "sample,index,time,h0,h1,h2");

  const auto hup = exp_hup(model, 2, 3, 0.05, ds.times);
  write_hup_csv(dir.path(), hup, 2.0);
  CHECK(line_count(dir / "hup.csv") == 1 + 2 * 178);
  CHECK(line_count(dir / "hup_min.csv") == 1 + 178);

  const auto ip = exp_interpolate(model, ds.trajectories[0], ds.trajectories[2]);
  write_interpolation_csv(dir / "i.csv", dir / "il.csv", ip, 60);
  CHECK(line_count(dir / "i.csv") == 1 + 8 * 178);

  const auto latents = export_latent_trajectories(model, ds);
  write_latent_csv(dir / "l.csv", latents);
  CHECK(line_count(dir / "l.csv") == 1 + 3 * 60);

  const std::vector<ExtrapolationReport> reps{extrapolation_report(model, ds, 0)};
  write_extrapolation_csv(dir / "e.csv", reps);
  CHECK(first_line(dir / "e.csv") == "trajectory,index,time,window,x,y,z,true_x,true_y,true_z");

  for (const std::string& svg : {generated_figure(set), generated_norm_figure(set), hup_figure(hup, 2.0),
                                 interpolation_figure(ip, 60), latent_figure(latents), extrapolation_figure(reps)}) {
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
  }
  CHECK(hup_figure(hup, 2.0).find(kColorExtrapolation) != std::string::npos);
  CHECK(extrapolation_figure(reps).find(kColorTruthExtrapolation) != std::string::npos);

  // Byte-identical on repetition.
  TempDir again("expr2");
  write_generated_csv(again.path(), exp_generate(model, 3, 2, ds.times));
  CHECK(slurp(again / "generated.csv") == slurp(dir / "generated.csv"));
}

}  // TEST_SUITE

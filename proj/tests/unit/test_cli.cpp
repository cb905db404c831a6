#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "qnode/cli/app.hpp"
#include "qnode/qsim/dataset.hpp"
#include "test_support.hpp"

using qnode::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run qnode_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = qnode::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::string hash_line(const std::string& out) {
  const auto pos = out.find("sha256 ");
  return pos == std::string::npos ? "" : out.substr(pos + 7, 64);
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

const std::vector<std::string> kTinyModel = {"--latent-dim", "2", "--rnn-hidden", "8", "--ode-hidden", "8",
                                              "--dec-hidden", "8"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-data") {
  TempDir dir("cli_gen");
  const auto a = qnode_cli({"gen-data", "--out", (dir / "a.qnd").string(), "--systems", "2", "--states", "3",
                            "--seed", "4"});
  REQUIRE(a.code == 0);
  CHECK(a.out.find("(6, 60, 3)") != std::string::npos);
  const auto ds = qnode::qsim::load_dataset(dir / "a.qnd");
  CHECK(ds.size() == 6);
  CHECK(ds.steps() == 60);
  const auto b = qnode_cli({"gen-data", "--out", (dir / "b.qnd").string(), "--systems", "2", "--states", "3",
                            "--seed", "4"});
  CHECK(hash_line(a.out).size() == 64);
  CHECK(hash_line(a.out) == hash_line(b.out));
  const auto c = qnode_cli({"gen-data", "--out", (dir / "c.qnd").string(), "--systems", "2", "--states", "3",
                            "--seed", "5", "--regime", "open"});
  CHECK(hash_line(c.out) != hash_line(a.out));
  CHECK(read_json(dir / "c.qnd.json")["regime"] == "open");
}

TEST_CASE("errors are single categorized lines") {
  TempDir dir("cli_err");
  const auto missing = qnode_cli({"train", "--data", (dir / "none.qnd").string(), "--out", (dir / "r").string()});
  CHECK(missing.code != 0);
  CHECK(missing.err.rfind("error: IoError: ", 0) == 0);
  CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);

  const auto bad_flag = qnode_cli({"gen-data", "--out", (dir / "x.qnd").string(), "--regime", "sideways"});
  CHECK(bad_flag.code != 0);
  CHECK(bad_flag.err.rfind("error: InvalidArgument: ", 0) == 0);

  const auto none = qnode_cli({});
  CHECK(none.code != 0);

  qnode_cli({"gen-data", "--out", (dir / "d.qnd").string(), "--systems", "1", "--states", "2"});
  const auto batch = qnode_cli({"train", "--data", (dir / "d.qnd").string(), "--out", (dir / "r").string(),
                                "--batch-size", "3"});
  CHECK(batch.code != 0);
  CHECK(batch.err.rfind("error: InvalidArgument: ", 0) == 0);

  std::ofstream(dir / "junk.qnp") << "QNP";
  const auto junk = qnode_cli({"generate", "--ckpt", (dir / "junk.qnp").string(), "--out", (dir / "g").string()});
  CHECK(junk.err.rfind("error: ", 0) == 0);
  CHECK(junk.code != 0);
}

TEST_CASE("train, resume and experiments") {
  TempDir dir("cli_train");
  const std::string data = (dir / "d.qnd").string();
  REQUIRE(qnode_cli({"gen-data", "--out", data, "--systems", "2", "--states", "5", "--seed", "1"}).code == 0);
  const std::string run = (dir / "run").string();

  const auto t = qnode_cli(with({"train", "--data", data, "--out", run, "--epochs", "50", "--batch-size", "5",
                                 "--checkpoint-every", "20", "--seed", "3", "--log-every", "0"},
                                kTinyModel));
  REQUIRE(t.code == 0);
  CHECK(line_count(dir / "run" / "metrics.csv") == 51);
  CHECK(fs::exists(dir / "run" / "checkpoints" / "epoch_000020.qnp"));
  CHECK(fs::exists(dir / "run" / "checkpoints" / "epoch_000050.qnp"));
  CHECK(fs::exists(dir / "run" / "best.qnp"));
  const auto manifest = read_json(dir / "run" / "manifest.json");
  CHECK(manifest["status"] == "completed");
  CHECK(manifest["train"]["epochs"] == 50);
  CHECK(manifest["model"]["latent_dim"] == 2);
  CHECK(manifest["seeds"]["master"] == 3);
  CHECK(manifest["dataset"]["sha256"].get<std::string>().size() == 64);

  const auto r = qnode_cli({"train", "--data", data, "--out", run, "--resume", (dir / "run" / "last.qnp").string(),
                            "--epochs", "55", "--log-every", "0"});
  REQUIRE(r.code == 0);
  CHECK(line_count(dir / "run" / "metrics.csv") == 56);
  {
    std::ifstream in(dir / "run" / "metrics.csv");
    std::string line;
    for (int i = 0; i < 56; ++i) std::getline(in, line);
    CHECK(line.rfind("55,", 0) == 0);
  }
  CHECK(read_json(dir / "run" / "manifest.json")["start_epoch"] == 50);

  const std::string ckpt = (dir / "run" / "best.qnp").string();
  const auto g = qnode_cli({"generate", "--ckpt", ckpt, "--out", (dir / "gen").string(), "--seed", "2"});
  REQUIRE(g.code == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "gen")) {
    files += e.path().filename().string().rfind("trajectory_", 0) == 0 ? 1 : 0;
  }
  CHECK(files == 9);

  const auto h = qnode_cli({"eval-hup", "--ckpt", ckpt, "--out", (dir / "hup").string()});
  REQUIRE(h.code == 0);
  CHECK(line_count(dir / "hup" / "hup.csv") == 1 + 50 * 178);
  CHECK(read_json(dir / "hup" / "manifest.json")["result"]["records"] == 50 * 178);

  const auto ip = qnode_cli({"interpolate", "--ckpt", ckpt, "--data", data, "--out", (dir / "ip").string(), "--a",
                             "0", "--b", "0"});
  REQUIRE(ip.code == 0);
  {
    // Eight columns (entries) with identical x, y, z at every time index.
    std::ifstream in(dir / "ip" / "interpolation.csv");
    std::string line;
    std::getline(in, line);
    std::vector<std::string> first(178);
    std::size_t rows = 0, mismatches = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
      const std::size_t idx = std::stoul(cells[2]);
      const std::string payload = cells[5] + "," + cells[6] + "," + cells[7];
      if (cells[0] == "1") first[idx] = payload;
      else mismatches += payload == first[idx] ? 0 : 1;
      ++rows;
    }
    CHECK(rows == 8 * 178);
    CHECK(mismatches == 0);
  }

  const auto lat = qnode_cli({"export-latent", "--ckpt", ckpt, "--data", data, "--out", (dir / "lat").string()});
  REQUIRE(lat.code == 0);
  CHECK(line_count(dir / "lat" / "latent.csv") == 1 + 10 * 60);

  const auto rep = qnode_cli({"report", "--ckpt", ckpt, "--data", data, "--out", (dir / "rep").string()});
  REQUIRE(rep.code == 0);
  const auto index = read_json(dir / "rep" / "manifest.json");
  CHECK(index["command"] == "report");
  for (const auto& o : index["outputs"]) CHECK(fs::exists(dir / "rep" / o.get<std::string>()));
  CHECK(index["sections"]["hup"]["control"]["fraction_satisfied"] == 1.0);
}

TEST_CASE("config file precedence") {
  TempDir dir("cli_cfg");
  const std::string data = (dir / "d.qnd").string();
  REQUIRE(qnode_cli({"gen-data", "--out", data, "--systems", "1", "--states", "4"}).code == 0);
  std::ofstream(dir / "c.toml") << "[train]\nepochs = 3\nbatch-size = 2\nlr = 0.02\nlatent-dim = 2\n"
                                   "rnn-hidden = 4\node-hidden = 4\ndec-hidden = 4\n";
  const auto r = qnode_cli({"train", "--config", (dir / "c.toml").string(), "--data", data, "--out",
                            (dir / "run").string(), "--epochs", "2", "--log-every", "0"});
  REQUIRE(r.code == 0);
  const auto m = read_json(dir / "run" / "manifest.json");
  CHECK(m["train"]["epochs"] == 2);
  CHECK(m["train"]["batch_size"] == 2);
  CHECK(m["train"]["learning_rate"] == 0.02);
  CHECK(m["model"]["rnn_hidden"] == 4);
  CHECK(m["model"]["obs_sigma"] == 0.01);
  const auto missing = qnode_cli({"train", "--config", (dir / "nope.toml").string(), "--data", data, "--out",
                                  (dir / "run2").string()});
  CHECK(missing.err.rfind("error: IoError: ", 0) == 0);
}

}  // TEST_SUITE

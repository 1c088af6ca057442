#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "gpgibbs/cli.hpp"
#include "gpgibbs/config.hpp"
#include "gpgibbs/errors.hpp"

using namespace gpgibbs;
namespace fs = std::filesystem;

namespace {

int call(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "gpgibbs");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gpgibbs_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config round trip") {
  const std::string text = R"(
# comment
[params]
epsilon = 0.25
coupling = 0.5
chem_potential = 0.02
truncation = 4
mass_level = 6
shell_width = 0.3
[grids]
eps = 0.4, 0.2, 0.1, 0.05
delta = 0.1
[chain]
step_beta = 0.3
n_steps = 500
n_burn = 50
thin = 2
[run]
seed = 99
out = results
)";
  const auto c = ExperimentConfig::parse(text);
  CHECK(c.params.epsilon == 0.25);
  CHECK_FALSE(c.auto_chem_potential);
  CHECK(c.eps_grid.size() == 4);
  CHECK(c.seed == 99);
  const auto again = ExperimentConfig::parse(c.serialize());
  CHECK(again.serialize() == c.serialize());
  CHECK(again.hash() == c.hash());
  CHECK(c.hash().size() == 16);
  CHECK(ExperimentConfig::parse(ExperimentConfig{}.serialize()).serialize() == ExperimentConfig{}.serialize());

  // The hash ignores where results go and how many threads compute them.
  auto moved = c;
  moved.out_dir = "elsewhere";
  moved.threads = 4;
  CHECK(moved.hash() == c.hash());
  moved.seed = 100;
  CHECK(moved.hash() != c.hash());

  CHECK(c.to_json()["params"]["epsilon"] == 0.25);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS((void)ExperimentConfig::parse("[params]\nbogus = 1\n"), ParameterError);
  CHECK_THROWS_AS((void)ExperimentConfig::parse("[nowhere]\nepsilon = 1\n"), ParameterError);
  CHECK_THROWS_AS((void)ExperimentConfig::parse("[params]\nepsilon = abc\n"), ParameterError);
  CHECK_THROWS_AS((void)ExperimentConfig::parse("epsilon = 1\n"), ParameterError);
  CHECK_THROWS_AS((void)ExperimentConfig::parse("[params]\nepsilon = -1\n").validate(), ParameterError);
  CHECK_THROWS_AS((void)ExperimentConfig::parse("[grids]\neps = 0.2, 0.1, 0.2\n").validate(), ParameterError);
  CHECK_THROWS_AS((void)ExperimentConfig::load("/nonexistent/file.cfg"), ParameterError);
}

TEST_CASE("usage errors exit with 2") {
  std::string err;
  CHECK(call({"frobnicate"}, &err) == 2);
  CHECK(err.find("Usage") != std::string::npos);
  CHECK(call({}) == 2);
  CHECK(call({"soliton", "--mass", "-3", "--out", scratch("neg").string()}) == 2);
  CHECK(call({"soliton", "--config", "/nonexistent.cfg"}) == 2);
}

TEST_CASE("oracle subcommand reproduces the closed form") {
  const auto dir = scratch("oracle");
  REQUIRE(call({"oracle", "--truncation", "0", "--eps", "0.5", "--out", dir.string()}) == 0);
  std::ifstream in(dir / "oracle.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# config_hash=", 0) == 0);
  bool found = false;
  while (std::getline(in, line)) {
    if (line.rfind("shell_probability,0,0,", 0) != 0) continue;
    const auto last = line.rfind(',');
    const auto prev = line.rfind(',', last - 1);
    const double oracle = std::stod(line.substr(prev + 1, last - prev - 1));
    const double closed = std::stod(line.substr(last + 1));
    CHECK(std::abs(oracle - closed) <= 1e-6);
    found = true;
  }
  CHECK(found);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest.contains("wall_time_seconds"));
  CHECK(manifest["versions"].contains("gpgibbs"));
  CHECK(call({"oracle", "--truncation", "2", "--out", scratch("oracle2").string()}) == 2);
}

TEST_CASE("outputs are byte-identical across reruns and thread counts") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  const std::vector<std::string> base{"entropy", "--truncation", "4", "--mass", "6", "--shell", "0.6,0.3",
                                      "--eps", "0.4,0.2,0.1", "--n-samples", "4000"};
  auto with = [&](const fs::path& out, const std::string& threads) {
    auto v = base;
    v.insert(v.end(), {"--out", out.string(), "--threads", threads});
    return v;
  };
  REQUIRE(call(with(a, "1")) == 0);
  REQUIRE(call(with(b, "3")) == 0);
  int compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename();
    if (name == "manifest.json") continue;
    CHECK_MESSAGE(slurp(e.path()) == slurp(b / name), name.string());
    CHECK(slurp(e.path()).find("config_hash") != std::string::npos);
    ++compared;
  }
  CHECK(compared >= 3);
}

TEST_CASE("runs only write inside the output directory") {
  const auto root = scratch("confine");
  fs::create_directories(root / "inside");
  const auto before = std::distance(fs::directory_iterator(root), fs::directory_iterator{});
  REQUIRE(call({"soliton", "--truncation", "4", "--mass", "2", "--out", (root / "inside" / "run").string()}) == 0);
  CHECK(std::distance(fs::directory_iterator(root), fs::directory_iterator{}) == before);
  CHECK(fs::exists(root / "inside" / "run" / "soliton.json"));
}

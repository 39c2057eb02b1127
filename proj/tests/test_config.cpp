#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nullcone/config.hpp"
#include "nullcone/drivers.hpp"
#include "nullcone/error.hpp"

using namespace nullcone;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("nullcone_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing") {
  auto c = parse_config(R"(
# comment
[run]
experiment = energy   ; trailing comment
seed = 42
[grid]
N = 64, 128
eps = 0.1
[nonlinearity]
C1 = 0.4, 0, 0, 0.3
[assert]
exponent_rel_tol = 0.15
)");
  CHECK(c.experiment == "energy");
  CHECK(c.seed == 42);
  CHECK(c.N == std::vector<int>{64, 128});
  CHECK(c.eps == 0.1);
  CHECK(c.C1[3] == 0.3);
  CHECK(c.assertion("exponent_rel_tol").value() == 0.15);
  CHECK_FALSE(c.assertion("min_order").has_value());
  CHECK(c.raw.at("grid.eps") == "0.1");
}

TEST_CASE("config errors carry a location") {
  CHECK_THROWS_AS(parse_config(""), ParseError);
  CHECK_THROWS_AS(parse_config("# only a comment\n"), ParseError);
  CHECK_THROWS_WITH_AS(parse_config("[run]\nexperiment = energy\n[grid]\nN = abc\n", "x.cfg"), doctest::Contains("x.cfg:4"),
                       ParseError);
  CHECK_THROWS_WITH_AS(parse_config("[run]\nexperiment = energy\nbogus = 1\n"), doctest::Contains("unknown key"), ParseError);
  CHECK_THROWS_AS(parse_config("experiment = energy\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[run\nexperiment = energy\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[grid]\nN = 64\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[run]\nexperiment = energy\n[grid]\neps = 2\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[run]\nexperiment = energy\n[grid]\nratio = 1.5\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[run]\nexperiment = energy\n[nonlinearity]\nC1 = 1, 2\n"), ParseError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.cfg"), ParseError);
}

TEST_CASE("config echo is canonical") {
  auto a = parse_config("[run]\nexperiment = hardy\nseed = 3\n[grid]\neps = 0.05\n");
  auto b = parse_config("[grid]\neps = 0.050\n[run]\nseed = 3\nexperiment = hardy\n");
  CHECK(config_echo(a) == config_echo(b));
}

TEST_CASE("tables") {
  Table t({"a", "b", "c"});
  t.comment("header");
  t.add({1LL, 0.5, std::string("x")});
  t.add({2LL, std::numeric_limits<double>::quiet_NaN(), std::string("y")});
  CHECK_THROWS_AS(t.add({1LL}), SizeMismatch);
  auto dir = scratch("table");
  fs::create_directories(dir);
  t.write_csv((dir / "t.csv").string());
  t.write_json((dir / "t.json").string());
  CHECK(slurp(dir / "t.csv") == "# header\na,b,c\n1,0.5,x\n2,nan,y\n");
  CHECK(slurp(dir / "t.json").find("\"b\": null") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("hardy experiment is deterministic") {
  auto cfg = parse_config("[run]\nexperiment = hardy\ntrials = 200\nseed = 7\n[assert]\nkt4_tol = 1e-10\n");
  RunContext a, b;
  a.out_dir = scratch("hardy_a").string();
  b.out_dir = scratch("hardy_b").string();
  const auto ra = run_experiment(cfg, a);
  run_experiment(cfg, b);
  CHECK(ra.ok());
  CHECK(slurp(fs::path(a.out_dir) / "hardy.csv") == slurp(fs::path(b.out_dir) / "hardy.csv"));
  CHECK(slurp(fs::path(a.out_dir) / "manifest.txt") == slurp(fs::path(b.out_dir) / "manifest.txt"));
  cfg.seed = 8;
  run_experiment(cfg, b);
  CHECK(slurp(fs::path(a.out_dir) / "hardy.csv") != slurp(fs::path(b.out_dir) / "hardy.csv"));
  fs::remove_all(a.out_dir);
  fs::remove_all(b.out_dir);
}

TEST_CASE("manifest reproduces the run") {
  auto cfg = parse_config("[run]\nexperiment = energy\n[grid]\nN = 32\n[data]\ndelta_prime = 0.7\n");
  RunContext ctx;
  ctx.out_dir = scratch("manifest").string();
  ctx.json = true;
  const auto res = run_experiment(cfg, ctx);
  const std::string m = slurp(fs::path(ctx.out_dir) / "manifest.txt");
  const std::string echo = m.substr(m.find("[config]\n") + 9);
  // the echoed configuration alone reproduces the tables
  std::string text = "[run]\n";
  std::istringstream in(echo);
  std::string line;
  std::string section;
  while (std::getline(in, line)) {
    const auto dot = line.find('.');
    const auto eq = line.find(" = ");
    if (dot == std::string::npos || eq == std::string::npos || line.substr(eq + 3).empty()) continue;
    const std::string sec = line.substr(0, dot);
    if (sec != section) {
      text += "[" + sec + "]\n";
      section = sec;
    }
    text += line.substr(dot + 1) + "\n";
  }
  auto again = parse_config(text);
  RunContext ctx2;
  ctx2.out_dir = scratch("manifest2").string();
  run_experiment(again, ctx2);
  CHECK(slurp(fs::path(ctx.out_dir) / "energy_curve.csv") == slurp(fs::path(ctx2.out_dir) / "energy_curve.csv"));
  CHECK(std::find(res.files.begin(), res.files.end(), "energy_fit.json") != res.files.end());
  CHECK(m.find("grid = N=32 ") != std::string::npos);
  fs::remove_all(ctx.out_dir);
  fs::remove_all(ctx2.out_dir);
}

TEST_CASE("assertions drive the outcome") {
  auto cfg = parse_config("[run]\nexperiment = norms\n[data]\ndelta = 0.3\ndelta_prime = 0.3\n[assert]\nexpect_divergent = 1\n");
  RunContext ctx;
  ctx.out_dir = scratch("norms").string();
  CHECK(run_experiment(cfg, ctx).ok());
  cfg.delta_prime = 0.6;
  CHECK_FALSE(run_experiment(cfg, ctx).ok());
  cfg.experiment = "nothing";
  CHECK_THROWS_AS(run_experiment(cfg, ctx), ParseError);
  fs::remove_all(ctx.out_dir);
}

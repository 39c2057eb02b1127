// nullcone: experiment runner.
//
// Exit status: 0 all assertions pass, 1 an assertion failed, 2 bad arguments or
// configuration, 3 runtime error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nullcone/config.hpp"
#include "nullcone/drivers.hpp"
#include "nullcone/error.hpp"

using namespace nullcone;

namespace {

struct Subcommand {
  const char* name;
  const char* experiment;
  const char* help;
};

const Subcommand kSubcommands[] = {
    {"solve", "solve", "single evolution with checkpoint and summary"},
    {"iterate", "picard", "Picard iteration against the direct solve"},
    {"energy", "energy", "energy curve E(eps, V) and its power fit"},
    {"hardy", "hardy", "randomized Hardy inequality suite"},
    {"kt4", "kt4", "integral comparison lemma with calibrated constants"},
    {"mkg-reduce", "mkg", "scattering norm, cone transfer and gauge transport"},
    {"norms", "norms", "weighted data norm with divergence detection"},
    {"mms", "mms", "manufactured-solution convergence study"},
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Characteristic wave-equation experiments on a light cone"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  bool json = false;
  std::vector<std::string> overrides;
  int trials = 0;
  app.add_option("--config", config_path, "configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--out-dir", out_dir, "output directory (default: $NULLCONE_OUT_DIR, then run.out_dir)");
  app.add_option("--threads", threads, "worker threads for refinements")->check(CLI::Range(1, 256));
  app.add_flag("--json", json, "also write JSON mirrors of every table");
  app.add_option("--set", overrides, "override a setting, section.key=value")->take_all();
  auto* trials_opt = app.add_option("--trials", trials, "number of random trials")->check(CLI::PositiveNumber);

  std::string run_path;
  auto* run = app.add_subcommand("run", "run the experiment named in a config file");
  run->add_option("config", run_path, "configuration file")->required();
  std::vector<CLI::App*> subs;
  for (const auto& s : kSubcommands) subs.push_back(app.add_subcommand(s.name, s.help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string command_line;
  for (int k = 0; k < argc; ++k) command_line += (k ? " " : "") + std::string(argv[k]);

  ExperimentConfig cfg;
  try {
    if (run->parsed()) {
      cfg = load_config(run_path);
    } else {
      std::string experiment;
      for (size_t k = 0; k < subs.size(); ++k)
        if (subs[k]->parsed()) experiment = kSubcommands[k].experiment;
      if (!config_path.empty()) {
        cfg = parse_config("[run]\nexperiment = " + experiment + "\n" + read_file(config_path), config_path);
      }
      set_config_value(cfg, "run.experiment", experiment);
    }
    if (*seed_opt) set_config_value(cfg, "run.seed", std::to_string(seed));
    if (*trials_opt) set_config_value(cfg, "run.trials", std::to_string(trials));
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ParseError("--set expects section.key=value, got '" + o + "'");
      set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
    cfg.validate();
  } catch (const ParseError& e) {
    std::cerr << "nullcone: " << e.what() << "\n";
    return 2;
  }

  RunContext ctx;
  ctx.threads = threads;
  ctx.json = json;
  ctx.command_line = command_line;
  if (!out_dir.empty())
    ctx.out_dir = out_dir;
  else if (const char* env = std::getenv("NULLCONE_OUT_DIR"); env && *env)
    ctx.out_dir = env;
  else if (!cfg.out_dir.empty())
    ctx.out_dir = cfg.out_dir;
  else
    ctx.out_dir = "nullcone_out";

  try {
    const DriverResult res = run_experiment(cfg, ctx);
    std::cout << "experiment " << res.experiment << " -> " << ctx.out_dir << "\n";
    for (const auto& f : res.files) std::cout << "  wrote " << f << "\n";
    for (const auto& n : res.notes) std::cout << "  note: " << n << "\n";
    for (const auto& a : res.assertions)
      std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << " value " << a.value << " bound " << a.bound
                << (a.note.empty() ? "" : " (" + a.note + ")") << "\n";
    return res.ok() ? 0 : 1;
  } catch (const ParseError& e) {
    std::cerr << "nullcone: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "nullcone: error: " << e.what() << "\n";
    return 3;
  }
}

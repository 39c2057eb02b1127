#pragma once

// Named experiments. Each writes its tables into the output directory and returns the
// outcome of the [assert] entries it understands.

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "nullcone/config.hpp"
#include "nullcone/cone_data.hpp"
#include "nullcone/evolution.hpp"

namespace nullcone {

struct RunContext {
  std::string out_dir = ".";
  int threads = 1;
  bool json = false;
  std::string command_line;
};

struct AssertionOutcome {
  std::string name;
  double value = 0;
  double bound = 0;
  bool pass = true;
  std::string note;
};

struct DriverResult {
  std::string experiment;
  std::vector<AssertionOutcome> assertions;
  std::vector<std::string> files;
  std::vector<std::string> grid_hashes;
  std::vector<std::string> notes;

  bool ok() const;
};

/// Small column table written as CSV with '#' comment lines on top.
class Table {
 public:
  using Cell = std::variant<double, long long, std::string>;

  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}
  void comment(const std::string& line) { comments_.push_back(line); }
  void add(std::vector<Cell> row);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }

  void write_csv(const std::string& path) const;
  void write_json(const std::string& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> comments_;
  std::vector<std::vector<Cell>> rows_;
};

std::shared_ptr<const NullGrid> make_grid(const ExperimentConfig& cfg, int N);
/// Data named by the config: a file, or profile x amplitude x v^(delta' - 1), or the smooth field.
ConeData config_data(const ExperimentConfig& cfg, double delta_prime);

/// sup over active nodes with u index >= i_min of |phi| v^(1 - delta') on the angular grid.
double pointwise_constant(const NullField& f, double delta_prime, int i_min = 0);

DriverResult run_convergence(const ExperimentConfig& cfg, const RunContext& ctx);
DriverResult run_mms(const ExperimentConfig& cfg, const RunContext& ctx);
DriverResult run_energy(const ExperimentConfig& cfg, const RunContext& ctx);
DriverResult run_pointwise(const ExperimentConfig& cfg, const RunContext& ctx);
DriverResult run_picard(const ExperimentConfig& cfg, const RunContext& ctx);
DriverResult run_hardy(const ExperimentConfig& cfg, const RunContext& ctx);
DriverResult run_kt4(const ExperimentConfig& cfg, const RunContext& ctx);
DriverResult run_mkg(const ExperimentConfig& cfg, const RunContext& ctx);
DriverResult run_norms(const ExperimentConfig& cfg, const RunContext& ctx);
DriverResult run_solve(const ExperimentConfig& cfg, const RunContext& ctx);

/// Dispatches on cfg.experiment and writes manifest.txt (and manifest.json with ctx.json).
DriverResult run_experiment(const ExperimentConfig& cfg, const RunContext& ctx);

const std::vector<std::string>& experiment_names();

}  // namespace nullcone

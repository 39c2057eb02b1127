#include "nullcone/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "nullcone/error.hpp"

namespace nullcone {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ParseError(key + ": not a number: '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ParseError(key + ": not an integer: '" + v + "'");
  return x;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter number(T ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    if constexpr (std::is_floating_point_v<T>)
      c.*field = to_double(k, v);
    else
      c.*field = static_cast<T>(to_int(k, v));
  };
}

Setter text(std::string ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string&, const std::string& v) { c.*field = v; };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"run.experiment", text(&ExperimentConfig::experiment)},
      {"run.K", number(&ExperimentConfig::K)},
      {"run.trials", number(&ExperimentConfig::trials)},
      {"run.seed", number(&ExperimentConfig::seed)},
      {"run.out_dir", text(&ExperimentConfig::out_dir)},
      {"run.cell_sweeps", number(&ExperimentConfig::cell_sweeps)},
      {"grid.N",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.N.clear();
         for (const auto& s : split_list(v)) c.N.push_back(static_cast<int>(to_int(k, s)));
       }},
      {"grid.ratio", number(&ExperimentConfig::ratio)},
      {"grid.v_uniform", number(&ExperimentConfig::v_uniform)},
      {"grid.v_min", number(&ExperimentConfig::v_min)},
      {"grid.eps", number(&ExperimentConfig::eps)},
      {"grid.lmax", number(&ExperimentConfig::lmax)},
      {"data.delta", number(&ExperimentConfig::delta)},
      {"data.delta_prime", number(&ExperimentConfig::delta_prime)},
      {"data.amplitude", number(&ExperimentConfig::amplitude)},
      {"data.profile", text(&ExperimentConfig::profile)},
      {"data.file", text(&ExperimentConfig::data_file)},
      {"nonlinearity.C0", number(&ExperimentConfig::C0)},
      {"nonlinearity.C1",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const auto items = split_list(v);
         if (items.size() != 4) throw ParseError(k + ": expected 4 comma-separated values");
         for (int i = 0; i < 4; ++i) c.C1[i] = to_double(k, items[i]);
       }},
      {"energy.V_lo", number(&ExperimentConfig::V_lo)},
      {"energy.V_hi", number(&ExperimentConfig::V_hi)},
      {"energy.region_u", number(&ExperimentConfig::region_u)},
      {"energy.region_v", number(&ExperimentConfig::region_v)},
      {"mkg.U_star", number(&ExperimentConfig::U_star)},
      {"mkg.u_max", number(&ExperimentConfig::u_max)},
      {"mkg.family", text(&ExperimentConfig::family)},
      {"mkg.tail_limit", number(&ExperimentConfig::tail_limit)},
  };
  return table;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ParseError("invalid configuration: " + what);
}

}  // namespace

std::optional<double> ExperimentConfig::assertion(const std::string& key) const {
  const auto it = assertions.find(key);
  if (it == assertions.end()) return std::nullopt;
  return it->second;
}

void ExperimentConfig::validate() const {
  check(!experiment.empty(), "run.experiment is required");
  check(!N.empty(), "grid.N is empty");
  for (int n : N) check(n >= 8 && n <= 4096, "grid.N entries must lie in [8, 4096]");
  check(ratio > 0 && ratio < 1, "grid.ratio must lie in (0, 1)");
  check(v_uniform > 0 && v_uniform < 1, "grid.v_uniform must lie in (0, 1)");
  check(v_min > 0 && v_min < v_uniform, "grid.v_min must lie in (0, v_uniform)");
  check(eps > 0 && eps < 1, "grid.eps must lie in (0, 1)");
  check(lmax >= 0 && lmax <= 24, "grid.lmax must lie in [0, 24]");
  check(delta > 0 && delta < 1, "data.delta must lie in (0, 1)");
  check(delta_prime > 0 && delta_prime <= 2, "data.delta_prime must lie in (0, 2]");
  check(profile == "symmetric" || profile == "l1" || profile == "smooth", "data.profile must be symmetric, l1 or smooth");
  check(K >= 1 && K <= 100, "run.K must lie in [1, 100]");
  check(trials >= 1 && trials <= 10000000, "run.trials must lie in [1, 1e7]");
  check(cell_sweeps >= 1 && cell_sweeps <= 50, "run.cell_sweeps must lie in [1, 50]");
  check(V_lo > 0 && V_lo < V_hi && V_hi <= 1, "energy.V_lo < energy.V_hi <= 1 required");
  check(region_u > 0 && region_v > 0 && region_v <= 1, "energy.region_u and energy.region_v must be positive");
  check(U_star > 0, "mkg.U_star must be positive");
  check(u_max >= U_star + 10, "mkg.u_max must be at least U_star + 10");
  check(family == "finite" || family == "borderline", "mkg.family must be finite or borderline");
  check(tail_limit > 0 && tail_limit < 1, "mkg.tail_limit must lie in (0, 1)");
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key.rfind("assert.", 0) == 0) {
    cfg.assertions[key.substr(7)] = to_double(key, value);
  } else {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ParseError("unknown key '" + key + "'");
    it->second(cfg, key, value);
  }
  cfg.raw[key] = value;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto cut = line.find_first_of("#;");
    line = trim(cut == std::string::npos ? line : line.substr(0, cut));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ParseError(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(where + "missing key");
    if (section.empty()) throw ParseError(where + "key '" + key + "' outside any section");
    try {
      set_config_value(cfg, section + "." + key, value);
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    any = true;
  }
  if (!any) throw ParseError(origin + ": no settings found");
  if (cfg.experiment.empty()) throw ParseError(origin + ": run.experiment is required");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string config_echo(const ExperimentConfig& c) {
  std::ostringstream o;
  o.precision(17);
  auto list = [](const auto& v) {
    std::ostringstream s;
    s.precision(17);
    for (size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  o << "run.experiment = " << c.experiment << "\n"
    << "run.K = " << c.K << "\nrun.trials = " << c.trials << "\nrun.seed = " << c.seed
    << "\nrun.cell_sweeps = " << c.cell_sweeps << "\n"
    << "grid.N = " << list(c.N) << "\ngrid.ratio = " << c.ratio << "\ngrid.v_uniform = " << c.v_uniform
    << "\ngrid.v_min = " << c.v_min << "\ngrid.eps = " << c.eps << "\ngrid.lmax = " << c.lmax << "\n"
    << "data.delta = " << c.delta << "\ndata.delta_prime = " << c.delta_prime << "\ndata.amplitude = " << c.amplitude
    << "\ndata.profile = " << c.profile << "\ndata.file = " << c.data_file << "\n"
    << "nonlinearity.C0 = " << c.C0 << "\nnonlinearity.C1 = " << list(c.C1) << "\n"
    << "energy.V_lo = " << c.V_lo << "\nenergy.V_hi = " << c.V_hi << "\nenergy.region_u = " << c.region_u
    << "\nenergy.region_v = " << c.region_v << "\n"
    << "mkg.U_star = " << c.U_star << "\nmkg.u_max = " << c.u_max << "\nmkg.family = " << c.family
    << "\nmkg.tail_limit = " << c.tail_limit << "\n";
  for (const auto& [k, v] : c.assertions) o << "assert." << k << " = " << v << "\n";
  return o.str();
}

}  // namespace nullcone

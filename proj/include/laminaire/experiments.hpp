#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "laminaire/approx.hpp"

namespace lam {

// Sectioned plain-text configuration: `key = value` lines, `[section]`
// headers prefix keys as "section.key", '#' starts a comment. Unknown keys
// are ignored so one file can drive several experiments.
struct ExperimentConfig {
  std::string experiment;
  std::map<std::string, std::string> values;
  std::string out_dir = ".";
  std::uint64_t seed = 1;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_num(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const;
};

ExperimentConfig parse_config(std::istream& is);

struct Criterion {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=", "<", ">", "=="
  bool pass = false;
};

Criterion make_criterion(const std::string& name, double value, const std::string& relation,
                         double threshold);

struct ExperimentResult {
  std::string experiment;
  std::map<std::string, std::string> parameters;
  std::vector<Criterion> criteria;
  std::vector<std::pair<std::string, std::string>> files;  // (filename, bytes)

  bool all_pass() const;
};

// Dispatches by cfg.experiment; throws lam::error for an unknown name or
// invalid parameters. The seed feeds only Monte Carlo samplers, so a fixed
// config and seed give byte-identical files.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::vector<std::string> experiment_names();

// Model fixtures addressable by name; the summary builds one and prints its
// basic invariants.
std::vector<std::string> fixture_names();
std::string fixture_summary(const std::string& name);

// Writes result.files plus summary.json under out_dir (created if missing).
void emit_report(const ExperimentResult& result, const std::string& out_dir);

}  // namespace lam

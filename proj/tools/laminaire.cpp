// Command line driver: runs named experiments from sectioned config files and
// prints fixture summaries. Exit code 0 = all criteria pass, 1 = a criterion
// failed or an experiment error, 2 = usage problems.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "laminaire/experiments.hpp"
#include "laminaire/io.hpp"

namespace {

int cmd_run(const std::string& config_path, int threads, const std::string& out_override,
            long seed_override, bool have_seed) {
  std::ifstream is(config_path);
  if (!is) {
    std::cerr << "laminaire: cannot open config file: " << config_path << "\n";
    return 2;
  }
  lam::ExperimentConfig cfg;
  try {
    cfg = lam::parse_config(is);
  } catch (const std::exception& e) {
    std::cerr << "laminaire: " << e.what() << "\n";
    return 2;
  }
  if (cfg.experiment.empty()) {
    std::cerr << "laminaire: config selects no experiment (set `experiment = <name>`)\n";
    return 2;
  }
  if (threads > 0) lam::g_thread_cap = threads;
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (have_seed) cfg.seed = static_cast<std::uint64_t>(seed_override);

  lam::ExperimentResult result;
  try {
    result = lam::run_experiment(cfg);
    lam::emit_report(result, cfg.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "laminaire: " << e.what() << "\n";
    return 1;
  }
  std::cout << "experiment " << result.experiment << " (seed " << cfg.seed << ")\n";
  for (const auto& c : result.criteria) {
    std::cout << "  [" << (c.pass ? "pass" : "FAIL") << "] " << c.name << " = "
              << lam::format_double(c.value) << ' ' << c.relation << ' '
              << lam::format_double(c.threshold) << "\n";
  }
  std::cout << (result.all_pass() ? "all criteria pass" : "criteria FAILED") << ", report in "
            << cfg.out_dir << "\n";
  return result.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"laminar current intersection experiments"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  int threads = 0;
  long seed_override = 0;
  app.add_option("--threads", threads, "worker thread cap (0 = hardware default)");
  app.add_option("--out", out_override, "output directory override");
  CLI::Option* seed_opt = app.add_option("--seed", seed_override, "RNG seed override");

  CLI::App* run = app.add_subcommand("run", "run the experiment selected by a config file");
  run->add_option("config", config_path, "config file path")->required();

  CLI::App* list = app.add_subcommand("list-experiments", "list known experiment names");
  CLI::App* fixtures = app.add_subcommand("fixtures", "print model fixture summaries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    for (const auto& n : lam::experiment_names()) std::cout << n << "\n";
    return 0;
  }
  if (fixtures->parsed()) {
    try {
      for (const auto& n : lam::fixture_names()) std::cout << lam::fixture_summary(n);
    } catch (const std::exception& e) {
      std::cerr << "laminaire: " << e.what() << "\n";
      return 1;
    }
    return 0;
  }
  return cmd_run(config_path, threads, out_override, seed_override, seed_opt->count() > 0);
}

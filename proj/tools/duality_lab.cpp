// Command-line runner: `run CONFIG [--out DIR] [--tol-scale S] [--jobs N] [--seed K]`
// and `validate CONFIG`.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "duality_lab/experiment.hpp"

namespace {

int report_errors(const dlab::ParseResult& parsed) {
  for (const auto& e : parsed.errors) std::cerr << "config error: " << e << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional utility-maximization duality lab"};
  app.require_subcommand(1);

  std::string run_config;
  std::string out_dir;
  double tol_scale = 1.0;
  int jobs = 1;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Run the checks listed in a config and write report.json / report.csv");
  run->add_option("config", run_config, "Experiment config (JSON)")->required();
  auto* out_opt = run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--tol-scale", tol_scale, "Multiply every tolerance by S")->check(CLI::PositiveNumber);
  run->add_option("--jobs", jobs, "Worker threads; never changes results")->check(CLI::Range(1, 1024));
  auto* seed_opt = run->add_option("--seed", seed, "Sampling seed (overrides the config)");

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "Parse and check a config without solving");
  validate->add_option("config", validate_config, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*validate) {
    const dlab::ParseResult parsed = dlab::load_config(validate_config);
    if (!parsed.config) return report_errors(parsed);
    std::cout << "ok\n";
    return 0;
  }

  const dlab::ParseResult parsed = dlab::load_config(run_config);
  if (!parsed.config) return report_errors(parsed);
  dlab::RunOptions opts;
  if (*out_opt) opts.out_dir = out_dir;
  if (*seed_opt) opts.seed = seed;
  opts.tol_scale = tol_scale;
  opts.jobs = jobs;
  const dlab::RunOutcome outcome = dlab::run_experiment(*parsed.config, opts);
  for (const auto& m : outcome.messages) std::cerr << m << "\n";
  std::cout << (outcome.exit_code == 0 ? "PASS" : "FAIL") << " " << outcome.json_path << "\n";
  return outcome.exit_code;
}

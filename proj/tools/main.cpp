#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> max_rounds;
  std::optional<double> threshold;
  std::optional<std::string> out;
  bool force = false;
  std::string trace;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Override the run seed");
  cmd->add_option("--max-rounds", o.max_rounds, "Override stop.max_rounds");
  cmd->add_option("--threshold", o.threshold, "Override stop.diameter_threshold");
  cmd->add_option("--out", o.out, "Override output.dir");
  cmd->add_flag("--force", o.force, "Run without validating the schedule");
}

wbc::cli::ScenarioConfig load(const Options& o) {
  auto cfg = wbc::cli::load_scenario(o.config);
  wbc::cli::apply_overrides(cfg, {o.seed, o.max_rounds, o.threshold, o.out, o.force});
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein barycentric consensus simulator"};
  app.require_subcommand(1);
  Options o;
  auto* run = app.add_subcommand("run", "Run a scenario and write its trace");
  auto* validate = app.add_subcommand("validate", "Validate the scenario's schedule");
  auto* check = app.add_subcommand("check", "Re-verify a stored trace");
  auto* gen = app.add_subcommand("generate-schedule", "Write the scenario's schedule explicitly");
  auto* version = app.add_subcommand("version", "Print the version");
  for (auto* cmd : {run, validate, check, gen}) add_common(cmd, o);
  check->add_option("--trace", o.trace, "Trace CSV (default: <out>/trace.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : wbc::cli::kExitError;
  }

  if (version->parsed()) {
    std::cout << "wbc " << WBC_VERSION << '\n';
    return 0;
  }
  try {
    const auto cfg = load(o);
    if (run->parsed()) return wbc::cli::cmd_run(cfg, std::cout, std::cerr);
    if (validate->parsed()) return wbc::cli::cmd_validate(cfg, std::cout, std::cerr);
    if (gen->parsed()) return wbc::cli::cmd_generate_schedule(cfg, std::cout, std::cerr);
    const std::string trace =
        o.trace.empty() ? cfg.out_dir + "/" + wbc::cli::kTraceFile : o.trace;
    return wbc::cli::cmd_check(cfg, trace, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return wbc::cli::kExitError;
  }
}

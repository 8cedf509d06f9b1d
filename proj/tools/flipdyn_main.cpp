// Command-line front end: loads a config, runs the selected solver (and
// optionally the Monte Carlo simulator), and writes CSV/JSON results for
// external plotting.  Exit codes: 0 success, 2 config error, 3 solver or
// simulation error, 4 I/O error.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "flipdyn/results_io.hpp"

namespace {

struct CommandFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  bool strict = false;
  bool permissive = false;
  bool out_given = false;
};

void add_common_options(CLI::App* cmd, CommandFlags& flags,
                        bool with_simulation_flags) {
  cmd->add_option("--config", flags.config_path, "Path to the experiment config (JSON)")
      ->required();
  cmd->add_option("--out", flags.out_dir,
                  "Output directory (default: config, then $" +
                      std::string(flipdyn::kOutputDirEnvVar) + ", then ./out)");
  auto* strict_flag = cmd->add_flag(
      "--strict", flags.strict,
      "Abort when the value recursion leaves its validity regime (default)");
  cmd->add_flag("--permissive", flags.permissive,
                "Flag invalid steps instead of aborting")
      ->excludes(strict_flag);
  if (with_simulation_flags) {
    cmd->add_option("--seed", flags.seed, "Override the simulation seed");
    cmd->add_option("--runs", flags.runs, "Override the number of rollouts");
  }
}

flipdyn::RunOverrides to_overrides(const CommandFlags& flags) {
  flipdyn::RunOverrides overrides;
  if (flags.out_given) overrides.output_dir = flags.out_dir;
  if (flags.seed) overrides.seed = flags.seed;
  if (flags.runs) overrides.runs = flags.runs;
  if (flags.strict) overrides.strict = true;
  if (flags.permissive) overrides.strict = false;
  return overrides;
}

void print_bundle(const flipdyn::ResultsBundle& bundle) {
  std::cout << "wrote " << bundle.files.size() << " files to "
            << bundle.output_dir << "\n";
  for (const auto& [key, value] : bundle.summary) {
    char buffer[48];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    std::cout << "  " << key << " = " << buffer << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "flipdyn: solver and simulator for two-player resource-takeover games "
      "over discrete-time dynamics"};
  app.require_subcommand(1);

  CommandFlags flags;
  CLI::App* solve_scalar = app.add_subcommand(
      "solve-scalar", "Run the scalar value recursion and export its tables");
  add_common_options(solve_scalar, flags, false);
  CLI::App* solve_nd = app.add_subcommand(
      "solve-nd", "Run the matrix value recursion and export its tables");
  add_common_options(solve_nd, flags, false);
  CLI::App* solve_finite = app.add_subcommand(
      "solve-finite",
      "Solve a finite-state takeover game by backward induction");
  add_common_options(solve_finite, flags, false);
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Solve, then run the seeded Monte Carlo rollouts");
  add_common_options(simulate, flags, true);

  std::string experiment_out;
  CLI::App* experiment = app.add_subcommand(
      "experiment",
      "Write the built-in reference experiment bundle (bounded/unbounded "
      "scalar and double-integrator runs plus the recovery comparison)");
  experiment->add_option("--out", experiment_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  flags.out_given = solve_scalar->count("--out") || solve_nd->count("--out") ||
                    solve_finite->count("--out") || simulate->count("--out");

  try {
    if (app.got_subcommand(experiment)) {
      std::string out = experiment_out;
      if (out.empty()) {
        flipdyn::ExperimentConfig empty;
        out = flipdyn::resolve_output_dir(empty, {});
      }
      print_bundle(flipdyn::run_reference_experiments(out));
      return 0;
    }

    flipdyn::ExperimentConfig config = flipdyn::load_config(flags.config_path);
    flipdyn::RunOverrides overrides = to_overrides(flags);
    const auto expect_mode = [&](flipdyn::Mode mode) {
      if (config.mode != mode)
        throw flipdyn::ConfigError("config mode is '" +
                                   flipdyn::mode_name(config.mode) +
                                   "' but this subcommand expects '" +
                                   flipdyn::mode_name(mode) + "'");
    };
    if (app.got_subcommand(solve_scalar)) {
      expect_mode(flipdyn::Mode::kScalar);
      overrides.solve_only = true;
    } else if (app.got_subcommand(solve_nd)) {
      expect_mode(flipdyn::Mode::kNd);
      overrides.solve_only = true;
    } else if (app.got_subcommand(solve_finite)) {
      expect_mode(flipdyn::Mode::kFinite);
      overrides.solve_only = true;
    } else if (app.got_subcommand(simulate)) {
      overrides.simulate_required = true;
    }
    print_bundle(flipdyn::run_experiment(config, overrides));
    return 0;
  } catch (const flipdyn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const flipdyn::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const flipdyn::Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}

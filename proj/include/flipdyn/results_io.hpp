#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flipdyn/config.hpp"
#include "flipdyn/finite_solver.hpp"
#include "flipdyn/lq_nd.hpp"
#include "flipdyn/lq_scalar.hpp"
#include "flipdyn/simulator.hpp"

namespace flipdyn {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Environment variable naming the fallback output directory, consulted
// when neither the command line nor the config names one.
inline constexpr const char* kOutputDirEnvVar = "FLIPDYN_OUT_DIR";

// Overrides applied on top of a loaded config (command-line flags).
struct RunOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<bool> strict;
  bool solve_only = false;      // skip the simulation block
  bool simulate_required = false;  // fail when no simulation block exists
};

// What a run produced: logical name -> path written, plus headline numbers.
struct ResultsBundle {
  std::string output_dir;
  std::map<std::string, std::string> files;
  std::map<std::string, double> summary;
};

// All writers are atomic: content goes to a temporary file in the target
// directory which is then renamed over the destination, so readers never
// observe partial files.  Numbers are printed with 17 significant digits
// (round-trip exact for doubles); no timestamps or machine identifiers are
// embedded, so a rerun over the same config is byte identical.

// Columns: k,p0,p1,ptilde,valid.  Row k < horizon carries the denominator
// used at step k (ptilde[k+1]); the terminal row prints 0 there.
void write_scalar_coefficients_csv(const std::string& path,
                                   const ScalarValueCoeffs& coeffs);

// Columns: k,beta_star,gamma_star — both players' act probabilities while
// the defender holds the plant (their complements apply after a takeover).
// Invalid steps print nan.
void write_scalar_policies_csv(const std::string& path,
                               const ScalarValueCoeffs& coeffs,
                               const ScalarLQParams& params);

// Columns: k,min_eig_P0,min_eig_P1,min_eig_Pcheck,valid (terminal row
// prints 0 for the Pcheck column).
void write_nd_csv(const std::string& path, const NdValueMatrices& matrices);

// Columns: k,state,v0,v1 over all steps and states.
void write_finite_values_csv(const std::string& path, const ValueTables& tables);

// Columns: k,state,def_act_0,adv_act_0,def_act_1,adv_act_1 — act
// probabilities for both takeover states.
void write_finite_policies_csv(const std::string& path,
                               const ValueTables& tables);

// Columns: k,mean_alpha,mean_beta,mean_gamma.  mean_beta/mean_gamma are
// the across-run averages of the consulted act probabilities (zero on the
// terminal row, where no policy is consulted).
void write_simulation_csv(const std::string& path, const AggregateStats& stats);

// Columns: run,k,alpha,a0,a1,stage_cost,x_0..x_{n-1}.
void write_trajectories_csv(const std::string& path,
                            const std::vector<TrajectoryRecord>& trajectories,
                            int dim);

// Runs one configured experiment end to end and writes its outputs
// (solver CSVs, optional simulation CSVs, and a results.json with version,
// RNG id, config hash, and headline numbers) into the resolved output
// directory.
ResultsBundle run_experiment(const ExperimentConfig& config,
                             const RunOverrides& overrides = {});

// Output-directory resolution: overrides > config > environment > "out".
std::string resolve_output_dir(const ExperimentConfig& config,
                               const RunOverrides& overrides);

// Writes the built-in reference experiment bundle (bounded/unbounded
// scalar and double-integrator instances plus the takeover-recovery
// comparison) into subdirectories of `output_dir`, materializing each
// sub-config as config.json alongside its outputs.
ResultsBundle run_reference_experiments(const std::string& output_dir);

}  // namespace flipdyn

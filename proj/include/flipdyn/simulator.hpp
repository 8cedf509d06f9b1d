#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "flipdyn/core_model.hpp"
#include "flipdyn/finite_solver.hpp"
#include "flipdyn/lq_nd.hpp"
#include "flipdyn/lq_scalar.hpp"

namespace flipdyn {

// Identifier recorded with simulation results so output consumers know the
// exact bit-level random stream contract.
inline constexpr const char* kRngId = "splitmix64-v1";

// Minimal counter-based generator with a fixed, portable bit stream: the
// same seed yields the same draws on every platform and build.  Used
// instead of <random> distributions, whose streams the standard leaves
// implementation defined.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  // Decorrelated per-run stream: run index r hashes into a distinct state.
  static SplitMix64 substream(std::uint64_t seed, std::uint64_t run);

  std::uint64_t next();

  // Uniform draw in [0, 1) with 53-bit resolution.
  double next_unit();

  // One uniform draw compared against p; always consumes exactly one draw
  // so downstream streams stay aligned across policy changes.
  bool bernoulli(double p) { return next_unit() < p; }

 private:
  static std::uint64_t scramble(std::uint64_t z);
  std::uint64_t state_;
};

// Both players' mixed strategies at a query point.  first = defender,
// second = adversary.
using PolicyProvider = std::function<std::pair<MixedPolicy2, MixedPolicy2>(
    int k, const Eigen::VectorXd& x, FlipState alpha)>;

// Adapters turning each solver's output into a policy provider.
PolicyProvider make_policy_provider(const ValueTables& tables,
                                    const StateEnumeration& enumeration);
PolicyProvider make_policy_provider(std::shared_ptr<const TreePolicy> policy);
PolicyProvider make_policy_provider(const ScalarValueCoeffs& coeffs,
                                    const ScalarLQParams& params);
PolicyProvider make_policy_provider(const NdValueMatrices& matrices,
                                    const NdLQParams& params);

// Overrides the takeover state right after step `step`'s actions resolve.
struct ForcedEvent {
  int step = 0;
  FlipState alpha = FlipState::kAdversary;
};

struct RolloutConfig {
  std::uint64_t seed = 0;
  int runs = 1;
  std::vector<ForcedEvent> forced_events;
};

// One step of a recorded trajectory.  `x` is the state the step started
// from; `alpha` is the takeover state after both actions (and any forced
// event) resolved, i.e. the one that selects the map producing the next
// state.  The final record (k = horizon) carries the terminal state and
// value with both action flags false.
struct TrajectoryStep {
  int k = 0;
  Eigen::VectorXd x;
  FlipState alpha = FlipState::kDefender;
  bool defender_acted = false;
  bool adversary_acted = false;
  double stage_cost = 0.0;
};

struct TrajectoryRecord {
  std::vector<TrajectoryStep> steps;          // horizon + 1 entries
  std::vector<double> defender_act_prob;      // consulted policies, per step
  std::vector<double> adversary_act_prob;
  double total_cost = 0.0;
};

// Simulates one run.  Per step: consult both policies at (k, x, alpha),
// draw the defender's action then the adversary's (one uniform each),
// update the takeover state (forced events override it), charge the
// action-charged stage cost at x, then advance the state under the map the
// new takeover state selects.  The terminal value for the final takeover
// state is appended as the last record, so total_cost estimates the value
// function.
TrajectoryRecord rollout(const GameSpec& spec, const TerminalCondition& terminal,
                         const PolicyProvider& policies,
                         const RolloutConfig& config, int run_index);

struct AggregateStats {
  int runs = 0;
  std::vector<double> mean_alpha;          // horizon + 1 entries
  std::vector<double> mean_defender_act;   // horizon entries
  std::vector<double> mean_adversary_act;  // horizon entries
  double mean_cost = 0.0;
  double cost_std_error = 0.0;
};

// Runs `config.runs` rollouts sequentially (run order fixes the summation
// order, so results are bit-stable for a given seed).  When `trajectories`
// is non-null every record is appended to it.
AggregateStats monte_carlo(const GameSpec& spec,
                           const TerminalCondition& terminal,
                           const PolicyProvider& policies,
                           const RolloutConfig& config,
                           std::vector<TrajectoryRecord>* trajectories = nullptr);

// Exact expected total cost under the given policies, by enumerating every
// joint action realization (weighted by the policies' probabilities) over
// the full game tree.  Zero-probability branches are pruned.  Only
// horizons up to 12 are accepted.
double expected_cost_exhaustive(const GameSpec& spec,
                                const TerminalCondition& terminal,
                                const PolicyProvider& policies);

}  // namespace flipdyn

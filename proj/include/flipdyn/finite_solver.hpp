#pragma once

#include <array>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flipdyn/core_model.hpp"
#include "flipdyn/matrix_game.hpp"

namespace flipdyn {

// A finite set of physical states closed under both closed-loop maps.
// States are identified by index; lookup matches exact floating-point bit
// patterns, which is reliable here because every reachable state is
// produced by composing the very same maps.
class StateEnumeration {
 public:
  // Builds the enumeration and the successor table from step-0 maps.
  // Throws EnumerationError when a successor is not in the list.
  static StateEnumeration build(std::vector<Eigen::VectorXd> states,
                                const ClosedLoopDynamics& dynamics);

  const std::vector<Eigen::VectorXd>& states() const { return states_; }
  int size() const { return static_cast<int>(states_.size()); }

  // Successor index under the map selected by `alpha`.
  int successor(int state, FlipState alpha) const {
    return successors_[static_cast<size_t>(state)][to_index(alpha)];
  }

  // Index of an exact bit-pattern match, or -1.
  int index_of(const Eigen::VectorXd& x) const;

 private:
  std::vector<Eigen::VectorXd> states_;
  std::vector<std::array<int, 2>> successors_;
  std::unordered_map<std::string, int> index_;
};

// Stage-game policies for one (step, state, takeover-state) cell.
struct PolicyCell {
  MixedPolicy2 defender;
  MixedPolicy2 adversary;
  SolutionKind kind = SolutionKind::kPure;
  // True when the closed-form interior branch applied (the continuation
  // gap exceeded both action costs strictly).
  bool interior_mixed = false;
};

// Backward-induction output over an enumerated state set.
struct ValueTables {
  int horizon = 0;
  // values[k][state], k = 0..horizon.
  std::vector<std::vector<double>> v0, v1;
  // policy[k][state][takeover state], k = 0..horizon-1.
  std::vector<std::vector<std::array<PolicyCell, 2>>> policy;
};

// The pair of 2x2 stage games seen from either takeover state, given the
// continuation values at the two successors and the action costs at x.
std::pair<PayoffMatrix2, PayoffMatrix2> build_stage_games(double v0_next_f0,
                                                          double v1_next_f1,
                                                          double d, double a);

// Same, evaluating dynamics and costs at (x, k).  The continuation
// accessors may throw EnumerationError for unknown states.
std::pair<PayoffMatrix2, PayoffMatrix2> build_payoff_matrices(
    const Eigen::VectorXd& x, int k, const ScalarField& v0_next,
    const ScalarField& v1_next, const CostModel& costs,
    const ClosedLoopDynamics& dynamics);

// Strict continuation-gap test selecting the interior mixed branch:
// the adversary-held continuation must exceed the defender-held one by
// more than the larger action cost.
bool mixed_condition_holds(double v0_next_f0, double v1_next_f1, double d,
                           double a);

// Exact finite-horizon solve over an enumerated state set.  Values use the
// closed-form update on the interior mixed branch and a full 2x2 solve
// otherwise; policies are stored for both takeover states at every cell.
// DegenerateGameError is annotated with the failing (step, state).
ValueTables backward_induction(const StateEnumeration& enumeration,
                               const CostModel& costs, int horizon,
                               const TerminalCondition& terminal);

// Policies recorded along a reachable-tree evaluation, keyed by the exact
// bit pattern of the state at each step.
class TreePolicy {
 public:
  const PolicyCell& at(int k, const Eigen::VectorXd& x, FlipState alpha) const;
  bool contains(int k, const Eigen::VectorXd& x) const;

 private:
  friend struct TreeEvaluator;
  std::unordered_map<std::string, std::array<PolicyCell, 2>> cells_;
};

struct TreeEvaluation {
  double v0 = 0.0;  // value at (x0, defender-held)
  double v1 = 0.0;  // value at (x0, adversary-held)
  std::shared_ptr<TreePolicy> policy;
};

// Evaluates both values at spec.x0 by expanding the reachable tree of the
// two closed-loop maps, memoizing on exact state bit patterns.  Intended
// for short horizons; throws HorizonCapError beyond `horizon_cap`.
TreeEvaluation evaluate_value_tree(const GameSpec& spec,
                                   const TerminalCondition& terminal,
                                   int horizon_cap = 16);

}  // namespace flipdyn

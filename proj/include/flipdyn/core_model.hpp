#pragma once

#include <Eigen/Core>
#include <functional>
#include <utility>

#include "flipdyn/errors.hpp"

namespace flipdyn {

// Which player currently controls the plant: the takeover state flips
// between the two players as they seize and reclaim the resource.
enum class FlipState : int { kDefender = 0, kAdversary = 1 };

inline int to_index(FlipState alpha) { return static_cast<int>(alpha); }

FlipState flip_state_from_index(int index);

// One simultaneous move: `defender` / `adversary` are true when the
// respective player spends its action this step.
struct ActionPair {
  bool defender = false;
  bool adversary = false;
};

// Takeover-state update under a simultaneous action pair: the state is
// unchanged when both or neither player acts, and goes to the single
// acting player otherwise.
FlipState flip_transition(FlipState alpha, const ActionPair& actions);

// A two-point mixed strategy over {idle, act}.  The two entries always sum
// to one exactly; construction enforces p_act in [0, 1] (tolerating only
// rounding-level overshoot, which is clamped).
struct MixedPolicy2 {
  MixedPolicy2() : p_act(0.0), p_idle(1.0) {}
  explicit MixedPolicy2(double act_probability);

  double p_act;
  double p_idle;
};

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

// Per-step closed-loop maps for both takeover states.  `defender` is the
// map applied while the defender controls the plant, `adversary` while the
// adversary does.  Maps may depend on the step index k.
class ClosedLoopDynamics {
 public:
  using Map = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;

  ClosedLoopDynamics() : dim_(0) {}
  ClosedLoopDynamics(int dim, Map defender, Map adversary);

  // Wraps step-independent maps.
  static ClosedLoopDynamics time_invariant(
      int dim, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> defender,
      std::function<Eigen::VectorXd(const Eigen::VectorXd&)> adversary);

  // Linear maps x -> M x, one matrix per takeover state.
  static ClosedLoopDynamics linear(const Eigen::MatrixXd& defender_loop,
                                   const Eigen::MatrixXd& adversary_loop);

  // Applies the map selected by `alpha` at step k, checking dimensions.
  Eigen::VectorXd step(const Eigen::VectorXd& x, FlipState alpha, int k) const;

  int dim() const { return dim_; }

 private:
  int dim_;
  Map defender_;
  Map adversary_;
};

// Stage-cost model.  All three fields must be nonnegative for every state.
// `defender_action` is charged to the defender when it acts;
// `adversary_action` is credited to the adversary (subtracted from the
// defender's objective) when the adversary acts.
struct CostModel {
  ScalarField running;          // g(x)
  ScalarField defender_action;  // d(x)
  ScalarField adversary_action; // a(x)

  // x^T Q x / x^T D x / x^T A x quadratic costs.
  static CostModel quadratic(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& D,
                             const Eigen::MatrixXd& A);
  // Scalar quadratic costs g x^2 / d x^2 / a x^2.
  static CostModel scalar_quadratic(double g, double d, double a);
};

// Advances the physical state one step under the map selected by the
// (already updated) takeover state.
Eigen::VectorXd step_state(const Eigen::VectorXd& x, FlipState alpha,
                           const ClosedLoopDynamics& dynamics, int k);

// Action-charged stage cost: g(x) + d(x) 1{defender acts} - a(x) 1{adversary
// acts}.  Acting is paid for by the move itself, not by who ends up in
// control afterwards.
double stage_cost(const Eigen::VectorXd& x, const ActionPair& actions,
                  const CostModel& costs);

// Terminal values for both takeover states.
class TerminalCondition {
 public:
  TerminalCondition() = default;
  TerminalCondition(ScalarField defender_value, ScalarField adversary_value);

  // Generic terminal rule built from the cost model: the defender-held value
  // is g(x); the adversary-held value adds the larger action cost plus a
  // takeover premium mu (scaled by 1 + g(x)) so that ending in the
  // adversary's hands is never cheaper.
  static TerminalCondition from_costs(const CostModel& costs, double mu);

  // Quadratic terminal values x^T P0 x / x^T P1 x.
  static TerminalCondition quadratic(const Eigen::MatrixXd& P0,
                                     const Eigen::MatrixXd& P1);
  static TerminalCondition scalar_quadratic(double p0, double p1);

  double value(const Eigen::VectorXd& x, FlipState alpha) const;

 private:
  ScalarField defender_value_;
  ScalarField adversary_value_;
};

// A complete game instance: dynamics, costs, horizon, and start state.
struct GameSpec {
  ClosedLoopDynamics dynamics;
  CostModel costs;
  int horizon = 1;
  Eigen::VectorXd x0;
  FlipState alpha0 = FlipState::kDefender;

  // Throws ConfigError / DimensionError on an unusable instance.
  void validate() const;
};

}  // namespace flipdyn

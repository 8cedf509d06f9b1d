#include "flipdyn/core_model.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace flipdyn {

FlipState flip_state_from_index(int index) {
  if (index != 0 && index != 1)
    throw ConfigError("takeover state index must be 0 or 1, got " +
                      std::to_string(index));
  return static_cast<FlipState>(index);
}

FlipState flip_transition(FlipState alpha, const ActionPair& actions) {
  if (actions.defender == actions.adversary) return alpha;  // cancel or no-op
  return actions.adversary ? FlipState::kAdversary : FlipState::kDefender;
}

MixedPolicy2::MixedPolicy2(double act_probability) {
  constexpr double kSlack = 1e-9;
  if (!(act_probability >= -kSlack && act_probability <= 1.0 + kSlack))
    throw ConfigError("mixed policy probability out of [0, 1]: " +
                      std::to_string(act_probability));
  p_act = std::min(1.0, std::max(0.0, act_probability));
  p_idle = 1.0 - p_act;
}

ClosedLoopDynamics::ClosedLoopDynamics(int dim, Map defender, Map adversary)
    : dim_(dim), defender_(std::move(defender)), adversary_(std::move(adversary)) {
  if (dim <= 0) throw ConfigError("state dimension must be positive");
  if (!defender_ || !adversary_)
    throw ConfigError("both closed-loop maps must be set");
}

ClosedLoopDynamics ClosedLoopDynamics::time_invariant(
    int dim, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> defender,
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> adversary) {
  return ClosedLoopDynamics(
      dim,
      [f = std::move(defender)](const Eigen::VectorXd& x, int) { return f(x); },
      [f = std::move(adversary)](const Eigen::VectorXd& x, int) { return f(x); });
}

ClosedLoopDynamics ClosedLoopDynamics::linear(
    const Eigen::MatrixXd& defender_loop, const Eigen::MatrixXd& adversary_loop) {
  if (defender_loop.rows() != defender_loop.cols() ||
      adversary_loop.rows() != adversary_loop.cols() ||
      defender_loop.rows() != adversary_loop.rows())
    throw DimensionError("closed-loop matrices must be square and same size");
  const int n = static_cast<int>(defender_loop.rows());
  return ClosedLoopDynamics(
      n, [m = defender_loop](const Eigen::VectorXd& x, int) { return m * x; },
      [m = adversary_loop](const Eigen::VectorXd& x, int) { return m * x; });
}

Eigen::VectorXd ClosedLoopDynamics::step(const Eigen::VectorXd& x,
                                         FlipState alpha, int k) const {
  if (x.size() != dim_)
    throw DimensionError("state has size " + std::to_string(x.size()) +
                         ", dynamics expect " + std::to_string(dim_));
  Eigen::VectorXd next =
      alpha == FlipState::kDefender ? defender_(x, k) : adversary_(x, k);
  if (next.size() != dim_)
    throw DimensionError("closed-loop map changed the state dimension");
  return next;
}

CostModel CostModel::quadratic(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& D,
                               const Eigen::MatrixXd& A) {
  if (Q.rows() != Q.cols() || D.rows() != D.cols() || A.rows() != A.cols() ||
      Q.rows() != D.rows() || Q.rows() != A.rows())
    throw DimensionError("cost matrices must be square and same size");
  CostModel costs;
  costs.running = [Q](const Eigen::VectorXd& x) { return x.dot(Q * x); };
  costs.defender_action = [D](const Eigen::VectorXd& x) { return x.dot(D * x); };
  costs.adversary_action = [A](const Eigen::VectorXd& x) { return x.dot(A * x); };
  return costs;
}

CostModel CostModel::scalar_quadratic(double g, double d, double a) {
  if (g < 0.0 || d < 0.0 || a < 0.0)
    throw ConfigError("cost coefficients must be nonnegative");
  CostModel costs;
  costs.running = [g](const Eigen::VectorXd& x) { return g * x[0] * x[0]; };
  costs.defender_action = [d](const Eigen::VectorXd& x) { return d * x[0] * x[0]; };
  costs.adversary_action = [a](const Eigen::VectorXd& x) { return a * x[0] * x[0]; };
  return costs;
}

Eigen::VectorXd step_state(const Eigen::VectorXd& x, FlipState alpha,
                           const ClosedLoopDynamics& dynamics, int k) {
  return dynamics.step(x, alpha, k);
}

double stage_cost(const Eigen::VectorXd& x, const ActionPair& actions,
                  const CostModel& costs) {
  double cost = costs.running(x);
  if (actions.defender) cost += costs.defender_action(x);
  if (actions.adversary) cost -= costs.adversary_action(x);
  return cost;
}

TerminalCondition::TerminalCondition(ScalarField defender_value,
                                     ScalarField adversary_value)
    : defender_value_(std::move(defender_value)),
      adversary_value_(std::move(adversary_value)) {
  if (!defender_value_ || !adversary_value_)
    throw ConfigError("both terminal value functions must be set");
}

TerminalCondition TerminalCondition::from_costs(const CostModel& costs,
                                                double mu) {
  if (mu < 0.0) throw ConfigError("takeover premium mu must be nonnegative");
  ScalarField v0 = costs.running;
  ScalarField v1 = [costs, mu](const Eigen::VectorXd& x) {
    const double g = costs.running(x);
    return g + std::max(costs.adversary_action(x), costs.defender_action(x)) +
           mu * (1.0 + g);
  };
  return TerminalCondition(std::move(v0), std::move(v1));
}

TerminalCondition TerminalCondition::quadratic(const Eigen::MatrixXd& P0,
                                               const Eigen::MatrixXd& P1) {
  if (P0.rows() != P0.cols() || P1.rows() != P1.cols() || P0.rows() != P1.rows())
    throw DimensionError("terminal matrices must be square and same size");
  return TerminalCondition(
      [P0](const Eigen::VectorXd& x) { return x.dot(P0 * x); },
      [P1](const Eigen::VectorXd& x) { return x.dot(P1 * x); });
}

TerminalCondition TerminalCondition::scalar_quadratic(double p0, double p1) {
  return TerminalCondition(
      [p0](const Eigen::VectorXd& x) { return p0 * x[0] * x[0]; },
      [p1](const Eigen::VectorXd& x) { return p1 * x[0] * x[0]; });
}

double TerminalCondition::value(const Eigen::VectorXd& x, FlipState alpha) const {
  if (!defender_value_) throw ConfigError("terminal condition is unset");
  return alpha == FlipState::kDefender ? defender_value_(x) : adversary_value_(x);
}

void GameSpec::validate() const {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (dynamics.dim() == 0) throw ConfigError("dynamics are unset");
  if (x0.size() != dynamics.dim())
    throw DimensionError("initial state has size " + std::to_string(x0.size()) +
                         ", dynamics expect " + std::to_string(dynamics.dim()));
  if (!x0.allFinite()) throw ConfigError("initial state has non-finite entries");
  if (!costs.running || !costs.defender_action || !costs.adversary_action)
    throw ConfigError("cost model is incomplete");
}

}  // namespace flipdyn

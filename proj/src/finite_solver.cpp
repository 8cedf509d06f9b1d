#include "flipdyn/finite_solver.hpp"

#include <algorithm>
#include <cstring>
#include <string>

namespace flipdyn {

namespace {

// Exact bit-pattern key for a state vector.
std::string state_key(const Eigen::VectorXd& x) {
  return std::string(reinterpret_cast<const char*>(x.data()),
                     static_cast<size_t>(x.size()) * sizeof(double));
}

std::string step_state_key(int k, const Eigen::VectorXd& x) {
  std::string key(reinterpret_cast<const char*>(&k), sizeof(k));
  key += state_key(x);
  return key;
}

struct StageSolution {
  double v0, v1;
  PolicyCell policy0, policy1;
};

// One dynamic-programming cell: stage cost g plus the saddle values of the
// two stage games.  On the interior mixed branch the values come from the
// closed-form update and the policies from the equalizing formulas; the
// fallback is a full 2x2 solve (pure saddle preferred).
StageSolution solve_stage(double g, double d, double a, double v0_next,
                          double v1_next) {
  const auto [xi0, xi1] = build_stage_games(v0_next, v1_next, d, a);
  StageSolution out;
  if (mixed_condition_holds(v0_next, v1_next, d, a)) {
    const double gap = v1_next - v0_next;
    const double correction = d * a / gap;
    out.v0 = g + d + v0_next - correction;
    out.v1 = g - a + v1_next + correction;
    const GameSolution2 sol0 = solve_mixed_formula(xi0);
    const GameSolution2 sol1 = solve_mixed_formula(xi1);
    out.policy0 = PolicyCell{sol0.row, sol0.col, SolutionKind::kMixed, true};
    out.policy1 = PolicyCell{sol1.row, sol1.col, SolutionKind::kMixed, true};
  } else {
    const GameSolution2 sol0 = solve(xi0);
    const GameSolution2 sol1 = solve(xi1);
    out.v0 = g + sol0.value;
    out.v1 = g + sol1.value;
    out.policy0 = PolicyCell{sol0.row, sol0.col, sol0.kind, false};
    out.policy1 = PolicyCell{sol1.row, sol1.col, sol1.kind, false};
  }
  return out;
}

}  // namespace

StateEnumeration StateEnumeration::build(std::vector<Eigen::VectorXd> states,
                                         const ClosedLoopDynamics& dynamics) {
  if (states.empty()) throw ConfigError("state enumeration is empty");
  StateEnumeration out;
  out.states_ = std::move(states);
  for (int i = 0; i < out.size(); ++i) {
    auto [it, inserted] = out.index_.emplace(state_key(out.states_[i]), i);
    if (!inserted)
      throw ConfigError("duplicate state at index " + std::to_string(i));
  }
  out.successors_.resize(out.states_.size());
  for (int i = 0; i < out.size(); ++i) {
    for (const FlipState alpha : {FlipState::kDefender, FlipState::kAdversary}) {
      const Eigen::VectorXd next = dynamics.step(out.states_[i], alpha, 0);
      const int j = out.index_of(next);
      if (j < 0)
        throw EnumerationError(
            "enumeration is not closed: successor of state " +
            std::to_string(i) + " under map " + std::to_string(to_index(alpha)) +
            " is not in the list");
      out.successors_[static_cast<size_t>(i)][to_index(alpha)] = j;
    }
  }
  return out;
}

int StateEnumeration::index_of(const Eigen::VectorXd& x) const {
  const auto it = index_.find(state_key(x));
  return it == index_.end() ? -1 : it->second;
}

std::pair<PayoffMatrix2, PayoffMatrix2> build_stage_games(double v0_next_f0,
                                                          double v1_next_f1,
                                                          double d, double a) {
  PayoffMatrix2 xi0;
  xi0.m11 = v0_next_f0;
  xi0.m12 = v1_next_f1 - a;
  xi0.m21 = v0_next_f0 + d;
  xi0.m22 = v0_next_f0 + d - a;
  PayoffMatrix2 xi1;
  xi1.m11 = v1_next_f1;
  xi1.m12 = v1_next_f1 - a;
  xi1.m21 = v0_next_f0 + d;
  xi1.m22 = v1_next_f1 + d - a;
  return {xi0, xi1};
}

std::pair<PayoffMatrix2, PayoffMatrix2> build_payoff_matrices(
    const Eigen::VectorXd& x, int k, const ScalarField& v0_next,
    const ScalarField& v1_next, const CostModel& costs,
    const ClosedLoopDynamics& dynamics) {
  const Eigen::VectorXd x_def = dynamics.step(x, FlipState::kDefender, k);
  const Eigen::VectorXd x_adv = dynamics.step(x, FlipState::kAdversary, k);
  return build_stage_games(v0_next(x_def), v1_next(x_adv),
                           costs.defender_action(x), costs.adversary_action(x));
}

bool mixed_condition_holds(double v0_next_f0, double v1_next_f1, double d,
                           double a) {
  return v1_next_f1 > v0_next_f0 + std::max(d, a);
}

ValueTables backward_induction(const StateEnumeration& enumeration,
                               const CostModel& costs, int horizon,
                               const TerminalCondition& terminal) {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  const int n = enumeration.size();
  ValueTables tables;
  tables.horizon = horizon;
  tables.v0.assign(static_cast<size_t>(horizon) + 1,
                   std::vector<double>(static_cast<size_t>(n)));
  tables.v1 = tables.v0;
  tables.policy.assign(
      static_cast<size_t>(horizon),
      std::vector<std::array<PolicyCell, 2>>(static_cast<size_t>(n)));

  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd& x = enumeration.states()[i];
    tables.v0[static_cast<size_t>(horizon)][static_cast<size_t>(i)] =
        terminal.value(x, FlipState::kDefender);
    tables.v1[static_cast<size_t>(horizon)][static_cast<size_t>(i)] =
        terminal.value(x, FlipState::kAdversary);
  }

  for (int k = horizon - 1; k >= 0; --k) {
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd& x = enumeration.states()[i];
      const int succ0 = enumeration.successor(i, FlipState::kDefender);
      const int succ1 = enumeration.successor(i, FlipState::kAdversary);
      const double v0_next =
          tables.v0[static_cast<size_t>(k) + 1][static_cast<size_t>(succ0)];
      const double v1_next =
          tables.v1[static_cast<size_t>(k) + 1][static_cast<size_t>(succ1)];
      try {
        const StageSolution stage =
            solve_stage(costs.running(x), costs.defender_action(x),
                        costs.adversary_action(x), v0_next, v1_next);
        tables.v0[static_cast<size_t>(k)][static_cast<size_t>(i)] = stage.v0;
        tables.v1[static_cast<size_t>(k)][static_cast<size_t>(i)] = stage.v1;
        tables.policy[static_cast<size_t>(k)][static_cast<size_t>(i)] = {
            stage.policy0, stage.policy1};
      } catch (const DegenerateGameError& e) {
        throw DegenerateGameError(std::string(e.what()) + " (step " +
                                      std::to_string(k) + ", state " +
                                      std::to_string(i) + ")",
                                  k, i);
      }
    }
  }
  return tables;
}

const PolicyCell& TreePolicy::at(int k, const Eigen::VectorXd& x,
                                 FlipState alpha) const {
  const auto it = cells_.find(step_state_key(k, x));
  if (it == cells_.end())
    throw EnumerationError("no recorded policy at step " + std::to_string(k) +
                           " for the queried state (off the evaluated tree)");
  return it->second[to_index(alpha)];
}

bool TreePolicy::contains(int k, const Eigen::VectorXd& x) const {
  return cells_.count(step_state_key(k, x)) > 0;
}

struct TreeEvaluator {
  const GameSpec& spec;
  const TerminalCondition& terminal;
  TreePolicy* policy;
  std::unordered_map<std::string, std::pair<double, double>> memo;

  std::pair<double, double> values(int k, const Eigen::VectorXd& x) {
    if (k == spec.horizon)
      return {terminal.value(x, FlipState::kDefender),
              terminal.value(x, FlipState::kAdversary)};
    const std::string key = step_state_key(k, x);
    if (const auto it = memo.find(key); it != memo.end()) return it->second;

    const Eigen::VectorXd x_def = spec.dynamics.step(x, FlipState::kDefender, k);
    const Eigen::VectorXd x_adv = spec.dynamics.step(x, FlipState::kAdversary, k);
    const double v0_next = values(k + 1, x_def).first;
    const double v1_next = values(k + 1, x_adv).second;
    StageSolution stage;
    try {
      stage = solve_stage(spec.costs.running(x), spec.costs.defender_action(x),
                          spec.costs.adversary_action(x), v0_next, v1_next);
    } catch (const DegenerateGameError& e) {
      throw DegenerateGameError(
          std::string(e.what()) + " (step " + std::to_string(k) + ")", k);
    }
    policy->cells_[key] = {stage.policy0, stage.policy1};
    const std::pair<double, double> out{stage.v0, stage.v1};
    memo.emplace(std::move(key), out);
    return out;
  }
};

TreeEvaluation evaluate_value_tree(const GameSpec& spec,
                                   const TerminalCondition& terminal,
                                   int horizon_cap) {
  spec.validate();
  if (spec.horizon > horizon_cap)
    throw HorizonCapError("horizon " + std::to_string(spec.horizon) +
                          " exceeds the tree-evaluation cap " +
                          std::to_string(horizon_cap));
  TreeEvaluation out;
  out.policy = std::make_shared<TreePolicy>();
  TreeEvaluator evaluator{spec, terminal, out.policy.get(), {}};
  const auto [v0, v1] = evaluator.values(0, spec.x0);
  out.v0 = v0;
  out.v1 = v1;
  return out;
}

}  // namespace flipdyn

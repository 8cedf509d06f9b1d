#include <doctest.h>

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "flipdyn/core_model.hpp"
#include "flipdyn/errors.hpp"
#include "flipdyn/finite_solver.hpp"
#include "flipdyn/lq_scalar.hpp"
#include "flipdyn/matrix_game.hpp"

using namespace flipdyn;

namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

// A finite game on integer-coded 1-D states with table-lookup successor
// maps, plus per-state cost values resolved through the same lookup.
struct TableGame {
  std::vector<Eigen::VectorXd> states;
  std::vector<int> succ0, succ1;
  std::vector<double> g, d, a;
  double mu = 1.0;

  static TableGame random(std::mt19937_64& rng, int n_states) {
    std::uniform_int_distribution<int> pick(0, n_states - 1);
    std::uniform_real_distribution<double> g_dist(0.2, 2.0);
    std::uniform_real_distribution<double> act_dist(0.0, 1.5);
    std::uniform_real_distribution<double> mu_dist(0.5, 2.0);
    TableGame game;
    for (int i = 0; i < n_states; ++i) {
      game.states.push_back(vec1(static_cast<double>(i)));
      game.succ0.push_back(pick(rng));
      game.succ1.push_back(pick(rng));
      game.g.push_back(g_dist(rng));
      game.d.push_back(act_dist(rng));
      game.a.push_back(act_dist(rng));
    }
    game.mu = mu_dist(rng);
    return game;
  }

  int index(const Eigen::VectorXd& x) const {
    return static_cast<int>(x[0]);
  }

  ClosedLoopDynamics dynamics() const {
    auto* self = this;
    return ClosedLoopDynamics::time_invariant(
        1,
        [self](const Eigen::VectorXd& x) {
          return self->states[static_cast<size_t>(
              self->succ0[static_cast<size_t>(self->index(x))])];
        },
        [self](const Eigen::VectorXd& x) {
          return self->states[static_cast<size_t>(
              self->succ1[static_cast<size_t>(self->index(x))])];
        });
  }

  CostModel costs() const {
    auto* self = this;
    CostModel model;
    model.running = [self](const Eigen::VectorXd& x) {
      return self->g[static_cast<size_t>(self->index(x))];
    };
    model.defender_action = [self](const Eigen::VectorXd& x) {
      return self->d[static_cast<size_t>(self->index(x))];
    };
    model.adversary_action = [self](const Eigen::VectorXd& x) {
      return self->a[static_cast<size_t>(self->index(x))];
    };
    return model;
  }
};

// Test-local expectation of the realized cost under the solved policies,
// written as a plain recursive sum over joint actions with no memoization.
double plain_expectation(const TableGame& game, const ValueTables& tables,
                         const TerminalCondition& terminal,
                         const CostModel& costs, int k, int state, int alpha) {
  if (k == tables.horizon)
    return terminal.value(game.states[static_cast<size_t>(state)],
                          flip_state_from_index(alpha));
  const PolicyCell& cell =
      tables.policy[static_cast<size_t>(k)][static_cast<size_t>(state)]
                   [static_cast<size_t>(alpha)];
  const Eigen::VectorXd& x = game.states[static_cast<size_t>(state)];
  double total = 0.0;
  for (int a0 = 0; a0 < 2; ++a0) {
    for (int a1 = 0; a1 < 2; ++a1) {
      const double w = (a0 ? cell.defender.p_act : cell.defender.p_idle) *
                       (a1 ? cell.adversary.p_act : cell.adversary.p_idle);
      if (w == 0.0) continue;
      const int next_alpha =
          a0 == a1 ? alpha : (a1 ? 1 : 0);
      const int next_state = next_alpha == 0
                                 ? game.succ0[static_cast<size_t>(state)]
                                 : game.succ1[static_cast<size_t>(state)];
      const double cost = costs.running(x) +
                          (a0 ? costs.defender_action(x) : 0.0) -
                          (a1 ? costs.adversary_action(x) : 0.0);
      total += w * (cost + plain_expectation(game, tables, terminal, costs,
                                             k + 1, next_state, next_alpha));
    }
  }
  return total;
}

}  // namespace

TEST_SUITE("finite_solver") {

TEST_CASE("stage games assemble the four action-charged continuations") {
  SUBCASE("zero continuations leave only the action charges") {
    const auto [xi0, xi1] = build_stage_games(0.0, 0.0, 1.0, 2.0);
    CHECK(xi0.m11 == 0.0);
    CHECK(xi0.m12 == -2.0);
    CHECK(xi0.m21 == 1.0);
    CHECK(xi0.m22 == -1.0);
    CHECK(xi1.m11 == 0.0);
    CHECK(xi1.m12 == -2.0);
    CHECK(xi1.m21 == 1.0);
    CHECK(xi1.m22 == -1.0);
  }
  SUBCASE("distinct continuations separate the two matrices") {
    const auto [xi0, xi1] = build_stage_games(1.0, 3.0, 0.5, 0.9);
    CHECK(xi0.m11 == 1.0);
    CHECK(xi0.m12 == doctest::Approx(2.1).epsilon(1e-15));
    CHECK(xi0.m21 == 1.5);
    CHECK(xi0.m22 == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(xi1.m11 == 3.0);
    CHECK(xi1.m12 == doctest::Approx(2.1).epsilon(1e-15));
    CHECK(xi1.m21 == 1.5);
    CHECK(xi1.m22 == doctest::Approx(2.6).epsilon(1e-15));
  }
}

TEST_CASE("interior mixed condition requires a strict continuation gap") {
  CHECK(mixed_condition_holds(1.0, 3.0, 0.5, 0.9));
  CHECK(!mixed_condition_holds(1.0, 1.9, 0.5, 0.9));  // boundary is excluded
  CHECK(!mixed_condition_holds(1.0, 1.89, 0.5, 0.9));
  // With free actions the condition reduces to a bare value gap.
  CHECK(mixed_condition_holds(1.0, 1.0 + 1e-9, 0.0, 0.0));
  CHECK(!mixed_condition_holds(1.0, 1.0, 0.0, 0.0));
}

TEST_CASE("single-state one-step game settles on mutual idling") {
  // One self-looping state, zero terminal, g=1, d=1, a=2.  The stage game
  // under either owner is [[0,-2],[1,-1]]: idling is dominant for the
  // defender, and the adversary will not pay to act, so the value is the
  // bare running cost.
  const std::vector<Eigen::VectorXd> states{vec1(0.0)};
  const auto self_loop = [](const Eigen::VectorXd& x) { return x; };
  const ClosedLoopDynamics dyn =
      ClosedLoopDynamics::time_invariant(1, self_loop, self_loop);
  const StateEnumeration enumeration = StateEnumeration::build(states, dyn);
  CostModel costs;
  costs.running = [](const Eigen::VectorXd&) { return 1.0; };
  costs.defender_action = [](const Eigen::VectorXd&) { return 1.0; };
  costs.adversary_action = [](const Eigen::VectorXd&) { return 2.0; };
  const TerminalCondition zero = TerminalCondition::scalar_quadratic(0.0, 0.0);

  const ValueTables tables = backward_induction(enumeration, costs, 1, zero);
  CHECK(tables.v0[0][0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tables.v1[0][0] == doctest::Approx(1.0).epsilon(1e-15));
  const PolicyCell& cell = tables.policy[0][0][0];
  CHECK(cell.kind == SolutionKind::kPure);
  CHECK(cell.defender.p_act == 0.0);
  CHECK(cell.adversary.p_act == 0.0);
  CHECK(!cell.interior_mixed);
}

TEST_CASE("free actions and identical maps reduce to a running-cost sum") {
  // With d = a = 0 and f0 = f1 the takeover state is irrelevant; the value
  // is the running cost accumulated along the single trajectory plus the
  // terminal value.
  const int n = 3;
  std::vector<Eigen::VectorXd> states;
  for (int i = 0; i < n; ++i) states.push_back(vec1(static_cast<double>(i)));
  const auto cycle = [states](const Eigen::VectorXd& x) {
    return states[(static_cast<size_t>(x[0]) + 1) % 3];
  };
  const ClosedLoopDynamics dyn =
      ClosedLoopDynamics::time_invariant(1, cycle, cycle);
  const StateEnumeration enumeration = StateEnumeration::build(states, dyn);
  CostModel costs;
  costs.running = [](const Eigen::VectorXd& x) { return 1.0 + x[0]; };
  costs.defender_action = [](const Eigen::VectorXd&) { return 0.0; };
  costs.adversary_action = [](const Eigen::VectorXd&) { return 0.0; };
  const TerminalCondition zero = TerminalCondition::scalar_quadratic(0.0, 0.0);

  const ValueTables tables = backward_induction(enumeration, costs, 3, zero);
  // Start at state 0: costs 1, 2, 3 along the cycle.
  CHECK(tables.v0[0][0] == doctest::Approx(6.0).epsilon(1e-12));
  // Start at state 1: costs 2, 3, 1.
  CHECK(tables.v0[0][1] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("values agree with an unmemoized expectation under the policies") {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> n_dist(1, 4);
  std::uniform_int_distribution<int> l_dist(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const TableGame game = TableGame::random(rng, n_dist(rng));
    const int horizon = l_dist(rng);
    const ClosedLoopDynamics dyn = game.dynamics();
    const CostModel costs = game.costs();
    const StateEnumeration enumeration =
        StateEnumeration::build(game.states, dyn);
    const TerminalCondition terminal =
        TerminalCondition::from_costs(costs, game.mu);
    const ValueTables tables =
        backward_induction(enumeration, costs, horizon, terminal);
    for (int s = 0; s < enumeration.size(); ++s) {
      for (int alpha = 0; alpha < 2; ++alpha) {
        const double expected = plain_expectation(game, tables, terminal,
                                                  costs, 0, s, alpha);
        const double value = alpha == 0
                                 ? tables.v0[0][static_cast<size_t>(s)]
                                 : tables.v1[0][static_cast<size_t>(s)];
        CHECK(value == doctest::Approx(expected).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("each stage value restates the solved 2x2 game") {
  std::mt19937_64 rng(515);
  for (int trial = 0; trial < 20; ++trial) {
    const TableGame game = TableGame::random(rng, 3);
    const int horizon = 4;
    const ClosedLoopDynamics dyn = game.dynamics();
    const CostModel costs = game.costs();
    const StateEnumeration enumeration =
        StateEnumeration::build(game.states, dyn);
    const TerminalCondition terminal =
        TerminalCondition::from_costs(costs, game.mu);
    const ValueTables tables =
        backward_induction(enumeration, costs, horizon, terminal);
    for (int k = 0; k < horizon; ++k) {
      for (int s = 0; s < enumeration.size(); ++s) {
        const int s0 = enumeration.successor(s, FlipState::kDefender);
        const int s1 = enumeration.successor(s, FlipState::kAdversary);
        const double v0_next = tables.v0[static_cast<size_t>(k) + 1]
                                        [static_cast<size_t>(s0)];
        const double v1_next = tables.v1[static_cast<size_t>(k) + 1]
                                        [static_cast<size_t>(s1)];
        const double d = game.d[static_cast<size_t>(s)];
        const double a = game.a[static_cast<size_t>(s)];
        const double g = game.g[static_cast<size_t>(s)];
        const auto [xi0, xi1] = build_stage_games(v0_next, v1_next, d, a);
        CHECK(tables.v0[static_cast<size_t>(k)][static_cast<size_t>(s)] - g ==
              doctest::Approx(solve(xi0).value).epsilon(1e-12));
        CHECK(tables.v1[static_cast<size_t>(k)][static_cast<size_t>(s)] - g ==
              doctest::Approx(solve(xi1).value).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("interior mixed cells satisfy the value-coupling identity") {
  // On the interior branch V0 + V1 = 2g + d - a + V0' + V1': the correction
  // terms cancel between the two owners.
  std::mt19937_64 rng(616);
  int mixed_cells = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const TableGame game = TableGame::random(rng, 4);
    const int horizon = 4;
    const ClosedLoopDynamics dyn = game.dynamics();
    const CostModel costs = game.costs();
    const StateEnumeration enumeration =
        StateEnumeration::build(game.states, dyn);
    const TerminalCondition terminal =
        TerminalCondition::from_costs(costs, game.mu);
    const ValueTables tables =
        backward_induction(enumeration, costs, horizon, terminal);
    for (int k = 0; k < horizon; ++k) {
      for (int s = 0; s < enumeration.size(); ++s) {
        const PolicyCell& cell =
            tables.policy[static_cast<size_t>(k)][static_cast<size_t>(s)][0];
        if (!cell.interior_mixed) continue;
        ++mixed_cells;
        const int s0 = enumeration.successor(s, FlipState::kDefender);
        const int s1 = enumeration.successor(s, FlipState::kAdversary);
        const double lhs =
            tables.v0[static_cast<size_t>(k)][static_cast<size_t>(s)] +
            tables.v1[static_cast<size_t>(k)][static_cast<size_t>(s)];
        const double rhs =
            2.0 * game.g[static_cast<size_t>(s)] +
            game.d[static_cast<size_t>(s)] - game.a[static_cast<size_t>(s)] +
            tables.v0[static_cast<size_t>(k) + 1][static_cast<size_t>(s0)] +
            tables.v1[static_cast<size_t>(k) + 1][static_cast<size_t>(s1)];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
      }
    }
  }
  CHECK(mixed_cells > 0);  // the property must not hold vacuously
}

TEST_CASE("state enumeration rejects open and duplicated state sets") {
  const auto shift = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, x[0] + 1.0);
  };
  const ClosedLoopDynamics dyn =
      ClosedLoopDynamics::time_invariant(1, shift, shift);
  CHECK_THROWS_AS(
      StateEnumeration::build({vec1(0.0), vec1(1.0)}, dyn),
      EnumerationError);

  const auto self_loop = [](const Eigen::VectorXd& x) { return x; };
  const ClosedLoopDynamics loop_dyn =
      ClosedLoopDynamics::time_invariant(1, self_loop, self_loop);
  CHECK_THROWS_AS(StateEnumeration::build({vec1(1.0), vec1(1.0)}, loop_dyn),
                  ConfigError);

  const StateEnumeration enumeration =
      StateEnumeration::build({vec1(1.0), vec1(2.0)}, loop_dyn);
  CHECK(enumeration.size() == 2);
  CHECK(enumeration.index_of(vec1(2.0)) == 1);
  CHECK(enumeration.index_of(vec1(3.0)) == -1);
  CHECK(enumeration.successor(0, FlipState::kDefender) == 0);
}

TEST_CASE("tree evaluation matches the enumerated table on a closed set") {
  std::mt19937_64 rng(717);
  for (int trial = 0; trial < 10; ++trial) {
    const TableGame game = TableGame::random(rng, 4);
    const int horizon = 5;
    const ClosedLoopDynamics dyn = game.dynamics();
    const CostModel costs = game.costs();
    const StateEnumeration enumeration =
        StateEnumeration::build(game.states, dyn);
    const TerminalCondition terminal =
        TerminalCondition::from_costs(costs, game.mu);
    const ValueTables tables =
        backward_induction(enumeration, costs, horizon, terminal);

    GameSpec spec;
    spec.dynamics = dyn;
    spec.costs = costs;
    spec.horizon = horizon;
    spec.x0 = game.states[2];
    const TreeEvaluation tree = evaluate_value_tree(spec, terminal);
    CHECK(tree.v0 == doctest::Approx(tables.v0[0][2]).epsilon(1e-12));
    CHECK(tree.v1 == doctest::Approx(tables.v1[0][2]).epsilon(1e-12));
    CHECK(tree.policy->contains(0, spec.x0));
  }
}

TEST_CASE("tree evaluation reproduces the one-step scalar coefficients") {
  // Scalar loops 0.9 / 1.1 with g=1, d=0.5, a=0.9, mu=1 over one step: the
  // tree value at x0=1 must equal the scalar recursion's leading
  // coefficient, frozen here to its closed-form decimal.
  GameSpec spec;
  spec.dynamics = ClosedLoopDynamics::linear(Eigen::MatrixXd{{0.9}},
                                             Eigen::MatrixXd{{1.1}});
  spec.costs = CostModel::scalar_quadratic(1.0, 0.5, 0.9);
  spec.horizon = 1;
  spec.x0 = vec1(1.0);
  const TerminalCondition terminal =
      TerminalCondition::scalar_quadratic(1.0, 2.9);
  const TreeEvaluation tree = evaluate_value_tree(spec, terminal);
  CHECK(tree.v0 == doctest::Approx(2.1432715820674324).epsilon(1e-14));
  CHECK(tree.v1 == doctest::Approx(3.7757284179325681).epsilon(1e-14));

  spec.x0 = vec1(0.0);
  const TreeEvaluation at_origin = evaluate_value_tree(spec, terminal);
  CHECK(at_origin.v0 == 0.0);
}

TEST_CASE("tree evaluation enforces its horizon cap") {
  GameSpec spec;
  spec.dynamics = ClosedLoopDynamics::linear(Eigen::MatrixXd{{0.9}},
                                             Eigen::MatrixXd{{1.1}});
  spec.costs = CostModel::scalar_quadratic(1.0, 0.5, 0.9);
  spec.horizon = 17;
  spec.x0 = vec1(1.0);
  const TerminalCondition terminal =
      TerminalCondition::scalar_quadratic(1.0, 2.9);
  CHECK_THROWS_AS(evaluate_value_tree(spec, terminal), HorizonCapError);
  CHECK_NOTHROW(evaluate_value_tree(spec, terminal, 20));
}

TEST_CASE("tree policy lookups fail off the evaluated tree") {
  GameSpec spec;
  spec.dynamics = ClosedLoopDynamics::linear(Eigen::MatrixXd{{0.9}},
                                             Eigen::MatrixXd{{1.1}});
  spec.costs = CostModel::scalar_quadratic(1.0, 0.5, 0.9);
  spec.horizon = 2;
  spec.x0 = vec1(1.0);
  const TerminalCondition terminal =
      TerminalCondition::scalar_quadratic(1.0, 2.9);
  const TreeEvaluation tree = evaluate_value_tree(spec, terminal);
  CHECK(tree.policy->contains(0, vec1(1.0)));
  CHECK(!tree.policy->contains(0, vec1(5.0)));
  CHECK_THROWS_AS(tree.policy->at(0, vec1(5.0), FlipState::kDefender),
                  EnumerationError);
}

}  // TEST_SUITE

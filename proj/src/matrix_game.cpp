#include "flipdyn/matrix_game.hpp"

#include <cmath>
#include <string>

namespace flipdyn {

namespace {

std::string describe(const PayoffMatrix2& m) {
  return "[[" + std::to_string(m.m11) + ", " + std::to_string(m.m12) + "], [" +
         std::to_string(m.m21) + ", " + std::to_string(m.m22) + "]]";
}

}  // namespace

std::optional<PureSaddle> find_pure_saddle(const PayoffMatrix2& m) {
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double v = m.at(i, j);
      // The minimizer cannot improve within the column, the maximizer
      // cannot improve within the row.
      const bool col_min = v <= m.at(1 - i, j);
      const bool row_max = v >= m.at(i, 1 - j);
      if (col_min && row_max) return PureSaddle{i, j, v};
    }
  }
  return std::nullopt;
}

GameSolution2 solve_mixed_formula(const PayoffMatrix2& m) {
  const double delta = m.m11 - m.m12 + m.m22 - m.m21;
  const double scale = std::max(
      {1.0, std::abs(m.m11), std::abs(m.m12), std::abs(m.m21), std::abs(m.m22)});
  if (std::abs(delta) < 1e-12 * scale)
    throw DegenerateGameError("mixed-form denominator vanishes for " +
                              describe(m));
  GameSolution2 solution;
  solution.row = MixedPolicy2((m.m11 - m.m12) / delta);
  solution.col = MixedPolicy2((m.m11 - m.m21) / delta);
  solution.value = (m.m11 * m.m22 - m.m12 * m.m21) / delta;
  solution.kind = SolutionKind::kMixed;
  return solution;
}

GameSolution2 solve_mixed(const PayoffMatrix2& m) {
  if (find_pure_saddle(m))
    throw PureSaddleExistsError("matrix admits a pure saddle point: " +
                                describe(m));
  return solve_mixed_formula(m);
}

GameSolution2 solve(const PayoffMatrix2& m) {
  if (const auto saddle = find_pure_saddle(m)) {
    GameSolution2 solution;
    solution.row = MixedPolicy2(saddle->row == 1 ? 1.0 : 0.0);
    solution.col = MixedPolicy2(saddle->col == 1 ? 1.0 : 0.0);
    solution.value = saddle->value;
    solution.kind = SolutionKind::kPure;
    return solution;
  }
  return solve_mixed_formula(m);
}

}  // namespace flipdyn

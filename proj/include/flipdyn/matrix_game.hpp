#pragma once

#include <optional>

#include "flipdyn/core_model.hpp"

namespace flipdyn {

// A 2x2 zero-sum payoff matrix.  The row player minimizes, the column
// player maximizes.  Index 0 is the idle action and index 1 the takeover
// action, matching the stage games built from value recursions.
struct PayoffMatrix2 {
  double m11 = 0.0, m12 = 0.0;  // row 0
  double m21 = 0.0, m22 = 0.0;  // row 1

  double at(int row, int col) const {
    return row == 0 ? (col == 0 ? m11 : m12) : (col == 0 ? m21 : m22);
  }
};

struct PureSaddle {
  int row;  // 0 or 1
  int col;
  double value;
};

enum class SolutionKind { kPure, kMixed };

struct GameSolution2 {
  MixedPolicy2 row;  // minimizer's strategy; p_act is the weight on index 1
  MixedPolicy2 col;  // maximizer's strategy
  double value;
  SolutionKind kind;
};

// Finds a cell that is simultaneously the maximum of its row and the
// minimum of its column (a pure saddle under the minimizer-row convention,
// where max over columns of the per-column minima equals min over rows of
// the per-row maxima).  Entry comparisons are exact.  Ties break to the
// smallest row index, then the smallest column index.
std::optional<PureSaddle> find_pure_saddle(const PayoffMatrix2& m);

// Closed-form equalizing mixed solution.  Preconditions: no pure saddle
// exists (PureSaddleExistsError otherwise) and the denominator
// m11 - m12 + m22 - m21 is nonzero relative to the entry scale
// (DegenerateGameError otherwise).  All four probabilities land in [0, 1].
GameSolution2 solve_mixed(const PayoffMatrix2& m);

// Applies the equalizing formulas without the pure-saddle precondition.
// Intended for callers that already know an equalizing solution exists
// (possibly on the boundary of the simplex, where it coexists with a pure
// saddle).  Still raises DegenerateGameError on a vanishing denominator.
GameSolution2 solve_mixed_formula(const PayoffMatrix2& m);

// Full solve: the pure saddle when one exists, otherwise the mixed
// solution.  DegenerateGameError only when neither applies.
GameSolution2 solve(const PayoffMatrix2& m);

}  // namespace flipdyn

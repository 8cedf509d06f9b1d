#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "flipdyn/core_model.hpp"

namespace flipdyn {

// Scalar linear-quadratic takeover game: plant x' = F x with defender
// feedback u = -K x through channel B and adversary injection w = W x
// through channel E, quadratic costs g x^2 / d x^2 / a x^2, horizon L and
// terminal takeover premium mu.  Per-step sequences override the constant
// entries when non-empty (each must have exactly `horizon` entries).
struct ScalarLQParams {
  double F = 1.0;
  double B = 0.0;
  std::optional<double> E;  // adversary channel; defaults to B when unset
  double K = 0.0;
  double W = 0.0;

  double g = 1.0;  // running cost coefficient, > 0
  double d = 0.0;  // defender action cost coefficient, >= 0
  double a = 0.0;  // adversary action cost coefficient, >= 0
  double mu = 1.0; // terminal takeover premium, >= 0

  int horizon = 1;

  std::vector<double> F_seq, B_seq, E_seq, K_seq, W_seq;

  double F_at(int k) const { return F_seq.empty() ? F : F_seq[static_cast<size_t>(k)]; }
  double B_at(int k) const { return B_seq.empty() ? B : B_seq[static_cast<size_t>(k)]; }
  double K_at(int k) const { return K_seq.empty() ? K : K_seq[static_cast<size_t>(k)]; }
  double W_at(int k) const { return W_seq.empty() ? W : W_seq[static_cast<size_t>(k)]; }
  double E_at(int k) const {
    if (!E_seq.empty()) return E_seq[static_cast<size_t>(k)];
    return E ? *E : B_at(k);
  }

  double defender_loop(int k) const { return F_at(k) - B_at(k) * K_at(k); }
  double adversary_loop(int k) const { return F_at(k) + E_at(k) * W_at(k); }

  void validate() const;
};

// Quadratic value coefficients: V^0_k(x) = p0[k] x^2, V^1_k(x) = p1[k] x^2.
// ptilde[k+1] is the policy denominator used at step k (ptilde[0] is
// meaningless and left at zero).  valid[k] flags whether step k stayed in
// the regime where the mixed closed form is the saddle solution:
// ptilde[k+1] >= max(d, a) and p0[k] >= 0.  valid[horizon] is always 1.
struct ScalarValueCoeffs {
  int horizon = 0;
  std::vector<double> p0, p1, ptilde;
  std::vector<std::uint8_t> valid;

  bool all_valid() const;
};

// Backward value recursion.  Terminal: p0[L] = g, p1[L] = g + max(a, d) + mu.
// Step: ptilde = (F+EW)^2 p1[k+1] - (F-BK)^2 p0[k+1],
//       p0[k] = g + d + (F-BK)^2 p0[k+1] - d a / ptilde,
//       p1[k] = g - a + (F+EW)^2 p1[k+1] + d a / ptilde.
// In strict mode a validity failure raises ValidityError carrying the first
// failing step (the recursion runs backward, so the largest such k);
// otherwise the recursion continues and only flags the step.
ScalarValueCoeffs scalar_backward_recursion(const ScalarLQParams& params,
                                            bool strict = true);

// Stationary point of the bounded-case recursion (the coefficients the
// backward pass converges to when both loop gains are below one in
// magnitude).  Returns {p0, p1, ptilde}.  Requires constant parameters with
// |F-BK| < 1 and |F+EW| < 1.
struct ScalarFixedPoint {
  double p0, p1, ptilde;
};
ScalarFixedPoint scalar_recursion_fixed_point(const ScalarLQParams& params);

// Saddle-point policies at step k.  Both players mix between idle and act;
// the defender's act probability is (ptilde - a)/ptilde while it holds the
// plant and a/ptilde after a takeover; the adversary's act probability is
// d/ptilde while the defender holds the plant and (ptilde - d)/ptilde
// otherwise.  The policies are state independent.  Raises InvalidStepError
// at steps flagged invalid (or with a zero denominator).
std::pair<MixedPolicy2, MixedPolicy2> scalar_policy(
    const ScalarValueCoeffs& coeffs, const ScalarLQParams& params, int k,
    FlipState alpha);

// V^alpha_k(x) = p^alpha[k] x^2.
double scalar_value_at(const ScalarValueCoeffs& coeffs, double x, int k,
                       FlipState alpha);

// The same instance as a generic game (1-D linear dynamics plus quadratic
// costs), for cross-checking against tree evaluation and for simulation.
GameSpec to_game_spec(const ScalarLQParams& params, double x0,
                      FlipState alpha0 = FlipState::kDefender);

// Quadratic terminal condition matching the recursion's terminal row.
TerminalCondition scalar_terminal(const ScalarLQParams& params);

}  // namespace flipdyn

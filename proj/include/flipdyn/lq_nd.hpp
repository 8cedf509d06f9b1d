#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "flipdyn/core_model.hpp"

namespace flipdyn {

// n-dimensional linear-quadratic takeover game: plant x' = F x, defender
// feedback u = -K x through B, adversary injection w = W x through E
// (defaulting to B), quadratic costs x^T Q x / x^T D x / x^T A x, horizon L
// and terminal takeover premium mu.  Q, D, A must be symmetric positive
// definite.
struct NdLQParams {
  Eigen::MatrixXd F, B, K, W;
  std::optional<Eigen::MatrixXd> E;  // adversary channel; defaults to B
  Eigen::MatrixXd Q, D, A;
  double mu = 1.0;
  int horizon = 1;

  int dim() const { return static_cast<int>(F.rows()); }
  const Eigen::MatrixXd& attack_channel() const { return E ? *E : B; }
  Eigen::MatrixXd defender_loop() const { return F - B * K; }
  Eigen::MatrixXd adversary_loop() const { return F + attack_channel() * W; }

  void validate() const;
};

// Quadratic value matrices: V^0_k(x) = x^T P0[k] x, V^1_k(x) = x^T P1[k] x.
// Pcheck[k+1] is the policy-denominator matrix used at step k (Pcheck[0]
// is left empty).  valid[k] requires Pcheck[k+1] to dominate both A and D
// in the Loewner order (smallest eigenvalue of the difference >= -1e-10);
// valid[horizon] is always 1.  All stored matrices are symmetrized.
struct NdValueMatrices {
  int horizon = 0;
  std::vector<Eigen::MatrixXd> P0, P1, Pcheck;
  std::vector<std::uint8_t> valid;

  bool all_valid() const;
};

// Backward matrix recursion.
// Terminal: P0[L] = Q and P1[L] = Q + A + mu I when A dominates D,
// Q + D + mu I when D dominates A, and Q + max(eigmax(A), eigmax(D)) I
// + mu I when the two are Loewner-incomparable.
// Step (Wt = F + E W, Bt = F - B K):
//   Pcheck = Wt^T P1[k+1] Wt - Bt^T P0[k+1] Bt,
//   P0[k] = Q + D + Bt^T P0[k+1] Bt - D Pcheck^-1 A   (symmetrized),
//   P1[k] = Q - A + Wt^T P1[k+1] Wt + D Pcheck^-1 A   (symmetrized).
// Pcheck is inverted through its symmetric eigendecomposition; an
// eigenvalue magnitude below 1e-10 or a condition number above 1e12 raises
// SingularMatrixError (in either mode; the correction term is undefined).
// In strict mode a validity failure raises ValidityError with the first
// failing step; otherwise the step is flagged and the recursion continues.
NdValueMatrices nd_backward_recursion(const NdLQParams& params,
                                      bool strict = true);

// Saddle-point policies at (x, k).  With q_A = x^T A x, q_D = x^T D x and
// q = x^T Pcheck[k+1] x: while the defender holds the plant its act
// probability is 1 - q_A/q and the adversary's is q_D/q; after a takeover
// the defender acts with q_A/q and the adversary with 1 - q_D/q.
// Raises ZeroStateError at x = 0 and InvalidStepError at invalid steps.
std::pair<MixedPolicy2, MixedPolicy2> nd_policy(const NdValueMatrices& matrices,
                                                const NdLQParams& params,
                                                const Eigen::VectorXd& x, int k,
                                                FlipState alpha);

// One-step saddle values at x given next-step value matrices, computed
// from the pointwise stage game (exact, no matrix-form rounding):
//   v0 = x^T (Q + D + Bt^T P0' Bt) x - (x^T D x)(x^T A x)/(x^T Pcheck x),
//   v1 = x^T (Q - A + Wt^T P1' Wt) x + (x^T D x)(x^T A x)/(x^T Pcheck x).
// Raises DegenerateGameError when x^T Pcheck x vanishes.
std::pair<double, double> exact_one_step_values(const Eigen::VectorXd& x,
                                                const Eigen::MatrixXd& P0_next,
                                                const Eigen::MatrixXd& P1_next,
                                                const NdLQParams& params);

// Whether (x^T x)^2 <= (x^T P x)(x^T P^-1 x) + 1e-10 * max(1, rhs): the
// product-of-quadratic-forms lower bound that makes the matrix recursion a
// one-sided bound on the pointwise values.  P must be symmetric positive
// definite.
bool quadratic_form_product_bound_holds(const Eigen::MatrixXd& P,
                                        const Eigen::VectorXd& x);

// The instance as a generic game (linear dynamics, quadratic costs).
GameSpec to_game_spec(const NdLQParams& params, const Eigen::VectorXd& x0,
                      FlipState alpha0 = FlipState::kDefender);

// Quadratic terminal condition matching the recursion's terminal matrices.
TerminalCondition nd_terminal(const NdLQParams& params);

}  // namespace flipdyn

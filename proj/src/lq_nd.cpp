#include "flipdyn/lq_nd.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace flipdyn {

namespace {

void check_symmetric(const Eigen::MatrixXd& M, const char* name) {
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError(std::string(name) + " must be symmetric");
}

void check_positive_definite(const Eigen::MatrixXd& M, const char* name) {
  check_symmetric(M, name);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M,
                                                     Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw ConfigError(std::string(name) + " must be positive definite");
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& M) {
  return (0.5 * (M + M.transpose())).eval();
}

// Inverse through the symmetric eigendecomposition, with the conditioning
// guards the recursion relies on.
Eigen::MatrixXd symmetric_inverse(const Eigen::MatrixXd& M, int step) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  if (eig.info() != Eigen::Success)
    throw SingularMatrixError("eigendecomposition failed at step " +
                              std::to_string(step));
  const Eigen::VectorXd abs_eigs = eig.eigenvalues().cwiseAbs();
  const double min_abs = abs_eigs.minCoeff();
  const double max_abs = abs_eigs.maxCoeff();
  if (min_abs < 1e-10)
    throw SingularMatrixError(
        "policy denominator matrix is numerically singular at step " +
        std::to_string(step) + " (|eigenvalue| = " + std::to_string(min_abs) +
        ")");
  if (max_abs > 1e12 * min_abs)
    throw SingularMatrixError(
        "policy denominator matrix is ill conditioned at step " +
        std::to_string(step));
  return eig.eigenvectors() *
         eig.eigenvalues().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M,
                                                     Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double max_eigenvalue(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M,
                                                     Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

// X dominates Y in the Loewner order, up to eigenvalue slack 1e-10.
bool dominates(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  return min_eigenvalue(X - Y) >= -1e-10;
}

Eigen::MatrixXd terminal_adversary_matrix(const NdLQParams& params) {
  const int n = params.dim();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  if (dominates(params.A, params.D))
    return params.Q + params.A + params.mu * identity;
  if (dominates(params.D, params.A))
    return params.Q + params.D + params.mu * identity;
  const double top = std::max(max_eigenvalue(params.A), max_eigenvalue(params.D));
  return params.Q + top * identity + params.mu * identity;
}

}  // namespace

void NdLQParams::validate() const {
  const int n = dim();
  if (n < 1) throw ConfigError("state dimension must be at least 1");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (mu < 0.0) throw ConfigError("terminal premium mu must be nonnegative");
  if (F.cols() != n) throw DimensionError("F must be square");
  if (B.rows() != n) throw DimensionError("B must have as many rows as F");
  if (K.rows() != B.cols() || K.cols() != n)
    throw DimensionError("K must map states to defender inputs");
  const Eigen::MatrixXd& channel = attack_channel();
  if (channel.rows() != n)
    throw DimensionError("E must have as many rows as F");
  if (W.rows() != channel.cols() || W.cols() != n)
    throw DimensionError("W must map states to adversary inputs");
  if (Q.rows() != n || Q.cols() != n || D.rows() != n || D.cols() != n ||
      A.rows() != n || A.cols() != n)
    throw DimensionError("Q, D, A must match the state dimension");
  check_positive_definite(Q, "Q");
  check_positive_definite(D, "D");
  check_positive_definite(A, "A");
}

bool NdValueMatrices::all_valid() const {
  for (const std::uint8_t v : valid)
    if (!v) return false;
  return true;
}

NdValueMatrices nd_backward_recursion(const NdLQParams& params, bool strict) {
  params.validate();
  const int L = params.horizon;
  const Eigen::MatrixXd Bt = params.defender_loop();
  const Eigen::MatrixXd Wt = params.adversary_loop();

  NdValueMatrices out;
  out.horizon = L;
  out.P0.assign(static_cast<size_t>(L) + 1, Eigen::MatrixXd());
  out.P1 = out.P0;
  out.Pcheck.assign(static_cast<size_t>(L) + 1, Eigen::MatrixXd());
  out.valid.assign(static_cast<size_t>(L) + 1, 1);

  out.P0[static_cast<size_t>(L)] = params.Q;
  out.P1[static_cast<size_t>(L)] = terminal_adversary_matrix(params);

  for (int k = L - 1; k >= 0; --k) {
    const size_t kk = static_cast<size_t>(k);
    const Eigen::MatrixXd bt_term = Bt.transpose() * out.P0[kk + 1] * Bt;
    const Eigen::MatrixXd wt_term = Wt.transpose() * out.P1[kk + 1] * Wt;
    const Eigen::MatrixXd Pc = symmetrized(wt_term - bt_term);
    out.Pcheck[kk + 1] = Pc;

    const Eigen::MatrixXd Pc_inv = symmetric_inverse(Pc, k);
    const Eigen::MatrixXd correction = params.D * Pc_inv * params.A;
    out.P0[kk] =
        symmetrized(params.Q + params.D + bt_term - correction);
    out.P1[kk] =
        symmetrized(params.Q - params.A + wt_term + correction);

    const bool ok = dominates(Pc, params.A) && dominates(Pc, params.D);
    out.valid[kk] = ok ? 1 : 0;
    if (strict && !ok)
      throw ValidityError(
          "matrix recursion left its validity region at step " +
              std::to_string(k) +
          " (the policy denominator no longer dominates the action costs)",
          k);
  }
  return out;
}

std::pair<MixedPolicy2, MixedPolicy2> nd_policy(const NdValueMatrices& matrices,
                                                const NdLQParams& params,
                                                const Eigen::VectorXd& x, int k,
                                                FlipState alpha) {
  if (k < 0 || k >= matrices.horizon)
    throw ConfigError("policy step out of range: " + std::to_string(k));
  if (x.size() != params.dim())
    throw DimensionError("state size does not match the game dimension");
  if (x.squaredNorm() == 0.0)
    throw ZeroStateError("mixed policies are undefined at x = 0");
  if (!matrices.valid[static_cast<size_t>(k)])
    throw InvalidStepError("policies are undefined at invalid step " +
                           std::to_string(k));
  const Eigen::MatrixXd& Pc = matrices.Pcheck[static_cast<size_t>(k) + 1];
  const double q_check = x.dot(Pc * x);
  const double q_attack = x.dot(params.A * x);
  const double q_defend = x.dot(params.D * x);
  const double defender_idle = q_attack / q_check;
  const double adversary_act = q_defend / q_check;
  if (alpha == FlipState::kDefender)
    return {MixedPolicy2(1.0 - defender_idle), MixedPolicy2(adversary_act)};
  return {MixedPolicy2(defender_idle), MixedPolicy2(1.0 - adversary_act)};
}

std::pair<double, double> exact_one_step_values(const Eigen::VectorXd& x,
                                                const Eigen::MatrixXd& P0_next,
                                                const Eigen::MatrixXd& P1_next,
                                                const NdLQParams& params) {
  if (x.size() != params.dim())
    throw DimensionError("state size does not match the game dimension");
  const Eigen::MatrixXd Bt = params.defender_loop();
  const Eigen::MatrixXd Wt = params.adversary_loop();
  const Eigen::MatrixXd bt_term = Bt.transpose() * P0_next * Bt;
  const Eigen::MatrixXd wt_term = Wt.transpose() * P1_next * Wt;
  const double q_attack = x.dot(params.A * x);
  const double q_defend = x.dot(params.D * x);
  const double q_check = x.dot((wt_term - bt_term) * x);
  if (std::abs(q_check) < 1e-12 * std::max({1.0, q_attack, q_defend}))
    throw DegenerateGameError(
        "pointwise stage game is degenerate: x^T Pcheck x vanishes");
  const double coupling = q_defend * q_attack / q_check;
  const double v0 =
      x.dot((params.Q + params.D + bt_term) * x) - coupling;
  const double v1 =
      x.dot((params.Q - params.A + wt_term) * x) + coupling;
  return {v0, v1};
}

bool quadratic_form_product_bound_holds(const Eigen::MatrixXd& P,
                                        const Eigen::VectorXd& x) {
  check_symmetric(P, "P");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
  if (eig.info() != Eigen::Success)
    throw ConfigError("eigendecomposition of P failed");
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw ConfigError("P must be positive definite");
  const Eigen::MatrixXd P_inv = eig.eigenvectors() *
                                eig.eigenvalues().cwiseInverse().asDiagonal() *
                                eig.eigenvectors().transpose();
  const double norm2 = x.squaredNorm();
  const double lhs = norm2 * norm2;
  const double rhs = x.dot(P * x) * x.dot(P_inv * x);
  return lhs <= rhs + 1e-10 * std::max(1.0, rhs);
}

GameSpec to_game_spec(const NdLQParams& params, const Eigen::VectorXd& x0,
                      FlipState alpha0) {
  params.validate();
  GameSpec spec;
  spec.dynamics = ClosedLoopDynamics::linear(params.defender_loop(),
                                             params.adversary_loop());
  spec.costs = CostModel::quadratic(params.Q, params.D, params.A);
  spec.horizon = params.horizon;
  spec.x0 = x0;
  spec.alpha0 = alpha0;
  return spec;
}

TerminalCondition nd_terminal(const NdLQParams& params) {
  return TerminalCondition::quadratic(params.Q,
                                      terminal_adversary_matrix(params));
}

}  // namespace flipdyn

#pragma once

#include <Eigen/Core>

#include "flipdyn/core_model.hpp"

namespace flipdyn {

struct LqrOptions {
  int max_iterations = 10000;
  double tolerance = 1e-12;  // max-abs change of the Riccati iterate
};

// Infinite-horizon discounted-free LQR gain for x' = F x + B u with stage
// cost x^T Qc x + u^T Rc u.  Solves the Riccati fixed point by iterating
// the finite-horizon recursion from S = Qc; returns
// K = (Rc + B^T S B)^-1 B^T S F so that u = -K x.
// Throws ConvergenceError (with the final residual) when the iteration cap
// is hit and SingularMatrixError when Rc + B^T S B is not invertible.
Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& F, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& Qc, const Eigen::MatrixXd& Rc,
                         const LqrOptions& options = {});

// 1-D convenience wrapper.
double lqr_gain_scalar(double F, double B, double Qc, double Rc,
                       const LqrOptions& options = {});

// Closed-loop maps of the takeover game built from state-feedback laws:
// the defender plays u = -K x (loop F - B K), the adversary injects
// w = W x through channel E (loop F + E W).
ClosedLoopDynamics build_linear_game(const Eigen::MatrixXd& F,
                                     const Eigen::MatrixXd& B,
                                     const Eigen::MatrixXd& E,
                                     const Eigen::MatrixXd& K,
                                     const Eigen::MatrixXd& W);

}  // namespace flipdyn

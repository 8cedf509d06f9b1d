#include "flipdyn/lqr.hpp"

#include <Eigen/Cholesky>

#include <string>

namespace flipdyn {

Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& F, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& Qc, const Eigen::MatrixXd& Rc,
                         const LqrOptions& options) {
  const auto n = F.rows();
  const auto m = B.cols();
  if (F.cols() != n) throw DimensionError("F must be square");
  if (B.rows() != n) throw DimensionError("B must have as many rows as F");
  if (Qc.rows() != n || Qc.cols() != n)
    throw DimensionError("Qc must match the state dimension");
  if (Rc.rows() != m || Rc.cols() != m)
    throw DimensionError("Rc must match the input dimension");

  Eigen::MatrixXd S = Qc;
  double residual = 0.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::MatrixXd inner = Rc + B.transpose() * S * B;
    const Eigen::LLT<Eigen::MatrixXd> llt(inner);
    if (llt.info() != Eigen::Success)
      throw SingularMatrixError(
          "Rc + B^T S B is not positive definite during the Riccati iteration");
    const Eigen::MatrixXd gain = llt.solve(B.transpose() * S * F);
    Eigen::MatrixXd next =
        Qc + F.transpose() * S * F - F.transpose() * S * B * gain;
    next = 0.5 * (next + next.transpose()).eval();
    residual = (next - S).cwiseAbs().maxCoeff();
    S = next;
    if (residual < options.tolerance) {
      const Eigen::MatrixXd inner_final = Rc + B.transpose() * S * B;
      const Eigen::LLT<Eigen::MatrixXd> llt_final(inner_final);
      if (llt_final.info() != Eigen::Success)
        throw SingularMatrixError("Rc + B^T S B is not positive definite");
      return llt_final.solve(B.transpose() * S * F);
    }
  }
  throw ConvergenceError("Riccati iteration did not converge within " +
                             std::to_string(options.max_iterations) +
                             " iterations (residual " +
                             std::to_string(residual) + ")",
                         residual);
}

double lqr_gain_scalar(double F, double B, double Qc, double Rc,
                       const LqrOptions& options) {
  Eigen::MatrixXd f(1, 1), b(1, 1), q(1, 1), r(1, 1);
  f << F;
  b << B;
  q << Qc;
  r << Rc;
  return lqr_gain(f, b, q, r, options)(0, 0);
}

ClosedLoopDynamics build_linear_game(const Eigen::MatrixXd& F,
                                     const Eigen::MatrixXd& B,
                                     const Eigen::MatrixXd& E,
                                     const Eigen::MatrixXd& K,
                                     const Eigen::MatrixXd& W) {
  const auto n = F.rows();
  if (F.cols() != n) throw DimensionError("F must be square");
  if (B.rows() != n || E.rows() != n)
    throw DimensionError("B and E must have as many rows as F");
  if (K.rows() != B.cols() || K.cols() != n)
    throw DimensionError("K must map states to defender inputs");
  if (W.rows() != E.cols() || W.cols() != n)
    throw DimensionError("W must map states to adversary inputs");
  return ClosedLoopDynamics::linear(F - B * K, F + E * W);
}

}  // namespace flipdyn

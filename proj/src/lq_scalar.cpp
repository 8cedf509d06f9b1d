#include "flipdyn/lq_scalar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace flipdyn {

void ScalarLQParams::validate() const {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (!(g > 0.0)) throw ConfigError("running cost coefficient g must be > 0");
  if (d < 0.0 || a < 0.0)
    throw ConfigError("action cost coefficients must be nonnegative");
  if (mu < 0.0) throw ConfigError("terminal premium mu must be nonnegative");
  const auto check_seq = [this](const std::vector<double>& seq, const char* name) {
    if (!seq.empty() && static_cast<int>(seq.size()) != horizon)
      throw ConfigError(std::string(name) +
                        " sequence must have exactly `horizon` entries");
  };
  check_seq(F_seq, "F");
  check_seq(B_seq, "B");
  check_seq(E_seq, "E");
  check_seq(K_seq, "K");
  check_seq(W_seq, "W");
}

bool ScalarValueCoeffs::all_valid() const {
  return std::all_of(valid.begin(), valid.end(),
                     [](std::uint8_t v) { return v != 0; });
}

ScalarValueCoeffs scalar_backward_recursion(const ScalarLQParams& params,
                                            bool strict) {
  params.validate();
  const int L = params.horizon;
  const double g = params.g, d = params.d, a = params.a;

  ScalarValueCoeffs coeffs;
  coeffs.horizon = L;
  coeffs.p0.assign(static_cast<size_t>(L) + 1, 0.0);
  coeffs.p1.assign(static_cast<size_t>(L) + 1, 0.0);
  coeffs.ptilde.assign(static_cast<size_t>(L) + 1, 0.0);
  coeffs.valid.assign(static_cast<size_t>(L) + 1, 1);

  coeffs.p0[static_cast<size_t>(L)] = g;
  coeffs.p1[static_cast<size_t>(L)] = (g + std::max(a, d)) + params.mu;

  for (int k = L - 1; k >= 0; --k) {
    const size_t kk = static_cast<size_t>(k);
    const double bt = params.defender_loop(k);
    const double wt = params.adversary_loop(k);
    // Grouping mirrors the matrix recursion evaluated at dimension one, so
    // the two paths agree to the last bit on shared instances.
    const double bt_term = (bt * coeffs.p0[kk + 1]) * bt;
    const double wt_term = (wt * coeffs.p1[kk + 1]) * wt;
    const double pt = wt_term - bt_term;
    coeffs.ptilde[kk + 1] = pt;
    // d a / ptilde, with an exact zero when either action cost vanishes
    // (avoids 0 * inf when the denominator also degenerates).
    const double correction =
        (d == 0.0 || a == 0.0) ? 0.0 : (d * (1.0 / pt)) * a;
    coeffs.p0[kk] = ((g + d) + bt_term) - correction;
    coeffs.p1[kk] = ((g - a) + wt_term) + correction;

    const bool ok = pt >= std::max(d, a) && coeffs.p0[kk] >= 0.0;
    coeffs.valid[kk] = ok ? 1 : 0;
    if (strict && !ok)
      throw ValidityError(
          "value recursion left its validity region at step " +
              std::to_string(k) + " (ptilde = " + std::to_string(pt) +
              ", p0 = " + std::to_string(coeffs.p0[kk]) + ")",
          k);
  }
  return coeffs;
}

ScalarFixedPoint scalar_recursion_fixed_point(const ScalarLQParams& params) {
  params.validate();
  if (!params.F_seq.empty() || !params.B_seq.empty() || !params.E_seq.empty() ||
      !params.K_seq.empty() || !params.W_seq.empty())
    throw ConfigError("stationary point requires constant parameters");
  const double bt = params.defender_loop(0);
  const double wt = params.adversary_loop(0);
  if (std::abs(bt) >= 1.0 || std::abs(wt) >= 1.0)
    throw ConfigError("stationary point requires both loop gains below one");
  const double g = params.g, d = params.d, a = params.a;
  const double c_adv = wt * wt / (1.0 - wt * wt);
  const double c_def = bt * bt / (1.0 - bt * bt);
  // Eliminating p0 and p1 from the stationarity equations leaves a
  // quadratic in the denominator:
  //   ptilde^2 - (c_adv (g-a) - c_def (g+d)) ptilde - (c_adv + c_def) d a = 0.
  const double b_lin = c_adv * (g - a) - c_def * (g + d);
  const double c_abs = (c_adv + c_def) * d * a;
  const double disc = b_lin * b_lin + 4.0 * c_abs;
  const double root = 0.5 * (b_lin + std::sqrt(disc));
  if (!(root > 0.0))
    throw ConfigError("recursion has no positive stationary denominator");
  ScalarFixedPoint fp;
  fp.ptilde = root;
  const double correction = (d == 0.0 || a == 0.0) ? 0.0 : d * a / root;
  fp.p0 = (g + d - correction) / (1.0 - bt * bt);
  fp.p1 = (g - a + correction) / (1.0 - wt * wt);
  return fp;
}

std::pair<MixedPolicy2, MixedPolicy2> scalar_policy(
    const ScalarValueCoeffs& coeffs, const ScalarLQParams& params, int k,
    FlipState alpha) {
  if (k < 0 || k >= coeffs.horizon)
    throw ConfigError("policy step out of range: " + std::to_string(k));
  if (!coeffs.valid[static_cast<size_t>(k)])
    throw InvalidStepError("policies are undefined at invalid step " +
                           std::to_string(k));
  const double pt = coeffs.ptilde[static_cast<size_t>(k) + 1];
  if (pt == 0.0)
    throw InvalidStepError("policy denominator is zero at step " +
                           std::to_string(k));
  const double d = params.d, a = params.a;
  if (alpha == FlipState::kDefender) {
    return {MixedPolicy2((pt - a) / pt), MixedPolicy2(d / pt)};
  }
  return {MixedPolicy2(a / pt), MixedPolicy2((pt - d) / pt)};
}

double scalar_value_at(const ScalarValueCoeffs& coeffs, double x, int k,
                       FlipState alpha) {
  if (k < 0 || k > coeffs.horizon)
    throw ConfigError("value step out of range: " + std::to_string(k));
  const double p = alpha == FlipState::kDefender
                       ? coeffs.p0[static_cast<size_t>(k)]
                       : coeffs.p1[static_cast<size_t>(k)];
  return p * x * x;
}

GameSpec to_game_spec(const ScalarLQParams& params, double x0,
                      FlipState alpha0) {
  params.validate();
  GameSpec spec;
  spec.dynamics = ClosedLoopDynamics(
      1,
      [params](const Eigen::VectorXd& x, int k) {
        return Eigen::VectorXd::Constant(1, params.defender_loop(k) * x[0]);
      },
      [params](const Eigen::VectorXd& x, int k) {
        return Eigen::VectorXd::Constant(1, params.adversary_loop(k) * x[0]);
      });
  spec.costs = CostModel::scalar_quadratic(params.g, params.d, params.a);
  spec.horizon = params.horizon;
  spec.x0 = Eigen::VectorXd::Constant(1, x0);
  spec.alpha0 = alpha0;
  return spec;
}

TerminalCondition scalar_terminal(const ScalarLQParams& params) {
  return TerminalCondition::scalar_quadratic(
      params.g, (params.g + std::max(params.a, params.d)) + params.mu);
}

}  // namespace flipdyn

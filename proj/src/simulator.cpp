#include "flipdyn/simulator.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

namespace flipdyn {

std::uint64_t SplitMix64::scramble(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return scramble(state_);
}

double SplitMix64::next_unit() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

SplitMix64 SplitMix64::substream(std::uint64_t seed, std::uint64_t run) {
  // Hash the run index into the seed so different runs start from
  // effectively independent states.
  SplitMix64 rng(scramble(scramble(seed) +
                          (run + 1) * 0x9E3779B97F4A7C15ULL));
  return rng;
}

PolicyProvider make_policy_provider(const ValueTables& tables,
                                    const StateEnumeration& enumeration) {
  return [tables, enumeration](int k, const Eigen::VectorXd& x,
                               FlipState alpha) {
    if (k < 0 || k >= tables.horizon)
      throw ConfigError("policy step out of range: " + std::to_string(k));
    const int i = enumeration.index_of(x);
    if (i < 0)
      throw EnumerationError("queried state is not in the enumeration");
    const PolicyCell& cell =
        tables.policy[static_cast<size_t>(k)][static_cast<size_t>(i)]
                     [to_index(alpha)];
    return std::make_pair(cell.defender, cell.adversary);
  };
}

PolicyProvider make_policy_provider(std::shared_ptr<const TreePolicy> policy) {
  if (!policy) throw ConfigError("tree policy is null");
  return [policy](int k, const Eigen::VectorXd& x, FlipState alpha) {
    const PolicyCell& cell = policy->at(k, x, alpha);
    return std::make_pair(cell.defender, cell.adversary);
  };
}

PolicyProvider make_policy_provider(const ScalarValueCoeffs& coeffs,
                                    const ScalarLQParams& params) {
  return [coeffs, params](int k, const Eigen::VectorXd&, FlipState alpha) {
    return scalar_policy(coeffs, params, k, alpha);
  };
}

PolicyProvider make_policy_provider(const NdValueMatrices& matrices,
                                    const NdLQParams& params) {
  return [matrices, params](int k, const Eigen::VectorXd& x, FlipState alpha) {
    return nd_policy(matrices, params, x, k, alpha);
  };
}

TrajectoryRecord rollout(const GameSpec& spec, const TerminalCondition& terminal,
                         const PolicyProvider& policies,
                         const RolloutConfig& config, int run_index) {
  spec.validate();
  for (const ForcedEvent& event : config.forced_events)
    if (event.step < 0 || event.step >= spec.horizon)
      throw ConfigError("forced event step out of range: " +
                        std::to_string(event.step));

  SplitMix64 rng = SplitMix64::substream(config.seed,
                                         static_cast<std::uint64_t>(run_index));
  TrajectoryRecord record;
  record.steps.reserve(static_cast<size_t>(spec.horizon) + 1);
  record.defender_act_prob.reserve(static_cast<size_t>(spec.horizon));
  record.adversary_act_prob.reserve(static_cast<size_t>(spec.horizon));

  Eigen::VectorXd x = spec.x0;
  FlipState alpha = spec.alpha0;
  double total = 0.0;
  for (int k = 0; k < spec.horizon; ++k) {
    std::pair<MixedPolicy2, MixedPolicy2> mixed;
    try {
      mixed = policies(k, x, alpha);
    } catch (const Error& e) {
      throw InvalidStepError("policy provider failed at step " +
                             std::to_string(k) + ": " + e.what());
    }
    ActionPair actions;
    actions.defender = rng.bernoulli(mixed.first.p_act);
    actions.adversary = rng.bernoulli(mixed.second.p_act);
    FlipState next_alpha = flip_transition(alpha, actions);
    for (const ForcedEvent& event : config.forced_events)
      if (event.step == k) next_alpha = event.alpha;

    const double cost = stage_cost(x, actions, spec.costs);
    record.steps.push_back(
        {k, x, next_alpha, actions.defender, actions.adversary, cost});
    record.defender_act_prob.push_back(mixed.first.p_act);
    record.adversary_act_prob.push_back(mixed.second.p_act);
    total += cost;

    x = spec.dynamics.step(x, next_alpha, k);
    alpha = next_alpha;
  }
  const double terminal_cost = terminal.value(x, alpha);
  record.steps.push_back({spec.horizon, x, alpha, false, false, terminal_cost});
  total += terminal_cost;
  record.total_cost = total;
  return record;
}

AggregateStats monte_carlo(const GameSpec& spec,
                           const TerminalCondition& terminal,
                           const PolicyProvider& policies,
                           const RolloutConfig& config,
                           std::vector<TrajectoryRecord>* trajectories) {
  if (config.runs < 1) throw ConfigError("need at least one run");
  const int L = spec.horizon;
  AggregateStats stats;
  stats.runs = config.runs;
  stats.mean_alpha.assign(static_cast<size_t>(L) + 1, 0.0);
  stats.mean_defender_act.assign(static_cast<size_t>(L), 0.0);
  stats.mean_adversary_act.assign(static_cast<size_t>(L), 0.0);

  // Welford accumulation keeps the mean/variance stable over many runs;
  // the fixed run order makes the result reproducible bit for bit.
  double mean = 0.0;
  double m2 = 0.0;
  for (int run = 0; run < config.runs; ++run) {
    TrajectoryRecord record = rollout(spec, terminal, policies, config, run);
    for (int k = 0; k <= L; ++k)
      stats.mean_alpha[static_cast<size_t>(k)] +=
          static_cast<double>(to_index(record.steps[static_cast<size_t>(k)].alpha));
    for (int k = 0; k < L; ++k) {
      stats.mean_defender_act[static_cast<size_t>(k)] +=
          record.defender_act_prob[static_cast<size_t>(k)];
      stats.mean_adversary_act[static_cast<size_t>(k)] +=
          record.adversary_act_prob[static_cast<size_t>(k)];
    }
    const double delta = record.total_cost - mean;
    mean += delta / static_cast<double>(run + 1);
    m2 += delta * (record.total_cost - mean);
    if (trajectories) trajectories->push_back(std::move(record));
  }
  const double n = static_cast<double>(config.runs);
  for (double& v : stats.mean_alpha) v /= n;
  for (double& v : stats.mean_defender_act) v /= n;
  for (double& v : stats.mean_adversary_act) v /= n;
  stats.mean_cost = mean;
  stats.cost_std_error =
      config.runs > 1 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0;
  return stats;
}

namespace {

struct ExpectationKey {
  static std::string make(int k, const Eigen::VectorXd& x, FlipState alpha) {
    std::string key(reinterpret_cast<const char*>(&k), sizeof(k));
    key.push_back(static_cast<char>(to_index(alpha)));
    key.append(reinterpret_cast<const char*>(x.data()),
               static_cast<size_t>(x.size()) * sizeof(double));
    return key;
  }
};

struct ExpectationEvaluator {
  const GameSpec& spec;
  const TerminalCondition& terminal;
  const PolicyProvider& policies;
  std::unordered_map<std::string, double> memo;

  double value(int k, const Eigen::VectorXd& x, FlipState alpha) {
    if (k == spec.horizon) return terminal.value(x, alpha);
    std::string key = ExpectationKey::make(k, x, alpha);
    if (const auto it = memo.find(key); it != memo.end()) return it->second;

    const auto [defender, adversary] = policies(k, x, alpha);
    double total = spec.costs.running(x);
    for (int a0 = 0; a0 < 2; ++a0) {
      const double w0 = a0 ? defender.p_act : defender.p_idle;
      if (w0 == 0.0) continue;
      for (int a1 = 0; a1 < 2; ++a1) {
        const double w1 = a1 ? adversary.p_act : adversary.p_idle;
        if (w1 == 0.0) continue;
        const ActionPair actions{a0 != 0, a1 != 0};
        const FlipState next_alpha = flip_transition(alpha, actions);
        double branch = 0.0;
        if (actions.defender) branch += spec.costs.defender_action(x);
        if (actions.adversary) branch -= spec.costs.adversary_action(x);
        branch += value(k + 1, spec.dynamics.step(x, next_alpha, k), next_alpha);
        total += (w0 * w1) * branch;
      }
    }
    memo.emplace(std::move(key), total);
    return total;
  }
};

}  // namespace

double expected_cost_exhaustive(const GameSpec& spec,
                                const TerminalCondition& terminal,
                                const PolicyProvider& policies) {
  spec.validate();
  if (spec.horizon > 12)
    throw HorizonCapError(
        "exhaustive expectation is limited to horizons of at most 12");
  ExpectationEvaluator evaluator{spec, terminal, policies, {}};
  return evaluator.value(0, spec.x0, spec.alpha0);
}

}  // namespace flipdyn

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flipdyn/core_model.hpp"
#include "flipdyn/simulator.hpp"

namespace flipdyn {

enum class Mode { kScalar, kNd, kFinite };

std::string mode_name(Mode mode);

// Scalar-instance block.  The defender gain is either given directly (`K`)
// or synthesized from LQR weights (`lqr_Qc`/`lqr_Rc`); exactly one of the
// two forms must be present.
struct ScalarConfig {
  double F = 1.0;
  double B = 0.0;
  std::optional<double> E;  // defaults to B
  std::optional<double> K;
  std::optional<double> lqr_Qc, lqr_Rc;
  double W = 0.0;
  double g = 1.0, d = 0.0, a = 0.0;
  double x0 = 1.0;
};

struct NdConfig {
  Eigen::MatrixXd F, B, W;
  std::optional<Eigen::MatrixXd> E;  // defaults to B
  std::optional<Eigen::MatrixXd> K;
  std::optional<Eigen::MatrixXd> lqr_Qc, lqr_Rc;
  Eigen::MatrixXd Q, D, A;
  Eigen::VectorXd x0;
};

// Tabular instance over an explicit closed state list: per-state successor
// indices under either takeover state and per-state cost values.
struct FiniteConfig {
  std::vector<Eigen::VectorXd> states;
  std::vector<int> defender_successor, adversary_successor;
  std::vector<double> g, d, a;
  int x0_index = 0;
};

struct SimulationConfig {
  bool enabled = false;
  std::uint64_t seed = 0;
  int runs = 1;
  std::vector<ForcedEvent> forced_events;
  bool record_trajectories = false;
};

struct ExperimentConfig {
  Mode mode = Mode::kScalar;
  int horizon = 1;
  double mu = 1.0;
  bool strict = true;
  int alpha0 = 0;
  std::optional<ScalarConfig> scalar;
  std::optional<NdConfig> nd;
  std::optional<FiniteConfig> finite;
  SimulationConfig simulation;
  std::string output_dir;  // optional; may be overridden by CLI/environment

  // Hash of the raw config bytes this was parsed from (empty for
  // programmatically built configs).
  std::string source_hash;
};

// Parses and validates a JSON config document.  All validation problems
// are collected and reported together in the ConfigError message.
ExperimentConfig parse_config(const std::string& json_text);

// Reads, parses, and validates a config file; records the byte hash.
ExperimentConfig load_config(const std::string& path);

// FNV-1a (64-bit) over raw bytes, formatted as "fnv1a64:<hex>".
std::string config_hash(const std::string& bytes);

// Serializes a config back to canonical JSON (used to materialize built-in
// experiment bundles so their outputs are reproducible from disk).
std::string config_to_json(const ExperimentConfig& config);

}  // namespace flipdyn

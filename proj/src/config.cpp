#include "flipdyn/config.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace flipdyn {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Collects every problem found while walking the document so users can fix
// a config in one pass.
struct Validator {
  std::vector<std::string> errors;

  void fail(const std::string& message) { errors.push_back(message); }

  bool require_present(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
      fail(where + ": missing required field '" + key + "'");
      return false;
    }
    return true;
  }

  std::optional<double> number(const json& j, const char* key,
                               const std::string& where) {
    if (!require_present(j, key, where)) return std::nullopt;
    if (!j.at(key).is_number()) {
      fail(where + ": field '" + key + "' must be a number");
      return std::nullopt;
    }
    return j.at(key).get<double>();
  }

  std::optional<double> optional_number(const json& j, const char* key,
                                        const std::string& where) {
    if (!j.contains(key)) return std::nullopt;
    if (!j.at(key).is_number()) {
      fail(where + ": field '" + key + "' must be a number");
      return std::nullopt;
    }
    return j.at(key).get<double>();
  }

  std::optional<Eigen::MatrixXd> matrix(const json& j, const char* key,
                                        const std::string& where,
                                        bool required) {
    if (!j.contains(key)) {
      if (required) fail(where + ": missing required matrix '" + key + "'");
      return std::nullopt;
    }
    const json& m = j.at(key);
    if (!m.is_array() || m.empty() || !m.front().is_array()) {
      fail(where + ": matrix '" + key + "' must be an array of rows");
      return std::nullopt;
    }
    const size_t cols = m.front().size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(m.size()),
                        static_cast<Eigen::Index>(cols));
    for (size_t r = 0; r < m.size(); ++r) {
      if (!m[r].is_array() || m[r].size() != cols) {
        fail(where + ": matrix '" + key + "' has ragged rows");
        return std::nullopt;
      }
      for (size_t c = 0; c < cols; ++c) {
        if (!m[r][c].is_number()) {
          fail(where + ": matrix '" + key + "' has a non-numeric entry");
          return std::nullopt;
        }
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            m[r][c].get<double>();
      }
    }
    return out;
  }

  std::optional<Eigen::VectorXd> vector(const json& j, const char* key,
                                        const std::string& where,
                                        bool required) {
    if (!j.contains(key)) {
      if (required) fail(where + ": missing required vector '" + key + "'");
      return std::nullopt;
    }
    const json& v = j.at(key);
    if (!v.is_array() || v.empty()) {
      fail(where + ": vector '" + key + "' must be a non-empty array");
      return std::nullopt;
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        fail(where + ": vector '" + key + "' has a non-numeric entry");
        return std::nullopt;
      }
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
  }
};

ScalarConfig parse_scalar_block(const json& block, Validator& v) {
  const std::string where = "scalar";
  ScalarConfig out;
  if (const auto f = v.number(block, "F", where)) out.F = *f;
  if (const auto b = v.number(block, "B", where)) out.B = *b;
  out.E = v.optional_number(block, "E", where);
  out.K = v.optional_number(block, "K", where);
  if (block.contains("lqr")) {
    const json& lqr = block.at("lqr");
    if (!lqr.is_object()) {
      v.fail(where + ": 'lqr' must be an object with Qc and Rc");
    } else {
      out.lqr_Qc = v.number(lqr, "Qc", where + ".lqr");
      out.lqr_Rc = v.number(lqr, "Rc", where + ".lqr");
    }
  }
  if (out.K.has_value() == (out.lqr_Qc.has_value() || out.lqr_Rc.has_value()))
    v.fail(where + ": exactly one of 'K' or 'lqr' must be given");
  if (const auto w = v.optional_number(block, "W", where)) out.W = *w;
  if (const auto g = v.number(block, "g", where)) out.g = *g;
  if (const auto d = v.number(block, "d", where)) out.d = *d;
  if (const auto a = v.number(block, "a", where)) out.a = *a;
  if (const auto x0 = v.optional_number(block, "x0", where)) out.x0 = *x0;
  if (out.g <= 0.0) v.fail(where + ": g must be positive");
  if (out.d < 0.0 || out.a < 0.0)
    v.fail(where + ": d and a must be nonnegative");
  return out;
}

NdConfig parse_nd_block(const json& block, Validator& v) {
  const std::string where = "nd";
  NdConfig out;
  if (const auto m = v.matrix(block, "F", where, true)) out.F = *m;
  if (const auto m = v.matrix(block, "B", where, true)) out.B = *m;
  out.E = v.matrix(block, "E", where, false);
  out.K = v.matrix(block, "K", where, false);
  if (block.contains("lqr")) {
    const json& lqr = block.at("lqr");
    if (!lqr.is_object()) {
      v.fail(where + ": 'lqr' must be an object with Qc and Rc");
    } else {
      out.lqr_Qc = v.matrix(lqr, "Qc", where + ".lqr", true);
      out.lqr_Rc = v.matrix(lqr, "Rc", where + ".lqr", true);
    }
  }
  if (out.K.has_value() == out.lqr_Qc.has_value())
    v.fail(where + ": exactly one of 'K' or 'lqr' must be given");
  if (const auto m = v.matrix(block, "W", where, true)) out.W = *m;
  if (const auto m = v.matrix(block, "Q", where, true)) out.Q = *m;
  if (const auto m = v.matrix(block, "D", where, true)) out.D = *m;
  if (const auto m = v.matrix(block, "A", where, true)) out.A = *m;
  if (const auto x0 = v.vector(block, "x0", where, true)) out.x0 = *x0;
  if (out.F.size() > 0 && out.x0.size() > 0 && out.x0.size() != out.F.rows())
    v.fail(where + ": x0 length must match the state dimension");
  return out;
}

FiniteConfig parse_finite_block(const json& block, Validator& v) {
  const std::string where = "finite";
  FiniteConfig out;
  if (!block.contains("states") || !block.at("states").is_array() ||
      block.at("states").empty()) {
    v.fail(where + ": 'states' must be a non-empty array of state vectors");
    return out;
  }
  const json& states = block.at("states");
  for (size_t i = 0; i < states.size(); ++i) {
    if (!states[i].is_array() || states[i].empty()) {
      v.fail(where + ": state " + std::to_string(i) + " must be a non-empty array");
      return out;
    }
    Eigen::VectorXd x(static_cast<Eigen::Index>(states[i].size()));
    for (size_t c = 0; c < states[i].size(); ++c) {
      if (!states[i][c].is_number()) {
        v.fail(where + ": state " + std::to_string(i) + " has a non-numeric entry");
        return out;
      }
      x(static_cast<Eigen::Index>(c)) = states[i][c].get<double>();
    }
    if (!out.states.empty() && x.size() != out.states.front().size()) {
      v.fail(where + ": states must all have the same dimension");
      return out;
    }
    out.states.push_back(std::move(x));
  }
  const int n = static_cast<int>(out.states.size());
  const auto read_index_list = [&](const char* key, std::vector<int>& target) {
    if (!v.require_present(block, key, where)) return;
    const json& list = block.at(key);
    if (!list.is_array() || static_cast<int>(list.size()) != n) {
      v.fail(where + ": '" + key + "' must list one successor per state");
      return;
    }
    for (const auto& entry : list) {
      if (!entry.is_number_integer()) {
        v.fail(where + ": '" + key + "' entries must be integer state indices");
        return;
      }
      const int idx = entry.get<int>();
      if (idx < 0 || idx >= n) {
        v.fail(where + ": '" + key + "' index " + std::to_string(idx) +
               " is out of range");
        return;
      }
      target.push_back(idx);
    }
  };
  read_index_list("f0", out.defender_successor);
  read_index_list("f1", out.adversary_successor);
  const auto read_cost_list = [&](const char* key, std::vector<double>& target) {
    if (!v.require_present(block, key, where)) return;
    const json& list = block.at(key);
    if (!list.is_array() || static_cast<int>(list.size()) != n) {
      v.fail(where + ": '" + key + "' must list one value per state");
      return;
    }
    for (const auto& entry : list) {
      if (!entry.is_number()) {
        v.fail(where + ": '" + key + "' entries must be numbers");
        return;
      }
      const double value = entry.get<double>();
      if (value < 0.0) {
        v.fail(where + ": '" + key + "' entries must be nonnegative");
        return;
      }
      target.push_back(value);
    }
  };
  read_cost_list("g", out.g);
  read_cost_list("d", out.d);
  read_cost_list("a", out.a);
  if (block.contains("x0_index")) {
    if (!block.at("x0_index").is_number_integer()) {
      v.fail(where + ": 'x0_index' must be an integer");
    } else {
      out.x0_index = block.at("x0_index").get<int>();
      if (out.x0_index < 0 || out.x0_index >= n)
        v.fail(where + ": 'x0_index' is out of range");
    }
  }
  return out;
}

SimulationConfig parse_simulation_block(const json& block, int horizon,
                                        Validator& v) {
  const std::string where = "simulation";
  SimulationConfig out;
  out.enabled = true;
  if (block.contains("seed")) {
    if (!block.at("seed").is_number_unsigned() &&
        !block.at("seed").is_number_integer()) {
      v.fail(where + ": 'seed' must be a nonnegative integer");
    } else {
      const auto seed = block.at("seed").get<std::int64_t>();
      if (seed < 0)
        v.fail(where + ": 'seed' must be nonnegative");
      else
        out.seed = static_cast<std::uint64_t>(seed);
    }
  }
  if (block.contains("runs")) {
    if (!block.at("runs").is_number_integer()) {
      v.fail(where + ": 'runs' must be an integer");
    } else {
      out.runs = block.at("runs").get<int>();
      if (out.runs < 1) v.fail(where + ": 'runs' must be at least 1");
    }
  }
  if (block.contains("forced_events")) {
    const json& events = block.at("forced_events");
    if (!events.is_array()) {
      v.fail(where + ": 'forced_events' must be an array");
    } else {
      for (const auto& event : events) {
        if (!event.is_object() || !event.contains("step") ||
            !event.contains("alpha") || !event.at("step").is_number_integer() ||
            !event.at("alpha").is_number_integer()) {
          v.fail(where + ": each forced event needs integer 'step' and 'alpha'");
          continue;
        }
        ForcedEvent forced;
        forced.step = event.at("step").get<int>();
        const int alpha = event.at("alpha").get<int>();
        if (forced.step < 0 || forced.step >= horizon)
          v.fail(where + ": forced event step " + std::to_string(forced.step) +
                 " is outside [0, horizon)");
        if (alpha != 0 && alpha != 1) {
          v.fail(where + ": forced event alpha must be 0 or 1");
          continue;
        }
        forced.alpha = flip_state_from_index(alpha);
        out.forced_events.push_back(forced);
      }
    }
  }
  if (block.contains("record_trajectories")) {
    if (!block.at("record_trajectories").is_boolean())
      v.fail(where + ": 'record_trajectories' must be a boolean");
    else
      out.record_trajectories = block.at("record_trajectories").get<bool>();
  }
  return out;
}

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kScalar: return "scalar";
    case Mode::kNd: return "nd";
    case Mode::kFinite: return "finite";
  }
  return "unknown";
}

ExperimentConfig parse_config(const std::string& json_text) {
  json document;
  try {
    document = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!document.is_object())
    throw ConfigError("config must be a JSON object");

  Validator v;
  ExperimentConfig config;

  std::string mode;
  if (v.require_present(document, "mode", "config")) {
    if (!document.at("mode").is_string()) {
      v.fail("config: 'mode' must be one of \"scalar\", \"nd\", \"finite\"");
    } else {
      mode = document.at("mode").get<std::string>();
      if (mode == "scalar") config.mode = Mode::kScalar;
      else if (mode == "nd") config.mode = Mode::kNd;
      else if (mode == "finite") config.mode = Mode::kFinite;
      else v.fail("config: unknown mode '" + mode + "'");
    }
  }
  if (v.require_present(document, "horizon", "config")) {
    if (!document.at("horizon").is_number_integer())
      v.fail("config: 'horizon' must be an integer");
    else {
      config.horizon = document.at("horizon").get<int>();
      if (config.horizon < 1) v.fail("config: 'horizon' must be at least 1");
    }
  }
  if (const auto mu = v.optional_number(document, "mu", "config")) {
    config.mu = *mu;
    if (config.mu < 0.0) v.fail("config: 'mu' must be nonnegative");
  }
  if (document.contains("strict")) {
    if (!document.at("strict").is_boolean())
      v.fail("config: 'strict' must be a boolean");
    else
      config.strict = document.at("strict").get<bool>();
  }
  if (document.contains("alpha0")) {
    if (!document.at("alpha0").is_number_integer())
      v.fail("config: 'alpha0' must be 0 or 1");
    else {
      config.alpha0 = document.at("alpha0").get<int>();
      if (config.alpha0 != 0 && config.alpha0 != 1)
        v.fail("config: 'alpha0' must be 0 or 1");
    }
  }

  const int block_count = (document.contains("scalar") ? 1 : 0) +
                          (document.contains("nd") ? 1 : 0) +
                          (document.contains("finite") ? 1 : 0);
  if (block_count != 1)
    v.fail("config: exactly one of 'scalar', 'nd', 'finite' must be present");
  if (document.contains("scalar")) {
    if (config.mode != Mode::kScalar && block_count == 1)
      v.fail("config: mode is '" + mode + "' but the 'scalar' block is present");
    config.scalar = parse_scalar_block(document.at("scalar"), v);
  }
  if (document.contains("nd")) {
    if (config.mode != Mode::kNd && block_count == 1)
      v.fail("config: mode is '" + mode + "' but the 'nd' block is present");
    config.nd = parse_nd_block(document.at("nd"), v);
  }
  if (document.contains("finite")) {
    if (config.mode != Mode::kFinite && block_count == 1)
      v.fail("config: mode is '" + mode + "' but the 'finite' block is present");
    config.finite = parse_finite_block(document.at("finite"), v);
  }

  if (document.contains("simulation")) {
    if (!document.at("simulation").is_object())
      v.fail("config: 'simulation' must be an object");
    else
      config.simulation =
          parse_simulation_block(document.at("simulation"), config.horizon, v);
  }
  if (document.contains("output")) {
    if (!document.at("output").is_string())
      v.fail("config: 'output' must be a string");
    else
      config.output_dir = document.at("output").get<std::string>();
  }

  if (!v.errors.empty()) {
    std::ostringstream message;
    message << "config validation failed (" << v.errors.size() << " problem"
            << (v.errors.size() == 1 ? "" : "s") << "):";
    for (const std::string& error : v.errors) message << "\n  - " << error;
    throw ConfigError(message.str());
  }
  config.source_hash = config_hash(json_text);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed reading config file: " + path);
  return parse_config(buffer.str());
}

std::string config_hash(const std::string& bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (const unsigned char byte : bytes) {
    hash ^= byte;
    hash *= 0x00000100000001B3ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(hash));
  return std::string("fnv1a64:") + hex;
}

std::string config_to_json(const ExperimentConfig& config) {
  ordered_json document;
  document["mode"] = mode_name(config.mode);
  document["horizon"] = config.horizon;
  document["mu"] = config.mu;
  document["strict"] = config.strict;
  document["alpha0"] = config.alpha0;
  if (config.scalar) {
    ordered_json block;
    block["F"] = config.scalar->F;
    block["B"] = config.scalar->B;
    if (config.scalar->E) block["E"] = *config.scalar->E;
    if (config.scalar->K) block["K"] = *config.scalar->K;
    if (config.scalar->lqr_Qc && config.scalar->lqr_Rc)
      block["lqr"] = {{"Qc", *config.scalar->lqr_Qc},
                      {"Rc", *config.scalar->lqr_Rc}};
    block["W"] = config.scalar->W;
    block["g"] = config.scalar->g;
    block["d"] = config.scalar->d;
    block["a"] = config.scalar->a;
    block["x0"] = config.scalar->x0;
    document["scalar"] = std::move(block);
  }
  if (config.nd) {
    ordered_json block;
    block["F"] = matrix_to_json(config.nd->F);
    block["B"] = matrix_to_json(config.nd->B);
    if (config.nd->E) block["E"] = matrix_to_json(*config.nd->E);
    if (config.nd->K) block["K"] = matrix_to_json(*config.nd->K);
    if (config.nd->lqr_Qc && config.nd->lqr_Rc)
      block["lqr"] = {{"Qc", matrix_to_json(*config.nd->lqr_Qc)},
                      {"Rc", matrix_to_json(*config.nd->lqr_Rc)}};
    block["W"] = matrix_to_json(config.nd->W);
    block["Q"] = matrix_to_json(config.nd->Q);
    block["D"] = matrix_to_json(config.nd->D);
    block["A"] = matrix_to_json(config.nd->A);
    block["x0"] = vector_to_json(config.nd->x0);
    document["nd"] = std::move(block);
  }
  if (config.finite) {
    ordered_json block;
    ordered_json states = ordered_json::array();
    for (const auto& x : config.finite->states) states.push_back(vector_to_json(x));
    block["states"] = std::move(states);
    block["f0"] = config.finite->defender_successor;
    block["f1"] = config.finite->adversary_successor;
    block["g"] = config.finite->g;
    block["d"] = config.finite->d;
    block["a"] = config.finite->a;
    block["x0_index"] = config.finite->x0_index;
    document["finite"] = std::move(block);
  }
  if (config.simulation.enabled) {
    ordered_json block;
    block["seed"] = config.simulation.seed;
    block["runs"] = config.simulation.runs;
    if (!config.simulation.forced_events.empty()) {
      ordered_json events = ordered_json::array();
      for (const ForcedEvent& event : config.simulation.forced_events)
        events.push_back({{"step", event.step},
                          {"alpha", to_index(event.alpha)}});
      block["forced_events"] = std::move(events);
    }
    block["record_trajectories"] = config.simulation.record_trajectories;
    document["simulation"] = std::move(block);
  }
  if (!config.output_dir.empty()) document["output"] = config.output_dir;
  return document.dump(2) + "\n";
}

}  // namespace flipdyn

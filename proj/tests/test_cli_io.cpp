#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flipdyn/config.hpp"
#include "flipdyn/errors.hpp"
#include "flipdyn/finite_solver.hpp"
#include "flipdyn/lq_nd.hpp"
#include "flipdyn/lq_scalar.hpp"
#include "flipdyn/results_io.hpp"

using namespace flipdyn;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir() {
  static int counter = 0;
  const fs::path dir =
      fs::temp_directory_path() /
      ("flipdyn_cli_io_" + std::to_string(::getpid()) + "_" +
       std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(static_cast<bool>(out));
  out << content;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

// The one-step reference instance used throughout the table tests.
const char* kOneStepConfig = R"json({
  "mode": "scalar",
  "horizon": 1,
  "scalar": {"F": 1.0, "B": 1.0, "K": 0.1, "W": 0.1,
             "g": 1.0, "d": 0.5, "a": 0.9}
})json";

int run_cli(const std::string& args) {
  const std::string command =
      std::string(FLIPDYN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

double min_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m,
                                                        Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace

TEST_SUITE("cli_io") {

TEST_CASE("a minimal scalar config parses with defaults") {
  const ExperimentConfig config = parse_config(kOneStepConfig);
  CHECK(config.mode == Mode::kScalar);
  CHECK(config.horizon == 1);
  CHECK(config.mu == 1.0);
  CHECK(config.strict);
  CHECK(config.alpha0 == 0);
  REQUIRE(config.scalar.has_value());
  CHECK(config.scalar->F == 1.0);
  CHECK(config.scalar->K == 0.1);
  CHECK(!config.scalar->E.has_value());
  CHECK(config.scalar->x0 == 1.0);
  CHECK(!config.simulation.enabled);
  CHECK(config.source_hash.rfind("fnv1a64:", 0) == 0);
}

TEST_CASE("every validation problem is reported in one pass") {
  const char* broken = R"json({
    "mode": "warp",
    "horizon": 0,
    "scalar": {"F": 1.0, "B": 1.0, "W": 0.0, "g": -1.0, "d": 0.0, "a": 0.0}
  })json";
  try {
    parse_config(broken);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    const std::string message = e.what();
    CHECK(message.find("4 problems") != std::string::npos);
    CHECK(message.find("unknown mode 'warp'") != std::string::npos);
    CHECK(message.find("'horizon' must be at least 1") != std::string::npos);
    CHECK(message.find("exactly one of 'K' or 'lqr'") != std::string::npos);
    CHECK(message.find("g must be positive") != std::string::npos);
  }
}

TEST_CASE("exactly one instance block is required") {
  CHECK_THROWS_WITH_AS(
      parse_config(R"json({"mode": "scalar", "horizon": 2})json"),
      doctest::Contains("exactly one of 'scalar', 'nd', 'finite'"),
      ConfigError);
  try {
    parse_config(R"json({
      "mode": "nd",
      "horizon": 2,
      "scalar": {"F": 1.0, "B": 1.0, "K": 0.1, "g": 1.0, "d": 0.0, "a": 0.0}
    })json");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(
              "mode is 'nd' but the 'scalar' block is present") !=
          std::string::npos);
  }
}

TEST_CASE("parsed configs round-trip through canonical serialization") {
  const char* text = R"json({
    "mode": "scalar",
    "horizon": 10,
    "mu": 0.25,
    "strict": false,
    "alpha0": 1,
    "scalar": {"F": 0.99, "B": 1.0, "K": 0.09, "W": 0.02,
               "g": 1.0, "d": 0.5, "a": 0.9, "x0": 2.0},
    "simulation": {"seed": 7, "runs": 100,
                   "forced_events": [{"step": 3, "alpha": 1}],
                   "record_trajectories": true},
    "output": "somewhere"
  })json";
  const ExperimentConfig config = parse_config(text);
  const std::string canonical = config_to_json(config);
  const ExperimentConfig round = parse_config(canonical);
  CHECK(config_to_json(round) == canonical);
  CHECK(round.mode == Mode::kScalar);
  CHECK(round.horizon == 10);
  CHECK(round.mu == 0.25);
  CHECK(!round.strict);
  CHECK(round.alpha0 == 1);
  CHECK(round.scalar->x0 == 2.0);
  CHECK(round.simulation.enabled);
  CHECK(round.simulation.seed == 7);
  CHECK(round.simulation.runs == 100);
  REQUIRE(round.simulation.forced_events.size() == 1);
  CHECK(round.simulation.forced_events[0].step == 3);
  CHECK(round.simulation.forced_events[0].alpha == FlipState::kAdversary);
  CHECK(round.simulation.record_trajectories);
  CHECK(round.output_dir == "somewhere");
}

TEST_CASE("config hashes follow the published 64-bit scheme") {
  CHECK(config_hash("") == "fnv1a64:cbf29ce484222325");
  CHECK(config_hash("a") == "fnv1a64:af63dc4c8601ec8c");
  CHECK(config_hash("foobar") == "fnv1a64:85944171f73967e8");
  CHECK(config_hash("foobar") == config_hash("foobar"));
  CHECK(config_hash("foobaz") != config_hash("foobar"));
}

TEST_CASE("scalar tables are round-trip exact and rerun byte-identical") {
  const fs::path dir = make_temp_dir();
  const ExperimentConfig config = parse_config(kOneStepConfig);
  RunOverrides overrides;
  overrides.output_dir = dir.string();
  const ResultsBundle bundle = run_experiment(config, overrides);
  CHECK(bundle.output_dir == dir.string());
  CHECK(bundle.files.at("coefficients") == "coefficients.csv");
  CHECK(bundle.files.at("policies") == "policies.csv");
  CHECK(bundle.files.at("results") == "results.json");

  const std::string coefficients = read_file(dir / "coefficients.csv");
  CHECK(coefficients ==
        "k,p0,p1,ptilde,valid\n"
        "0,2.1432715820674324,3.7757284179325681,2.6990000000000003,1\n"
        "1,1,2.8999999999999999,0,1\n");
  const std::string policies = read_file(dir / "policies.csv");
  CHECK(policies ==
        "k,beta_star,gamma_star\n"
        "0,0.66654316413486481,0.18525379770285288\n");

  // 17-digit output parses back to the exact in-memory doubles.
  ScalarLQParams params;
  params.F = 1.0;
  params.B = 1.0;
  params.K = 0.1;
  params.W = 0.1;
  params.g = 1.0;
  params.d = 0.5;
  params.a = 0.9;
  params.mu = 1.0;
  params.horizon = 1;
  const ScalarValueCoeffs coeffs = scalar_backward_recursion(params);
  const auto row = split_fields(split_lines(coefficients)[1]);
  CHECK(std::stod(row[1]) == coeffs.p0[0]);
  CHECK(std::stod(row[2]) == coeffs.p1[0]);
  CHECK(std::stod(row[3]) == coeffs.ptilde[1]);

  const std::string results = read_file(dir / "results.json");
  CHECK(results.find("\"splitmix64-v1\"") != std::string::npos);
  CHECK(results.find("\"fnv1a64:") != std::string::npos);
  CHECK(results.find("\"0.1.0\"") != std::string::npos);

  // A rerun over the same config writes the same bytes.
  run_experiment(config, overrides);
  CHECK(read_file(dir / "coefficients.csv") == coefficients);
  CHECK(read_file(dir / "policies.csv") == policies);
  CHECK(read_file(dir / "results.json") == results);
}

TEST_CASE("simulation outputs cover every step plus the terminal row") {
  const char* text = R"json({
    "mode": "scalar",
    "horizon": 10,
    "scalar": {"F": 1.0, "B": 1.0, "K": 0.1, "W": 0.1,
               "g": 1.0, "d": 0.5, "a": 0.9},
    "simulation": {"seed": 5, "runs": 32, "record_trajectories": true}
  })json";
  const fs::path dir = make_temp_dir();
  RunOverrides overrides;
  overrides.output_dir = dir.string();
  const ResultsBundle bundle = run_experiment(parse_config(text), overrides);
  CHECK(bundle.files.count("simulation") == 1);
  CHECK(bundle.files.count("trajectories") == 1);
  CHECK(bundle.summary.count("mean_cost") == 1);
  CHECK(bundle.summary.count("cost_std_error") == 1);

  const auto simulation = split_lines(read_file(dir / "simulation.csv"));
  REQUIRE(simulation.size() == 12);  // header + steps 0..10
  CHECK(simulation[0] == "k,mean_alpha,mean_beta,mean_gamma");
  const auto terminal_row = split_fields(simulation.back());
  REQUIRE(terminal_row.size() == 4);
  CHECK(terminal_row[0] == "10");
  CHECK(terminal_row[2] == "0");  // no policy is consulted at the horizon
  CHECK(terminal_row[3] == "0");
  for (size_t i = 1; i < simulation.size(); ++i) {
    const double mean_alpha = std::stod(split_fields(simulation[i])[1]);
    CHECK(mean_alpha >= 0.0);
    CHECK(mean_alpha <= 1.0);
  }

  const auto trajectories = split_lines(read_file(dir / "trajectories.csv"));
  CHECK(trajectories.size() == 1 + 32 * 11);
  CHECK(trajectories[0] == "run,k,alpha,a0,a1,stage_cost,x_0");
}

TEST_CASE("matrix experiments export eigenvalue traces") {
  const char* text = R"json({
    "mode": "nd",
    "horizon": 4,
    "nd": {"F": [[1.0, 0.0], [0.0, 1.0]],
           "B": [[1.0, 0.0], [0.0, 1.0]],
           "K": [[0.1, 0.0], [0.0, 0.1]],
           "W": [[0.01, 0.0], [0.0, 0.01]],
           "Q": [[1.0, 0.0], [0.0, 1.0]],
           "D": [[0.5, 0.0], [0.0, 0.5]],
           "A": [[0.5, 0.0], [0.0, 0.5]],
           "x0": [1.0, 1.0]}
  })json";
  const fs::path dir = make_temp_dir();
  RunOverrides overrides;
  overrides.output_dir = dir.string();
  const ResultsBundle bundle = run_experiment(parse_config(text), overrides);
  CHECK(bundle.files.at("nd") == "nd.csv");
  CHECK(bundle.summary.at("all_valid") == 1.0);

  NdLQParams params;
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(2, 2);
  params.F = identity;
  params.B = identity;
  params.K = 0.1 * identity;
  params.W = 0.01 * identity;
  params.Q = identity;
  params.D = 0.5 * identity;
  params.A = 0.5 * identity;
  params.mu = 1.0;
  params.horizon = 4;
  const NdValueMatrices matrices = nd_backward_recursion(params);

  const auto lines = split_lines(read_file(dir / "nd.csv"));
  REQUIRE(lines.size() == 6);  // header + steps 0..4
  CHECK(lines[0] == "k,min_eig_P0,min_eig_P1,min_eig_Pcheck,valid");
  for (int k = 0; k <= 4; ++k) {
    const auto fields = split_fields(lines[static_cast<size_t>(k) + 1]);
    REQUIRE(fields.size() == 5);
    CHECK(fields[0] == std::to_string(k));
    CHECK(std::stod(fields[1]) ==
          doctest::Approx(min_eig(matrices.P0[static_cast<size_t>(k)]))
              .epsilon(1e-14));
    CHECK(std::stod(fields[2]) ==
          doctest::Approx(min_eig(matrices.P1[static_cast<size_t>(k)]))
              .epsilon(1e-14));
    if (k < 4)
      CHECK(std::stod(fields[3]) ==
            doctest::Approx(min_eig(matrices.Pcheck[static_cast<size_t>(k) + 1]))
                .epsilon(1e-14));
    else
      CHECK(fields[3] == "0");
    CHECK(fields[4] == "1");
  }
}

TEST_CASE("finite experiments export values and policies") {
  const char* text = R"json({
    "mode": "finite",
    "horizon": 3,
    "finite": {"states": [[1.0], [2.0]],
               "f0": [1, 0], "f1": [0, 1],
               "g": [1.0, 4.0], "d": [0.5, 2.0], "a": [0.9, 3.6],
               "x0_index": 0}
  })json";
  const fs::path dir = make_temp_dir();
  RunOverrides overrides;
  overrides.output_dir = dir.string();
  const ResultsBundle bundle = run_experiment(parse_config(text), overrides);
  CHECK(bundle.files.at("values") == "values.csv");
  CHECK(bundle.files.at("policies") == "policies.csv");

  const auto values = split_lines(read_file(dir / "values.csv"));
  CHECK(values.size() == 1 + 4 * 2);  // header + (horizon+1) x 2 states
  CHECK(values[0] == "k,state,v0,v1");
  const auto policies = split_lines(read_file(dir / "policies.csv"));
  CHECK(policies.size() == 1 + 3 * 2);
  CHECK(policies[0] == "k,state,def_act_0,adv_act_0,def_act_1,adv_act_1");

  // The bundle headline matches an equivalent instance built in code.
  const std::vector<Eigen::VectorXd> states{
      Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 2.0)};
  const ClosedLoopDynamics dynamics = ClosedLoopDynamics::time_invariant(
      1,
      [states](const Eigen::VectorXd& x) {
        return x[0] == 1.0 ? states[1] : states[0];
      },
      [](const Eigen::VectorXd& x) { return x; });
  const CostModel costs = CostModel::scalar_quadratic(1.0, 0.5, 0.9);
  const StateEnumeration enumeration = StateEnumeration::build(states, dynamics);
  const ValueTables tables = backward_induction(
      enumeration, costs, 3, TerminalCondition::from_costs(costs, 1.0));
  CHECK(bundle.summary.at("v0_0") ==
        doctest::Approx(tables.v0[0][0]).epsilon(1e-14));
  CHECK(bundle.summary.at("v1_0") ==
        doctest::Approx(tables.v1[0][0]).epsilon(1e-14));
}

TEST_CASE("output directories resolve in precedence order") {
  ExperimentConfig config;
  RunOverrides overrides;
  ::unsetenv(kOutputDirEnvVar);
  CHECK(resolve_output_dir(config, overrides) == "out");
  ::setenv(kOutputDirEnvVar, "envdir", 1);
  CHECK(resolve_output_dir(config, overrides) == "envdir");
  config.output_dir = "cfgdir";
  CHECK(resolve_output_dir(config, overrides) == "cfgdir");
  overrides.output_dir = "flagdir";
  CHECK(resolve_output_dir(config, overrides) == "flagdir");
  ::unsetenv(kOutputDirEnvVar);
}

TEST_CASE("the command line maps failures to exit codes") {
  const fs::path dir = make_temp_dir();
  const fs::path good = dir / "good.json";
  write_file(good, kOneStepConfig);

  SUBCASE("a solved config exits 0 and writes its tables") {
    const fs::path out = dir / "run";
    CHECK(run_cli("solve-scalar --config " + good.string() + " --out " +
                  out.string()) == 0);
    CHECK(fs::exists(out / "coefficients.csv"));
    CHECK(fs::exists(out / "results.json"));
  }

  SUBCASE("config problems exit 2") {
    const fs::path bad = dir / "bad.json";
    write_file(bad, R"json({"mode": "scalar", "horizon": 0})json");
    CHECK(run_cli("solve-scalar --config " + bad.string()) == 2);
    // Mode/subcommand mismatch and missing required flags count too.
    CHECK(run_cli("solve-nd --config " + good.string()) == 2);
    CHECK(run_cli("solve-scalar") == 2);
    CHECK(run_cli("simulate --config " + good.string()) == 2);
  }

  SUBCASE("validity violations under strict solving exit 3") {
    const fs::path invalid = dir / "invalid.json";
    write_file(invalid, R"json({
      "mode": "scalar",
      "horizon": 8,
      "mu": 0.1,
      "scalar": {"F": 1.0, "B": 1.0, "K": 0.3, "W": -0.3,
                 "g": 1.0, "d": 0.2, "a": 1.4}
    })json");
    CHECK(run_cli("solve-scalar --config " + invalid.string() + " --out " +
                  (dir / "invalid_run").string()) == 3);
    // The same instance solves permissively, flagging instead of failing.
    CHECK(run_cli("solve-scalar --permissive --config " + invalid.string() +
                  " --out " + (dir / "permissive_run").string()) == 0);
  }

  SUBCASE("i/o failures exit 4") {
    CHECK(run_cli("solve-scalar --config " + (dir / "missing.json").string()) ==
          4);
    CHECK(run_cli("solve-scalar --config " + good.string() +
                  " --out /proc/flipdyn_denied/run") == 4);
  }
}

}  // TEST_SUITE

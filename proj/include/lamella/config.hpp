#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lamella/energy.hpp"
#include "lamella/envelope.hpp"
#include "lamella/evolve.hpp"
#include "lamella/oracle.hpp"
#include "lamella/table.hpp"

namespace lamella {

enum class Scenario { relax, run2d, run3d, sweep, oracle1d, stability };

std::string_view to_string(Scenario s);
std::optional<Scenario> scenario_from_string(std::string_view name);

/// An acceptance check requested by the config. `tol` is ignored by checks
/// that have none (monotonicity, stability, pairing_gaps).
struct CheckSpec {
  double tol = 0.0;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::run2d;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path output_dir = "lamella-out";

  DensityModel model;
  EnvelopeEstimator estimator;
  std::optional<TableAxes> table_axes;  ///< grid for building a QW_0 table
  std::optional<std::filesystem::path> table_path;  ///< or read one from disk

  Grid grid;
  PhaseParams phase;
  BoundaryProgram program;
  AltMinOptions solver;

  double eps = 0.1;              ///< run3d (and stability on a 3D grid)
  std::vector<double> eps_list;  ///< sweep
  int test_fields = 5;           ///< sweep: random stress-pairing fields

  Dp1dProblem oracle;
  std::vector<double> deltas;  ///< oracle1d scan
  int max_jumps = 1;

  int competitors = 8;
  double stability_tol = 1e-6;

  std::map<std::string, CheckSpec> checks;

  /// The fully defaulted document actually used (echoed as resolved_config.json).
  nlohmann::json resolved;
};

/// Command-line values that take precedence over the file.
struct ConfigOverrides {
  std::optional<Scenario> scenario;
  std::optional<std::filesystem::path> output_dir;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

/// Reads and validates a JSON config. Missing file or malformed JSON throws
/// IoError; every schema or range problem is collected into one ValidationError.
ExperimentConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});
ExperimentConfig parse_config_json(const nlohmann::json& doc, const ConfigOverrides& overrides = {});

/// The defaults every config is merged onto.
nlohmann::json default_config();

}  // namespace lamella

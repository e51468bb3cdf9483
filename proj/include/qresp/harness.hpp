#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace qresp {

/// One schema violation; `field` is a dotted path such as "discretization.M".
struct Diagnostic {
  std::string field;
  std::string message;
  int line = 0;  ///< 1-based source line when known, else 0
};

struct ValidationResult {
  bool ok = false;
  std::vector<Diagnostic> diagnostics;
  /// The config with every default filled in (only meaningful when ok).
  nlohmann::json resolved;
};

/// Experiment tags accepted in the "experiment" field.
const std::vector<std::string>& experiment_tags();

/**
 * Typed view of a resolved config. See docs/config.md for the schema.
 *
 *   experiment      density | stability | response | ly_check | crim_check | counterexample | lyapunov
 *   cocycle.maps    symbol -> {family, params}
 *   driving         {family, seed, window, params}
 *   discretization  {M, Q, tol}
 *   eps_grid        perturbation sizes
 *   params          experiment-specific options
 *   output          result directory
 *   threads         worker count, 0 = QRESP_THREADS
 */
struct ExperimentConfig {
  std::string experiment;
  nlohmann::json maps = nlohmann::json::object();
  std::string driving_family = "fixed";
  std::uint64_t seed = 0;
  int window = 64;
  nlohmann::json driving_params = nlohmann::json::object();
  int M = 32;
  int Q = 0;
  double tol = 1e-9;
  std::vector<double> eps_grid;
  nlohmann::json params = nlohmann::json::object();
  std::string output;
  int threads = 0;

  nlohmann::json to_json() const;
};

/// Schema, family and admissibility checks without running anything.
ValidationResult validate_config(const nlohmann::json& config, std::string_view source_text = {});
/// Reads and parses the file first; parse errors carry line and column.
ValidationResult validate_file(const std::string& path);

/// Throws ConfigError on the first diagnostic.
ExperimentConfig parse_config(const nlohmann::json& config);

struct OutputTable {
  std::string name;
  std::string path;
  std::size_t rows = 0;
  std::string sha256;
};

struct RunRecord {
  /// 0 ok, 1 ran with flags (non-converged densities, failed checks), 2 failed
  int exit_code = 0;
  std::vector<std::string> flags;
  std::vector<OutputTable> outputs;
  nlohmann::json summary;
  double wall_time = 0.0;
  std::string config_sha256;  ///< of the resolved config minus output and threads
  std::string inputs_digest;  ///< git blob id of the config file bytes
  std::string tool_version;
  std::string error;          ///< set when exit_code == 2

  nlohmann::json to_json() const;
};

struct RunOptions {
  std::optional<std::string> output;
  /// Overrides the config when > 0.
  int threads = 0;
};

/// Dispatches to the experiment, writes CSV, .dat, summary.json and run_record.json.
RunRecord run_config(const nlohmann::json& config, const RunOptions& opt = {}, std::string_view source_text = {});
RunRecord run_config_file(const std::string& path, const RunOptions& opt = {});

/// Shortest decimal that round-trips.
std::string format_double(double x);
std::string sha256_hex(std::string_view bytes);
/// SHA-1 of "blob <size>\0" + bytes, as git computes object ids.
std::string git_blob_id(std::string_view bytes);
const char* tool_version();

}  // namespace qresp

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "uqpipe/input_space.hpp"
#include "uqpipe/joint_gp.hpp"
#include "uqpipe/quantile.hpp"
#include "uqpipe/screening.hpp"
#include "uqpipe/sensitivity.hpp"

namespace uqpipe {

/// Stage names in execution order.
const std::vector<std::string>& stage_names();

struct RunConfig {
  // model source
  std::string source = "builtin";  // builtin | external
  std::string model = "hetero-ishigami";
  std::optional<InputSpace> inputs;  // required for external runs
  std::string learning_x;            // external: learning inputs CSV (optional, else the exported design)
  std::string learning_y;            // external: outputs CSV, or a column name of learning_x
  std::string test_x;                // external: optional test sample
  std::string test_y;
  std::filesystem::path base_dir;    // relative paths resolve here

  std::uint64_t seed = 1;
  int threads = 1;  // never changes results

  int design_n = 300;
  int design_iterations = 10000;
  int test_n = 500;  // builtin test sample size, 0 disables

  ScreeningOptions screening;
  JointGpConfig gp;
  std::vector<double> alphas;
  SobolOptions sobol;
  QuantileOptions quantile;
};

/// Parses a config document; unknown keys and out-of-range values raise ConfigError.
RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Canonical document with every default filled in (threads excluded).
nlohmann::json config_to_json(const RunConfig& config);

/// The input space of the configured model.
InputSpace config_space(const RunConfig& config);

struct PipelineOptions {
  std::filesystem::path out_dir = "run";
  /// Requested stages; upstream dependencies run as needed. Empty means all.
  std::vector<std::string> stages;
};

/// Runs the requested stages, reusing cached stage results whose content
/// hash is unchanged, and writes report.json and summary.txt to out_dir.
/// Returns the report document.
nlohmann::json run_pipeline(const RunConfig& config, const PipelineOptions& options);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string content_hash(const std::string& bytes);

}  // namespace uqpipe

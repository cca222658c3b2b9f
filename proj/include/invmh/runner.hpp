#pragma once

// Config-driven experiment runner behind the `invmh` command.

#include "invmh/core.hpp"
#include "invmh/diagnostics.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace invmh::runner {

using Json = nlohmann::ordered_json;

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr const char* kOutputDirEnv = "INVMH_OUTPUT_DIR";
inline constexpr const char* kDefaultOutputDir = "invmh_out";

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

struct RunSpec {
  std::size_t n_steps = 0;
  std::size_t burn_in = 0;
  int n_chains = 1;
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> q0;
};

struct OutputSpec {
  std::optional<std::string> directory;
  std::size_t thin = 1;
};

/// A validated config. target and sampler are kept in normalized JSON form
/// (defaults filled in) so that the echo in the summary reproduces the run.
struct ExperimentConfig {
  Json target;
  Json sampler;
  RunSpec run;
  OutputSpec output;

  Json to_json() const;
};

/// Validates and normalizes a parsed config. Errors name the offending
/// JSON pointer, e.g. "/sampler/delta: must be positive".
ExperimentConfig parse_config(const Json& j);

/// Reads and validates a config file. Syntax errors carry line and column.
ExperimentConfig load_config(const std::filesystem::path& path);

struct Experiment {
  std::shared_ptr<const InvolutiveKernel<double>> kernel;
  Eigen::VectorXd q0;
};

Experiment build_experiment(const ExperimentConfig& cfg);

/// Seed stream of chain c.
Rng chain_rng(std::uint64_t seed, int chain);

struct RunOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
};

struct RunResult {
  int exit_code = kOk;
  std::filesystem::path output_dir;
  std::vector<ChainSummary> summaries;
  std::string error;
};

/// Flag, then config, then environment, then the built-in default.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const RunOverrides& ov);

/// Runs all chains and writes chain_<c>.csv and summary.json (plus
/// error.json if a chain fails at runtime).
RunResult run_experiment(ExperimentConfig cfg, const RunOverrides& ov, std::ostream& log);

/// Loads, runs and maps failures to exit codes, reporting on err.
int run_command(const std::filesystem::path& config_path, const RunOverrides& ov,
                std::ostream& out, std::ostream& err);

std::string list_builtins();

Json to_json(const ChainSummary& s);

}  // namespace invmh::runner

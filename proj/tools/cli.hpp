#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sizer/optimizer.hpp"
#include "sizer/stage_analyzer.hpp"
#include "sizer/understanding.hpp"

namespace sizer::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUnconverged = 2;

inline constexpr std::string_view kRunSchema = "sizer.run/1";

/// Everything `optimize` needs. Input paths are resolved against the config file's directory.
struct RunConfig {
  std::filesystem::path netlist;
  std::filesystem::path hierarchy;
  std::filesystem::path tying;
  std::filesystem::path spec;
  IoNets io;
  std::string evaluator;
  std::string advisor = "none";
  std::optional<nlohmann::json> variables;  // required for extern evaluators
  OptimizerConfig optimizer;
  LoopConfig loop;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out = "runs";
  std::string mode = "feas";
  bool plot = false;
  bool best_effort = false;
  std::string circuit;

  /// Throws ConfigError when a referenced path is missing, no seed is given or the output
  /// directory cannot be written.
  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& c);

/// "3", "0,2,5" or "0..9" (inclusive).
std::vector<std::uint64_t> parse_seeds(const std::string& text);

/// Reads a JSON file; parse errors name the file and line.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Runs the command line; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace sizer::cli

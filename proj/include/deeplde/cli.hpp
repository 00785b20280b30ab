#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "deeplde/training.hpp"

namespace deeplde {

enum ExitCode : int {
  kExitSuccess = 0,
  kExitError = 1,
  kExitUsage = 2,
  kExitDiverged = 3,
  kExitOracleFailed = 4,
};

/// git-describe style version baked in at configure time.
std::string version_string();

/// Applies flat `key = value` lines on top of `base`. Blank lines and lines
/// starting with '#' are skipped. Throws FormatError with the line number.
TrainConfig parse_config_text(const std::string& text, TrainConfig base);
TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base);

/// --threads when given, else DEEPLDE_THREADS, else 1.
std::size_t resolve_threads(std::optional<std::size_t> flag);

struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::string version;
  std::chrono::system_clock::time_point started;
  std::chrono::system_clock::time_point finished;
};

nlohmann::json to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
/// `<file>.manifest.json` next to a single-file artifact.
std::filesystem::path manifest_path_for(const std::filesystem::path& artifact);

/// Entry point of the `deeplde` executable.
int run_cli(int argc, const char* const* argv);

}  // namespace deeplde

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "morphome/pipeline/config.hpp"

namespace morphome::pipeline {

inline constexpr const char* kSoftwareVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
  std::string path;  // relative to the experiment root
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct StageManifest {
  std::string stage;
  std::string key;  // dataset id or empty
  std::string version = kSoftwareVersion;
  std::string fingerprint;  // hash of the stage-relevant config
  Json config;              // full resolved config
  Json seeds = Json::object();
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::string started_utc;
  double wall_seconds = 0.0;
};

Json to_json(const StageManifest& m);
StageManifest manifest_from_json(const Json& j);

// Writes through a temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);
void write_manifest(const std::filesystem::path& path, const StageManifest& m);
std::optional<StageManifest> read_manifest(const std::filesystem::path& path);

using Logger = std::function<void(const std::string&)>;

struct Context {
  ExperimentConfig config;
  bool force = false;
  Logger log;

  std::filesystem::path root() const { return config.output_dir; }
  std::string relative(const std::filesystem::path& p) const;
  void info(const std::string& message) const {
    if (log) log(message);
  }
};

struct StageSpec {
  std::string stage;
  std::string key;
  std::filesystem::path manifest;  // absolute
  std::vector<std::filesystem::path> inputs;
  Json fingerprint_config;
  Json seeds = Json::object();
  // Produces the outputs and returns their paths.
  std::function<std::vector<std::filesystem::path>()> run;
  // Stage to name when an input is missing.
  std::string upstream_hint;
};

enum class StageOutcome { kRan, kSkipped };

// Skips when a manifest exists whose version-independent fingerprint and
// input hashes match and whose outputs still hash to the recorded values.
StageOutcome run_stage(const Context& ctx, const StageSpec& spec);

}  // namespace morphome::pipeline

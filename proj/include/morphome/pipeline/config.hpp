#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "morphome/evaluation.hpp"
#include "morphome/sampler.hpp"
#include "morphome/synthetic.hpp"
#include "morphome/transducer/trainer.hpp"

namespace morphome::pipeline {

using Json = nlohmann::ordered_json;

// Problems the user can fix (bad config, missing upstream artifacts).
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public UserError {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

// docs/config.schema.json, compiled in.
const Json& config_schema();

// Checks `value` against the subset of JSON Schema used by the config
// schema (type, properties, additionalProperties, required, enum, items,
// minItems, minLength, minimum/maximum and their exclusive forms) and fills
// object defaults. Diagnostics are appended as "$.path: message".
Json apply_schema(const Json& schema, const Json& value, std::vector<std::string>& issues, const std::string& path = "$");

struct Subset {
  std::vector<std::string> conditions;  // empty = all
  std::vector<int> bins;
  std::vector<int> runs;

  bool contains(const DatasetKey& key) const;
};

struct ExperimentConfig {
  std::filesystem::path base_dir;
  std::filesystem::path output_dir;
  std::filesystem::path corpus_path;   // empty when synthetic
  std::filesystem::path endings_path;  // empty = built-in inventory
  ConflictPolicy conflict_policy = ConflictPolicy::kError;
  bool synthetic = false;
  synthetic::LexiconSpec synthetic_spec;
  SamplingPlan plan;
  TrainConfig model;
  bool keep_checkpoints = true;
  Subset training;
  std::vector<int> sweep_batch_sizes;
  Subset sweep;
  SummaryOptions evaluation;
  bool include_nl = false;
  int top_pairs = 3;

  Json resolved;  // full config with defaults, as embedded in manifests

  std::vector<DatasetKey> datasets() const;          // every sampled dataset
  std::vector<DatasetKey> training_datasets() const;  // the training subset
  std::vector<DatasetKey> sweep_datasets() const;
};

// Paths: corpus paths resolve against $MORPHOME_DATA_ROOT when it is set,
// everything else against base_dir.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& file);

std::filesystem::path resolve_data_path(const std::string& path, const std::filesystem::path& base_dir);

}  // namespace morphome::pipeline

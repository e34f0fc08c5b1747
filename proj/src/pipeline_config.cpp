#include "morphome/pipeline/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "morphome/config_schema.hpp"

namespace morphome::pipeline {

namespace fs = std::filesystem;

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out = "invalid configuration:";
  for (const auto& i : issues) out += "\n  " + i;
  return out;
}

bool has_type(const Json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  return false;
}

bool valid_name(const std::string& name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.' ||
           c == '%';
  });
}

template <typename T>
std::vector<T> list(const Json& v) {
  return v.get<std::vector<T>>();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues) : UserError(join_issues(issues)), issues_(std::move(issues)) {}

const Json& config_schema() {
  static const Json schema = Json::parse(kConfigSchemaText);
  return schema;
}

Json apply_schema(const Json& schema, const Json& value, std::vector<std::string>& issues, const std::string& path) {
  if (schema.contains("type") && !has_type(value, schema["type"].get<std::string>())) {
    issues.push_back(path + ": expected " + schema["type"].get<std::string>() + ", got " + value.dump());
    return value;
  }
  if (schema.contains("enum")) {
    const auto& options = schema["enum"];
    if (std::find(options.begin(), options.end(), value) == options.end())
      issues.push_back(path + ": " + value.dump() + " is not one of " + options.dump());
  }
  if (value.is_number()) {
    double x = value.get<double>();
    if (schema.contains("minimum") && x < schema["minimum"].get<double>())
      issues.push_back(path + ": must be >= " + schema["minimum"].dump());
    if (schema.contains("maximum") && x > schema["maximum"].get<double>())
      issues.push_back(path + ": must be <= " + schema["maximum"].dump());
    if (schema.contains("exclusiveMinimum") && x <= schema["exclusiveMinimum"].get<double>())
      issues.push_back(path + ": must be > " + schema["exclusiveMinimum"].dump());
    if (schema.contains("exclusiveMaximum") && x >= schema["exclusiveMaximum"].get<double>())
      issues.push_back(path + ": must be < " + schema["exclusiveMaximum"].dump());
  }
  if (value.is_string() && schema.contains("minLength") &&
      value.get<std::string>().size() < schema["minLength"].get<std::size_t>())
    issues.push_back(path + ": must not be empty");

  if (value.is_array()) {
    if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>())
      issues.push_back(path + ": needs at least " + schema["minItems"].dump() + " item(s)");
    Json out = Json::array();
    for (std::size_t i = 0; i < value.size(); ++i)
      out.push_back(schema.contains("items") ? apply_schema(schema["items"], value[i], issues, path + "[" + std::to_string(i) + "]")
                                             : value[i]);
    return out;
  }
  if (!value.is_object()) return value;

  Json out = Json::object();
  const Json empty = Json::object();
  const Json& props = schema.contains("properties") ? schema["properties"] : empty;
  if (schema.value("additionalProperties", true) == false) {
    for (const auto& [key, v] : value.items())
      if (!props.contains(key)) issues.push_back(path + "." + key + ": unknown key");
  }
  if (schema.contains("required"))
    for (const auto& key : schema["required"])
      if (!value.contains(key.get<std::string>())) issues.push_back(path + "." + key.get<std::string>() + ": required");
  for (const auto& [key, sub] : props.items()) {
    if (value.contains(key)) out[key] = apply_schema(sub, value[key], issues, path + "." + key);
    else if (sub.contains("default")) out[key] = apply_schema(sub, sub["default"], issues, path + "." + key);
  }
  return out;
}

bool Subset::contains(const DatasetKey& key) const {
  auto in = [](const auto& v, const auto& x) { return v.empty() || std::find(v.begin(), v.end(), x) != v.end(); };
  return in(conditions, key.condition) && in(bins, key.bin) && in(runs, key.run);
}

std::vector<DatasetKey> ExperimentConfig::datasets() const {
  std::vector<DatasetKey> out;
  for (const auto& c : plan.conditions)
    for (int b = 0; b < plan.bins; ++b)
      for (int r = 0; r < plan.runs; ++r) out.push_back({c.name, b, r});
  return out;
}

std::vector<DatasetKey> ExperimentConfig::training_datasets() const {
  std::vector<DatasetKey> out;
  for (const auto& k : datasets())
    if (training.contains(k)) out.push_back(k);
  return out;
}

std::vector<DatasetKey> ExperimentConfig::sweep_datasets() const {
  std::vector<DatasetKey> out;
  for (const auto& k : datasets())
    if (sweep.contains(k)) out.push_back(k);
  return out;
}

fs::path resolve_data_path(const std::string& path, const fs::path& base_dir) {
  if (path.empty()) return {};
  fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("MORPHOME_DATA_ROOT"); root && *root) return fs::path(root) / p;
  return base_dir / p;
}

ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir) {
  Json user;
  try {
    user = Json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({std::string("$: not valid JSON (") + e.what() + ")"});
  }
  std::vector<std::string> issues;
  Json r = apply_schema(config_schema(), user, issues);
  if (!issues.empty()) throw ConfigError(issues);

  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  cfg.resolved = r;
  cfg.output_dir = fs::path(r["output_dir"].get<std::string>());
  if (cfg.output_dir.is_relative()) cfg.output_dir = base_dir / cfg.output_dir;

  const Json& corpus = r["corpus"];
  const Json& syn = corpus["synthetic"];
  cfg.synthetic = syn["enabled"].get<bool>();
  if (!cfg.synthetic) {
    if (corpus["path"].get<std::string>().empty())
      issues.push_back("$.corpus.path: required unless corpus.synthetic.enabled is true");
    cfg.corpus_path = resolve_data_path(corpus["path"].get<std::string>(), base_dir);
  }
  cfg.endings_path = resolve_data_path(corpus["endings"].get<std::string>(), base_dir);
  cfg.conflict_policy = corpus["conflict_policy"] == "drop_lemma" ? ConflictPolicy::kDropLemma : ConflictPolicy::kError;
  cfg.synthetic_spec.l_count = syn["l_count"].get<int>();
  cfg.synthetic_spec.nl_count = syn["nl_count"].get<int>();
  cfg.synthetic_spec.l_vowel_only = syn["l_vowel_only"].get<int>();
  cfg.synthetic_spec.nl_ar_share = syn["nl_ar_share"].get<double>();
  cfg.synthetic_spec.nl_diphthong_share = syn["nl_diphthong_share"].get<double>();
  cfg.synthetic_spec.l_er_share = syn["l_er_share"].get<double>();
  cfg.synthetic_spec.seed = syn["seed"].get<std::uint64_t>();

  const Json& s = r["sampling"];
  cfg.plan.conditions.clear();
  std::set<std::string> names;
  for (const auto& c : s["conditions"]) {
    FrequencyCondition fc{c["name"].get<std::string>(), c["l"].get<int>(), c["nl"].get<int>()};
    if (!valid_name(fc.name)) issues.push_back("$.sampling.conditions: name '" + fc.name + "' must use [A-Za-z0-9._%-]");
    if (!names.insert(fc.name).second) issues.push_back("$.sampling.conditions: duplicate name '" + fc.name + "'");
    if (fc.total() == 0) issues.push_back("$.sampling.conditions: '" + fc.name + "' has no lemmas");
    cfg.plan.conditions.push_back(fc);
  }
  cfg.plan.split = {s["split"]["train"].get<int>(), s["split"]["dev"].get<int>(), s["split"]["test"].get<int>()};
  for (const auto& c : cfg.plan.conditions)
    if (c.total() != cfg.plan.split.total())
      issues.push_back("$.sampling.conditions: '" + c.name + "' has " + std::to_string(c.total()) +
                       " lemmas but the split totals " + std::to_string(cfg.plan.split.total()));
  cfg.plan.bins = s["bins"].get<int>();
  cfg.plan.runs = s["runs"].get<int>();
  cfg.plan.master_seed = r["master_seed"].get<std::uint64_t>();
  cfg.plan.source_order = s["source_order"] == "canonical" ? SourceOrder::kCanonical : SourceOrder::kRandom;

  const Json& m = r["model"];
  TrainConfig& t = cfg.model;
  t.arch.layers = m["layers"].get<int>();
  t.arch.heads = m["heads"].get<int>();
  t.arch.embedding_dim = m["embedding_dim"].get<int>();
  t.arch.ff_dim = m["ff_dim"].get<int>();
  t.arch.dropout = m["dropout"].get<double>();
  t.arch.positions = m["positions"] == "learned" ? PositionEncoding::kLearned : PositionEncoding::kSinusoidal;
  t.arch.activation = m["activation"] == "gelu" ? Activation::kGelu : Activation::kRelu;
  t.arch.tie_output = m["tie_output"].get<bool>();
  t.max_updates = m["max_updates"].get<long>();
  t.batch_size = m["batch_size"].get<int>();
  t.batch_unit = m["batch_unit"] == "tokens" ? BatchUnit::kTokens : BatchUnit::kExamples;
  t.checkpoint_every_epochs = m["checkpoint_every_epochs"].get<int>();
  t.checkpoint_every_updates = m["checkpoint_every_updates"].get<long>();
  t.adam.lr = m["lr"].get<double>();
  t.adam.beta1 = m["beta1"].get<double>();
  t.adam.beta2 = m["beta2"].get<double>();
  t.adam.eps = m["eps"].get<double>();
  t.schedule.kind = m["schedule"] == "inverse_sqrt" ? nn::LrScheduleKind::kInverseSqrt : nn::LrScheduleKind::kConstant;
  t.schedule.base_lr = t.adam.lr;
  t.schedule.warmup_updates = m["warmup_updates"].get<long>();
  t.label_smoothing = m["label_smoothing"].get<double>();
  t.clip_norm = m["clip_norm"].get<double>();
  t.seed = m["seed"].get<std::uint64_t>();
  t.beam_width = m["beam_width"].get<int>();
  t.max_len_margin = m["max_len_margin"].get<int>();
  t.dev_decoding = m["dev_decoding"] == "beam" ? DevDecoding::kBeam : DevDecoding::kGreedy;
  cfg.keep_checkpoints = m["keep_checkpoints"].get<bool>();
  try {
    t.validate();
  } catch (const std::exception& e) {
    issues.push_back(std::string("$.model: ") + e.what());
  }

  auto subset = [&](const Json& j, const std::string& where) {
    Subset sub{list<std::string>(j["conditions"]), list<int>(j["bins"]), list<int>(j["runs"])};
    for (const auto& c : sub.conditions)
      if (!names.count(c)) issues.push_back(where + ".conditions: unknown condition '" + c + "'");
    for (int b : sub.bins)
      if (b >= cfg.plan.bins) issues.push_back(where + ".bins: bin " + std::to_string(b) + " out of range");
    for (int x : sub.runs)
      if (x >= cfg.plan.runs) issues.push_back(where + ".runs: run " + std::to_string(x) + " out of range");
    return sub;
  };
  cfg.training = subset(r["training"], "$.training");
  cfg.sweep = subset(r["sweep"], "$.sweep");
  cfg.sweep_batch_sizes = list<int>(r["sweep"]["batch_sizes"]);

  const Json& e = r["evaluation"];
  cfg.evaluation.ci = e["ci"] == "bootstrap" ? CiMethod::kBootstrap : CiMethod::kNormal;
  cfg.evaluation.z = e["z"].get<double>();
  cfg.evaluation.bootstrap_samples = e["bootstrap_samples"].get<int>();
  cfg.evaluation.bootstrap_seed = e["bootstrap_seed"].get<std::uint64_t>();

  cfg.include_nl = r["analysis"]["include_nl"].get<bool>();
  cfg.top_pairs = r["analysis"]["top_pairs"].get<int>();

  if (!issues.empty()) throw ConfigError(issues);
  return cfg;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw UserError("cannot read config file " + file.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), fs::absolute(file).parent_path());
}

}  // namespace morphome::pipeline

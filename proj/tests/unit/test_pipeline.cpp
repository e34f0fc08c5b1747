#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "morphome/pipeline/stages.hpp"

using namespace morphome;
using namespace morphome::pipeline;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("morphome_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> config_issues(const std::string& text) {
  try {
    parse_config(text, "/tmp");
  } catch (const ConfigError& e) {
    return e.issues();
  }
  return {};
}

bool has_issue(const std::vector<std::string>& issues, const std::string& needle) {
  for (const auto& i : issues)
    if (i.find(needle) != std::string::npos) return true;
  return false;
}

// Every output file except manifests, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  return out;
}

const char* kTinyConfig = R"({
  // comments are allowed
  "output_dir": "out",
  "corpus": {"synthetic": {"enabled": true, "l_count": 30, "nl_count": 40, "l_vowel_only": 2}},
  "sampling": {
    "conditions": [{"name": "90L-10NL", "l": 9, "nl": 1}, {"name": "10L-90NL", "l": 1, "nl": 9}],
    "split": {"train": 6, "dev": 2, "test": 2}, "bins": 1, "runs": 1
  },
  "model": {"layers": 1, "heads": 2, "embedding_dim": 8, "ff_dim": 16, "max_updates": 6, "batch_size": 128,
            "checkpoint_every_updates": 3, "beam_width": 1, "keep_checkpoints": false}
})";

}  // namespace

TEST_CASE("sha256 matches the standard test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  TempDir dir("sha");
  std::ofstream(dir.path / "f", std::ios::binary) << "abc";
  CHECK(sha256_file(dir.path / "f") == sha256_hex("abc"));
}

TEST_CASE("compiled schema is the shipped schema file") {
  std::ifstream in(fs::path(MORPHOME_SOURCE_DIR) / "docs" / "config.schema.json");
  REQUIRE(in);
  CHECK(Json::parse(in) == config_schema());
}

TEST_CASE("an almost empty config takes every default") {
  auto c = parse_config(R"({"corpus": {"path": "corpus.tsv"}})", "/base");
  CHECK(c.output_dir == fs::path("/base/runs/experiment"));
  CHECK(c.plan.master_seed == 20240601u);
  REQUIRE(c.plan.conditions.size() == 3);
  CHECK(c.plan.conditions[0].name == "10L-90NL");
  CHECK(c.plan.conditions[2].l_count == 300);
  CHECK(c.plan.split.train == 239);
  CHECK(c.plan.split.dev == 27);
  CHECK(c.plan.split.test == 67);
  CHECK(c.plan.bins == 4);
  CHECK(c.plan.runs == 3);
  CHECK(c.model.arch.layers == 4);
  CHECK(c.model.arch.embedding_dim == 256);
  CHECK(c.model.batch_size == 400);
  CHECK(c.model.beam_width == 5);
  CHECK(c.datasets().size() == 36);
  CHECK(c.training_datasets().size() == 36);
  CHECK(c.sweep_datasets().size() == 3);
  CHECK(c.sweep_batch_sizes.size() == 8);
  CHECK(c.evaluation.z == doctest::Approx(1.96));
  CHECK(c.top_pairs == 3);
  CHECK(c.resolved["model"]["dropout"].get<double>() == doctest::Approx(0.1));
  CHECK(c.resolved["analysis"]["include_nl"] == false);
}

TEST_CASE("config errors name the offending keys") {
  auto issues = config_issues(R"({"bogus": 1, "model": {"layers": "four", "lr": -1}, "corpus": {"path": "x"}})");
  CHECK(has_issue(issues, "$.bogus"));
  CHECK(has_issue(issues, "$.model.layers"));
  CHECK(has_issue(issues, "$.model.lr"));

  CHECK(has_issue(config_issues("{}"), "corpus"));
  CHECK(has_issue(config_issues("{not json"), "JSON"));
  CHECK(has_issue(config_issues(R"({"corpus": {"path": "x"}, "model": {"dropout": 1.0}})"), "$.model.dropout"));
  CHECK(has_issue(config_issues(R"({"corpus": {"path": "x"}, "evaluation": {"ci": "exact"}})"), "$.evaluation.ci"));
  // conditions must fill exactly the split
  CHECK(!config_issues(R"({"corpus": {"path": "x"}, "sampling": {"conditions": [{"name": "a", "l": 1, "nl": 1}]}})")
             .empty());
  CHECK(!config_issues(R"({"corpus": {"path": "x"}, "training": {"bins": [9]}})").empty());
  CHECK(!config_issues(R"({"corpus": {"path": "x"}, "training": {"conditions": ["nope"]}})").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/morphome.jsonc"), UserError);
}

TEST_CASE("corpus paths follow MORPHOME_DATA_ROOT") {
  ::unsetenv("MORPHOME_DATA_ROOT");
  CHECK(resolve_data_path("c.tsv", "/cfg") == fs::path("/cfg/c.tsv"));
  ::setenv("MORPHOME_DATA_ROOT", "/data", 1);
  CHECK(resolve_data_path("c.tsv", "/cfg") == fs::path("/data/c.tsv"));
  CHECK(resolve_data_path("/abs/c.tsv", "/cfg") == fs::path("/abs/c.tsv"));
  auto c = parse_config(R"({"corpus": {"path": "c.tsv"}, "output_dir": "o"})", "/cfg");
  CHECK(c.corpus_path == fs::path("/data/c.tsv"));
  CHECK(c.output_dir == fs::path("/cfg/o"));
  ::unsetenv("MORPHOME_DATA_ROOT");
}

TEST_CASE("run_stage skips up-to-date work and reruns on any change") {
  TempDir dir("stage");
  auto cfg = parse_config(R"({"corpus": {"path": "x"}, "output_dir": "root"})", dir.path);
  Context ctx{cfg, false, {}};
  fs::create_directories(ctx.root());
  std::ofstream(ctx.root() / "in.txt") << "input";
  int runs = 0;
  StageSpec spec;
  spec.stage = "demo";
  spec.manifest = ctx.root() / "demo" / "manifest.json";
  spec.inputs = {ctx.root() / "in.txt"};
  spec.fingerprint_config = {{"k", 1}};
  spec.run = [&] {
    ++runs;
    fs::create_directories(ctx.root() / "demo");
    std::ofstream(ctx.root() / "demo" / "out.txt") << "output";
    return std::vector<fs::path>{ctx.root() / "demo" / "out.txt"};
  };

  CHECK(run_stage(ctx, spec) == StageOutcome::kRan);
  CHECK(run_stage(ctx, spec) == StageOutcome::kSkipped);
  auto m = read_manifest(spec.manifest);
  REQUIRE(m);
  CHECK(m->stage == "demo");
  CHECK(m->version == kSoftwareVersion);
  REQUIRE(m->outputs.size() == 1);
  CHECK(m->outputs[0].path == "demo/out.txt");
  CHECK(m->outputs[0].sha256 == sha256_hex("output"));
  CHECK(m->config == cfg.resolved);

  std::ofstream(ctx.root() / "demo" / "out.txt") << "tampered";
  CHECK(run_stage(ctx, spec) == StageOutcome::kRan);
  std::ofstream(ctx.root() / "in.txt") << "new input";
  CHECK(run_stage(ctx, spec) == StageOutcome::kRan);
  spec.fingerprint_config = {{"k", 2}};
  CHECK(run_stage(ctx, spec) == StageOutcome::kRan);
  CHECK(run_stage(ctx, spec) == StageOutcome::kSkipped);
  ctx.force = true;
  CHECK(run_stage(ctx, spec) == StageOutcome::kRan);
  CHECK(runs == 5);

  spec.inputs.push_back(ctx.root() / "missing.txt");
  spec.upstream_hint = "ingest";
  try {
    run_stage(ctx, spec);
    FAIL("expected a UserError");
  } catch (const UserError& e) {
    CHECK(std::string(e.what()).find("'ingest'") != std::string::npos);
  }
}

TEST_CASE("downstream stages refuse to run without upstream outputs") {
  TempDir dir("upstream");
  Context ctx{parse_config(kTinyConfig, dir.path), false, {}};
  CHECK_THROWS_AS(stage_classify(ctx), UserError);
  CHECK_THROWS_AS(stage_train(ctx), UserError);
  CHECK_THROWS_AS(stage_evaluate(ctx), UserError);
}

TEST_CASE("tiny synthetic experiment: complete, idempotent and reproducible") {
  TempDir dir("e2e");
  std::vector<std::string> log;
  Context ctx{parse_config(kTinyConfig, dir.path), false, [&](const std::string& m) { log.push_back(m); }};
  run_all(ctx);
  const fs::path root = ctx.root();

  for (const char* f : {"ingest/tables.tsv", "classify/classes.tsv", "triples/summary.tsv",
                        "sample/90L-10NL/bin0/run0/train.src", "sample/10L-90NL/bin0/run0/dataset.json",
                        "train/90L-10NL/bin0/run0/best.bin", "predict/10L-90NL/bin0/run0/predictions.tsv",
                        "evaluate/records.tsv", "evaluate/summary.tsv", "analyze/cell_combinations.tsv",
                        "analyze/contrasts.tsv", "analyze/observations.tsv", "analyze/census.tsv",
                        "analyze/confusion/90L-10NL.tsv", "report/report.txt", "report/index.tsv"})
    CHECK_MESSAGE(fs::exists(root / f), f);
  CHECK_FALSE(fs::exists(root / "train/90L-10NL/bin0/run0/checkpoint_3.bin"));  // keep_checkpoints=false

  // 10 lemmas x 660 triples split 6/2/2
  auto records = slurp(root / "evaluate/records.tsv");
  CHECK(std::count(records.begin(), records.end(), '\n') == 1 + 2 * 2 * 660);

  std::string report = slurp(root / "report/report.txt");
  auto count = [&](const std::string& needle) {
    int n = 0;
    for (auto p = report.find(needle); p != std::string::npos; p = report.find(needle, p + 1)) ++n;
    return n;
  };
  CHECK(count("## accuracy summary ") == 2);
  CHECK(count("## cell combinations ") == 2);

  auto first = snapshot(root);
  log.clear();
  run_all(ctx);
  for (const auto& line : log) CHECK_MESSAGE(line.find("running") == std::string::npos, line);
  CHECK(snapshot(root) == first);

  // deleted outputs are regenerated byte for byte
  fs::remove_all(root / "evaluate");
  fs::remove_all(root / "train");
  fs::remove(root / "analyze" / "census.tsv");
  run_all(ctx);
  CHECK(snapshot(root) == first);

  // and so is a fresh experiment directory
  auto other = parse_config(kTinyConfig, dir.path / "again");
  Context ctx2{other, false, {}};
  run_all(ctx2);
  CHECK(snapshot(ctx2.root()) == first);
}

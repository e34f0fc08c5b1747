#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>

#include "morphome/pipeline/stages.hpp"

using namespace morphome;
using namespace morphome::pipeline;

namespace {

void log_line(const std::string& message) {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  localtime_r(&t, &tm);
  char stamp[16];
  std::strftime(stamp, sizeof stamp, "%H:%M:%S", &tm);
  std::fprintf(stderr, "[%s] %s\n", stamp, message.c_str());
}

struct Options {
  std::string config = "morphome.jsonc";
  bool force = false;
  bool quiet = false;
  Subset filter;
  std::vector<int> batch_sizes;
};

void add_filters(CLI::App* cmd, Options& o) {
  cmd->add_option("--condition", o.filter.conditions, "Only these frequency conditions (repeatable)");
  cmd->add_option("--bin", o.filter.bins, "Only these bins (repeatable)");
  cmd->add_option("--run", o.filter.runs, "Only these runs (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morphome: frequency-controlled reinflection datasets, a character transducer, and the L-morphome analyses"};
  app.require_subcommand(1);
  Options o;
  app.add_option("-c,--config", o.config, "Experiment config (JSON with comments; see docs/config.schema.json)")
      ->capture_default_str();
  app.add_flag("-f,--force", o.force, "Rerun stages even when their inputs and config are unchanged");
  app.add_flag("-q,--quiet", o.quiet, "Only print errors");

  struct Stage {
    const char* name;
    const char* help;
    bool filtered;
  };
  const Stage stages[] = {
      {"ingest", "Parse the UniMorph corpus (or generate the synthetic one) into complete 12-cell tables", false},
      {"classify", "Classify tables as L or NL and derive consonant pairs", false},
      {"triples", "Generate the per-lemma triple inventory and its zone-pattern counts", false},
      {"sample", "Build the per-condition, per-bin, per-run datasets", true},
      {"train", "Train one transducer per selected dataset", true},
      {"predict", "Decode the test set of every trained dataset", true},
      {"evaluate", "Score predictions and summarize accuracies with confidence intervals", false},
      {"analyze", "Cell combinations, knowledge states, consonant pairs and confusion matrices", false},
      {"report", "Assemble all tables into report/report.txt", false},
      {"run", "Run every stage from ingest to report, skipping up-to-date stages", false},
  };
  std::map<std::string, CLI::App*> commands;
  for (const auto& s : stages) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    if (s.filtered) add_filters(cmd, o);
    commands[s.name] = cmd;
  }
  auto* sweep = app.add_subcommand("sweep", "Train and score one model per batch size (sizes default to the config)");
  sweep->add_option("--batch-sizes", o.batch_sizes, "Comma-separated batch sizes")->delimiter(',');
  auto* validate = app.add_subcommand("validate", "Check a config file and print it with defaults filled in");

  auto* synth = app.add_subcommand("synth", "Write a synthetic pseudo-Spanish lexicon as UniMorph TSV");
  synthetic::LexiconSpec spec;
  synthetic::NoiseSpec noise;
  std::string synth_out;
  synth->add_option("-o,--out", synth_out, "Output TSV path")->required();
  synth->add_option("--l-count", spec.l_count, "L-shaped lemmas")->capture_default_str();
  synth->add_option("--nl-count", spec.nl_count, "NL-shaped lemmas")->capture_default_str();
  synth->add_option("--l-vowel-only", spec.l_vowel_only, "L lemmas whose alternation is vowel-only (at most --l-count)")
      ->capture_default_str();
  synth->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  synth->add_option("--incomplete", noise.incomplete_lemmas, "Extra lemmas with a missing cell");
  synth->add_option("--out-of-inventory", noise.out_of_inventory_lines, "Extra non-present entries");
  synth->add_option("--duplicates", noise.duplicate_lines, "Duplicated lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      if (spec.l_vowel_only > spec.l_count) throw UserError("--l-vowel-only exceeds --l-count");
      auto tables = synthetic::generate_lexicon(spec);
      std::ofstream out(synth_out, std::ios::binary);
      if (!out) throw UserError("cannot write " + synth_out);
      synthetic::write_unimorph_with_noise(out, tables, noise);
      return 0;
    }
    Context ctx{load_config(o.config), o.force, o.quiet ? Logger{} : Logger{log_line}};
    if (validate->parsed()) {
      std::cout << ctx.config.resolved.dump(2) << '\n';
      return 0;
    }
    if (commands["ingest"]->parsed()) stage_ingest(ctx);
    else if (commands["classify"]->parsed()) stage_classify(ctx);
    else if (commands["triples"]->parsed()) stage_triples(ctx);
    else if (commands["sample"]->parsed()) stage_sample(ctx, o.filter);
    else if (commands["train"]->parsed()) stage_train(ctx, o.filter);
    else if (commands["predict"]->parsed()) stage_predict(ctx, o.filter);
    else if (commands["evaluate"]->parsed()) stage_evaluate(ctx);
    else if (commands["analyze"]->parsed()) stage_analyze(ctx);
    else if (commands["report"]->parsed()) stage_report(ctx);
    else if (commands["run"]->parsed()) run_all(ctx);
    else if (sweep->parsed()) stage_sweep(ctx, o.batch_sizes);
    return 0;
  } catch (const UserError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const CorpusError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
}

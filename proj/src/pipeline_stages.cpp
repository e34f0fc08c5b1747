#include "morphome/pipeline/stages.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "morphome/analysis.hpp"
#include "morphome/rng.hpp"

namespace morphome::pipeline {

namespace fs = std::filesystem;

namespace {

template <typename Fn>
fs::path write_tsv(const fs::path& path, Fn&& fill) {
  std::ostringstream out;
  fill(out);
  write_text_atomic(path, out.str());
  return path;
}

fs::path key_path(const DatasetKey& key) { return fs::path(key.condition) / ("bin" + std::to_string(key.bin)) / ("run" + std::to_string(key.run)); }

std::vector<DatasetKey> select(const std::vector<DatasetKey>& keys, const Subset& filter) {
  std::vector<DatasetKey> out;
  for (const auto& k : keys)
    if (filter.contains(k)) out.push_back(k);
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot read " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<InflectionTable> read_tables_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot read " + path.string());
  return read_tables(in);
}

Json dataset_seed_json(const DatasetSeeds& s) {
  return {{"master", s.master}, {"roster", s.roster}, {"order", s.order}, {"bins", s.bins}, {"split", s.split}, {"run", s.run}};
}

Json train_fingerprint(const ExperimentConfig& cfg, const TrainConfig& t) {
  Json m = cfg.resolved["model"];
  m["batch_size"] = t.batch_size;
  m.erase("keep_checkpoints");
  if (t.dev_decoding == DevDecoding::kGreedy) m.erase("beam_width");
  return m;
}

void train_one(const Context& ctx, const std::string& stage, const std::string& key, const DatasetKey& dataset,
               const TrainConfig& tc, const fs::path& out_dir) {
  const fs::path data = dataset_dir(ctx, dataset);
  StageSpec spec;
  spec.stage = stage;
  spec.key = key;
  spec.manifest = out_dir / "manifest.json";
  spec.inputs = {data / "train.src", data / "train.tgt", data / "dev.src", data / "dev.tgt"};
  spec.fingerprint_config = train_fingerprint(ctx.config, tc);
  spec.seeds = {{"training", tc.seed}, {"init", derive_seed(tc.seed, "init")}, {"dropout", derive_seed(tc.seed, "dropout")}};
  spec.upstream_hint = "sample";
  spec.run = [&] {
    fs::remove_all(out_dir);
    auto train = read_seq_pairs(data / "train");
    auto dev = read_seq_pairs(data / "dev");
    auto report = train_transducer(tc, train, dev, out_dir.string(), [&](const std::string& m) { ctx.info(key + ": " + m); });
    std::vector<fs::path> outs{out_dir / "best.bin", out_dir / "vocab.txt", out_dir / "train_report.json"};
    for (const auto& c : report.checkpoints) {
      if (ctx.config.keep_checkpoints) outs.push_back(c.path);
      else fs::remove(c.path);
    }
    return outs;
  };
  run_stage(ctx, spec);
}

void predict_one(const Context& ctx, const std::string& stage, const std::string& key, const DatasetKey& dataset,
                 const fs::path& checkpoint, const fs::path& out_file, const std::string& upstream) {
  const fs::path data = dataset_dir(ctx, dataset);
  StageSpec spec;
  spec.stage = stage;
  spec.key = key;
  spec.manifest = out_file.parent_path() / "manifest.json";
  spec.inputs = {checkpoint, data / "test.src", data / "test.tgt"};
  spec.fingerprint_config = {{"beam_width", ctx.config.model.beam_width}};
  spec.upstream_hint = upstream;
  spec.run = [&] {
    auto ckpt = read_checkpoint(checkpoint.string());
    auto model = model_from_checkpoint(ckpt);
    auto test = read_seq_pairs(data / "test");
    fs::create_directories(out_file.parent_path());
    fs::path tmp = out_file;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      predict_stream(model, ckpt.vocab, ckpt.max_len, test, ctx.config.model.beam_width, out);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, out_file);
    return std::vector<fs::path>{out_file};
  };
  run_stage(ctx, spec);
}

std::vector<PredictionRecord> score_dataset(const Context& ctx, const DatasetKey& key, const fs::path& predictions,
                                            const EndingInventory& inventory) {
  std::ifstream sidecar(dataset_dir(ctx, key) / "test.tsv", std::ios::binary);
  std::ifstream preds(predictions, std::ios::binary);
  if (!sidecar || !preds) throw UserError("missing test sidecar or predictions for " + key.id());
  return score_predictions(key, read_sidecar(sidecar), read_predictions(preds), inventory);
}

struct Tsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Tsv read_tsv(const fs::path& path) {
  Tsv t;
  auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> fields;
    for (auto f : split(lines[i], '\t')) fields.emplace_back(f);
    if (i == 0) t.header = std::move(fields);
    else t.rows.push_back(std::move(fields));
  }
  return t;
}

void emit_section(std::ostream& out, const std::string& title, const Tsv& t, const std::string& column = {},
                  const std::string& value = {}) {
  std::size_t col = t.header.size();
  if (!column.empty()) col = static_cast<std::size_t>(std::find(t.header.begin(), t.header.end(), column) - t.header.begin());
  out << "## " << title << '\n';
  auto line = [&](const std::vector<std::string>& f) {
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "\t" : "") << f[i];
    out << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows)
    if (col >= t.header.size() || (col < r.size() && r[col] == value)) line(r);
  out << '\n';
}

}  // namespace

fs::path dataset_dir(const Context& ctx, const DatasetKey& key) { return ctx.root() / "sample" / key_path(key); }
fs::path model_dir(const Context& ctx, const DatasetKey& key) { return ctx.root() / "train" / key_path(key); }
fs::path prediction_file(const Context& ctx, const DatasetKey& key) {
  return ctx.root() / "predict" / key_path(key) / "predictions.tsv";
}

EndingInventory load_inventory(const ExperimentConfig& config) {
  if (config.endings_path.empty()) return EndingInventory::spanish_present();
  std::ifstream in(config.endings_path, std::ios::binary);
  if (!in) throw UserError("cannot read ending inventory " + config.endings_path.string());
  return EndingInventory::read(in);
}

std::vector<SeqPair> read_seq_pairs(const fs::path& stem) {
  fs::path src = stem, tgt = stem;
  src += ".src";
  tgt += ".tgt";
  auto s = read_lines(src);
  auto t = read_lines(tgt);
  if (s.size() != t.size()) throw std::runtime_error(stem.string() + ": .src and .tgt differ in length");
  std::vector<SeqPair> pairs(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) pairs[i] = {std::move(s[i]), std::move(t[i])};
  return pairs;
}

std::uint64_t training_seed(const ExperimentConfig& config, const DatasetKey& key) {
  const std::string bin = std::to_string(key.bin), run = std::to_string(key.run);
  return derive_seed(config.model.seed, {"train", key.condition, "bin", bin, "run", run});
}

void stage_ingest(const Context& ctx) {
  const auto& cfg = ctx.config;
  const fs::path dir = ctx.root() / "ingest";
  if (!cfg.synthetic && !fs::exists(cfg.corpus_path))
    throw UserError("ingest: corpus file " + cfg.corpus_path.string() +
                    " not found (check corpus.path and MORPHOME_DATA_ROOT)");
  StageSpec spec;
  spec.stage = "ingest";
  spec.manifest = dir / "manifest.json";
  if (!cfg.synthetic) spec.inputs = {cfg.corpus_path};
  spec.fingerprint_config = cfg.resolved["corpus"];
  if (cfg.synthetic) spec.seeds = {{"synthetic", cfg.synthetic_spec.seed}};
  spec.run = [&] {
    std::vector<fs::path> outs;
    fs::path corpus = cfg.corpus_path;
    if (cfg.synthetic) {
      corpus = write_tsv(dir / "corpus.tsv", [&](std::ostream& out) {
        synthetic::write_unimorph_with_noise(out, synthetic::generate_lexicon(cfg.synthetic_spec), {});
      });
      outs.push_back(corpus);
    }
    std::ifstream in(corpus, std::ios::binary);
    ParseStats stats;
    auto entries = parse_unimorph(in, &stats);
    AssemblyReport report;
    auto tables = assemble_tables(entries, &report, cfg.conflict_policy);
    outs.push_back(write_tsv(dir / "tables.tsv", [&](std::ostream& out) { write_tables(out, tables); }));
    outs.push_back(write_tsv(dir / "report.tsv", [&](std::ostream& out) {
      out << "measure\tcount\n"
          << "lines\t" << stats.lines << "\nblank_lines\t" << stats.blank << "\naccepted_entries\t" << stats.accepted
          << "\nout_of_inventory_entries\t" << stats.out_of_inventory << "\nduplicates_removed\t"
          << report.duplicates_removed << "\nincomplete_lemmas\t" << report.incomplete.size()
          << "\nconflicting_lemmas\t" << report.conflicting.size() << "\ncomplete_lemmas\t" << tables.size() << '\n';
    }));
    outs.push_back(write_tsv(dir / "dropped.tsv", [&](std::ostream& out) {
      out << "lemma\treason\tcells_present\n";
      for (const auto& [lemma, n] : report.incomplete) out << to_utf8(lemma) << "\tincomplete\t" << n << '\n';
      for (const auto& lemma : report.conflicting) out << to_utf8(lemma) << "\tconflicting\tNA\n";
    }));
    return outs;
  };
  run_stage(ctx, spec);
}

void stage_classify(const Context& ctx) {
  const auto& cfg = ctx.config;
  const fs::path dir = ctx.root() / "classify";
  StageSpec spec;
  spec.stage = "classify";
  spec.manifest = dir / "manifest.json";
  spec.inputs = {ctx.root() / "ingest" / "tables.tsv"};
  if (!cfg.endings_path.empty()) spec.inputs.push_back(cfg.endings_path);
  spec.fingerprint_config = {{"endings", cfg.resolved["corpus"]["endings"]}};
  spec.upstream_hint = "ingest";
  spec.run = [&] {
    auto inventory = load_inventory(cfg);
    auto tables = read_tables_file(ctx.root() / "ingest" / "tables.tsv");
    classify_all(tables, inventory);
    std::size_t l = 0;
    for (const auto& t : tables) l += t.verb_class == VerbClass::kL;
    std::vector<fs::path> outs;
    outs.push_back(write_tsv(dir / "tables.tsv", [&](std::ostream& out) { write_tables(out, tables); }));
    outs.push_back(write_tsv(dir / "classes.tsv", [&](std::ostream& out) {
      out << "lemma\tverb_class\tout_cluster\tin_cluster\tpair\n";
      for (const auto& t : tables) {
        auto p = consonant_pair(t, inventory);
        out << to_utf8(t.lemma) << '\t' << verb_class_name(t.verb_class) << '\t' << to_utf8(p.out_cluster) << '\t'
            << to_utf8(p.in_cluster) << '\t' << p.label() << '\n';
      }
    }));
    outs.push_back(write_tsv(dir / "report.tsv", [&](std::ostream& out) {
      out << "measure\tcount\nlemmas\t" << tables.size() << "\nL\t" << l << "\nNL\t" << tables.size() - l << '\n';
    }));
    ctx.info("classify: " + std::to_string(tables.size()) + " lemmas, " + std::to_string(l) + " L");
    return outs;
  };
  run_stage(ctx, spec);
}

void stage_triples(const Context& ctx) {
  const auto& cfg = ctx.config;
  const fs::path dir = ctx.root() / "triples";
  const std::uint64_t order_seed = derive_seed(cfg.plan.master_seed, "order");
  StageSpec spec;
  spec.stage = "triples";
  spec.manifest = dir / "manifest.json";
  spec.inputs = {ctx.root() / "classify" / "tables.tsv"};
  spec.fingerprint_config = {{"source_order", cfg.resolved["sampling"]["source_order"]}};
  spec.seeds = {{"master", cfg.plan.master_seed}, {"order", order_seed}};
  spec.upstream_hint = "classify";
  spec.run = [&] {
    auto tables = read_tables_file(ctx.root() / "classify" / "tables.tsv");
    const auto& patterns = all_zone_patterns();
    std::array<std::size_t, 8> totals{};
    std::map<std::string, std::size_t> by_class;
    std::size_t source_in_in = 0, source_in_out = 0, source_out_out = 0;
    auto summary = write_tsv(dir / "summary.tsv", [&](std::ostream& out) {
      out << "lemma\tverb_class\ttriples";
      for (const auto& p : patterns) out << '\t' << zone_pattern_label(p);
      out << '\n';
      for (const auto& t : tables) {
        auto triples = generate_triples(t, order_seed, cfg.plan.source_order);
        std::array<std::size_t, 8> counts{};
        std::set<std::pair<int, int>> pairs;
        for (const auto& tr : triples) {
          auto z = tr.zone_pattern();
          ++counts[static_cast<std::size_t>(std::find(patterns.begin(), patterns.end(), z) - patterns.begin())];
          int a = tr.source1.tag.index(), b = tr.source2.tag.index();
          if (pairs.insert({std::min(a, b), std::max(a, b)}).second) {
            int ins = (z[0] == CellZone::kIn) + (z[1] == CellZone::kIn);
            (ins == 2 ? source_in_in : ins == 1 ? source_in_out : source_out_out) += 1;
          }
        }
        by_class[std::string(verb_class_name(t.verb_class))] += triples.size();
        out << to_utf8(t.lemma) << '\t' << verb_class_name(t.verb_class) << '\t' << triples.size();
        for (std::size_t i = 0; i < 8; ++i) {
          out << '\t' << counts[i];
          totals[i] += counts[i];
        }
        out << '\n';
      }
    });
    auto report = write_tsv(dir / "report.tsv", [&](std::ostream& out) {
      std::size_t all = 0;
      for (auto n : totals) all += n;
      out << "measure\tcount\nlemmas\t" << tables.size() << "\ntriples\t" << all << "\nL_triples\t" << by_class["L"]
          << "\nNL_triples\t" << by_class["NL"] << "\nsource_pairs_in_in\t" << source_in_in
          << "\nsource_pairs_in_out\t" << source_in_out << "\nsource_pairs_out_out\t" << source_out_out << '\n';
      for (std::size_t i = 0; i < 8; ++i) out << "pattern_" << zone_pattern_label(patterns[i]) << '\t' << totals[i] << '\n';
    });
    return std::vector<fs::path>{summary, report};
  };
  run_stage(ctx, spec);
}

void stage_sample(const Context& ctx, const Subset& filter) {
  const auto& cfg = ctx.config;
  const fs::path tables_path = ctx.root() / "classify" / "tables.tsv";
  std::optional<Lexicon> lexicon;
  Json fingerprint = cfg.resolved["sampling"];
  fingerprint["master_seed"] = cfg.plan.master_seed;
  for (const auto& key : select(cfg.datasets(), filter)) {
    const fs::path dir = dataset_dir(ctx, key);
    const auto condition = *std::find_if(cfg.plan.conditions.begin(), cfg.plan.conditions.end(),
                                         [&](const FrequencyCondition& c) { return c.name == key.condition; });
    StageSpec spec;
    spec.stage = "sample";
    spec.key = key.id();
    spec.manifest = dir / "manifest.json";
    spec.inputs = {tables_path};
    spec.fingerprint_config = fingerprint;
    spec.seeds = dataset_seed_json(dataset_seeds(cfg.plan.master_seed, key.condition, key.bin, key.run));
    spec.upstream_hint = "classify";
    spec.run = [&] {
      if (!lexicon) lexicon.emplace(read_tables_file(tables_path));
      ConditionDataset ds;
      try {
        ds = build_dataset(*lexicon, cfg.plan, condition, key.bin, key.run);
      } catch (const SamplingError& e) {
        throw UserError("sample " + key.id() + ": " + e.what());
      }
      fs::remove_all(dir);
      write_dataset(ds, dir.string());
      std::vector<fs::path> outs;
      for (const char* split : {"train", "dev", "test"})
        for (const char* ext : {".src", ".tgt", ".tsv"}) outs.push_back(dir / (std::string(split) + ext));
      outs.push_back(dir / "lemmas.tsv");
      outs.push_back(dir / "dataset.json");
      outs.push_back(write_tsv(dir / "files.tsv", [&](std::ostream& out) {
        out << "file\tsha256\tbytes\n";
        for (const auto& p : outs) out << p.filename().string() << '\t' << sha256_file(p) << '\t' << fs::file_size(p) << '\n';
      }));
      ctx.info("sample " + key.id() + ": train " + std::to_string(ds.train.size()) + ", dev " +
               std::to_string(ds.dev.size()) + ", test " + std::to_string(ds.test.size()));
      return outs;
    };
    run_stage(ctx, spec);
  }
}

void stage_train(const Context& ctx, const Subset& filter) {
  for (const auto& key : select(ctx.config.training_datasets(), filter)) {
    TrainConfig tc = ctx.config.model;
    tc.seed = training_seed(ctx.config, key);
    train_one(ctx, "train", key.id(), key, tc, model_dir(ctx, key));
  }
}

void stage_predict(const Context& ctx, const Subset& filter) {
  for (const auto& key : select(ctx.config.training_datasets(), filter))
    predict_one(ctx, "predict", key.id(), key, model_dir(ctx, key) / "best.bin", prediction_file(ctx, key), "train");
}

void stage_evaluate(const Context& ctx) {
  const auto& cfg = ctx.config;
  const fs::path dir = ctx.root() / "evaluate";
  const auto keys = cfg.training_datasets();
  StageSpec spec;
  spec.stage = "evaluate";
  spec.manifest = dir / "manifest.json";
  for (const auto& k : keys) {
    spec.inputs.push_back(dataset_dir(ctx, k) / "test.tsv");
    spec.inputs.push_back(prediction_file(ctx, k));
  }
  spec.fingerprint_config = {{"evaluation", cfg.resolved["evaluation"]}, {"training", cfg.resolved["training"]}};
  spec.upstream_hint = "predict";
  spec.run = [&] {
    auto inventory = load_inventory(cfg);
    std::vector<PredictionRecord> records;
    for (const auto& k : keys) {
      auto part = score_dataset(ctx, k, prediction_file(ctx, k), inventory);
      records.insert(records.end(), part.begin(), part.end());
    }
    std::vector<fs::path> outs;
    outs.push_back(write_tsv(dir / "records.tsv", [&](std::ostream& out) { write_records(out, records); }));
    auto both = [&](bool by_zone) {
      std::vector<AccuracySummary> all;
      for (Metric m : {Metric::kSequence, Metric::kStem}) {
        SummaryOptions o = cfg.evaluation;
        o.metric = m;
        o.by_zone = by_zone;
        auto s = summarize(records, o);
        all.insert(all.end(), s.begin(), s.end());
      }
      return all;
    };
    outs.push_back(write_tsv(dir / "summary.tsv", [&](std::ostream& out) { write_summary(out, both(false)); }));
    outs.push_back(write_tsv(dir / "summary_zones.tsv", [&](std::ostream& out) { write_summary(out, both(true)); }));
    Json meta = {{"ci_method", cfg.resolved["evaluation"]["ci"]},
                 {"ci_over", "models: per-model accuracy within each group, then mean and interval across models"},
                 {"z", cfg.evaluation.z},
                 {"models", keys.size()},
                 {"records", records.size()}};
    outs.push_back(write_tsv(dir / "metadata.json", [&](std::ostream& out) { out << meta.dump(2) << '\n'; }));
    return outs;
  };
  run_stage(ctx, spec);
}

void stage_analyze(const Context& ctx) {
  const auto& cfg = ctx.config;
  const fs::path dir = ctx.root() / "analyze";
  const auto keys = cfg.training_datasets();
  StageSpec spec;
  spec.stage = "analyze";
  spec.manifest = dir / "manifest.json";
  spec.inputs = {ctx.root() / "evaluate" / "records.tsv", ctx.root() / "classify" / "tables.tsv"};
  for (const auto& k : keys) {
    spec.inputs.push_back(dataset_dir(ctx, k) / "train.tsv");
    spec.inputs.push_back(dataset_dir(ctx, k) / "lemmas.tsv");
  }
  spec.fingerprint_config = {{"analysis", cfg.resolved["analysis"]}, {"training", cfg.resolved["training"]}};
  spec.upstream_hint = "evaluate";
  spec.run = [&] {
    auto inventory = load_inventory(cfg);
    std::vector<PredictionRecord> records;
    {
      std::ifstream in(ctx.root() / "evaluate" / "records.tsv", std::ios::binary);
      records = read_records(in);
    }
    auto tables = read_tables_file(ctx.root() / "classify" / "tables.tsv");
    auto pairs = lemma_pairs(tables, inventory);
    std::vector<std::string> conditions;
    for (const auto& c : cfg.plan.conditions) conditions.push_back(c.name);

    std::map<DatasetKey, std::set<ConsonantTriple>> seen;
    std::vector<PairFrequencyRow> frequencies;
    for (const auto& k : keys) {
      std::ifstream sidecar(dataset_dir(ctx, k) / "train.tsv", std::ios::binary);
      auto& s = seen[k];
      for (const auto& row : read_sidecar(sidecar)) s.insert(consonant_triple(row, inventory));
      std::ifstream lemmas(dataset_dir(ctx, k) / "lemmas.tsv", std::ios::binary);
      auto f = pair_train_test_frequencies(k, read_lemma_split(lemmas), pairs);
      frequencies.insert(frequencies.end(), f.begin(), f.end());
    }
    label_knowledge_state(records, seen);

    std::vector<fs::path> outs;
    auto table = cell_combination_table(records, conditions);
    outs.push_back(write_tsv(dir / "cell_combinations.tsv", [&](std::ostream& o) { write_cell_combination_table(o, table); }));
    outs.push_back(write_tsv(dir / "contrasts.tsv", [&](std::ostream& o) { write_contrasts(o, primacy_recency_contrasts(table)); }));
    outs.push_back(write_tsv(dir / "records_labeled.tsv", [&](std::ostream& o) { write_records(o, records); }));
    outs.push_back(write_tsv(dir / "observations.tsv", [&](std::ostream& o) { write_observations(o, records, cfg.include_nl); }));
    outs.push_back(write_tsv(dir / "knowledge_proportions.tsv",
                             [&](std::ostream& o) { write_knowledge_proportions(o, knowledge_proportions(records, cfg.include_nl)); }));
    auto census = consonant_pair_census(tables, inventory);
    outs.push_back(write_tsv(dir / "census.tsv", [&](std::ostream& o) { write_census(o, census); }));
    outs.push_back(write_tsv(dir / "pair_frequencies.tsv", [&](std::ostream& o) { write_pair_frequencies(o, frequencies); }));

    std::map<ConsonantPair, std::size_t> rank;
    for (std::size_t i = 0; i < census.size(); ++i) rank[census[i].pair] = i + 1;
    std::ostringstream per_pair, pooled;
    per_pair << "condition\tpair\tcensus_rank\trare\trecords\taccuracy\tregularizations\n";
    pooled << "condition\tgroup\trecords\tcorrect\taccuracy\n";
    for (const auto& c : conditions) {
      std::vector<PredictionRecord> subset;
      for (const auto& r : records)
        if (r.dataset.condition == c) subset.push_back(r);
      auto m = pair_confusion_matrix(subset, pairs);
      outs.push_back(write_tsv(dir / "confusion" / (c + ".tsv"), [&](std::ostream& o) { write_confusion_matrix(o, m); }));
      outs.push_back(write_tsv(dir / "confusion" / (c + "_long.tsv"), [&](std::ostream& o) { write_confusion_long(o, m); }));
      std::size_t group_n[2] = {0, 0}, group_ok[2] = {0, 0};
      for (const auto& g : m.gold) {
        std::size_t r = rank.count(g) ? rank[g] : 0;
        bool rare = r == 0 || r > static_cast<std::size_t>(cfg.top_pairs);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", m.accuracy(g));
        per_pair << c << '\t' << g.label() << '\t' << (r ? std::to_string(r) : "NA") << '\t' << rare << '\t'
                 << m.row_total(g) << '\t' << buf << '\t' << m.regularizations(g) << '\n';
        group_n[rare] += m.row_total(g);
        group_ok[rare] += m.count(g, g);
      }
      for (int rare = 0; rare < 2; ++rare) {
        std::string acc = "NA";
        if (group_n[rare]) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.2f", 100.0 * static_cast<double>(group_ok[rare]) / static_cast<double>(group_n[rare]));
          acc = buf;
        }
        pooled << c << '\t' << (rare ? "rare" : "top" + std::to_string(cfg.top_pairs)) << '\t' << group_n[rare] << '\t'
               << group_ok[rare] << '\t' << acc << '\n';
      }
    }
    write_text_atomic(dir / "pair_accuracy.tsv", per_pair.str());
    write_text_atomic(dir / "pair_accuracy_pooled.tsv", pooled.str());
    outs.push_back(dir / "pair_accuracy.tsv");
    outs.push_back(dir / "pair_accuracy_pooled.tsv");
    return outs;
  };
  run_stage(ctx, spec);
}

void stage_sweep(const Context& ctx, const std::vector<int>& batch_sizes_override) {
  const auto& cfg = ctx.config;
  const auto sizes = batch_sizes_override.empty() ? cfg.sweep_batch_sizes : batch_sizes_override;
  const auto keys = cfg.sweep_datasets();
  const fs::path dir = ctx.root() / "sweep";
  std::vector<std::pair<int, DatasetKey>> runs;
  for (int bs : sizes) {
    for (const auto& k : keys) {
      const std::string tag = "bs" + std::to_string(bs);
      const fs::path base = dir / tag / key_path(k);
      TrainConfig tc = cfg.model;
      tc.batch_size = bs;
      tc.seed = training_seed(cfg, k);
      train_one(ctx, "sweep-train", tag + "/" + k.id(), k, tc, base / "model");
      predict_one(ctx, "sweep-predict", tag + "/" + k.id(), k, base / "model" / "best.bin", base / "predict" / "predictions.tsv",
                  "sweep-train");
      runs.push_back({bs, k});
    }
  }
  StageSpec spec;
  spec.stage = "sweep";
  spec.manifest = dir / "manifest.json";
  for (const auto& [bs, k] : runs)
    spec.inputs.push_back(dir / ("bs" + std::to_string(bs)) / key_path(k) / "predict" / "predictions.tsv");
  spec.fingerprint_config = {{"batch_sizes", sizes}, {"sweep", cfg.resolved["sweep"]}};
  spec.upstream_hint = "sweep";
  spec.run = [&] {
    auto inventory = load_inventory(cfg);
    auto out = write_tsv(dir / "sweep.tsv", [&](std::ostream& o) {
      o << "condition\tbatch_size\tL_mean\tL_ci_low\tL_ci_high\tNL_mean\tn_models\n";
      for (const auto& c : cfg.plan.conditions) {
        for (int bs : sizes) {
          std::vector<PredictionRecord> records;
          for (const auto& [b, k] : runs) {
            if (b != bs || k.condition != c.name) continue;
            auto part = score_dataset(ctx, k, dir / ("bs" + std::to_string(bs)) / key_path(k) / "predict" / "predictions.tsv", inventory);
            records.insert(records.end(), part.begin(), part.end());
          }
          if (records.empty()) continue;
          std::optional<AccuracySummary> l, nl;
          for (const auto& s : summarize(records, cfg.evaluation)) (s.verb_class == VerbClass::kL ? l : nl) = s;
          auto num = [](const std::optional<double>& v) {
            if (!v) return std::string("NA");
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.4f", *v);
            return std::string(buf);
          };
          o << c.name << '\t' << bs << '\t' << num(l ? std::optional<double>(l->mean) : std::nullopt) << '\t'
            << num(l ? l->ci_low : std::nullopt) << '\t' << num(l ? l->ci_high : std::nullopt) << '\t'
            << num(nl ? std::optional<double>(nl->mean) : std::nullopt) << '\t' << (l ? l->models : nl ? nl->models : 0)
            << '\n';
        }
      }
    });
    return std::vector<fs::path>{out};
  };
  run_stage(ctx, spec);
}

void stage_report(const Context& ctx) {
  const auto& cfg = ctx.config;
  const fs::path root = ctx.root();
  const fs::path dir = root / "report";
  StageSpec spec;
  spec.stage = "report";
  spec.manifest = dir / "manifest.json";
  spec.inputs = {root / "classify" / "report.tsv",       root / "evaluate" / "summary.tsv",
                 root / "evaluate" / "summary_zones.tsv", root / "analyze" / "cell_combinations.tsv",
                 root / "analyze" / "contrasts.tsv",      root / "analyze" / "knowledge_proportions.tsv",
                 root / "analyze" / "census.tsv",         root / "analyze" / "pair_accuracy.tsv",
                 root / "analyze" / "pair_accuracy_pooled.tsv"};
  const bool with_sweep = fs::exists(root / "sweep" / "sweep.tsv");
  if (with_sweep) spec.inputs.push_back(root / "sweep" / "sweep.tsv");
  spec.fingerprint_config = {{"conditions", cfg.resolved["sampling"]["conditions"]}};
  spec.upstream_hint = "analyze";
  spec.run = [&] {
    auto report = write_tsv(dir / "report.txt", [&](std::ostream& out) {
      out << "# morphome experiment report\n# version " << kSoftwareVersion << ", master seed " << cfg.plan.master_seed
          << ", config sha256 " << sha256_hex(cfg.resolved.dump()) << "\n# every table below is copied from the file named in its"
          << " heading; report/index.tsv lists the manifest of each file\n\n";
      emit_section(out, "lexicon (classify/report.tsv)", read_tsv(root / "classify" / "report.tsv"));
      auto summary = read_tsv(root / "evaluate" / "summary.tsv");
      auto cells = read_tsv(root / "analyze" / "cell_combinations.tsv");
      auto contrasts = read_tsv(root / "analyze" / "contrasts.tsv");
      auto pair_acc = read_tsv(root / "analyze" / "pair_accuracy.tsv");
      for (const auto& c : cfg.plan.conditions) {
        emit_section(out, "accuracy summary " + c.name + " (evaluate/summary.tsv)", summary, "condition", c.name);
        emit_section(out, "cell combinations " + c.name + " (analyze/cell_combinations.tsv)", cells, "condition", c.name);
        emit_section(out, "primacy/recency contrasts " + c.name + " (analyze/contrasts.tsv)", contrasts, "condition", c.name);
        emit_section(out, "consonant pair accuracy " + c.name + " (analyze/pair_accuracy.tsv)", pair_acc, "condition", c.name);
      }
      emit_section(out, "pooled pair accuracy (analyze/pair_accuracy_pooled.tsv)", read_tsv(root / "analyze" / "pair_accuracy_pooled.tsv"));
      emit_section(out, "knowledge state proportions (analyze/knowledge_proportions.tsv)",
                   read_tsv(root / "analyze" / "knowledge_proportions.tsv"));
      emit_section(out, "consonant pair census (analyze/census.tsv)", read_tsv(root / "analyze" / "census.tsv"));
      if (with_sweep) emit_section(out, "batch-size sweep (sweep/sweep.tsv)", read_tsv(root / "sweep" / "sweep.tsv"));
    });
    auto index = write_tsv(dir / "index.tsv", [&](std::ostream& out) {
      std::vector<fs::path> manifests;
      for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() == "manifest.json" && e.path().parent_path() != dir)
          manifests.push_back(e.path());
      std::sort(manifests.begin(), manifests.end());
      out << "manifest\tstage\tkey\toutput\tsha256\n";
      for (const auto& p : manifests) {
        auto m = read_manifest(p);
        if (!m) continue;
        for (const auto& o : m->outputs)
          out << ctx.relative(p) << '\t' << m->stage << '\t' << m->key << '\t' << o.path << '\t'
              << o.sha256 << '\n';
      }
    });
    return std::vector<fs::path>{report, index};
  };
  run_stage(ctx, spec);
}

void run_all(const Context& ctx) {
  stage_ingest(ctx);
  stage_classify(ctx);
  stage_triples(ctx);
  stage_sample(ctx);
  stage_train(ctx);
  stage_predict(ctx);
  stage_evaluate(ctx);
  stage_analyze(ctx);
  stage_report(ctx);
}

}  // namespace morphome::pipeline

#include "morphome/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include "morphome/rng.hpp"

namespace morphome {

std::string DatasetKey::id() const { return condition + "/bin" + std::to_string(bin) + "/run" + std::to_string(run); }

DatasetKey parse_dataset_key(std::string_view id) {
  auto parts = split(id, '/');
  auto number = [&](std::string_view part, std::string_view prefix) {
    if (part.substr(0, prefix.size()) != prefix || part.size() == prefix.size())
      throw std::invalid_argument("bad dataset id '" + std::string(id) + "'");
    int value = 0;
    for (char c : part.substr(prefix.size())) {
      if (c < '0' || c > '9') throw std::invalid_argument("bad dataset id '" + std::string(id) + "'");
      value = value * 10 + (c - '0');
    }
    return value;
  };
  if (parts.size() != 3 || parts[0].empty()) throw std::invalid_argument("bad dataset id '" + std::string(id) + "'");
  return {std::string(parts[0]), number(parts[1], "bin"), number(parts[2], "run")};
}

std::string ConsonantTriple::label() const { return to_utf8(source1) + "|" + to_utf8(source2) + "|" + to_utf8(target); }

ConsonantTriple ConsonantTriple::parse(std::string_view label) {
  auto parts = split(label, '|');
  if (parts.size() != 3) throw std::invalid_argument("bad consonant triple '" + std::string(label) + "'");
  return {from_utf8(parts[0]), from_utf8(parts[1]), from_utf8(parts[2])};
}

ConsonantTriple consonant_triple(const SidecarRow& row, const EndingInventory& inventory) {
  return {extract_stem(row.source1_form, row.source1_tag, inventory).final_cluster,
          extract_stem(row.source2_form, row.source2_tag, inventory).final_cluster,
          extract_stem(row.target_form, row.target_tag, inventory).final_cluster};
}

ConsonantTriple consonant_triple(const ReinflectionTriple& t, const EndingInventory& inventory) {
  return {extract_stem(t.source1.form, t.source1.tag, inventory).final_cluster,
          extract_stem(t.source2.form, t.source2.tag, inventory).final_cluster,
          extract_stem(t.target_form, t.target_tag, inventory).final_cluster};
}

std::string_view knowledge_state_name(KnowledgeState s) {
  switch (s) {
    case KnowledgeState::kMemorized: return "Memorized";
    case KnowledgeState::kGeneralized: return "Generalized";
    case KnowledgeState::kUnlabeled: break;
  }
  return "NA";
}

KnowledgeState parse_knowledge_state(std::string_view text) {
  if (text == "Memorized") return KnowledgeState::kMemorized;
  if (text == "Generalized") return KnowledgeState::kGeneralized;
  if (text == "NA") return KnowledgeState::kUnlabeled;
  throw std::invalid_argument("unknown knowledge state '" + std::string(text) + "'");
}

bool score_sequence(const IpaString& hypothesis, const IpaString& gold) { return hypothesis == gold; }

StemScore score_stem(const IpaString& hypothesis, const IpaString& gold, const MsdTag& target_tag,
                     const EndingInventory& inventory) {
  StemScore score;
  auto hyp = try_segment(hypothesis, target_tag, inventory);
  if (!hyp) {
    score.failed = true;
    return score;
  }
  score.cluster = hyp->stem.final_cluster;
  score.correct = hyp->stem.surface == extract_stem(gold, target_tag, inventory).surface;
  return score;
}

PredictionRecord score_record(const DatasetKey& dataset, const SidecarRow& item, const IpaString& hypothesis,
                              bool complete, const EndingInventory& inventory) {
  PredictionRecord r;
  r.dataset = dataset;
  r.item = item;
  r.hypothesis = hypothesis;
  r.complete = complete;
  r.seq_correct = score_sequence(hypothesis, item.target_form);
  auto stem = score_stem(hypothesis, item.target_form, item.target_tag, inventory);
  r.stem_correct = stem.correct;
  r.stem_failed = stem.failed;
  r.predicted_cluster = stem.cluster;
  r.gold_triple = consonant_triple(item, inventory);
  return r;
}

std::vector<PredictionRecord> score_predictions(const DatasetKey& dataset, const std::vector<SidecarRow>& items,
                                                const std::vector<PredictionRow>& predictions,
                                                const EndingInventory& inventory) {
  if (items.size() != predictions.size())
    throw std::runtime_error(dataset.id() + ": " + std::to_string(predictions.size()) + " predictions for " +
                             std::to_string(items.size()) + " test items");
  std::vector<PredictionRecord> records;
  records.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& p = predictions[i];
    if (p.id != i) throw std::runtime_error(dataset.id() + ": prediction row " + std::to_string(i) + " has id " + std::to_string(p.id));
    if (from_utf8(p.gold) != items[i].target_form)
      throw std::runtime_error(dataset.id() + ": gold form mismatch at row " + std::to_string(i));
    records.push_back(score_record(dataset, items[i], from_utf8(p.hypothesis), p.complete, inventory));
  }
  return records;
}

namespace {

constexpr const char* kRecordHeader =
    "dataset\tlemma\tverb_class\tzone_pattern\tsource1_tag\tsource2_tag\ttarget_tag\tsource1_form\tsource2_form\t"
    "target_form\thypothesis\tcomplete\tseq_correct\tstem_correct\tstem_failed\tgold_triple\tpredicted_cluster\t"
    "knowledge_state";

bool flag(std::string_view text) {
  if (text == "1") return true;
  if (text == "0") return false;
  throw std::invalid_argument("expected 0/1, got '" + std::string(text) + "'");
}

MsdTag tag_field(std::string_view text) {
  auto parsed = parse_tag(text);
  if (parsed.status != TagParse::kOk) throw std::invalid_argument("bad tag '" + std::string(text) + "'");
  return parsed.tag;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void write_records(std::ostream& out, const std::vector<PredictionRecord>& records) {
  out << kRecordHeader << '\n';
  for (const auto& r : records) {
    const auto& it = r.item;
    out << r.dataset.id() << '\t' << to_utf8(it.lemma) << '\t' << verb_class_name(it.verb_class) << '\t'
        << zone_pattern_label(it.zone_pattern) << '\t' << it.source1_tag.unimorph() << '\t' << it.source2_tag.unimorph()
        << '\t' << it.target_tag.unimorph() << '\t' << to_utf8(it.source1_form) << '\t' << to_utf8(it.source2_form)
        << '\t' << to_utf8(it.target_form) << '\t' << to_utf8(r.hypothesis) << '\t' << r.complete << '\t'
        << r.seq_correct << '\t' << r.stem_correct << '\t' << r.stem_failed << '\t' << r.gold_triple.label() << '\t'
        << to_utf8(r.predicted_cluster) << '\t' << knowledge_state_name(r.knowledge) << '\n';
  }
}

std::vector<PredictionRecord> read_records(std::istream& in) {
  std::vector<PredictionRecord> records;
  std::string line;
  if (!std::getline(in, line)) return records;
  if (line != kRecordHeader) throw std::runtime_error("unexpected record file header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line, '\t');
    if (f.size() != 18) throw std::runtime_error("malformed record row: " + line);
    PredictionRecord r;
    r.dataset = parse_dataset_key(f[0]);
    r.item.lemma = from_utf8(f[1]);
    r.item.verb_class = parse_verb_class(f[2]);
    r.item.zone_pattern = parse_zone_pattern(f[3]);
    r.item.source1_tag = tag_field(f[4]);
    r.item.source2_tag = tag_field(f[5]);
    r.item.target_tag = tag_field(f[6]);
    r.item.source1_form = from_utf8(f[7]);
    r.item.source2_form = from_utf8(f[8]);
    r.item.target_form = from_utf8(f[9]);
    r.hypothesis = from_utf8(f[10]);
    r.complete = flag(f[11]);
    r.seq_correct = flag(f[12]);
    r.stem_correct = flag(f[13]);
    r.stem_failed = flag(f[14]);
    r.gold_triple = ConsonantTriple::parse(f[15]);
    r.predicted_cluster = from_utf8(f[16]);
    r.knowledge = parse_knowledge_state(f[17]);
    records.push_back(std::move(r));
  }
  return records;
}

std::string_view metric_name(Metric m) { return m == Metric::kSequence ? "sequence" : "stem"; }

MeanInterval normal_interval(const std::vector<double>& samples, double z) {
  MeanInterval out;
  if (samples.empty()) return out;
  const double n = static_cast<double>(samples.size());
  out.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (samples.size() < 2) return out;
  double ss = 0.0;
  for (double s : samples) ss += (s - out.mean) * (s - out.mean);
  double half = z * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  out.low = out.mean - half;
  out.high = out.mean + half;
  return out;
}

MeanInterval bootstrap_interval(const std::vector<double>& samples, int resamples, std::uint64_t seed) {
  MeanInterval out = normal_interval(samples);
  if (samples.size() < 2 || resamples < 1) {
    out.low.reset();
    out.high.reset();
    return out;
  }
  Rng rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) sum += samples[rng.below(samples.size())];
    m = sum / static_cast<double>(samples.size());
  }
  std::sort(means.begin(), means.end());
  auto at = [&](double q) {
    auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(means.size() - 1) + 0.5));
    return means[idx];
  };
  out.low = std::min(at(0.025), out.mean);
  out.high = std::max(at(0.975), out.mean);
  return out;
}

std::vector<AccuracySummary> summarize(const std::vector<PredictionRecord>& records, const SummaryOptions& options) {
  using GroupKey = std::tuple<std::string, VerbClass, int>;  // zone index, -1 when ungrouped
  struct Tally {
    std::size_t correct = 0;
    std::size_t total = 0;
  };
  std::map<GroupKey, std::map<DatasetKey, Tally>> groups;
  for (const auto& r : records) {
    int zone = -1;
    if (options.by_zone) {
      const auto& patterns = all_zone_patterns();
      zone = static_cast<int>(std::find(patterns.begin(), patterns.end(), r.item.zone_pattern) - patterns.begin());
    }
    auto& t = groups[{r.dataset.condition, r.item.verb_class, zone}][r.dataset];
    ++t.total;
    bool ok = options.metric == Metric::kSequence ? r.seq_correct : r.stem_correct;
    if (ok) ++t.correct;
  }
  std::vector<AccuracySummary> out;
  for (const auto& [key, models] : groups) {
    AccuracySummary s;
    s.condition = std::get<0>(key);
    s.verb_class = std::get<1>(key);
    if (std::get<2>(key) >= 0) s.zone = all_zone_patterns()[static_cast<std::size_t>(std::get<2>(key))];
    s.metric = options.metric;
    std::vector<double> accuracies;
    for (const auto& [dataset, t] : models) {
      accuracies.push_back(100.0 * static_cast<double>(t.correct) / static_cast<double>(t.total));
      s.records += t.total;
    }
    s.models = accuracies.size();
    MeanInterval iv = options.ci == CiMethod::kNormal
                          ? normal_interval(accuracies, options.z)
                          : bootstrap_interval(accuracies, options.bootstrap_samples, options.bootstrap_seed);
    s.mean = iv.mean;
    s.ci_low = iv.low;
    s.ci_high = iv.high;
    out.push_back(std::move(s));
  }
  return out;
}

void write_summary(std::ostream& out, const std::vector<AccuracySummary>& summaries) {
  std::map<std::tuple<Metric, std::string, std::string, VerbClass>, double> means;
  auto zone_label = [](const AccuracySummary& s) { return s.zone ? zone_pattern_label(*s.zone) : std::string("all"); };
  for (const auto& s : summaries) means[{s.metric, s.condition, zone_label(s), s.verb_class}] = s.mean;
  out << "metric\tcondition\tverb_class\tzone_pattern\tmean\tci_low\tci_high\tn_models\tn_records\tl_nl_ratio\n";
  for (const auto& s : summaries) {
    std::string zone = zone_label(s);
    std::string ratio = "NA";
    auto l = means.find({s.metric, s.condition, zone, VerbClass::kL});
    auto nl = means.find({s.metric, s.condition, zone, VerbClass::kNL});
    if (l != means.end() && nl != means.end() && nl->second > 0.0) ratio = format_number(l->second / nl->second);
    out << metric_name(s.metric) << '\t' << s.condition << '\t' << verb_class_name(s.verb_class) << '\t' << zone << '\t'
        << format_number(s.mean) << '\t' << (s.ci_low ? format_number(*s.ci_low) : "NA") << '\t'
        << (s.ci_high ? format_number(*s.ci_high) : "NA") << '\t' << s.models << '\t' << s.records << '\t' << ratio
        << '\n';
  }
}

}  // namespace morphome

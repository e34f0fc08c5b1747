#include "morphome/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace morphome {

namespace {

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); }

CellZone flip(CellZone z) { return z == CellZone::kIn ? CellZone::kOut : CellZone::kIn; }

}  // namespace

std::vector<CellCombinationRow> cell_combination_table(const std::vector<PredictionRecord>& records,
                                                       const std::vector<std::string>& conditions, Metric metric) {
  SummaryOptions options;
  options.by_zone = true;
  options.metric = metric;
  std::map<std::tuple<std::string, ZonePattern, VerbClass>, const AccuracySummary*> index;
  auto summaries = summarize(records, options);
  for (const auto& s : summaries) index[{s.condition, *s.zone, s.verb_class}] = &s;

  std::vector<CellCombinationRow> rows;
  for (const auto& condition : conditions) {
    for (const auto& zone : all_zone_patterns()) {
      CellCombinationRow row;
      row.condition = condition;
      row.zone = zone;
      if (auto it = index.find({condition, zone, VerbClass::kL}); it != index.end()) {
        row.l = it->second->mean;
        row.l_records = it->second->records;
      }
      if (auto it = index.find({condition, zone, VerbClass::kNL}); it != index.end()) {
        row.nl = it->second->mean;
        row.nl_records = it->second->records;
      }
      if (row.l && row.nl && *row.nl > 0.0) row.ratio = *row.l / *row.nl;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_cell_combination_table(std::ostream& out, const std::vector<CellCombinationRow>& rows) {
  out << "condition\tzone_pattern\tL\tNL\tl_nl_ratio\tL_records\tNL_records\n";
  for (const auto& r : rows)
    out << r.condition << '\t' << zone_pattern_label(r.zone) << '\t' << fmt(r.l) << '\t' << fmt(r.nl) << '\t'
        << fmt(r.ratio) << '\t' << r.l_records << '\t' << r.nl_records << '\n';
}

std::vector<Contrast> primacy_recency_contrasts(const std::vector<CellCombinationRow>& table) {
  std::vector<std::string> conditions;
  std::map<std::tuple<std::string, ZonePattern, VerbClass>, std::optional<double>> acc;
  for (const auto& r : table) {
    if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end())
      conditions.push_back(r.condition);
    acc[{r.condition, r.zone, VerbClass::kL}] = r.l;
    acc[{r.condition, r.zone, VerbClass::kNL}] = r.nl;
  }
  const CellZone zones[] = {CellZone::kIn, CellZone::kOut};
  std::vector<Contrast> out;
  for (const auto& condition : conditions) {
    for (VerbClass vc : {VerbClass::kL, VerbClass::kNL}) {
      auto make = [&](ContrastKind kind, ZonePattern favoured, ZonePattern baseline) {
        Contrast c;
        c.condition = condition;
        c.verb_class = vc;
        c.kind = kind;
        c.favoured = favoured;
        c.baseline = baseline;
        c.favoured_accuracy = acc[{condition, favoured, vc}];
        c.baseline_accuracy = acc[{condition, baseline, vc}];
        if (c.favoured_accuracy && c.baseline_accuracy) {
          c.delta = *c.favoured_accuracy - *c.baseline_accuracy;
          if (std::abs(*c.delta) < 1e-9) c.direction = "none";
          else if (*c.delta > 0) c.direction = kind == ContrastKind::kPrimacy ? "primacy" : "recency";
          else c.direction = "reverse";
        } else {
          c.direction = "NA";
        }
        out.push_back(c);
      };
      for (CellZone t : zones)
        for (CellZone y : zones) make(ContrastKind::kPrimacy, {t, y, t}, {flip(t), y, t});
      for (CellZone t : zones)
        for (CellZone x : zones) make(ContrastKind::kRecency, {x, t, t}, {x, flip(t), t});
    }
  }
  return out;
}

void write_contrasts(std::ostream& out, const std::vector<Contrast>& contrasts) {
  out << "condition\tverb_class\tkind\tfavoured\tbaseline\tfavoured_accuracy\tbaseline_accuracy\tdelta\tdirection\n";
  for (const auto& c : contrasts)
    out << c.condition << '\t' << verb_class_name(c.verb_class) << '\t'
        << (c.kind == ContrastKind::kPrimacy ? "primacy" : "recency") << '\t' << zone_pattern_label(c.favoured) << '\t'
        << zone_pattern_label(c.baseline) << '\t' << fmt(c.favoured_accuracy) << '\t' << fmt(c.baseline_accuracy)
        << '\t' << fmt(c.delta) << '\t' << c.direction << '\n';
}

std::set<ConsonantTriple> training_triples(const std::vector<ReinflectionTriple>& train,
                                           const EndingInventory& inventory) {
  std::set<ConsonantTriple> seen;
  for (const auto& t : train) seen.insert(consonant_triple(t, inventory));
  return seen;
}

void label_knowledge_state(std::vector<PredictionRecord>& records,
                           const std::map<DatasetKey, std::set<ConsonantTriple>>& seen) {
  for (auto& r : records) {
    auto it = seen.find(r.dataset);
    if (it == seen.end()) throw std::out_of_range("no training triples for dataset " + r.dataset.id());
    r.knowledge = it->second.count(r.gold_triple) ? KnowledgeState::kMemorized : KnowledgeState::kGeneralized;
  }
}

void write_observations(std::ostream& out, const std::vector<PredictionRecord>& records, bool include_nl) {
  out << "prediction_status\tknowledge_state\tfrequency_condition\ttriple\tmodel\n";
  for (const auto& r : records) {
    if (!include_nl && r.item.verb_class != VerbClass::kL) continue;
    if (r.knowledge == KnowledgeState::kUnlabeled)
      throw std::logic_error("record without knowledge state in " + r.dataset.id());
    out << (r.seq_correct ? 1 : 0) << '\t' << knowledge_state_name(r.knowledge) << '\t' << r.dataset.condition << '\t'
        << r.gold_triple.label() << '\t' << r.dataset.id() << '\n';
  }
}

Proportion wilson_interval(std::size_t successes, std::size_t trials, double z) {
  Proportion p;
  if (trials == 0) return p;
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
  p.value = phat;
  p.low = std::max(0.0, center - half);
  p.high = std::min(1.0, center + half);
  return p;
}

std::vector<KnowledgeProportion> knowledge_proportions(const std::vector<PredictionRecord>& records, bool include_nl) {
  std::map<std::pair<KnowledgeState, std::string>, std::pair<std::size_t, std::size_t>> tally;
  for (const auto& r : records) {
    if (!include_nl && r.item.verb_class != VerbClass::kL) continue;
    if (r.knowledge == KnowledgeState::kUnlabeled)
      throw std::logic_error("record without knowledge state in " + r.dataset.id());
    auto& t = tally[{r.knowledge, r.dataset.condition}];
    t.first += r.seq_correct;
    ++t.second;
  }
  std::vector<KnowledgeProportion> rows;
  for (const auto& [key, t] : tally) {
    KnowledgeProportion row;
    row.knowledge = key.first;
    row.condition = key.second;
    row.correct = t.first;
    row.total = t.second;
    row.proportion = wilson_interval(t.first, t.second);
    rows.push_back(row);
  }
  return rows;
}

void write_knowledge_proportions(std::ostream& out, const std::vector<KnowledgeProportion>& rows) {
  out << "knowledge_state\tfrequency_condition\tcorrect\ttotal\tproportion\twilson_low\twilson_high\n";
  for (const auto& r : rows)
    out << knowledge_state_name(r.knowledge) << '\t' << r.condition << '\t' << r.correct << '\t' << r.total << '\t'
        << fmt(r.proportion.value) << '\t' << fmt(r.proportion.low) << '\t' << fmt(r.proportion.high) << '\n';
}

std::map<IpaString, ConsonantPair> lemma_pairs(const std::vector<InflectionTable>& tables,
                                               const EndingInventory& inventory) {
  std::map<IpaString, ConsonantPair> pairs;
  for (const auto& t : tables) pairs[t.lemma] = consonant_pair(t, inventory);
  return pairs;
}

std::vector<PairCount> consonant_pair_census(const std::vector<InflectionTable>& tables,
                                             const EndingInventory& inventory) {
  std::map<ConsonantPair, std::size_t> counts;
  for (const auto& t : tables)
    if (t.verb_class == VerbClass::kL) ++counts[consonant_pair(t, inventory)];
  std::vector<PairCount> census;
  for (const auto& [pair, n] : counts) census.push_back({pair, n});
  std::stable_sort(census.begin(), census.end(), [](const PairCount& a, const PairCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.pair.label() < b.pair.label();
  });
  return census;
}

void write_census(std::ostream& out, const std::vector<PairCount>& census) {
  out << "pair\tout_cluster\tin_cluster\tcount\n";
  for (const auto& c : census)
    out << c.pair.label() << '\t' << to_utf8(c.pair.out_cluster) << '\t' << to_utf8(c.pair.in_cluster) << '\t'
        << c.count << '\n';
}

std::vector<PairFrequencyRow> pair_train_test_frequencies(const DatasetKey& dataset, const LemmaSplit& split,
                                                          const std::map<IpaString, ConsonantPair>& pairs) {
  std::map<ConsonantPair, PairFrequencyRow> rows;
  auto lookup = [&](const IpaString& lemma) -> const ConsonantPair& {
    auto it = pairs.find(lemma);
    if (it == pairs.end()) throw std::out_of_range("no consonant pair for lemma " + to_utf8(lemma));
    return it->second;
  };
  for (const auto& lemma : split.test.l) ++rows[lookup(lemma)].test;
  for (const auto& lemma : split.train.l) ++rows[lookup(lemma)].train;
  std::vector<PairFrequencyRow> out;
  for (auto& [pair, row] : rows) {
    row.dataset = dataset;
    row.pair = pair;
    out.push_back(row);
  }
  std::stable_sort(out.begin(), out.end(), [](const PairFrequencyRow& a, const PairFrequencyRow& b) {
    if (a.test != b.test) return a.test > b.test;
    if (a.train != b.train) return a.train > b.train;
    return a.pair.label() < b.pair.label();
  });
  return out;
}

void write_pair_frequencies(std::ostream& out, const std::vector<PairFrequencyRow>& rows) {
  out << "dataset\tpair\tfreq_test\tfreq_train\tunseen_in_train\n";
  for (const auto& r : rows)
    out << r.dataset.id() << '\t' << r.pair.label() << '\t' << r.test << '\t' << r.train << '\t'
        << (r.unseen_in_train() ? 1 : 0) << '\n';
}

std::size_t ConfusionMatrix::count(const ConsonantPair& g, const ConsonantPair& p) const {
  auto it = counts.find({g, p});
  return it == counts.end() ? 0 : it->second;
}

std::size_t ConfusionMatrix::row_total(const ConsonantPair& g) const {
  std::size_t n = 0;
  for (const auto& [key, c] : counts)
    if (key.first == g) n += c;
  return n;
}

double ConfusionMatrix::accuracy(const ConsonantPair& g) const {
  std::size_t n = row_total(g);
  return n ? 100.0 * static_cast<double>(count(g, g)) / static_cast<double>(n) : 0.0;
}

std::size_t ConfusionMatrix::regularizations(const ConsonantPair& g) const {
  std::size_t n = 0;
  for (const auto& [key, c] : counts)
    if (key.first == g && is_regularization(key.first, key.second)) n += c;
  return n;
}

bool is_regularization(const ConsonantPair& gold, const ConsonantPair& predicted) {
  return gold.out_cluster != gold.in_cluster && predicted != gold && predicted.in_cluster == predicted.out_cluster;
}

ConfusionMatrix pair_confusion_matrix(const std::vector<PredictionRecord>& records,
                                      const std::map<IpaString, ConsonantPair>& pairs) {
  ConfusionMatrix m;
  std::map<ConsonantPair, std::size_t> row_totals, col_totals;
  for (const auto& r : records) {
    if (r.item.verb_class != VerbClass::kL || r.item.zone_pattern[2] != CellZone::kIn) continue;
    auto it = pairs.find(r.item.lemma);
    if (it == pairs.end()) throw std::out_of_range("no consonant pair for lemma " + to_utf8(r.item.lemma));
    const ConsonantPair& gold = it->second;
    ConsonantPair predicted{gold.out_cluster, r.stem_failed ? kUnsegmentedCluster : r.predicted_cluster};
    ++m.counts[{gold, predicted}];
    ++row_totals[gold];
    ++col_totals[predicted];
  }
  auto ordered = [](const std::map<ConsonantPair, std::size_t>& totals) {
    std::vector<std::pair<ConsonantPair, std::size_t>> v(totals.begin(), totals.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first.label() < b.first.label();
    });
    std::vector<ConsonantPair> out;
    for (const auto& e : v) out.push_back(e.first);
    return out;
  };
  m.gold = ordered(row_totals);
  m.predicted = ordered(col_totals);
  return m;
}

void write_confusion_matrix(std::ostream& out, const ConfusionMatrix& m) {
  out << "gold";
  for (const auto& p : m.predicted) out << "\tP " << p.label();
  out << "\ttotal\taccuracy\tregularizations\n";
  for (const auto& g : m.gold) {
    out << g.label();
    for (const auto& p : m.predicted) out << '\t' << m.count(g, p);
    out << '\t' << m.row_total(g) << '\t' << fmt(m.accuracy(g), "%.2f") << '\t' << m.regularizations(g) << '\n';
  }
}

void write_confusion_long(std::ostream& out, const ConfusionMatrix& m) {
  out << "gold\tpredicted\tcount\tcorrect\tregularization\n";
  for (const auto& g : m.gold)
    for (const auto& p : m.predicted)
      if (std::size_t c = m.count(g, p))
        out << g.label() << '\t' << p.label() << '\t' << c << '\t' << (g == p ? 1 : 0) << '\t'
            << (is_regularization(g, p) ? 1 : 0) << '\n';
}

}  // namespace morphome

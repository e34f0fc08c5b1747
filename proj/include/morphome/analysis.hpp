#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "morphome/evaluation.hpp"
#include "morphome/sampler.hpp"

namespace morphome {

// ---- cell combinations ----

struct CellCombinationRow {
  std::string condition;
  ZonePattern zone{};
  std::optional<double> l;  // mean per-model accuracy, percent
  std::optional<double> nl;
  std::optional<double> ratio;  // l / nl
  std::size_t l_records = 0;
  std::size_t nl_records = 0;
};

// Eight rows per condition in all_zone_patterns() order. Conditions with no
// records still get their eight rows, with missing means.
std::vector<CellCombinationRow> cell_combination_table(const std::vector<PredictionRecord>& records,
                                                       const std::vector<std::string>& conditions,
                                                       Metric metric = Metric::kSequence);
void write_cell_combination_table(std::ostream& out, const std::vector<CellCombinationRow>& rows);

enum class ContrastKind { kPrimacy, kRecency };

// favoured matches the target zone in the probed source slot, baseline
// differs from favoured only in that slot.
struct Contrast {
  std::string condition;
  VerbClass verb_class = VerbClass::kL;
  ContrastKind kind = ContrastKind::kPrimacy;
  ZonePattern favoured{};
  ZonePattern baseline{};
  std::optional<double> favoured_accuracy;
  std::optional<double> baseline_accuracy;
  std::optional<double> delta;
  std::string direction;  // primacy | recency | reverse | none | NA
};

// 4 primacy (T,Y,T vs T',Y,T) and 4 recency (X,T,T vs X,T',T) contrasts per
// condition and verb class.
std::vector<Contrast> primacy_recency_contrasts(const std::vector<CellCombinationRow>& table);
void write_contrasts(std::ostream& out, const std::vector<Contrast>& contrasts);

// ---- memorization / generalization ----

std::set<ConsonantTriple> training_triples(const std::vector<ReinflectionTriple>& train,
                                           const EndingInventory& inventory = EndingInventory::spanish_present());

// Labels every record against the training triples of its own dataset.
// Throws std::out_of_range when a record's dataset has no entry.
void label_knowledge_state(std::vector<PredictionRecord>& records,
                           const std::map<DatasetKey, std::set<ConsonantTriple>>& seen);

// Columns prediction_status, knowledge_state, frequency_condition, triple,
// model. Only L-verb records unless include_nl. Throws on unlabeled records.
void write_observations(std::ostream& out, const std::vector<PredictionRecord>& records, bool include_nl = false);

struct Proportion {
  double value = 0.0;
  double low = 0.0;
  double high = 0.0;
};
Proportion wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96);

struct KnowledgeProportion {
  KnowledgeState knowledge = KnowledgeState::kUnlabeled;
  std::string condition;
  std::size_t correct = 0;
  std::size_t total = 0;
  Proportion proportion;
};

std::vector<KnowledgeProportion> knowledge_proportions(const std::vector<PredictionRecord>& records,
                                                       bool include_nl = false);
void write_knowledge_proportions(std::ostream& out, const std::vector<KnowledgeProportion>& rows);

// ---- consonant pairs ----

struct PairCount {
  ConsonantPair pair;
  std::size_t count = 0;
};

// One pair per L lemma; descending count, ties by label.
std::vector<PairCount> consonant_pair_census(const std::vector<InflectionTable>& tables,
                                             const EndingInventory& inventory = EndingInventory::spanish_present());
void write_census(std::ostream& out, const std::vector<PairCount>& census);

std::map<IpaString, ConsonantPair> lemma_pairs(const std::vector<InflectionTable>& tables,
                                               const EndingInventory& inventory = EndingInventory::spanish_present());

struct PairFrequencyRow {
  DatasetKey dataset;
  ConsonantPair pair;
  std::size_t test = 0;
  std::size_t train = 0;
  bool unseen_in_train() const { return test > 0 && train == 0; }
};

// L lemmas of the train and test splits counted by pair; descending test
// count, then train count, then label.
std::vector<PairFrequencyRow> pair_train_test_frequencies(const DatasetKey& dataset, const LemmaSplit& split,
                                                          const std::map<IpaString, ConsonantPair>& pairs);
void write_pair_frequencies(std::ostream& out, const std::vector<PairFrequencyRow>& rows);

// Predicted cluster used when the hypothesis could not be segmented.
inline const IpaString kUnsegmentedCluster = U"*";

// Over L records with an In-zone target: gold = lemma pair, predicted =
// (gold Out cluster, stem cluster of the hypothesis).
struct ConfusionMatrix {
  std::vector<ConsonantPair> gold;       // rows, by descending row total then label
  std::vector<ConsonantPair> predicted;  // columns, by descending column total then label
  std::map<std::pair<ConsonantPair, ConsonantPair>, std::size_t> counts;

  std::size_t count(const ConsonantPair& g, const ConsonantPair& p) const;
  std::size_t row_total(const ConsonantPair& g) const;
  double accuracy(const ConsonantPair& g) const;  // diagonal / row total, percent
  std::size_t regularizations(const ConsonantPair& g) const;
};

bool is_regularization(const ConsonantPair& gold, const ConsonantPair& predicted);

ConfusionMatrix pair_confusion_matrix(const std::vector<PredictionRecord>& records,
                                      const std::map<IpaString, ConsonantPair>& pairs);
void write_confusion_matrix(std::ostream& out, const ConfusionMatrix& m);
void write_confusion_long(std::ostream& out, const ConfusionMatrix& m);

}  // namespace morphome

#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "morphome/corpus.hpp"
#include "morphome/transducer/trainer.hpp"
#include "morphome/tripler.hpp"

namespace morphome {

struct DatasetKey {
  std::string condition;
  int bin = 0;
  int run = 0;

  std::string id() const;  // "90L-10NL/bin0/run1"
  friend auto operator<=>(const DatasetKey&, const DatasetKey&) = default;
  friend bool operator==(const DatasetKey&, const DatasetKey&) = default;
};

DatasetKey parse_dataset_key(std::string_view id);

// Stem-final clusters of the first source, second source and target forms.
struct ConsonantTriple {
  IpaString source1;
  IpaString source2;
  IpaString target;

  std::string label() const;  // "s|sk|sk", empty clusters left empty
  static ConsonantTriple parse(std::string_view label);
  friend auto operator<=>(const ConsonantTriple&, const ConsonantTriple&) = default;
  friend bool operator==(const ConsonantTriple&, const ConsonantTriple&) = default;
};

ConsonantTriple consonant_triple(const SidecarRow& row,
                                 const EndingInventory& inventory = EndingInventory::spanish_present());
ConsonantTriple consonant_triple(const ReinflectionTriple& triple,
                                 const EndingInventory& inventory = EndingInventory::spanish_present());

enum class KnowledgeState { kUnlabeled, kMemorized, kGeneralized };
std::string_view knowledge_state_name(KnowledgeState s);
KnowledgeState parse_knowledge_state(std::string_view text);

struct PredictionRecord {
  DatasetKey dataset;
  SidecarRow item;
  IpaString hypothesis;
  bool complete = true;
  bool seq_correct = false;
  bool stem_correct = false;
  bool stem_failed = false;  // no inventory ending matched the hypothesis
  ConsonantTriple gold_triple;
  IpaString predicted_cluster;  // empty when stem_failed
  KnowledgeState knowledge = KnowledgeState::kUnlabeled;
};

bool score_sequence(const IpaString& hypothesis, const IpaString& gold);

struct StemScore {
  bool correct = false;
  bool failed = false;
  IpaString cluster;
};

// Compares stress-stripped stems. A hypothesis with no matching ending is
// incorrect and flagged; an empty hypothesis stem only matches an empty gold
// stem.
StemScore score_stem(const IpaString& hypothesis, const IpaString& gold, const MsdTag& target_tag,
                     const EndingInventory& inventory = EndingInventory::spanish_present());

PredictionRecord score_record(const DatasetKey& dataset, const SidecarRow& item, const IpaString& hypothesis,
                              bool complete, const EndingInventory& inventory = EndingInventory::spanish_present());

// Joins a test sidecar with its prediction file row by row. Throws
// std::runtime_error when the two are not aligned (count, ids or gold forms).
std::vector<PredictionRecord> score_predictions(const DatasetKey& dataset, const std::vector<SidecarRow>& items,
                                                const std::vector<PredictionRow>& predictions,
                                                const EndingInventory& inventory = EndingInventory::spanish_present());

void write_records(std::ostream& out, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_records(std::istream& in);

enum class Metric { kSequence, kStem };
std::string_view metric_name(Metric m);

enum class CiMethod { kNormal, kBootstrap };

struct SummaryOptions {
  bool by_zone = false;
  Metric metric = Metric::kSequence;
  CiMethod ci = CiMethod::kNormal;
  double z = 1.96;
  int bootstrap_samples = 2000;
  std::uint64_t bootstrap_seed = 1;
};

// Mean of per-model accuracies (percent) for one group. The CI is only
// available with two or more models.
struct AccuracySummary {
  std::string condition;
  VerbClass verb_class = VerbClass::kL;
  std::optional<ZonePattern> zone;
  Metric metric = Metric::kSequence;
  double mean = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::size_t models = 0;
  std::size_t records = 0;
};

struct MeanInterval {
  double mean = 0.0;
  std::optional<double> low;
  std::optional<double> high;
};

// Normal approximation: mean +- z * s / sqrt(n), s with n - 1 denominator.
MeanInterval normal_interval(const std::vector<double>& samples, double z = 1.96);
// Percentile bootstrap over the samples.
MeanInterval bootstrap_interval(const std::vector<double>& samples, int resamples, std::uint64_t seed);

// Groups by condition x verb class (x zone pattern), in sorted key order, so
// the result does not depend on record order.
std::vector<AccuracySummary> summarize(const std::vector<PredictionRecord>& records, const SummaryOptions& options = {});

// Long TSV, one row per summary; l_nl_ratio repeats the L/NL mean ratio of
// the (metric, condition, zone) group on both class rows.
void write_summary(std::ostream& out, const std::vector<AccuracySummary>& summaries);

}  // namespace morphome

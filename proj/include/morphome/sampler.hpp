#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphome/tripler.hpp"

namespace morphome {

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FrequencyCondition {
  std::string name;
  int l_count = 0;
  int nl_count = 0;

  int total() const { return l_count + nl_count; }
  double l_ratio() const { return total() ? static_cast<double>(l_count) / total() : 0.0; }
};

// 10L-90NL (33/300), 50L-50NL (167/166), 90L-10NL (300/33).
std::vector<FrequencyCondition> default_conditions();

struct SplitCounts {
  int train = 239;
  int dev = 27;
  int test = 67;
  int total() const { return train + dev + test; }
};

struct LemmaRoster {
  std::vector<IpaString> l;
  std::vector<IpaString> nl;
  std::size_t size() const { return l.size() + nl.size(); }
};

struct LemmaSplit {
  LemmaRoster train;
  LemmaRoster dev;
  LemmaRoster test;
};

struct SamplingPlan {
  std::vector<FrequencyCondition> conditions = default_conditions();
  SplitCounts split;
  int bins = 4;
  int runs = 3;
  std::uint64_t master_seed = 20240601;
  SourceOrder source_order = SourceOrder::kRandom;
};

// Per-dataset seeds, all derived from the master seed and labels:
//   roster = derive(master, "roster")            shared by all conditions
//   order  = derive(master, "order")             source positions per lemma
//   bins   = derive(master, "bins")              bin partition per lemma
//   split  = derive(master, "split", cond, "bin", b)
//   run    = derive(master, "run", cond, "bin", b, "run", r)
struct DatasetSeeds {
  std::uint64_t master = 0;
  std::uint64_t roster = 0;
  std::uint64_t order = 0;
  std::uint64_t bins = 0;
  std::uint64_t split = 0;
  std::uint64_t run = 0;
};

DatasetSeeds dataset_seeds(std::uint64_t master, const std::string& condition, int bin, int run);

// Both pools are sorted and shuffled with fixed seeded streams; the condition
// takes prefixes of those shuffles, so a smaller condition's lemma sets are
// subsets of a larger one's.
LemmaRoster sample_condition_lemmas(std::vector<IpaString> l_pool, std::vector<IpaString> nl_pool,
                                    const FrequencyCondition& condition, std::uint64_t seed);

// Stratified split. Dev and test receive round(ratio * size) L lemmas (exact
// halves round down); train takes the remaining L lemmas, so any rounding
// surplus lands in train. NL lemmas fill the rest of each split.
LemmaSplit split_lemmas(const LemmaRoster& roster, const SplitCounts& counts, std::uint64_t seed);

// Seeded partition of one lemma's triples into `bins` equal bins.
std::vector<std::vector<ReinflectionTriple>> bin_combinations(const std::vector<ReinflectionTriple>& triples,
                                                              int bins, std::uint64_t seed);

struct ConditionDataset {
  FrequencyCondition condition;
  int bin = 0;
  int run = 0;
  DatasetSeeds seeds;
  LemmaSplit lemmas;
  std::vector<ReinflectionTriple> train;
  std::vector<ReinflectionTriple> dev;
  std::vector<ReinflectionTriple> test;

  std::string id() const;  // "90L-10NL/bin0/run1"
};

// Lemma -> classified table lookup for the sampler.
class Lexicon {
 public:
  explicit Lexicon(std::vector<InflectionTable> tables);

  const InflectionTable& table(const IpaString& lemma) const;
  std::vector<IpaString> pool(VerbClass c) const;
  const std::vector<InflectionTable>& tables() const { return tables_; }

 private:
  std::vector<InflectionTable> tables_;
  std::map<IpaString, std::size_t> index_;
};

// train: the bin's triples of every train lemma, shuffled by the run seed;
// dev: the bin's triples of every dev lemma; test: all triples of every test
// lemma (so the test set does not depend on the run).
ConditionDataset build_dataset(const Lexicon& lexicon, const SamplingPlan& plan, const FrequencyCondition& condition,
                               int bin, int run);

// <dir>/{train,dev,test}.{src,tgt,tsv} plus lemmas.tsv and dataset.json.
void write_dataset(const ConditionDataset& dataset, const std::string& dir);

// Reads lemmas.tsv back.
LemmaSplit read_lemma_split(std::istream& in);

}  // namespace morphome

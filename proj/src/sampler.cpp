#include "morphome/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "morphome/rng.hpp"

namespace morphome {

std::vector<FrequencyCondition> default_conditions() {
  return {{"10L-90NL", 33, 300}, {"50L-50NL", 167, 166}, {"90L-10NL", 300, 33}};
}

DatasetSeeds dataset_seeds(std::uint64_t master, const std::string& condition, int bin, int run) {
  DatasetSeeds s;
  s.master = master;
  s.roster = derive_seed(master, "roster");
  s.order = derive_seed(master, "order");
  s.bins = derive_seed(master, "bins");
  const std::string b = std::to_string(bin), r = std::to_string(run);
  s.split = derive_seed(master, {"split", condition, "bin", b});
  s.run = derive_seed(master, {"run", condition, "bin", b, "run", r});
  return s;
}

LemmaRoster sample_condition_lemmas(std::vector<IpaString> l_pool, std::vector<IpaString> nl_pool,
                                    const FrequencyCondition& condition, std::uint64_t seed) {
  if (condition.l_count < 0 || condition.nl_count < 0) throw SamplingError("negative lemma count");
  if (static_cast<std::size_t>(condition.l_count) > l_pool.size())
    throw SamplingError(condition.name + ": needs " + std::to_string(condition.l_count) + " L lemmas, pool has " +
                        std::to_string(l_pool.size()));
  if (static_cast<std::size_t>(condition.nl_count) > nl_pool.size())
    throw SamplingError(condition.name + ": needs " + std::to_string(condition.nl_count) + " NL lemmas, pool has " +
                        std::to_string(nl_pool.size()));
  std::sort(l_pool.begin(), l_pool.end());
  std::sort(nl_pool.begin(), nl_pool.end());
  Rng l_rng(derive_seed(seed, "L"));
  Rng nl_rng(derive_seed(seed, "NL"));
  l_rng.shuffle(l_pool);
  nl_rng.shuffle(nl_pool);
  l_pool.resize(static_cast<std::size_t>(condition.l_count));
  nl_pool.resize(static_cast<std::size_t>(condition.nl_count));
  return {std::move(l_pool), std::move(nl_pool)};
}

namespace {

int stratified_quota(double ratio, int size) {
  double exact = ratio * size;
  double floor = std::floor(exact);
  return static_cast<int>(exact - floor > 0.5 ? floor + 1 : floor);
}

}  // namespace

LemmaSplit split_lemmas(const LemmaRoster& roster, const SplitCounts& counts, std::uint64_t seed) {
  if (counts.train < 0 || counts.dev < 0 || counts.test < 0) throw SamplingError("negative split size");
  if (roster.size() != static_cast<std::size_t>(counts.total()))
    throw SamplingError("roster has " + std::to_string(roster.size()) + " lemmas, split needs " +
                        std::to_string(counts.total()));
  const int l_total = static_cast<int>(roster.l.size());
  const double ratio = static_cast<double>(l_total) / counts.total();
  int dev_l = std::min(stratified_quota(ratio, counts.dev), l_total);
  int test_l = std::min(stratified_quota(ratio, counts.test), l_total - dev_l);
  int train_l = l_total - dev_l - test_l;
  // Keep each split's NL share non-negative when the roster is tiny.
  auto fix = [](int& l, int size) { l = std::clamp(l, 0, size); };
  fix(train_l, counts.train);
  fix(dev_l, counts.dev);
  fix(test_l, counts.test);
  if (train_l + dev_l + test_l != l_total) throw SamplingError("cannot stratify L lemmas across the split sizes");

  std::vector<IpaString> l = roster.l, nl = roster.nl;
  std::sort(l.begin(), l.end());
  std::sort(nl.begin(), nl.end());
  Rng l_rng(derive_seed(seed, "L"));
  Rng nl_rng(derive_seed(seed, "NL"));
  l_rng.shuffle(l);
  nl_rng.shuffle(nl);

  LemmaSplit split;
  auto take = [](std::vector<IpaString>& from, std::size_t& pos, int n, std::vector<IpaString>& to) {
    to.assign(from.begin() + static_cast<std::ptrdiff_t>(pos), from.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(n)));
    std::sort(to.begin(), to.end());
    pos += static_cast<std::size_t>(n);
  };
  std::size_t lp = 0, np = 0;
  take(l, lp, test_l, split.test.l);
  take(l, lp, dev_l, split.dev.l);
  take(l, lp, train_l, split.train.l);
  take(nl, np, counts.test - test_l, split.test.nl);
  take(nl, np, counts.dev - dev_l, split.dev.nl);
  take(nl, np, counts.train - train_l, split.train.nl);
  return split;
}

std::vector<std::vector<ReinflectionTriple>> bin_combinations(const std::vector<ReinflectionTriple>& triples, int bins,
                                                              std::uint64_t seed) {
  if (bins <= 0) throw SamplingError("bin count must be positive");
  if (triples.size() % static_cast<std::size_t>(bins) != 0)
    throw SamplingError(std::to_string(triples.size()) + " triples do not split into " + std::to_string(bins) +
                        " equal bins");
  std::vector<std::size_t> order(triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t per_bin = triples.size() / static_cast<std::size_t>(bins);
  std::vector<std::vector<ReinflectionTriple>> out(static_cast<std::size_t>(bins));
  for (std::size_t b = 0; b < out.size(); ++b) {
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(b * per_bin),
                                     order.begin() + static_cast<std::ptrdiff_t>((b + 1) * per_bin));
    std::sort(members.begin(), members.end());
    for (auto i : members) out[b].push_back(triples[i]);
  }
  return out;
}

std::string ConditionDataset::id() const {
  return condition.name + "/bin" + std::to_string(bin) + "/run" + std::to_string(run);
}

Lexicon::Lexicon(std::vector<InflectionTable> tables) : tables_(std::move(tables)) {
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    if (!index_.emplace(tables_[i].lemma, i).second)
      throw SamplingError("duplicate lemma in lexicon: " + to_utf8(tables_[i].lemma));
  }
}

const InflectionTable& Lexicon::table(const IpaString& lemma) const {
  auto it = index_.find(lemma);
  if (it == index_.end()) throw SamplingError("unknown lemma: " + to_utf8(lemma));
  return tables_[it->second];
}

std::vector<IpaString> Lexicon::pool(VerbClass c) const {
  std::vector<IpaString> out;
  for (const auto& t : tables_)
    if (t.verb_class == c) out.push_back(t.lemma);
  return out;
}

ConditionDataset build_dataset(const Lexicon& lexicon, const SamplingPlan& plan, const FrequencyCondition& condition,
                               int bin, int run) {
  if (bin < 0 || bin >= plan.bins) throw SamplingError("bin index out of range");
  if (run < 0 || run >= plan.runs) throw SamplingError("run index out of range");
  ConditionDataset ds;
  ds.condition = condition;
  ds.bin = bin;
  ds.run = run;
  ds.seeds = dataset_seeds(plan.master_seed, condition.name, bin, run);

  LemmaRoster roster = sample_condition_lemmas(lexicon.pool(VerbClass::kL), lexicon.pool(VerbClass::kNL), condition,
                                               ds.seeds.roster);
  ds.lemmas = split_lemmas(roster, plan.split, ds.seeds.split);

  auto bin_of = [&](const IpaString& lemma) {
    auto triples = generate_triples(lexicon.table(lemma), ds.seeds.order, plan.source_order);
    auto bins = bin_combinations(triples, plan.bins, derive_seed(ds.seeds.bins, to_utf8(lemma)));
    return std::move(bins[static_cast<std::size_t>(bin)]);
  };
  auto all_lemmas = [](const LemmaRoster& r) {
    std::vector<IpaString> v = r.l;
    v.insert(v.end(), r.nl.begin(), r.nl.end());
    std::sort(v.begin(), v.end());
    return v;
  };

  for (const auto& lemma : all_lemmas(ds.lemmas.train)) {
    auto part = bin_of(lemma);
    ds.train.insert(ds.train.end(), part.begin(), part.end());
  }
  Rng run_rng(ds.seeds.run);
  run_rng.shuffle(ds.train);

  for (const auto& lemma : all_lemmas(ds.lemmas.dev)) {
    auto part = bin_of(lemma);
    ds.dev.insert(ds.dev.end(), part.begin(), part.end());
  }
  for (const auto& lemma : all_lemmas(ds.lemmas.test)) {
    auto all = generate_triples(lexicon.table(lemma), ds.seeds.order, plan.source_order);
    ds.test.insert(ds.test.end(), all.begin(), all.end());
  }
  return ds;
}

void write_dataset(const ConditionDataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_triple_files((fs::path(dir) / "train").string(), ds.train);
  write_triple_files((fs::path(dir) / "dev").string(), ds.dev);
  write_triple_files((fs::path(dir) / "test").string(), ds.test);

  std::ofstream lemmas(fs::path(dir) / "lemmas.tsv", std::ios::binary);
  lemmas << "lemma\tverb_class\tsplit\n";
  auto emit = [&](const LemmaRoster& r, const char* split) {
    for (const auto& l : r.l) lemmas << to_utf8(l) << "\tL\t" << split << '\n';
    for (const auto& l : r.nl) lemmas << to_utf8(l) << "\tNL\t" << split << '\n';
  };
  emit(ds.lemmas.train, "train");
  emit(ds.lemmas.dev, "dev");
  emit(ds.lemmas.test, "test");

  nlohmann::ordered_json meta;
  meta["condition"] = ds.condition.name;
  meta["l_count"] = ds.condition.l_count;
  meta["nl_count"] = ds.condition.nl_count;
  meta["bin"] = ds.bin;
  meta["run"] = ds.run;
  meta["seeds"] = {{"master", ds.seeds.master}, {"roster", ds.seeds.roster}, {"order", ds.seeds.order},
                   {"bins", ds.seeds.bins},     {"split", ds.seeds.split},   {"run", ds.seeds.run}};
  meta["sizes"] = {{"train", ds.train.size()}, {"dev", ds.dev.size()}, {"test", ds.test.size()}};
  meta["lemmas"] = {{"train", {{"L", ds.lemmas.train.l.size()}, {"NL", ds.lemmas.train.nl.size()}}},
                    {"dev", {{"L", ds.lemmas.dev.l.size()}, {"NL", ds.lemmas.dev.nl.size()}}},
                    {"test", {{"L", ds.lemmas.test.l.size()}, {"NL", ds.lemmas.test.nl.size()}}}};
  std::ofstream(fs::path(dir) / "dataset.json", std::ios::binary) << meta.dump(2) << '\n';
}

LemmaSplit read_lemma_split(std::istream& in) {
  LemmaSplit split;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || line.empty()) continue;
    auto f = morphome::split(line, '\t');
    if (f.size() != 3) throw CorpusError("lemmas.tsv: expected 3 fields", number);
    LemmaRoster* roster = f[2] == "train" ? &split.train : f[2] == "dev" ? &split.dev : f[2] == "test" ? &split.test : nullptr;
    if (!roster) throw CorpusError("lemmas.tsv: unknown split '" + std::string(f[2]) + "'", number);
    (parse_verb_class(f[1]) == VerbClass::kL ? roster->l : roster->nl).push_back(from_utf8(f[0]));
  }
  return split;
}

}  // namespace morphome

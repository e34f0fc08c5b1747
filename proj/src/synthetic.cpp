#include "morphome/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>

#include "morphome/rng.hpp"

namespace morphome::synthetic {

std::vector<std::pair<ConsonantPair, int>> LexiconSpec::reference_pairs() {
  return {
      {{U"s", U"sk"}, 141}, {{U"n", U"nɡ"}, 53}, {{U"ç", U"x"}, 25},   {{U"s", U"ɡ"}, 15},
      {{U"", U"jɡ"}, 14},   {{U"Rç", U"Rx"}, 10}, {{U"nç", U"nx"}, 10}, {{U"l", U"lɡ"}, 4},
      {{U"lç", U"lx"}, 4},  {{U"s", U"sɡ"}, 2},   {{U"b", U"p"}, 1},
  };
}

namespace {

enum class Conjugation { kAr, kEr, kIr };

const std::array<std::array<const char32_t*, 6>, 2>& endings(Conjugation c) {
  static const std::array<std::array<const char32_t*, 6>, 2> ar{{{U"o", U"as", U"a", U"amos", U"ajs", U"an"},
                                                                 {U"e", U"es", U"e", U"emos", U"ejs", U"en"}}};
  static const std::array<std::array<const char32_t*, 6>, 2> er{{{U"o", U"es", U"e", U"emos", U"ejs", U"en"},
                                                                 {U"a", U"as", U"a", U"amos", U"ajs", U"an"}}};
  static const std::array<std::array<const char32_t*, 6>, 2> ir{{{U"o", U"es", U"e", U"imos", U"is", U"en"},
                                                                 {U"a", U"as", U"a", U"amos", U"ajs", U"an"}}};
  return c == Conjugation::kAr ? ar : c == Conjugation::kEr ? er : ir;
}

const char32_t* infinitive(Conjugation c) { return c == Conjugation::kAr ? U"aR" : c == Conjugation::kEr ? U"eR" : U"iR"; }

constexpr char32_t kStress = U'ˈ';

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[static_cast<std::size_t>(rng.below(items.size()))];
}

template <typename T>
const T& pick_weighted(Rng& rng, const std::vector<std::pair<T, int>>& items) {
  int total = 0;
  for (const auto& [_, w] : items) total += w;
  auto r = static_cast<int>(rng.below(static_cast<std::uint64_t>(total)));
  for (const auto& [item, w] : items) {
    if (r < w) return item;
    r -= w;
  }
  return items.back().first;
}

// Open syllables; the stem-final cluster is appended separately.
IpaString random_base(Rng& rng) {
  static const std::vector<IpaString> onsets = {U"p", U"t", U"k", U"b", U"d", U"ɡ", U"m", U"n", U"l", U"R",
                                                U"f", U"s", U"x", U"ʧ", U"tR", U"bR", U"pR", U"kl", U"fl", U"ʝ"};
  static const std::vector<IpaString> vowels = {U"a", U"e", U"i", U"o", U"u", U"a", U"e", U"o"};
  IpaString base;
  int syllables = 1 + static_cast<int>(rng.below(3));
  for (int i = 0; i < syllables; ++i) {
    if (i > 0 || rng.uniform() < 0.85) base += pick(rng, onsets);
    base += pick(rng, vowels);
  }
  return base;
}

const std::vector<std::pair<IpaString, int>>& nl_clusters() {
  static const std::vector<std::pair<IpaString, int>> clusters = {
      {U"s", 15}, {U"n", 10}, {U"ç", 3},  {U"l", 6},  {U"R", 10}, {U"t", 10}, {U"d", 8},  {U"k", 6},
      {U"b", 5},  {U"m", 5},  {U"ɲ", 2},  {U"nt", 5}, {U"nd", 5}, {U"st", 4}, {U"Rt", 3}, {U"ʧ", 3},
      {U"Rç", 1}, {U"nç", 1}, {U"lç", 1}, {U"", 2},
  };
  return clusters;
}

std::size_t last_vowel(const IpaString& s) {
  for (std::size_t i = s.size(); i > 0; --i)
    if (is_vowel(s[i - 1])) return i - 1;
  return IpaString::npos;
}

IpaString stem_stressed(IpaString stem, const IpaString& ending) {
  std::size_t v = last_vowel(stem);
  if (v == IpaString::npos) throw std::logic_error("stem without a vowel");
  // A diphthong carries the stress on its second element.
  stem.insert(stem.begin() + static_cast<std::ptrdiff_t>(v), kStress);
  return stem + ending;
}

IpaString ending_stressed(const IpaString& stem, const IpaString& ending) {
  return stem + kStress + ending;
}

IpaString diphthongize(const IpaString& stem) {
  std::size_t v = last_vowel(stem);
  if (v == IpaString::npos) return stem;
  IpaString out = stem;
  if (stem[v] == U'e') out.replace(v, 1, U"je");
  else if (stem[v] == U'o') out.replace(v, 1, U"we");
  return out;
}

IpaString shift_vowel(const IpaString& stem) {
  std::size_t v = last_vowel(stem);
  IpaString out = stem;
  switch (stem[v]) {
    case U'e': out[v] = U'i'; break;
    case U'o': out[v] = U'u'; break;
    case U'a': out[v] = U'e'; break;
    case U'i': out[v] = U'e'; break;
    default: out[v] = U'o'; break;
  }
  return out;
}

struct VerbPlan {
  Conjugation conjugation = Conjugation::kAr;
  IpaString out_stem;
  IpaString in_stem;
  bool diphthong = false;
};

InflectionTable build(const VerbPlan& plan) {
  InflectionTable t;
  t.lemma = plan.out_stem + infinitive(plan.conjugation);
  const auto& ends = endings(plan.conjugation);
  for (const auto& cell : all_cells()) {
    const int mood = cell.mood == Mood::kIndicative ? 0 : 1;
    const int slot = cell.index() % 6;
    const IpaString ending = ends[static_cast<std::size_t>(mood)][static_cast<std::size_t>(slot)];
    const bool in = zone_of(cell) == CellZone::kIn;
    IpaString stem = in ? plan.in_stem : plan.out_stem;
    const bool stressed_stem = slot != 3 && slot != 4;
    if (stressed_stem && plan.diphthong) stem = diphthongize(stem);
    t.cells[static_cast<std::size_t>(cell.index())] = stressed_stem ? stem_stressed(stem, ending) : ending_stressed(stem, ending);
  }
  return t;
}

// Largest-remainder apportionment of `n` items by weight.
std::vector<int> apportion(const std::vector<int>& weights, int n) {
  long total = 0;
  for (int w : weights) total += w;
  std::vector<int> out(weights.size(), 0);
  if (total == 0 || n <= 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double exact = static_cast<double>(weights[i]) * n / static_cast<double>(total);
    out[i] = static_cast<int>(std::floor(exact));
    assigned += out[i];
    remainders.emplace_back(exact - out[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++out[remainders[k % remainders.size()].second];
  return out;
}

}  // namespace

std::vector<InflectionTable> generate_lexicon(const LexiconSpec& spec) {
  if (spec.l_count < 0 || spec.nl_count < 0 || spec.l_vowel_only < 0 || spec.l_vowel_only > spec.l_count)
    throw std::invalid_argument("synthetic lexicon: invalid counts");
  Rng rng(spec.seed);
  std::set<IpaString> lemmas;
  std::vector<InflectionTable> tables;

  auto accept = [&](const VerbPlan& plan, VerbClass expected, const ConsonantPair* pair) {
    InflectionTable t = build(plan);
    if (lemmas.count(t.lemma)) return false;
    if (classify_verb(t) != expected) return false;
    if (pair && !(consonant_pair(t) == *pair)) return false;
    t.verb_class = expected;
    lemmas.insert(t.lemma);
    tables.push_back(std::move(t));
    return true;
  };

  std::vector<int> weights;
  for (const auto& [_, w] : spec.pairs) weights.push_back(w);
  std::vector<int> quota = apportion(weights, spec.l_count - spec.l_vowel_only);
  for (std::size_t p = 0; p < spec.pairs.size(); ++p) {
    const ConsonantPair& pair = spec.pairs[p].first;
    for (int made = 0; made < quota[p];) {
      VerbPlan plan;
      plan.conjugation = rng.uniform() < spec.l_er_share ? Conjugation::kEr : Conjugation::kIr;
      IpaString base = random_base(rng);
      plan.out_stem = base + pair.out_cluster;
      plan.in_stem = base + pair.in_cluster;
      if (accept(plan, VerbClass::kL, &pair)) ++made;
    }
  }
  for (int made = 0; made < spec.l_vowel_only;) {
    VerbPlan plan;
    plan.conjugation = rng.uniform() < spec.l_er_share ? Conjugation::kEr : Conjugation::kIr;
    plan.out_stem = random_base(rng) + pick_weighted(rng, nl_clusters());
    plan.in_stem = shift_vowel(plan.out_stem);
    if (accept(plan, VerbClass::kL, nullptr)) ++made;
  }
  for (int made = 0; made < spec.nl_count;) {
    VerbPlan plan;
    double r = rng.uniform();
    double rest = (1.0 - spec.nl_ar_share) / 2.0;
    plan.conjugation = r < spec.nl_ar_share ? Conjugation::kAr : r < spec.nl_ar_share + rest ? Conjugation::kEr : Conjugation::kIr;
    plan.out_stem = random_base(rng) + pick_weighted(rng, nl_clusters());
    plan.in_stem = plan.out_stem;
    plan.diphthong = rng.uniform() < spec.nl_diphthong_share;
    if (accept(plan, VerbClass::kNL, nullptr)) ++made;
  }
  std::sort(tables.begin(), tables.end(), [](const auto& a, const auto& b) { return a.lemma < b.lemma; });
  return tables;
}

void write_unimorph_with_noise(std::ostream& out, const std::vector<InflectionTable>& tables, const NoiseSpec& noise) {
  Rng rng(noise.seed);
  std::vector<std::string> lines;
  for (const auto& t : tables)
    for (const auto& cell : all_cells())
      lines.push_back(to_utf8(t.lemma) + "\t" + to_utf8(t.form(cell)) + "\t" + cell.unimorph());
  const std::size_t base = lines.size();
  for (int i = 0; i < noise.duplicate_lines && base > 0; ++i) lines.push_back(lines[static_cast<std::size_t>(rng.below(base))]);
  static const std::vector<std::string> other_tags = {"V;IND;PST;1;SG", "V;NFIN", "V;COND;3;PL", "V;IND;FUT;2;SG",
                                                      "V;POS;IMP;2;SG"};
  for (int i = 0; i < noise.out_of_inventory_lines && !tables.empty(); ++i) {
    const auto& t = tables[static_cast<std::size_t>(rng.below(tables.size()))];
    lines.push_back(to_utf8(t.lemma) + "\t" + to_utf8(t.lemma) + "\t" + pick(rng, other_tags));
  }
  for (int i = 0; i < noise.incomplete_lemmas; ++i) {
    VerbPlan plan;
    plan.out_stem = random_base(rng) + U"t";
    plan.in_stem = plan.out_stem;
    InflectionTable t = build(plan);
    t.lemma = U"zz" + t.lemma + from_utf8(std::to_string(i));
    const int missing = static_cast<int>(rng.below(kCellCount));
    for (const auto& cell : all_cells())
      if (cell.index() != missing) lines.push_back(to_utf8(t.lemma) + "\t" + to_utf8(t.form(cell)) + "\t" + cell.unimorph());
  }
  rng.shuffle(lines);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace morphome::synthetic

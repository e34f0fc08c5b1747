#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "morphome/evaluation.hpp"
#include "morphome/rng.hpp"

using namespace morphome;

namespace {

InflectionTable decir() {
  InflectionTable t;
  t.lemma = U"desiR";
  t.cells = {U"dˈiɡo", U"dˈises", U"dˈise", U"desˈimos", U"desˈis", U"dˈisen",
             U"dˈiɡa", U"dˈiɡas", U"dˈiɡa", U"diɡˈamos", U"diɡˈajs", U"dˈiɡan"};
  t.verb_class = VerbClass::kL;
  return t;
}

SidecarRow row_of(const ReinflectionTriple& t) {
  SidecarRow r;
  r.lemma = t.lemma;
  r.source1_tag = t.source1.tag;
  r.source2_tag = t.source2.tag;
  r.target_tag = t.target_tag;
  r.verb_class = t.verb_class;
  r.zone_pattern = t.zone_pattern();
  r.source1_form = t.source1.form;
  r.source2_form = t.source2.form;
  r.target_form = t.target_form;
  return r;
}

// Random edits of the gold: keep, change a vowel, change the first letter,
// drop the ending, append junk.
IpaString mutate(const IpaString& gold, Rng& rng) {
  IpaString h = gold;
  switch (rng.below(5)) {
    case 0: break;
    case 1:
      for (auto& c : h)
        if (is_vowel(c)) {
          c = U'u';
          break;
        }
      break;
    case 2: h[0] = U't'; break;
    case 3: h.pop_back(); break;
    default: h += U"s"; break;
  }
  return h;
}

std::vector<PredictionRecord> toy_records(std::uint64_t seed) {
  Rng rng(seed);
  auto triples = generate_triples(decir(), seed);
  std::vector<PredictionRecord> records;
  for (const char* cond : {"10L-90NL", "90L-10NL"}) {
    for (int run = 0; run < 3; ++run) {
      for (std::size_t i = 0; i < 80; ++i) {
        auto item = row_of(triples[rng.below(triples.size())]);
        item.verb_class = rng.coin() ? VerbClass::kL : VerbClass::kNL;
        records.push_back(score_record({cond, 0, run}, item, mutate(item.target_form, rng), true));
      }
    }
  }
  return records;
}

const MsdTag kSbjv2Sg{Mood::kSubjunctive, 2, Number::kSingular};

}  // namespace

TEST_CASE("sequence scoring is exact code-point equality") {
  CHECK(score_sequence(unspaced("d i ɡ a s"), U"diɡas"));
  CHECK_FALSE(score_sequence(unspaced("d i s a s"), U"diɡas"));
  CHECK_FALSE(score_sequence(U"dˈiɡas", U"diɡˈas"));
}

TEST_CASE("stem scoring") {
  auto same = score_stem(U"dˈiɡas", U"dˈiɡas", kSbjv2Sg);
  CHECK(same.correct);
  CHECK(same.cluster == U"ɡ");

  // right stem, wrong ending
  auto ending = score_stem(U"diɡˈamos", U"dˈiɡas", kSbjv2Sg);
  CHECK(ending.correct);
  CHECK_FALSE(score_sequence(U"diɡˈamos", U"dˈiɡas"));

  auto wrong = score_stem(U"dˈisas", U"dˈiɡas", kSbjv2Sg);
  CHECK_FALSE(wrong.correct);
  CHECK(wrong.cluster == U"s");

  auto failed = score_stem(U"dˈiɡx", U"dˈiɡas", kSbjv2Sg);
  CHECK(failed.failed);
  CHECK_FALSE(failed.correct);

  // an ending with nothing in front is an empty stem, not a match
  auto empty = score_stem(U"as", U"dˈiɡas", kSbjv2Sg);
  CHECK_FALSE(empty.failed);
  CHECK_FALSE(empty.correct);
}

TEST_CASE("gold consonant triple") {
  auto triples = generate_triples(decir(), 3, SourceOrder::kCanonical);
  for (const auto& t : triples) {
    if (t.source1.tag.index() == 2 && t.source2.tag.index() == 9 && t.target_tag.index() == 7) {
      auto ct = consonant_triple(t);
      CHECK(ct.label() == "s|ɡ|ɡ");
      CHECK(ConsonantTriple::parse(ct.label()) == ct);
      CHECK(consonant_triple(row_of(t)) == ct);
    }
  }
  CHECK(ConsonantTriple::parse("|jɡ|jɡ").source1.empty());
}

TEST_CASE("exact match implies stem match") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& r : toy_records(seed)) {
      if (r.seq_correct) CHECK(r.stem_correct);
      if (r.stem_failed) CHECK_FALSE(r.stem_correct);
    }
  }
}

TEST_CASE("normal interval closed form") {
  auto iv = normal_interval({50.0, 60.0, 70.0});
  CHECK(iv.mean == doctest::Approx(60.0));
  REQUIRE(iv.low);
  // s = 10, half width = 1.96 * 10 / sqrt(3)
  CHECK(*iv.low == doctest::Approx(48.68392).epsilon(1e-6));
  CHECK(*iv.high == doctest::Approx(71.31608).epsilon(1e-6));

  auto flat = normal_interval(std::vector<double>(12, 42.5));
  CHECK(*flat.low == doctest::Approx(42.5));
  CHECK(*flat.high == doctest::Approx(42.5));

  auto single = normal_interval({33.0});
  CHECK(single.mean == 33.0);
  CHECK_FALSE(single.low);
  CHECK_FALSE(single.high);
}

TEST_CASE("bootstrap interval is seeded and brackets the mean") {
  std::vector<double> xs{10, 20, 35, 40, 41, 60, 62, 70, 75, 80, 90, 95};
  auto a = bootstrap_interval(xs, 1000, 7);
  auto b = bootstrap_interval(xs, 1000, 7);
  CHECK(*a.low == *b.low);
  CHECK(*a.high == *b.high);
  CHECK(*a.low <= a.mean);
  CHECK(a.mean <= *a.high);
  CHECK(*a.low > 10.0);
  CHECK(*a.high < 95.0);
}

TEST_CASE("summaries: per-model means, counts, permutation invariance") {
  auto records = toy_records(11);
  auto base = summarize(records);
  std::size_t total = 0;
  for (const auto& s : base) {
    total += s.records;
    CHECK(s.models == 3);
    CHECK(s.mean >= 0.0);
    CHECK(s.mean <= 100.0);
    CHECK(*s.ci_low <= s.mean);
    CHECK(s.mean <= *s.ci_high);
  }
  CHECK(total == records.size());
  CHECK(base.size() == 4);

  // hand check one group
  std::vector<double> per_model;
  for (int run = 0; run < 3; ++run) {
    double ok = 0, n = 0;
    for (const auto& r : records)
      if (r.dataset.condition == "90L-10NL" && r.dataset.run == run && r.item.verb_class == VerbClass::kL) {
        ++n;
        ok += r.seq_correct;
      }
    per_model.push_back(100.0 * ok / n);
  }
  auto expected = normal_interval(per_model);
  for (const auto& s : base)
    if (s.condition == "90L-10NL" && s.verb_class == VerbClass::kL) CHECK(s.mean == doctest::Approx(expected.mean));

  Rng rng(5);
  for (int k = 0; k < 3; ++k) {
    auto shuffled = records;
    rng.shuffle(shuffled);
    auto again = summarize(shuffled);
    REQUIRE(again.size() == base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(again[i].mean == base[i].mean);
      CHECK(*again[i].ci_low == *base[i].ci_low);
      CHECK(again[i].records == base[i].records);
    }
  }

  SummaryOptions zones;
  zones.by_zone = true;
  zones.metric = Metric::kStem;
  auto by_zone = summarize(records, zones);
  std::size_t zone_total = 0;
  std::set<std::string> labels;
  for (const auto& s : by_zone) {
    zone_total += s.records;
    labels.insert(zone_pattern_label(*s.zone));
  }
  CHECK(zone_total == records.size());
  CHECK(labels.size() == 8);
}

TEST_CASE("singleton group has no interval") {
  auto records = toy_records(2);
  std::vector<PredictionRecord> one;
  for (const auto& r : records)
    if (r.dataset.run == 0) one.push_back(r);
  for (const auto& s : summarize(one)) {
    CHECK(s.models == 1);
    CHECK_FALSE(s.ci_low);
  }
  std::ostringstream out;
  write_summary(out, summarize(one));
  CHECK(out.str().find("\tNA\tNA\t1\t") != std::string::npos);
}

TEST_CASE("summary TSV carries the L/NL ratio") {
  std::vector<AccuracySummary> s(2);
  s[0].condition = s[1].condition = "10L-90NL";
  s[0].verb_class = VerbClass::kL;
  s[0].mean = 40.0;
  s[1].verb_class = VerbClass::kNL;
  s[1].mean = 80.0;
  std::ostringstream out;
  write_summary(out, s);
  std::istringstream in(out.str());
  std::string header, l, nl;
  std::getline(in, header);
  std::getline(in, l);
  std::getline(in, nl);
  CHECK(header.rfind("l_nl_ratio") != std::string::npos);
  CHECK(l.substr(l.rfind('\t') + 1) == "0.5000");
  CHECK(nl.substr(nl.rfind('\t') + 1) == "0.5000");
}

TEST_CASE("joining predictions checks alignment") {
  auto triples = generate_triples(decir(), 1);
  std::vector<SidecarRow> items{row_of(triples[0]), row_of(triples[1])};
  std::vector<PredictionRow> preds(2);
  for (std::size_t i = 0; i < 2; ++i) {
    preds[i].id = i;
    preds[i].gold = to_utf8(items[i].target_form);
    preds[i].hypothesis = preds[i].gold;
  }
  auto records = score_predictions({"c", 0, 0}, items, preds);
  CHECK(records.size() == 2);
  CHECK(records[0].seq_correct);

  auto short_preds = preds;
  short_preds.pop_back();
  CHECK_THROWS(score_predictions({"c", 0, 0}, items, short_preds));
  auto bad_gold = preds;
  bad_gold[1].gold = "x";
  CHECK_THROWS(score_predictions({"c", 0, 0}, items, bad_gold));
  auto bad_id = preds;
  bad_id[1].id = 5;
  CHECK_THROWS(score_predictions({"c", 0, 0}, items, bad_id));
}

TEST_CASE("records round-trip through TSV") {
  auto records = toy_records(9);
  records[0].knowledge = KnowledgeState::kMemorized;
  records[1].knowledge = KnowledgeState::kGeneralized;
  std::ostringstream out;
  write_records(out, records);
  std::istringstream in(out.str());
  auto back = read_records(in);
  REQUIRE(back.size() == records.size());
  std::ostringstream again;
  write_records(again, back);
  CHECK(again.str() == out.str());
  CHECK(back[0].knowledge == KnowledgeState::kMemorized);
  CHECK(parse_dataset_key("90L-10NL/bin3/run2") == DatasetKey{"90L-10NL", 3, 2});
  CHECK_THROWS(parse_dataset_key("90L-10NL/bin/run2"));
}

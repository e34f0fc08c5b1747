#include <doctest.h>

#include <set>
#include <sstream>

#include "morphome/analysis.hpp"
#include "morphome/synthetic.hpp"

using namespace morphome;

namespace {

InflectionTable decir() {
  return {U"desiR",
          {U"dˈiɡo", U"dˈises", U"dˈise", U"desˈimos", U"desˈis", U"dˈisen", U"dˈiɡa", U"dˈiɡas", U"dˈiɡa",
           U"diɡˈamos", U"diɡˈajs", U"dˈiɡan"},
          VerbClass::kL};
}

InflectionTable conocer() {
  return {U"konoseR",
          {U"konˈosko", U"konˈoses", U"konˈose", U"konosˈemos", U"konosˈejs", U"konˈosen", U"konˈoska",
           U"konˈoskas", U"konˈoska", U"konoskˈamos", U"konoskˈajs", U"konˈoskan"},
          VerbClass::kL};
}

InflectionTable cantar() {
  return {U"kantaR",
          {U"kˈanto", U"kˈantas", U"kˈanta", U"kantˈamos", U"kantˈajs", U"kˈantan", U"kˈante", U"kˈantes",
           U"kˈante", U"kantˈemos", U"kantˈejs", U"kˈanten"},
          VerbClass::kNL};
}

SidecarRow row_of(const ReinflectionTriple& t) {
  return {t.lemma, t.source1.tag, t.source2.tag, t.target_tag, t.verb_class, t.zone_pattern(),
          t.source1.form, t.source2.form, t.target_form};
}

std::vector<PredictionRecord> all_correct(const std::vector<std::string>& conditions) {
  std::vector<PredictionRecord> records;
  for (const auto& c : conditions)
    for (int run = 0; run < 2; ++run)
      for (const auto& table : {decir(), cantar()})
        for (const auto& t : generate_triples(table, 5))
          records.push_back(score_record({c, 0, run}, row_of(t), t.target_form, true));
  return records;
}

IpaString replace_all(IpaString s, const IpaString& from, const IpaString& to) {
  for (std::size_t pos = s.find(from); pos != IpaString::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

const std::vector<std::string> kConditions{"10L-90NL", "50L-50NL", "90L-10NL"};

}  // namespace

TEST_CASE("cell-combination table: 8 rows per condition, all-correct gives 100 and ratio 1") {
  auto rows = cell_combination_table(all_correct(kConditions), kConditions);
  REQUIRE(rows.size() == 24);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].condition == kConditions[i / 8]);
    CHECK(rows[i].zone == all_zone_patterns()[i % 8]);
    CHECK(*rows[i].l == doctest::Approx(100.0));
    CHECK(*rows[i].nl == doctest::Approx(100.0));
    CHECK(*rows[i].ratio == doctest::Approx(1.0));
  }
  std::ostringstream out;
  write_cell_combination_table(out, rows);
  std::string header = out.str().substr(0, out.str().find('\n'));
  CHECK(header == "condition\tzone_pattern\tL\tNL\tl_nl_ratio\tL_records\tNL_records");

  // absent condition still yields its rows
  auto partial = cell_combination_table(all_correct({"10L-90NL"}), kConditions);
  CHECK(partial.size() == 24);
  CHECK_FALSE(partial[8].l);
  CHECK_FALSE(partial[8].ratio);
}

TEST_CASE("cell-combination means are per-model means") {
  auto records = all_correct({"c"});
  // make every L In-Out-In record of run 1 wrong: L mean there is (100 + 0) / 2
  ZonePattern ioi{CellZone::kIn, CellZone::kOut, CellZone::kIn};
  for (auto& r : records)
    if (r.dataset.run == 1 && r.item.verb_class == VerbClass::kL && r.item.zone_pattern == ioi) r.seq_correct = false;
  auto rows = cell_combination_table(records, {"c"});
  for (const auto& r : rows) {
    if (r.zone == ioi) {
      CHECK(*r.l == doctest::Approx(50.0));
      CHECK(*r.ratio == doctest::Approx(0.5));
    } else {
      CHECK(*r.l == doctest::Approx(100.0));
    }
  }
}

TEST_CASE("primacy and recency contrasts") {
  std::vector<CellCombinationRow> table;
  for (const auto& z : all_zone_patterns()) {
    CellCombinationRow r;
    r.condition = "10L-90NL";
    r.zone = z;
    r.l = 50.0;
    r.nl = 60.0;
    table.push_back(r);
  }
  auto set_l = [&](ZonePattern z, double v) {
    for (auto& r : table)
      if (r.zone == z) r.l = v;
  };
  using Z = CellZone;
  set_l({Z::kIn, Z::kOut, Z::kIn}, 40.26);
  set_l({Z::kOut, Z::kOut, Z::kIn}, 30.39);

  auto contrasts = primacy_recency_contrasts(table);
  REQUIRE(contrasts.size() == 16);  // 8 per verb class

  // brute-force oracle: pairs differing in exactly one source slot, same
  // target, the favoured side matching the target in that slot
  std::set<std::tuple<int, ZonePattern, ZonePattern>> expected;
  for (const auto& a : all_zone_patterns())
    for (const auto& b : all_zone_patterns())
      for (int slot = 0; slot < 2; ++slot)
        if (a[2] == b[2] && a[1 - slot] == b[1 - slot] && a[slot] != b[slot] && a[slot] == a[2])
          expected.insert({slot, a, b});
  CHECK(expected.size() == 8);
  std::set<std::tuple<int, ZonePattern, ZonePattern>> got;
  for (const auto& c : contrasts)
    if (c.verb_class == VerbClass::kL) got.insert({c.kind == ContrastKind::kPrimacy ? 0 : 1, c.favoured, c.baseline});
  CHECK(got == expected);

  bool found = false;
  for (const auto& c : contrasts) {
    if (c.verb_class == VerbClass::kL && c.kind == ContrastKind::kPrimacy && c.favoured == ZonePattern{Z::kIn, Z::kOut, Z::kIn}) {
      found = true;
      CHECK(*c.delta == doctest::Approx(9.87));
      CHECK(c.direction == "primacy");
    }
    if (c.verb_class == VerbClass::kNL) {
      CHECK(*c.delta == 0.0);
      CHECK(c.direction == "none");
    }
  }
  CHECK(found);

  set_l({Z::kOut, Z::kOut, Z::kIn}, 45.0);
  for (const auto& c : primacy_recency_contrasts(table))
    if (c.verb_class == VerbClass::kL && c.favoured == ZonePattern{Z::kIn, Z::kOut, Z::kIn} && c.kind == ContrastKind::kPrimacy)
      CHECK(c.direction == "reverse");
}

TEST_CASE("knowledge state labels partition the records") {
  auto conoce = generate_triples(conocer(), 2);
  DatasetKey ds{"90L-10NL", 0, 0};
  std::vector<PredictionRecord> records;
  for (const auto& t : conoce) records.push_back(score_record(ds, row_of(t), t.target_form, true));

  ConsonantTriple s_sk_sk{U"s", U"sk", U"sk"};
  std::map<DatasetKey, std::set<ConsonantTriple>> seen{{ds, {s_sk_sk}}};
  label_knowledge_state(records, seen);
  std::size_t memorized = 0, generalized = 0;
  for (const auto& r : records) {
    if (r.gold_triple == s_sk_sk) {
      CHECK(r.knowledge == KnowledgeState::kMemorized);
      ++memorized;
    } else {
      CHECK(r.knowledge == KnowledgeState::kGeneralized);
      ++generalized;
    }
  }
  CHECK(memorized > 0);
  CHECK(memorized + generalized == records.size());

  // labels come from the training triples themselves
  auto from_train = training_triples(conoce);
  CHECK(from_train.count(s_sk_sk) == 1);
  std::map<DatasetKey, std::set<ConsonantTriple>> full{{ds, from_train}};
  label_knowledge_state(records, full);
  for (const auto& r : records) CHECK(r.knowledge == KnowledgeState::kMemorized);

  records[0].dataset.run = 2;
  CHECK_THROWS_AS(label_knowledge_state(records, full), std::out_of_range);
}

TEST_CASE("observation export and Wilson proportions on a 4-record toy") {
  auto triples = generate_triples(conocer(), 2);
  std::vector<PredictionRecord> records;
  const char* conds[] = {"90L-10NL", "90L-10NL", "90L-10NL", "10L-90NL"};
  KnowledgeState states[] = {KnowledgeState::kMemorized, KnowledgeState::kMemorized, KnowledgeState::kGeneralized,
                             KnowledgeState::kMemorized};
  bool correct[] = {true, false, true, true};
  for (int i = 0; i < 4; ++i) {
    const auto& t = triples[static_cast<std::size_t>(i)];
    auto r = score_record({conds[i], 0, i % 2}, row_of(t), correct[i] ? t.target_form : IpaString(U"xx"), true);
    r.knowledge = states[i];
    records.push_back(r);
  }
  std::ostringstream out;
  write_observations(out, records);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "prediction_status\tknowledge_state\tfrequency_condition\ttriple\tmodel");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
  CHECK(out.str().find("0\tMemorized\t90L-10NL\t") != std::string::npos);

  auto props = knowledge_proportions(records);
  REQUIRE(props.size() == 3);
  for (const auto& p : props) {
    if (p.knowledge == KnowledgeState::kMemorized && p.condition == "90L-10NL") {
      CHECK(p.correct == 1);
      CHECK(p.total == 2);
      CHECK(p.proportion.value == doctest::Approx(0.5));
      // Wilson 1/2 at z = 1.96
      CHECK(p.proportion.low == doctest::Approx(0.094531).epsilon(1e-5));
      CHECK(p.proportion.high == doctest::Approx(0.905469).epsilon(1e-5));
    }
  }
  auto w = wilson_interval(0, 10);
  CHECK(w.low == 0.0);
  CHECK(w.high == doctest::Approx(0.277532).epsilon(1e-5));

  records[3].knowledge = KnowledgeState::kUnlabeled;
  std::ostringstream bad;
  CHECK_THROWS(write_observations(bad, records));
}

TEST_CASE("consonant pair census") {
  auto tables = synthetic::generate_lexicon({.l_count = 60, .nl_count = 40, .l_vowel_only = 3});
  auto census = consonant_pair_census(tables);
  std::size_t total = 0;
  for (std::size_t i = 0; i < census.size(); ++i) {
    total += census[i].count;
    if (i) {
      CHECK(census[i - 1].count >= census[i].count);
      if (census[i - 1].count == census[i].count) CHECK(census[i - 1].pair.label() < census[i].pair.label());
    }
  }
  CHECK(total == 60);

  auto reversed = tables;
  std::reverse(reversed.begin(), reversed.end());
  auto again = consonant_pair_census(reversed);
  REQUIRE(again.size() == census.size());
  for (std::size_t i = 0; i < census.size(); ++i) {
    CHECK(again[i].pair == census[i].pair);
    CHECK(again[i].count == census[i].count);
  }

  auto hand = consonant_pair_census({decir(), conocer(), cantar(), conocer()});
  REQUIRE(hand.size() == 2);
  CHECK(hand[0].pair.label() == "[s]-[sk]");
  CHECK(hand[0].count == 2);
  CHECK(hand[1].pair.label() == "[s]-[ɡ]");
}

TEST_CASE("pair train/test frequencies") {
  std::map<IpaString, ConsonantPair> pairs = lemma_pairs({decir(), conocer(), cantar()});
  pairs[U"pareseR"] = pairs[U"konoseR"];
  LemmaSplit split;
  split.train.l = {U"konoseR", U"pareseR"};
  split.train.nl = {U"kantaR"};
  split.test.l = {U"konoseR", U"desiR"};
  auto rows = pair_train_test_frequencies({"10L-90NL", 1, 0}, split, pairs);
  REQUIRE(rows.size() == 2);
  std::size_t test_sum = 0;
  for (const auto& r : rows) {
    test_sum += r.test;
    if (r.pair.label() == "[s]-[ɡ]") {
      CHECK(r.test == 1);
      CHECK(r.train == 0);
      CHECK(r.unseen_in_train());
    } else {
      CHECK(r.test == 1);
      CHECK(r.train == 2);
    }
  }
  CHECK(test_sum == split.test.l.size());

  std::ostringstream out;
  out << "lemma\tverb_class\tsplit\nkonoseR\tL\ttrain\nkantaR\tNL\tdev\ndesiR\tL\ttest\n";
  std::istringstream in(out.str());
  auto back = read_lemma_split(in);
  CHECK(back.train.l.size() == 1);
  CHECK(back.dev.nl.size() == 1);
  CHECK(back.test.l[0] == U"desiR");
}

TEST_CASE("confusion matrix") {
  auto pairs = lemma_pairs({decir(), conocer(), cantar()});
  DatasetKey ds{"90L-10NL", 0, 0};
  std::vector<PredictionRecord> records;
  std::size_t sk_in = 0, g_in = 0, regularized = 0;
  for (const auto& table : {decir(), conocer(), cantar()}) {
    for (const auto& t : generate_triples(table, 4)) {
      IpaString hyp = t.target_form;
      bool in_target = zone_of(t.target_tag) == CellZone::kIn;
      if (table.lemma == U"konoseR" && in_target) {
        ++sk_in;
        if (sk_in % 3 == 0) {
          hyp = replace_all(hyp, U"sk", U"s");
          ++regularized;
        }
      }
      if (table.lemma == U"desiR" && in_target) ++g_in;
      records.push_back(score_record(ds, row_of(t), hyp, true));
    }
  }
  auto m = pair_confusion_matrix(records, pairs);
  REQUIRE(m.gold.size() == 2);  // NL verbs and Out targets excluded
  ConsonantPair s_sk{U"s", U"sk"}, s_g{U"s", U"ɡ"}, s_s{U"s", U"s"};
  CHECK(m.row_total(s_sk) == sk_in);
  CHECK(m.row_total(s_g) == g_in);
  CHECK(sk_in == 7 * 55);
  CHECK(m.count(s_sk, s_sk) == sk_in - regularized);
  CHECK(m.count(s_sk, s_s) == regularized);
  CHECK(m.regularizations(s_sk) == regularized);
  CHECK(is_regularization(s_sk, s_s));
  CHECK_FALSE(is_regularization(s_sk, s_sk));
  CHECK_FALSE(is_regularization(s_s, s_s));
  CHECK(m.accuracy(s_g) == doctest::Approx(100.0));
  CHECK(m.accuracy(s_sk) == doctest::Approx(100.0 * (sk_in - regularized) / sk_in));

  // all-correct input is diagonal
  std::vector<PredictionRecord> clean;
  for (const auto& t : generate_triples(conocer(), 4)) clean.push_back(score_record(ds, row_of(t), t.target_form, true));
  auto d = pair_confusion_matrix(clean, pairs);
  for (const auto& [key, c] : d.counts) CHECK(key.first == key.second);

  std::ostringstream wide, longf;
  write_confusion_matrix(wide, m);
  write_confusion_long(longf, m);
  CHECK(wide.str().find("[s]-[sk]\t") != std::string::npos);
  CHECK(longf.str().find("[s]-[sk]\t[s]-[s]\t" + std::to_string(regularized) + "\t0\t1") != std::string::npos);
}

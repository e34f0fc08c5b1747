#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "morphome/corpus.hpp"
#include "morphome/rng.hpp"
#include "morphome/synthetic.hpp"

using namespace morphome;

namespace {

const MsdTag kInd1Sg{Mood::kIndicative, 1, Number::kSingular};
const MsdTag kInd2Sg{Mood::kIndicative, 2, Number::kSingular};
const MsdTag kInd3Pl{Mood::kIndicative, 3, Number::kPlural};
const MsdTag kSbjv1Pl{Mood::kSubjunctive, 1, Number::kPlural};
const MsdTag kSbjv3Pl{Mood::kSubjunctive, 3, Number::kPlural};

// decir, IPA column of the paradigm table.
const char* kDecir =
    "desiR\tdˈiɡo\tV;IND;PRS;1;SG\n"
    "desiR\tdˈises\tV;IND;PRS;2;SG\n"
    "desiR\tdˈise\tV;IND;PRS;3;SG\n"
    "desiR\tdesˈimos\tV;IND;PRS;1;PL\n"
    "desiR\tdesˈis\tV;IND;PRS;2;PL\n"
    "desiR\tdˈisen\tV;IND;PRS;3;PL\n"
    "desiR\tdˈiɡa\tV;SBJV;PRS;1;SG\n"
    "desiR\tdˈiɡas\tV;SBJV;PRS;2;SG\n"
    "desiR\tdˈiɡa\tV;SBJV;PRS;3;SG\n"
    "desiR\tdiɡˈamos\tV;SBJV;PRS;1;PL\n"
    "desiR\tdiɡˈajs\tV;SBJV;PRS;2;PL\n"
    "desiR\tdˈiɡan\tV;SBJV;PRS;3;PL\n";

const char* kHablar =
    "ablaR\tˈablo\tV;IND;PRS;1;SG\n"
    "ablaR\tˈablas\tV;IND;PRS;2;SG\n"
    "ablaR\tˈabla\tV;IND;PRS;3;SG\n"
    "ablaR\tablˈamos\tV;IND;PRS;1;PL\n"
    "ablaR\tablˈajs\tV;IND;PRS;2;PL\n"
    "ablaR\tˈablan\tV;IND;PRS;3;PL\n"
    "ablaR\tˈable\tV;SBJV;PRS;1;SG\n"
    "ablaR\tˈables\tV;SBJV;PRS;2;SG\n"
    "ablaR\tˈable\tV;SBJV;PRS;3;SG\n"
    "ablaR\tablˈemos\tV;SBJV;PRS;1;PL\n"
    "ablaR\tablˈejs\tV;SBJV;PRS;2;PL\n"
    "ablaR\tˈablen\tV;SBJV;PRS;3;PL\n";

std::vector<InflectionTable> tables_from(const std::string& text) {
  std::istringstream in(text);
  auto tables = assemble_tables(parse_unimorph(in));
  classify_all(tables);
  return tables;
}

}  // namespace

TEST_CASE("tags round-trip through their token form") {
  for (const auto& cell : all_cells()) {
    auto parsed = parse_token(cell.token());
    REQUIRE(parsed);
    CHECK(*parsed == cell);
    CHECK(parse_tag(cell.unimorph()).tag == cell);
    CHECK(MsdTag::from_index(cell.index()) == cell);
  }
  CHECK(MsdTag{Mood::kIndicative, 1, Number::kSingular}.token() == "<V;IND;PRS;1;SG>");
  CHECK(parse_tag("SG;1;PRS;IND;V").status == TagParse::kOk);
  CHECK(parse_tag("V;IND;PST;1;SG").status == TagParse::kOutOfInventory);
  CHECK(parse_tag("V;NFIN").status == TagParse::kOutOfInventory);
  CHECK(parse_tag("V;;PRS").status == TagParse::kMalformed);
  CHECK(parse_tag("").status == TagParse::kMalformed);
  CHECK(parse_tag("V IND").status == TagParse::kMalformed);
}

TEST_CASE("zones: seven In cells and five Out cells") {
  int in = 0, out = 0;
  for (const auto& cell : all_cells()) (zone_of(cell) == CellZone::kIn ? in : out)++;
  CHECK(in == 7);
  CHECK(out == 5);
  CHECK(zone_of(kInd1Sg) == CellZone::kIn);
  CHECK(zone_of(kSbjv3Pl) == CellZone::kIn);
  CHECK(zone_of(kInd2Sg) == CellZone::kOut);
}

TEST_CASE("parse_unimorph") {
  SUBCASE("single entry, tipa-style stress marker") {
    std::istringstream in("desiR\td\"igo\tV;IND;PRS;1;SG\n");
    auto entries = parse_unimorph(in);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].lemma == U"desiR");
    CHECK(entries[0].form == U"d\"igo");
    CHECK(entries[0].tag == kInd1Sg);
  }
  SUBCASE("empty stream") {
    std::istringstream in("");
    CHECK(parse_unimorph(in).empty());
  }
  SUBCASE("out-of-inventory tags are filtered and counted") {
    std::istringstream in("a\tb\tV;IND;PST;1;SG\nkomeR\tkˈomo\tV;IND;PRS;1;SG\n\nkomeR\tkomˈeR\tV;NFIN\n");
    ParseStats stats;
    auto entries = parse_unimorph(in, &stats);
    CHECK(entries.size() == 1);
    CHECK(stats.out_of_inventory == 2);
    CHECK(stats.blank == 1);
    CHECK(stats.lines == 4);
  }
  SUBCASE("malformed lines carry their line number") {
    std::istringstream wrong_fields("komeR\tkˈomo\tV;IND;PRS;1;SG\nkomeR\tkˈomes\n");
    try {
      parse_unimorph(wrong_fields);
      FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
      CHECK(e.line() == 2);
    }
    std::istringstream bad_tag("komeR\tkˈomo\tV;;SG\n");
    CHECK_THROWS_AS(parse_unimorph(bad_tag), CorpusError);
    std::istringstream empty_form("komeR\t\tV;IND;PRS;1;SG\n");
    try {
      parse_unimorph(empty_form);
      FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
      CHECK(e.line() == 1);
    }
  }
  SUBCASE("input is normalized to NFC") {
    std::istringstream in("kafe\tkaf\xC3\xA9o\tV;IND;PRS;1;SG\nkafe\tkafe\xCC\x81o\tV;IND;PRS;2;SG\n");
    auto entries = parse_unimorph(in);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].form == entries[1].form);
    CHECK(entries[1].form.size() == 5);
  }
}

TEST_CASE("assemble_tables") {
  SUBCASE("decir") {
    auto tables = tables_from(kDecir);
    REQUIRE(tables.size() == 1);
    CHECK(tables[0].form(kInd1Sg) == U"dˈiɡo");
    CHECK(tables[0].form(kSbjv3Pl) == U"dˈiɡan");
  }
  SUBCASE("incomplete lemma is dropped and reported") {
    std::string text = kDecir;
    text += std::string(kHablar).substr(0, std::string(kHablar).rfind("ablaR"));
    std::istringstream in(text);
    AssemblyReport report;
    auto tables = assemble_tables(parse_unimorph(in), &report);
    REQUIRE(tables.size() == 1);
    REQUIRE(report.incomplete.size() == 1);
    CHECK(report.incomplete[0].first == U"ablaR");
    CHECK(report.incomplete[0].second == 11);
  }
  SUBCASE("identical duplicates are removed silently") {
    std::string text = std::string(kDecir) + "desiR\tdˈiɡo\tV;IND;PRS;1;SG\n";
    std::istringstream in(text);
    AssemblyReport report;
    auto tables = assemble_tables(parse_unimorph(in), &report);
    CHECK(tables.size() == 1);
    CHECK(report.duplicates_removed == 1);
  }
  SUBCASE("conflicting duplicates name the lemma") {
    std::string text = std::string(kDecir) + "desiR\tdˈeso\tV;IND;PRS;1;SG\n";
    std::istringstream in(text);
    auto entries = parse_unimorph(in);
    try {
      assemble_tables(entries);
      FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
      CHECK(std::string(e.what()).find("desiR") != std::string::npos);
    }
    AssemblyReport report;
    CHECK(assemble_tables(entries, &report, ConflictPolicy::kDropLemma).empty());
    CHECK(report.conflicting.size() == 1);
  }
}

TEST_CASE("extract_stem") {
  Stem traducen = extract_stem(U"tRadˈusen", kInd3Pl);
  CHECK(traducen.surface == U"tRadus");
  CHECK(traducen.final_cluster == U"s");
  Stem traduzcamos = extract_stem(U"tRaduskˈamos", kSbjv1Pl);
  CHECK(traduzcamos.surface == U"tRadusk");
  CHECK(traduzcamos.final_cluster == U"sk");
  Stem bare = extract_stem(U"ˈes", kInd2Sg);
  CHECK(bare.surface.empty());
  CHECK(bare.final_cluster.empty());
  CHECK(extract_stem(U"kˈao", kInd1Sg).final_cluster.empty());
  CHECK(extract_stem(U"kˈajɡa", MsdTag{Mood::kSubjunctive, 3, Number::kSingular}).final_cluster == U"jɡ");

  try {
    extract_stem(U"estˈoj", kInd1Sg);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("estˈoj") != std::string::npos);
  }
}

TEST_CASE("segmentation is lossless") {
  synthetic::LexiconSpec spec;
  spec.l_count = 60;
  spec.l_vowel_only = 4;
  spec.nl_count = 200;
  for (const auto& table : synthetic::generate_lexicon(spec)) {
    for (const auto& cell : all_cells()) {
      auto seg = try_segment(table.form(cell), cell);
      REQUIRE(seg);
      CHECK(seg->reassemble() == table.form(cell));
      CHECK(std::none_of(seg->stem.surface.begin(), seg->stem.surface.end(), is_stress_marker));
      CHECK(seg->stem.final_cluster == final_consonant_cluster(seg->stem.surface));
    }
  }
}

TEST_CASE("classify_verb") {
  auto decir = tables_from(kDecir);
  CHECK(decir[0].verb_class == VerbClass::kL);
  CHECK(consonant_pair(decir[0]).label() == "[s]-[ɡ]");
  auto hablar = tables_from(kHablar);
  CHECK(hablar[0].verb_class == VerbClass::kNL);
  CHECK(consonant_pair(hablar[0]).label() == "[bl]-[bl]");

  SUBCASE("unsegmentable cells make a table NL") {
    InflectionTable t = decir[0];
    t.cells[0] = U"estˈoj";
    CHECK(classify_verb(t) == VerbClass::kNL);
  }
}

TEST_CASE("classification does not depend on entry order") {
  synthetic::LexiconSpec spec;
  spec.l_count = 40;
  spec.l_vowel_only = 3;
  spec.nl_count = 120;
  auto tables = synthetic::generate_lexicon(spec);
  std::ostringstream tsv;
  write_unimorph(tsv, tables);
  std::vector<std::string> lines;
  std::istringstream split_in(tsv.str());
  for (std::string l; std::getline(split_in, l);) lines.push_back(l);

  std::map<IpaString, VerbClass> reference;
  for (const auto& t : tables) reference[t.lemma] = t.verb_class;

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    rng.shuffle(lines);
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    auto shuffled = tables_from(text);
    REQUIRE(shuffled.size() == tables.size());
    for (const auto& t : shuffled) CHECK(reference.at(t.lemma) == t.verb_class);
  }
}

TEST_CASE("shipped ending inventory matches the built-in one") {
  std::ifstream in(std::string(MORPHOME_SOURCE_DIR) + "/data/endings.tsv");
  REQUIRE(in);
  auto shipped = EndingInventory::read(in);
  const auto& builtin = EndingInventory::spanish_present();
  CHECK(shipped.endings(Mood::kIndicative) == builtin.endings(Mood::kIndicative));
  CHECK(shipped.endings(Mood::kSubjunctive) == builtin.endings(Mood::kSubjunctive));
  std::ostringstream out;
  builtin.write(out);
  std::istringstream back(out.str());
  CHECK(EndingInventory::read(back).endings(Mood::kIndicative) == builtin.endings(Mood::kIndicative));
}

TEST_CASE("table TSV round-trip") {
  auto tables = tables_from(std::string(kDecir) + kHablar);
  std::stringstream io;
  write_tables(io, tables);
  auto back = read_tables(io);
  REQUIRE(back.size() == tables.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].lemma == tables[i].lemma);
    CHECK(back[i].cells == tables[i].cells);
    CHECK(back[i].verb_class == tables[i].verb_class);
  }
}

TEST_CASE("synthetic lexicon plants the requested classes and pairs") {
  synthetic::LexiconSpec spec;  // 300 L / 4860 NL
  auto tables = synthetic::generate_lexicon(spec);
  CHECK(tables.size() == 5160);
  std::map<std::string, int> census;
  int l = 0;
  for (const auto& t : tables) {
    CHECK(classify_verb(t) == t.verb_class);
    if (t.verb_class == VerbClass::kL) {
      ++l;
      census[consonant_pair(t).label()]++;
    }
  }
  CHECK(l == 300);
  CHECK(census["[s]-[sk]"] == 141);
  CHECK(census["[n]-[nɡ]"] == 53);
  CHECK(census["[ç]-[x]"] == 25);
  CHECK(census["[b]-[p]"] == 1);
  CHECK(census["[ ]-[jɡ]"] == 14);
}

#include "morphome/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>

namespace morphome {

std::string_view verb_class_name(VerbClass c) { return c == VerbClass::kL ? "L" : "NL"; }

VerbClass parse_verb_class(std::string_view text) {
  if (text == "L") return VerbClass::kL;
  if (text == "NL") return VerbClass::kNL;
  throw CorpusError("unknown verb class '" + std::string(text) + "'");
}

namespace {

std::string hex_code(char32_t c) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(c));
  return buf;
}

IpaString normalized_field(std::string_view raw, std::size_t line, const char* what) {
  IpaString text;
  try {
    text = from_utf8(nfc_utf8(raw));
  } catch (const std::exception& e) {
    throw CorpusError(std::string(what) + ": " + e.what(), line);
  }
  if (text.empty()) throw CorpusError(std::string("empty ") + what, line);
  for (char32_t c : text)
    if (!is_admitted(c))
      throw CorpusError(std::string(what) + " contains a non-admitted code point U+" + hex_code(c), line);
  return text;
}

}  // namespace

std::vector<ParadigmEntry> parse_unimorph(std::istream& in, ParseStats* stats) {
  ParseStats local;
  std::vector<ParadigmEntry> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    ++local.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      ++local.blank;
      continue;
    }
    auto fields = split(line, '\t');
    if (fields.size() != 3)
      throw CorpusError("expected 3 tab-separated fields, got " + std::to_string(fields.size()), number);
    ParsedTag parsed = parse_tag(fields[2]);
    if (parsed.status == TagParse::kMalformed)
      throw CorpusError("unparseable tag '" + std::string(fields[2]) + "'", number);
    ParadigmEntry entry;
    entry.lemma = normalized_field(fields[0], number, "lemma");
    entry.form = normalized_field(fields[1], number, "form");
    if (parsed.status == TagParse::kOutOfInventory) {
      ++local.out_of_inventory;
      continue;
    }
    entry.tag = parsed.tag;
    entry.line = number;
    entries.push_back(std::move(entry));
    ++local.accepted;
  }
  if (stats) *stats = local;
  return entries;
}

std::vector<InflectionTable> assemble_tables(const std::vector<ParadigmEntry>& entries,
                                             AssemblyReport* report, ConflictPolicy policy) {
  AssemblyReport local;
  std::map<IpaString, std::array<std::optional<IpaString>, kCellCount>> grouped;
  std::map<IpaString, bool> conflicted;
  for (const auto& e : entries) {
    auto& slot = grouped[e.lemma][static_cast<std::size_t>(e.tag.index())];
    if (!slot) {
      slot = e.form;
    } else if (*slot == e.form) {
      ++local.duplicates_removed;
    } else if (policy == ConflictPolicy::kError) {
      throw CorpusError("conflicting forms for lemma '" + to_utf8(e.lemma) + "' at " + e.tag.short_name() +
                            ": '" + to_utf8(*slot) + "' vs '" + to_utf8(e.form) + "'",
                        e.line);
    } else {
      conflicted[e.lemma] = true;
    }
  }

  std::vector<InflectionTable> tables;
  for (auto& [lemma, cells] : grouped) {
    if (conflicted.count(lemma)) {
      local.conflicting.push_back(lemma);
      continue;
    }
    int present = static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.has_value(); }));
    if (present != kCellCount) {
      local.incomplete.emplace_back(lemma, present);
      continue;
    }
    InflectionTable table;
    table.lemma = lemma;
    for (std::size_t i = 0; i < cells.size(); ++i) table.cells[i] = *cells[i];
    tables.push_back(std::move(table));
  }
  if (report) *report = std::move(local);
  return tables;
}

EndingInventory::EndingInventory(std::vector<IpaString> indicative, std::vector<IpaString> subjunctive)
    : indicative_(std::move(indicative)), subjunctive_(std::move(subjunctive)) {}

const EndingInventory& EndingInventory::spanish_present() {
  static const EndingInventory inventory(
      {U"o", U"as", U"a", U"amos", U"ajs", U"an", U"es", U"e", U"emos", U"ejs", U"en", U"imos", U"is"},
      {U"e", U"es", U"emos", U"ejs", U"en", U"a", U"as", U"amos", U"ajs", U"an"});
  return inventory;
}

EndingInventory EndingInventory::read(std::istream& in) {
  std::vector<IpaString> ind, sbjv;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t')) line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2 || fields[1].empty()) throw CorpusError("ending inventory: expected '<MOOD>\\t<ending>'", number);
    IpaString ending = strip_stress(from_utf8(nfc_utf8(fields[1])));
    if (fields[0] == "IND") ind.push_back(ending);
    else if (fields[0] == "SBJV") sbjv.push_back(ending);
    else throw CorpusError("ending inventory: unknown mood '" + std::string(fields[0]) + "'", number);
  }
  return EndingInventory(std::move(ind), std::move(sbjv));
}

void EndingInventory::write(std::ostream& out) const {
  out << "# Present-tense ending inventory (IPA, stress-stripped), format v1\n";
  for (const auto& e : indicative_) out << "IND\t" << to_utf8(e) << '\n';
  for (const auto& e : subjunctive_) out << "SBJV\t" << to_utf8(e) << '\n';
}

std::optional<IpaString> EndingInventory::longest_match(const IpaString& stripped, Mood mood) const {
  const IpaString* best = nullptr;
  for (const auto& ending : endings(mood)) {
    if (ending.size() > stripped.size()) continue;
    if (stripped.compare(stripped.size() - ending.size(), ending.size(), ending) != 0) continue;
    if (!best || ending.size() > best->size()) best = &ending;
  }
  if (!best) return std::nullopt;
  return *best;
}

IpaString Segmentation::reassemble() const {
  IpaString text = stem.surface + ending;
  for (const auto& [pos, marker] : stress) text.insert(text.begin() + static_cast<std::ptrdiff_t>(pos), marker);
  return text;
}

IpaString final_consonant_cluster(const IpaString& stem) {
  std::size_t start = stem.size();
  while (start > 0 && is_consonant(stem[start - 1])) --start;
  return stem.substr(start);
}

std::optional<Segmentation> try_segment(const IpaString& form, const MsdTag& tag, const EndingInventory& inventory) {
  Segmentation seg;
  IpaString stripped;
  stripped.reserve(form.size());
  for (std::size_t i = 0; i < form.size(); ++i) {
    if (is_stress_marker(form[i])) seg.stress.emplace_back(i, form[i]);
    else stripped.push_back(form[i]);
  }
  auto ending = inventory.longest_match(stripped, tag.mood);
  if (!ending) return std::nullopt;
  seg.ending = *ending;
  seg.stem.surface = stripped.substr(0, stripped.size() - ending->size());
  seg.stem.final_cluster = final_consonant_cluster(seg.stem.surface);
  return seg;
}

Stem extract_stem(const IpaString& form, const MsdTag& tag, const EndingInventory& inventory) {
  auto seg = try_segment(form, tag, inventory);
  if (!seg) throw CorpusError("no " + tag.short_name() + " ending matches form '" + to_utf8(form) + "'");
  return seg->stem;
}

VerbClass classify_verb(const InflectionTable& table, const EndingInventory& inventory) {
  std::array<IpaString, kCellCount> stems;
  for (const auto& cell : all_cells()) {
    auto seg = try_segment(table.form(cell), cell, inventory);
    if (!seg) return VerbClass::kNL;
    stems[static_cast<std::size_t>(cell.index())] = seg->stem.surface;
  }
  const IpaString& in_stem = stems[static_cast<std::size_t>(MsdTag{Mood::kIndicative, 1, Number::kSingular}.index())];
  bool differs_outside = false;
  for (const auto& cell : all_cells()) {
    const auto& stem = stems[static_cast<std::size_t>(cell.index())];
    if (zone_of(cell) == CellZone::kIn) {
      if (stem != in_stem) return VerbClass::kNL;
    } else if (stem != in_stem) {
      differs_outside = true;
    }
  }
  return differs_outside ? VerbClass::kL : VerbClass::kNL;
}

void classify_all(std::vector<InflectionTable>& tables, const EndingInventory& inventory) {
  for (auto& t : tables) t.verb_class = classify_verb(t, inventory);
}

std::string ConsonantPair::label() const {
  auto part = [](const IpaString& c) { return "[" + (c.empty() ? std::string(" ") : to_utf8(c)) + "]"; };
  return part(out_cluster) + "-" + part(in_cluster);
}

ConsonantPair consonant_pair(const InflectionTable& table, const EndingInventory& inventory) {
  const MsdTag out_cell{Mood::kIndicative, 3, Number::kSingular};
  const MsdTag in_cell{Mood::kSubjunctive, 3, Number::kSingular};
  return {extract_stem(table.form(out_cell), out_cell, inventory).final_cluster,
          extract_stem(table.form(in_cell), in_cell, inventory).final_cluster};
}

void write_tables(std::ostream& out, const std::vector<InflectionTable>& tables) {
  out << "lemma\tverb_class";
  for (const auto& cell : all_cells()) out << '\t' << cell.unimorph();
  out << '\n';
  for (const auto& t : tables) {
    out << to_utf8(t.lemma) << '\t' << verb_class_name(t.verb_class);
    for (const auto& f : t.cells) out << '\t' << to_utf8(f);
    out << '\n';
  }
}

std::vector<InflectionTable> read_tables(std::istream& in) {
  std::vector<InflectionTable> tables;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1) continue;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2 + kCellCount) throw CorpusError("table row: expected 14 fields", number);
    InflectionTable t;
    t.lemma = from_utf8(fields[0]);
    t.verb_class = parse_verb_class(fields[1]);
    for (int i = 0; i < kCellCount; ++i) t.cells[static_cast<std::size_t>(i)] = from_utf8(fields[static_cast<std::size_t>(i) + 2]);
    tables.push_back(std::move(t));
  }
  return tables;
}

void write_unimorph(std::ostream& out, const std::vector<InflectionTable>& tables) {
  for (const auto& t : tables)
    for (const auto& cell : all_cells())
      out << to_utf8(t.lemma) << '\t' << to_utf8(t.form(cell)) << '\t' << cell.unimorph() << '\n';
}

}  // namespace morphome

#include "morphome/tripler.hpp"

#include <fstream>
#include <stdexcept>

#include "morphome/rng.hpp"

namespace morphome {

std::vector<ReinflectionTriple> generate_triples(const InflectionTable& table, std::uint64_t seed, SourceOrder order) {
  Rng rng(derive_seed(seed, to_utf8(table.lemma)));
  std::vector<ReinflectionTriple> triples;
  triples.reserve(kTriplesPerLemma);
  const auto& cells = all_cells();
  for (int a = 0; a < kCellCount; ++a) {
    for (int b = a + 1; b < kCellCount; ++b) {
      for (int t = 0; t < kCellCount; ++t) {
        if (t == a || t == b) continue;
        const MsdTag& first = cells[static_cast<std::size_t>(a)];
        const MsdTag& second = cells[static_cast<std::size_t>(b)];
        const MsdTag& target = cells[static_cast<std::size_t>(t)];
        bool swap = order == SourceOrder::kRandom && rng.coin();
        ReinflectionTriple triple;
        triple.lemma = table.lemma;
        triple.source1 = {table.form(swap ? second : first), swap ? second : first};
        triple.source2 = {table.form(swap ? first : second), swap ? first : second};
        triple.target_tag = target;
        triple.target_form = table.form(target);
        triple.verb_class = table.verb_class;
        triples.push_back(std::move(triple));
      }
    }
  }
  return triples;
}

std::string spaced(const IpaString& form) {
  std::string out;
  for (std::size_t i = 0; i < form.size(); ++i) {
    if (i) out += ' ';
    out += to_utf8(form.substr(i, 1));
  }
  return out;
}

IpaString unspaced(const std::string& line) {
  IpaString out;
  for (auto token : split(line, ' ')) {
    if (token.empty()) continue;
    out += from_utf8(token);
  }
  return out;
}

SerializedExample serialize(const ReinflectionTriple& triple) {
  SerializedExample ex;
  ex.source_line = spaced(triple.source1.form) + " # " + triple.source1.tag.token() + " # " +
                   spaced(triple.source2.form) + " # " + triple.source2.tag.token() + " # " +
                   triple.target_tag.token();
  ex.target_line = spaced(triple.target_form);
  return ex;
}

namespace {

MsdTag expect_tag(std::string_view token) {
  auto tag = parse_token(token);
  if (!tag) throw std::invalid_argument("expected a cell tag token, got '" + std::string(token) + "'");
  return *tag;
}

}  // namespace

ReinflectionTriple deserialize(const SerializedExample& example, IpaString lemma, VerbClass verb_class) {
  auto tokens = split(example.source_line, ' ');
  std::size_t i = 0;
  auto read_form = [&] {
    IpaString form;
    while (i < tokens.size() && tokens[i] != "#") {
      IpaString ch = from_utf8(tokens[i]);
      if (ch.size() != 1) throw std::invalid_argument("form token is not a single code point");
      form += ch;
      ++i;
    }
    if (form.empty()) throw std::invalid_argument("empty source form");
    return form;
  };
  auto expect_separator = [&] {
    if (i >= tokens.size() || tokens[i] != "#") throw std::invalid_argument("expected '#' separator");
    ++i;
  };
  auto next_token = [&]() -> std::string_view {
    if (i >= tokens.size()) throw std::invalid_argument("truncated source line");
    return tokens[i++];
  };

  ReinflectionTriple t;
  t.lemma = std::move(lemma);
  t.verb_class = verb_class;
  t.source1.form = read_form();
  expect_separator();
  t.source1.tag = expect_tag(next_token());
  expect_separator();
  t.source2.form = read_form();
  expect_separator();
  t.source2.tag = expect_tag(next_token());
  expect_separator();
  t.target_tag = expect_tag(next_token());
  if (i != tokens.size()) throw std::invalid_argument("trailing tokens after target tag");
  t.target_form = unspaced(example.target_line);
  return t;
}

std::string zone_pattern_label(const ZonePattern& pattern) {
  std::string s;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (i) s += '-';
    s += zone_name(pattern[i]);
  }
  return s;
}

const std::array<ZonePattern, 8>& all_zone_patterns() {
  static const std::array<ZonePattern, 8> patterns = [] {
    std::array<ZonePattern, 8> out{};
    for (int i = 0; i < 8; ++i)
      for (int slot = 0; slot < 3; ++slot)
        out[static_cast<std::size_t>(i)][static_cast<std::size_t>(slot)] =
            ((i >> (2 - slot)) & 1) ? CellZone::kOut : CellZone::kIn;
    return out;
  }();
  return patterns;
}

ZonePattern parse_zone_pattern(std::string_view label) {
  for (const auto& p : all_zone_patterns())
    if (zone_pattern_label(p) == label) return p;
  throw std::invalid_argument("unknown zone pattern '" + std::string(label) + "'");
}

void write_sidecar_header(std::ostream& out) {
  out << "lemma\tsource1_tag\tsource2_tag\ttarget_tag\tverb_class\tzone_pattern\tsource1_form\tsource2_form\ttarget_form\n";
}

void write_sidecar_row(std::ostream& out, const ReinflectionTriple& t) {
  out << to_utf8(t.lemma) << '\t' << t.source1.tag.unimorph() << '\t' << t.source2.tag.unimorph() << '\t'
      << t.target_tag.unimorph() << '\t' << verb_class_name(t.verb_class) << '\t' << zone_pattern_label(t) << '\t'
      << to_utf8(t.source1.form) << '\t' << to_utf8(t.source2.form) << '\t' << to_utf8(t.target_form) << '\n';
}

std::vector<SidecarRow> read_sidecar(std::istream& in) {
  std::vector<SidecarRow> rows;
  std::string line;
  std::size_t number = 0;
  auto tag = [&](std::string_view text) {
    ParsedTag parsed = parse_tag(text);
    if (parsed.status != TagParse::kOk) throw CorpusError("sidecar: bad tag '" + std::string(text) + "'", number);
    return parsed.tag;
  };
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || line.empty()) continue;
    auto f = split(line, '\t');
    if (f.size() != 9) throw CorpusError("sidecar: expected 9 fields", number);
    SidecarRow row;
    row.lemma = from_utf8(f[0]);
    row.source1_tag = tag(f[1]);
    row.source2_tag = tag(f[2]);
    row.target_tag = tag(f[3]);
    row.verb_class = parse_verb_class(f[4]);
    row.zone_pattern = parse_zone_pattern(f[5]);
    row.source1_form = from_utf8(f[6]);
    row.source2_form = from_utf8(f[7]);
    row.target_form = from_utf8(f[8]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_triple_files(const std::string& path_stem, const std::vector<ReinflectionTriple>& triples) {
  std::ofstream src(path_stem + ".src", std::ios::binary);
  std::ofstream tgt(path_stem + ".tgt", std::ios::binary);
  std::ofstream tsv(path_stem + ".tsv", std::ios::binary);
  if (!src || !tgt || !tsv) throw std::runtime_error("cannot write triple files at " + path_stem);
  write_sidecar_header(tsv);
  for (const auto& t : triples) {
    auto ex = serialize(t);
    src << ex.source_line << '\n';
    tgt << ex.target_line << '\n';
    write_sidecar_row(tsv, t);
  }
  if (!src || !tgt || !tsv) throw std::runtime_error("write failed for triple files at " + path_stem);
}

std::vector<ReinflectionTriple> read_triple_files(const std::string& path_stem) {
  std::ifstream src(path_stem + ".src", std::ios::binary);
  std::ifstream tgt(path_stem + ".tgt", std::ios::binary);
  std::ifstream tsv(path_stem + ".tsv", std::ios::binary);
  if (!src || !tgt || !tsv) throw std::runtime_error("missing triple files at " + path_stem);
  auto rows = read_sidecar(tsv);
  std::vector<ReinflectionTriple> triples;
  triples.reserve(rows.size());
  SerializedExample ex;
  for (const auto& row : rows) {
    if (!std::getline(src, ex.source_line) || !std::getline(tgt, ex.target_line))
      throw std::runtime_error("triple files at " + path_stem + " are not aligned");
    triples.push_back(deserialize(ex, row.lemma, row.verb_class));
  }
  return triples;
}

}  // namespace morphome

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "morphome/corpus.hpp"

namespace morphome {

struct FormTag {
  IpaString form;
  MsdTag tag;
  friend bool operator==(const FormTag&, const FormTag&) = default;
};

using ZonePattern = std::array<CellZone, 3>;

struct ReinflectionTriple {
  IpaString lemma;
  FormTag source1;
  FormTag source2;
  MsdTag target_tag;
  IpaString target_form;
  VerbClass verb_class = VerbClass::kNL;

  ZonePattern zone_pattern() const { return {zone_of(source1.tag), zone_of(source2.tag), zone_of(target_tag)}; }
  friend bool operator==(const ReinflectionTriple&, const ReinflectionTriple&) = default;
};

struct SerializedExample {
  std::string source_line;
  std::string target_line;
  friend bool operator==(const SerializedExample&, const SerializedExample&) = default;
};

enum class SourceOrder {
  kRandom,     // seeded coin flip per triple
  kCanonical,  // lower cell index (IND before SBJV, then person/number) first
};

inline constexpr int kTriplesPerLemma = 660;  // C(12,2) source pairs x 10 targets

// One triple per unordered source-cell pair and target cell outside the
// pair, in (pair, target) order. Under kRandom the position of the two
// sources is drawn from a stream seeded by (seed, lemma), so a lemma's
// triples do not depend on which other lemmas are processed.
std::vector<ReinflectionTriple> generate_triples(const InflectionTable& table, std::uint64_t seed,
                                                 SourceOrder order = SourceOrder::kRandom);

SerializedExample serialize(const ReinflectionTriple& triple);

// Inverse of serialize for the fields the two lines carry. Lemma and verb
// class live in the sidecar and are passed in. Throws std::invalid_argument
// on a malformed line.
ReinflectionTriple deserialize(const SerializedExample& example, IpaString lemma = {},
                               VerbClass verb_class = VerbClass::kNL);

// Space-separated code points.
std::string spaced(const IpaString& form);
IpaString unspaced(const std::string& line);

std::string zone_pattern_label(const ZonePattern& pattern);
inline std::string zone_pattern_label(const ReinflectionTriple& triple) { return zone_pattern_label(triple.zone_pattern()); }
ZonePattern parse_zone_pattern(std::string_view label);
// The 8 patterns, In-In-In first, in binary order with In < Out.
const std::array<ZonePattern, 8>& all_zone_patterns();

// Sidecar row: lemma, src1 tag, src2 tag, target tag, verb class, zone
// pattern, and the three source/target forms (unspaced).
struct SidecarRow {
  IpaString lemma;
  MsdTag source1_tag;
  MsdTag source2_tag;
  MsdTag target_tag;
  VerbClass verb_class = VerbClass::kNL;
  ZonePattern zone_pattern{};
  IpaString source1_form;
  IpaString source2_form;
  IpaString target_form;
};

void write_sidecar_header(std::ostream& out);
void write_sidecar_row(std::ostream& out, const ReinflectionTriple& triple);
std::vector<SidecarRow> read_sidecar(std::istream& in);

// Writes <stem>.src, <stem>.tgt and <stem>.tsv.
void write_triple_files(const std::string& path_stem, const std::vector<ReinflectionTriple>& triples);
std::vector<ReinflectionTriple> read_triple_files(const std::string& path_stem);

}  // namespace morphome

#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace morphome {

enum class Mood { kIndicative, kSubjunctive };
enum class Number { kSingular, kPlural };
enum class CellZone { kIn, kOut };

// A present-tense verb cell. Only the 12 cells IND/SBJV x {1,2,3} x {SG,PL}
// are representable, so every MsdTag is inside the working inventory.
struct MsdTag {
  Mood mood = Mood::kIndicative;
  int person = 1;
  Number number = Number::kSingular;

  // 0..11: indicative cells first, then subjunctive; within a mood
  // 1SG 2SG 3SG 1PL 2PL 3PL.
  int index() const;
  static MsdTag from_index(int index);

  // "<V;IND;PRS;1;SG>"
  std::string token() const;
  // "V;IND;PRS;1;SG"
  std::string unimorph() const;
  // "IND.PRS.1SG"
  std::string short_name() const;

  friend bool operator==(const MsdTag&, const MsdTag&) = default;
  friend auto operator<=>(const MsdTag& a, const MsdTag& b) { return a.index() <=> b.index(); }
};

inline constexpr int kCellCount = 12;

const std::array<MsdTag, kCellCount>& all_cells();

enum class TagParse { kOk, kOutOfInventory, kMalformed };

struct ParsedTag {
  TagParse status = TagParse::kMalformed;
  MsdTag tag;
};

// Accepts the bare UniMorph form ("V;SBJV;PRS;2;SG", features in any order)
// or the bracketed token form. Well-formed tags outside the 12-cell
// inventory (other tenses, moods, POS) report kOutOfInventory.
ParsedTag parse_tag(std::string_view text);

// Strict inverse of MsdTag::token().
std::optional<MsdTag> parse_token(std::string_view token);

// In <=> IND.PRS.1SG or any SBJV.PRS cell.
CellZone zone_of(const MsdTag& tag);
std::string_view zone_name(CellZone zone);

}  // namespace morphome

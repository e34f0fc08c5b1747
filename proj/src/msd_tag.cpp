#include "morphome/msd_tag.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <vector>

#include "morphome/unicode.hpp"

namespace morphome {

int MsdTag::index() const {
  return (mood == Mood::kSubjunctive ? 6 : 0) + (number == Number::kPlural ? 3 : 0) + (person - 1);
}

MsdTag MsdTag::from_index(int index) {
  if (index < 0 || index >= kCellCount) throw std::out_of_range("cell index out of range");
  MsdTag tag;
  tag.mood = index >= 6 ? Mood::kSubjunctive : Mood::kIndicative;
  tag.number = (index % 6) >= 3 ? Number::kPlural : Number::kSingular;
  tag.person = index % 3 + 1;
  return tag;
}

std::string MsdTag::unimorph() const {
  std::string s = "V;";
  s += mood == Mood::kIndicative ? "IND" : "SBJV";
  s += ";PRS;";
  s += static_cast<char>('0' + person);
  s += number == Number::kSingular ? ";SG" : ";PL";
  return s;
}

std::string MsdTag::token() const { return "<" + unimorph() + ">"; }

std::string MsdTag::short_name() const {
  std::string s = mood == Mood::kIndicative ? "IND.PRS." : "SBJV.PRS.";
  s += static_cast<char>('0' + person);
  s += number == Number::kSingular ? "SG" : "PL";
  return s;
}

const std::array<MsdTag, kCellCount>& all_cells() {
  static const std::array<MsdTag, kCellCount> cells = [] {
    std::array<MsdTag, kCellCount> out;
    for (int i = 0; i < kCellCount; ++i) out[i] = MsdTag::from_index(i);
    return out;
  }();
  return cells;
}

namespace {

bool is_feature_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '_' ||
         c == '.' || c == '{' || c == '}' || c == '/' || c == '(' || c == ')';
}

}  // namespace

ParsedTag parse_tag(std::string_view text) {
  ParsedTag result;
  if (text.size() >= 2 && text.front() == '<' && text.back() == '>')
    text = text.substr(1, text.size() - 2);
  if (text.empty()) return result;

  std::vector<std::string_view> features = split(text, ';');
  for (auto f : features) {
    if (f.empty() || !std::all_of(f.begin(), f.end(), is_feature_char)) return result;
  }
  result.status = TagParse::kOutOfInventory;
  if (features.size() != 5) return result;

  bool verb = false, present = false;
  std::optional<Mood> mood;
  std::optional<int> person;
  std::optional<Number> number;
  for (auto f : features) {
    if (f == "V" && !verb) verb = true;
    else if (f == "PRS" && !present) present = true;
    else if (f == "IND" && !mood) mood = Mood::kIndicative;
    else if (f == "SBJV" && !mood) mood = Mood::kSubjunctive;
    else if ((f == "1" || f == "2" || f == "3") && !person) person = f[0] - '0';
    else if (f == "SG" && !number) number = Number::kSingular;
    else if (f == "PL" && !number) number = Number::kPlural;
    else return result;
  }
  if (!(verb && present && mood && person && number)) return result;
  result.status = TagParse::kOk;
  result.tag = MsdTag{*mood, *person, *number};
  return result;
}

std::optional<MsdTag> parse_token(std::string_view token) {
  for (const auto& cell : all_cells())
    if (cell.token() == token) return cell;
  return std::nullopt;
}

CellZone zone_of(const MsdTag& tag) {
  if (tag.mood == Mood::kSubjunctive) return CellZone::kIn;
  return tag.person == 1 && tag.number == Number::kSingular ? CellZone::kIn : CellZone::kOut;
}

std::string_view zone_name(CellZone zone) { return zone == CellZone::kIn ? "In" : "Out"; }

}  // namespace morphome

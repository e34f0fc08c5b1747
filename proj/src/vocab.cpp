#include "morphome/transducer/vocab.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include "morphome/unicode.hpp"

namespace morphome {

namespace {

const std::vector<std::string>& specials() {
  static const std::vector<std::string> s = {"<pad>", "<s>", "</s>", "<unk>"};
  return s;
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  std::set<std::string> sorted(tokens.begin(), tokens.end());
  for (const auto& s : specials()) sorted.erase(s);
  tokens_ = specials();
  tokens_.insert(tokens_.end(), sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
}

Vocabulary Vocabulary::build(const std::vector<std::string>& lines) {
  std::set<std::string> seen;
  for (const auto& line : lines)
    for (const auto& tok : split(line, ' '))
      if (!tok.empty()) seen.emplace(tok);
  return Vocabulary(std::vector<std::string>(seen.begin(), seen.end()));
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocabulary id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view line) const {
  std::vector<int> ids;
  for (const auto& tok : split(line, ' '))
    if (!tok.empty()) ids.push_back(id(tok));
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kBos) continue;
    if (!out.empty()) out += ' ';
    out += token(i);
  }
  return out;
}

void Vocabulary::write(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) tokens.push_back(line);
  if (tokens.size() < specials().size() || !std::equal(specials().begin(), specials().end(), tokens.begin()))
    throw std::runtime_error("vocabulary file does not start with the special tokens");
  return Vocabulary(std::vector<std::string>(tokens.begin() + kSpecialCount, tokens.end()));
}

}  // namespace morphome

#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace morphome {

// Token inventory over whitespace-separated training lines. Specials have
// fixed ids; the remaining tokens follow in code-unit order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kSpecialCount = 4;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);  // non-special tokens, any order

  static Vocabulary build(const std::vector<std::string>& lines);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;  // kUnk when unknown
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::string_view line) const;
  // Space-joined tokens up to (not including) the first EOS; PAD/BOS skipped.
  std::string decode(const std::vector<int>& ids) const;

  void write(std::ostream& out) const;  // one token per line, specials first
  static Vocabulary read(std::istream& in);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> index_;
};

}  // namespace morphome

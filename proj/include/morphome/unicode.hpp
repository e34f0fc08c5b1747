#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace morphome {

// IPA strings are handled as sequences of Unicode scalar values. All
// equality downstream of ingestion is code-point equality on NFC text.
using IpaString = std::u32string;

std::u32string from_utf8(std::string_view utf8);
std::string to_utf8(std::u32string_view text);

// Canonical composition (NFC). Applied once, at ingestion.
std::u32string nfc(std::u32string_view text);
std::string nfc_utf8(std::string_view utf8);

// Primary and secondary stress (U+02C8, U+02CC) plus the ASCII '"' used by
// tipa-style transcriptions.
bool is_stress_marker(char32_t c);
bool is_vowel(char32_t c);
// Every admitted code point that is neither a vowel nor a stress marker.
// Glides (j, w) count as consonants.
bool is_consonant(char32_t c);
// Rejects whitespace, control characters and the characters reserved by
// the serialized line format ('#', '<', '>', ';').
bool is_admitted(char32_t c);

std::u32string strip_stress(std::u32string_view text);

std::vector<std::string_view> split(std::string_view text, char sep);

}  // namespace morphome

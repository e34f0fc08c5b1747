#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "morphome/corpus.hpp"

namespace morphome::synthetic {

// A pseudo-Spanish present-tense lexicon in IPA. Regular verbs follow the
// -ar/-er/-ir endings of the ending inventory with stress on the stem in the
// singular and 3PL cells and on the ending in 1PL/2PL. L-shaped verbs swap
// the stem-final cluster in the seven In cells; their (Out, In) alternations
// are drawn from `pairs` by weight. A share of NL verbs diphthongize the stem
// vowel in the stressed cells, which is not an L pattern.
struct LexiconSpec {
  int l_count = 300;
  int nl_count = 4860;
  // L verbs whose stems differ only in a vowel (same final cluster).
  int l_vowel_only = 21;
  std::vector<std::pair<ConsonantPair, int>> pairs = reference_pairs();
  double nl_ar_share = 0.8;
  double nl_diphthong_share = 0.1;
  double l_er_share = 0.55;  // the rest are -ir
  std::uint64_t seed = 7;

  // Stem-final alternations weighted like the attested Spanish distribution.
  static std::vector<std::pair<ConsonantPair, int>> reference_pairs();
};

// Tables come back classified by construction (verb_class set to the class
// the generator planted), sorted by lemma.
std::vector<InflectionTable> generate_lexicon(const LexiconSpec& spec);

struct NoiseSpec {
  int incomplete_lemmas = 0;       // extra lemmas with one cell missing
  int out_of_inventory_lines = 0;  // non-present entries mixed in
  int duplicate_lines = 0;         // exact repeats of existing lines
  std::uint64_t seed = 11;
};

// UniMorph TSV for the tables plus the requested noise.
void write_unimorph_with_noise(std::ostream& out, const std::vector<InflectionTable>& tables, const NoiseSpec& noise);

}  // namespace morphome::synthetic

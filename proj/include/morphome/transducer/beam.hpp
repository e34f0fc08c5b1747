#pragma once

#include <functional>
#include <vector>

#include "morphome/nn/graph.hpp"

namespace morphome {

// Next-token log-probabilities for a set of prefixes (each starting with
// BOS); returns one row per prefix over the whole vocabulary.
using StepScorer = std::function<nn::Matrix<double>(const std::vector<std::vector<int>>& prefixes)>;

struct DecodeSpec {
  int beam_width = 5;
  int max_len = 32;  // decoding steps, the EOS step included
  int bos = 1;
  int eos = 2;
  std::vector<int> banned;  // never generated (PAD, BOS)
};

struct Hypothesis {
  std::vector<int> tokens;  // without BOS and EOS
  double score = 0.0;       // sum of token log-probabilities, EOS included when complete
  bool complete = false;
};

// Scores are not length-normalized. The n-best list holds complete
// hypotheses best first; if none reached EOS within max_len it holds the best
// partial ones instead (complete = false). Ties break towards lower token ids
// and earlier beams, so width 1 is exactly greedy decoding.
std::vector<Hypothesis> beam_search(const StepScorer& scorer, int vocab_size, const DecodeSpec& spec);

Hypothesis greedy_decode(const StepScorer& scorer, int vocab_size, const DecodeSpec& spec);

// Every EOS-terminated sequence of at most max_len steps, scored; the
// reference for small toy models.
Hypothesis exhaustive_decode(const StepScorer& scorer, int vocab_size, const DecodeSpec& spec);

}  // namespace morphome

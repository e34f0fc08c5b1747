#include "morphome/transducer/beam.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace morphome {

namespace {

std::vector<char> allowed_mask(int vocab_size, const DecodeSpec& spec) {
  std::vector<char> ok(static_cast<std::size_t>(vocab_size), 1);
  for (int b : spec.banned)
    if (b >= 0 && b < vocab_size) ok[static_cast<std::size_t>(b)] = 0;
  if (spec.eos < 0 || spec.eos >= vocab_size || !ok[static_cast<std::size_t>(spec.eos)])
    throw std::invalid_argument("decode: EOS must be an allowed token");
  return ok;
}

struct Live {
  std::vector<int> prefix;  // BOS + tokens
  double score = 0.0;
};

Hypothesis finish(const std::vector<int>& prefix, double score, bool complete) {
  return Hypothesis{std::vector<int>(prefix.begin() + 1, prefix.end()), score, complete};
}

void check_rows(const nn::Matrix<double>& rows, std::size_t expected, int vocab_size) {
  if (static_cast<std::size_t>(rows.rows()) != expected || rows.cols() != vocab_size)
    throw std::logic_error("decode: scorer returned a matrix of the wrong shape");
}

}  // namespace

std::vector<Hypothesis> beam_search(const StepScorer& scorer, int vocab_size, const DecodeSpec& spec) {
  if (spec.beam_width < 1 || spec.max_len < 1) throw std::invalid_argument("decode: beam width and max_len must be positive");
  const auto ok = allowed_mask(vocab_size, spec);
  std::vector<Live> live = {{{spec.bos}, 0.0}};
  std::vector<Hypothesis> done;
  auto best_done = [&] { return done.empty() ? -std::numeric_limits<double>::infinity() : done.front().score; };

  for (int step = 0; step < spec.max_len && !live.empty(); ++step) {
    std::vector<std::vector<int>> prefixes;
    for (const auto& l : live) prefixes.push_back(l.prefix);
    const nn::Matrix<double> logp = scorer(prefixes);
    check_rows(logp, live.size(), vocab_size);

    // (score, beam, token); best first, ties to earlier beam then lower token.
    std::vector<std::tuple<double, std::size_t, int>> cand;
    for (std::size_t b = 0; b < live.size(); ++b)
      for (int t = 0; t < vocab_size; ++t)
        if (ok[static_cast<std::size_t>(t)]) cand.emplace_back(live[b].score + logp(static_cast<Eigen::Index>(b), t), b, t);
    const std::size_t keep = std::min(cand.size(), static_cast<std::size_t>(spec.beam_width));
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
      return std::get<2>(a) < std::get<2>(b);
    });

    std::vector<Live> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& [score, b, t] = cand[i];
      if (t == spec.eos) {
        done.push_back(finish(live[b].prefix, score, true));
      } else {
        Live l{live[b].prefix, score};
        l.prefix.push_back(t);
        next.push_back(std::move(l));
      }
    }
    std::stable_sort(done.begin(), done.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    live = std::move(next);
    // Log-probabilities are <= 0, so no live prefix can overtake the best
    // finished hypothesis once it is behind it.
    if (!done.empty() && (live.empty() || live.front().score <= best_done())) break;
  }
  if (!done.empty()) return done;
  std::vector<Hypothesis> partial;
  for (const auto& l : live) partial.push_back(finish(l.prefix, l.score, false));
  return partial;
}

Hypothesis greedy_decode(const StepScorer& scorer, int vocab_size, const DecodeSpec& spec) {
  const auto ok = allowed_mask(vocab_size, spec);
  std::vector<int> prefix = {spec.bos};
  double score = 0.0;
  for (int step = 0; step < spec.max_len; ++step) {
    const nn::Matrix<double> logp = scorer({prefix});
    check_rows(logp, 1, vocab_size);
    int best = -1;
    for (int t = 0; t < vocab_size; ++t)
      if (ok[static_cast<std::size_t>(t)] && (best < 0 || logp(0, t) > logp(0, best))) best = t;
    score += logp(0, best);
    if (best == spec.eos) return finish(prefix, score, true);
    prefix.push_back(best);
  }
  return finish(prefix, score, false);
}

Hypothesis exhaustive_decode(const StepScorer& scorer, int vocab_size, const DecodeSpec& spec) {
  const auto ok = allowed_mask(vocab_size, spec);
  Hypothesis best;
  best.score = -std::numeric_limits<double>::infinity();
  std::vector<Live> frontier = {{{spec.bos}, 0.0}};
  for (int step = 0; step < spec.max_len && !frontier.empty(); ++step) {
    std::vector<Live> next;
    for (const auto& l : frontier) {
      const nn::Matrix<double> logp = scorer({l.prefix});
      check_rows(logp, 1, vocab_size);
      for (int t = 0; t < vocab_size; ++t) {
        if (!ok[static_cast<std::size_t>(t)]) continue;
        const double s = l.score + logp(0, t);
        if (t == spec.eos) {
          if (s > best.score) best = finish(l.prefix, s, true);
        } else {
          Live n{l.prefix, s};
          n.prefix.push_back(t);
          next.push_back(std::move(n));
        }
      }
    }
    frontier = std::move(next);
  }
  return best;
}

}  // namespace morphome

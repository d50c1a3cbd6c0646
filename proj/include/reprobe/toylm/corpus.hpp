#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "reprobe/common.hpp"
#include "reprobe/toylm/config.hpp"
#include "reprobe/toylm/model.hpp"

namespace reprobe::toylm {

// A span [source, source + length) copied verbatim to [dest, dest + length).
struct RepeatSpan {
  std::size_t source = 0;
  std::size_t dest = 0;
  std::size_t length = 0;
};

struct SynthSequence {
  TokenSeq tokens;
  std::optional<RepeatSpan> repeat;
};

// Endless stream of synthetic training sequences. Filler token of Zipf rank r
// (1-based) is id filler_begin + r - 1.
class SynthCorpus {
 public:
  SynthCorpus(const SynthCorpusConfig& cfg, std::size_t vocab_size);

  SynthSequence next();
  std::vector<TokenSeq> next_batch(std::size_t n_seqs);

  // Probability of the filler token at 1-based Zipf rank `rank`.
  double rank_probability(std::size_t rank) const;
  std::size_t filler_size() const { return cdf_.size(); }

  std::uint64_t rng_state() const { return rng_.state(); }
  void set_rng_state(std::uint64_t s) { rng_.set_state(s); }
  const SynthCorpusConfig& config() const { return cfg_; }

 private:
  std::int32_t draw_filler();

  SynthCorpusConfig cfg_;
  std::vector<double> cdf_;
  SplitMix64 rng_;
};

}  // namespace reprobe::toylm

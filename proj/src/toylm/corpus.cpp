#include "reprobe/toylm/corpus.hpp"

#include <algorithm>
#include <cmath>

namespace reprobe::toylm {

SynthCorpus::SynthCorpus(const SynthCorpusConfig& cfg, std::size_t vocab_size)
    : cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate(vocab_size);
  if (cfg_.filler_end == 0) cfg_.filler_end = vocab_size;
  const std::size_t n = cfg_.filler_end - cfg_.filler_begin;
  cdf_.resize(n);
  double acc = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    acc += std::pow(static_cast<double>(r + 1), -cfg_.zipf_exponent);
    cdf_[r] = acc;
  }
  for (auto& c : cdf_) c /= acc;
  cdf_.back() = 1.0;
}

double SynthCorpus::rank_probability(std::size_t rank) const {
  if (rank == 0 || rank > cdf_.size()) return 0.0;
  return rank == 1 ? cdf_[0] : cdf_[rank - 1] - cdf_[rank - 2];
}

std::int32_t SynthCorpus::draw_filler() {
  const double u = rng_.uniform01();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto rank0 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
      it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  return static_cast<std::int32_t>(cfg_.filler_begin + rank0);
}

SynthSequence SynthCorpus::next() {
  SynthSequence seq;
  seq.tokens.resize(cfg_.seq_len);
  for (auto& t : seq.tokens) t = draw_filler();
  if (rng_.uniform01() < cfg_.p_repeat) {
    RepeatSpan span;
    span.length = cfg_.span_min + rng_.uniform_index(cfg_.span_max - cfg_.span_min + 1);
    span.source = rng_.uniform_index(cfg_.seq_len - 2 * span.length + 1);
    const std::size_t lo = span.source + span.length;
    span.dest = lo + rng_.uniform_index(cfg_.seq_len - span.length - lo + 1);
    std::copy_n(seq.tokens.begin() + static_cast<std::ptrdiff_t>(span.source), span.length,
                seq.tokens.begin() + static_cast<std::ptrdiff_t>(span.dest));
    seq.repeat = span;
  }
  return seq;
}

std::vector<TokenSeq> SynthCorpus::next_batch(std::size_t n_seqs) {
  std::vector<TokenSeq> batch;
  batch.reserve(n_seqs);
  for (std::size_t i = 0; i < n_seqs; ++i) batch.push_back(next().tokens);
  return batch;
}

}  // namespace reprobe::toylm

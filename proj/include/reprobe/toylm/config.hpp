#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"

namespace reprobe::toylm {

// Decoder-only transformer shape.
struct ToyConfig {
  std::size_t vocab_size = 2048;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 256;
  std::size_t context_len = 128;
  double init_std = 0.02;
  std::uint64_t seed = 0;

  std::size_t head_dim() const { return d_model / n_heads; }
  // Throws InputError on an inconsistent shape.
  void validate() const;
  friend bool operator==(const ToyConfig&, const ToyConfig&) = default;
};

// Zipf filler over [filler_begin, filler_end) plus an optional verbatim
// re-emission of an earlier span.
struct SynthCorpusConfig {
  double zipf_exponent = 1.1;
  double p_repeat = 0.5;
  std::size_t span_min = 3;
  std::size_t span_max = 10;
  std::size_t seq_len = 128;
  std::size_t filler_begin = 0;
  std::size_t filler_end = 0;  // 0 means the whole vocabulary
  std::uint64_t seed = 0;

  void validate(std::size_t vocab_size) const;
  friend bool operator==(const SynthCorpusConfig&, const SynthCorpusConfig&) = default;
};

struct TrainConfig {
  std::size_t steps = 16384;
  std::size_t batch_seqs = 2;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t warmup_steps = 100;
  std::vector<std::size_t> checkpoint_steps = {0, 1, 4, 16, 64, 256, 1024, 4096, 16384};
  std::size_t eval_seqs = 16;
  std::uint64_t eval_seed = 0x5eedULL;

  void validate() const;
};

void to_json(nlohmann::json& j, const ToyConfig& c);
void from_json(const nlohmann::json& j, ToyConfig& c);
void to_json(nlohmann::json& j, const SynthCorpusConfig& c);
void from_json(const nlohmann::json& j, SynthCorpusConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace reprobe::toylm

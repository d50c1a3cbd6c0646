#include "reprobe/toylm/config.hpp"

#include <algorithm>
#include <string>

#include "reprobe/common.hpp"

namespace reprobe::toylm {

void ToyConfig::validate() const {
  if (vocab_size < 64) throw InputError("toy config: vocab_size must be >= 64");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw InputError("toy config: d_model must be a positive multiple of n_heads");
  }
  if (n_layers == 0 || d_ff == 0 || context_len < 2) {
    throw InputError("toy config: n_layers, d_ff must be positive and context_len >= 2");
  }
  if (!(init_std >= 0.0)) throw InputError("toy config: init_std must be >= 0");
}

void SynthCorpusConfig::validate(std::size_t vocab_size) const {
  if (!(p_repeat >= 0.0 && p_repeat <= 1.0)) throw InputError("corpus: p_repeat must be in [0, 1]");
  if (!(zipf_exponent > 0.0)) throw InputError("corpus: zipf_exponent must be positive");
  if (span_min == 0 || span_min > span_max) throw InputError("corpus: need 1 <= span_min <= span_max");
  if (2 * span_max >= seq_len) throw InputError("corpus: span_max must be < seq_len / 2");
  const std::size_t end = filler_end == 0 ? vocab_size : filler_end;
  if (filler_begin >= end || end > vocab_size) throw InputError("corpus: bad filler range");
}

void TrainConfig::validate() const {
  if (batch_seqs == 0) throw InputError("train: batch_seqs must be positive");
  if (!(lr > 0.0)) throw InputError("train: lr must be positive");
  if (checkpoint_steps.empty() || checkpoint_steps.front() != 0 ||
      checkpoint_steps.back() != steps ||
      !std::is_sorted(checkpoint_steps.begin(), checkpoint_steps.end()) ||
      std::adjacent_find(checkpoint_steps.begin(), checkpoint_steps.end()) !=
          checkpoint_steps.end()) {
    throw InputError("train: checkpoint_steps must be strictly increasing from 0 to steps");
  }
}

void to_json(nlohmann::json& j, const ToyConfig& c) {
  j = {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},         {"n_layers", c.n_layers},
       {"n_heads", c.n_heads},       {"d_ff", c.d_ff},               {"context_len", c.context_len},
       {"init_std", c.init_std},     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ToyConfig& c) {
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.context_len = j.value("context_len", c.context_len);
  c.init_std = j.value("init_std", c.init_std);
  c.seed = j.value("seed", c.seed);
}

void to_json(nlohmann::json& j, const SynthCorpusConfig& c) {
  j = {{"zipf_exponent", c.zipf_exponent}, {"p_repeat", c.p_repeat},
       {"span_min", c.span_min},           {"span_max", c.span_max},
       {"seq_len", c.seq_len},             {"filler_begin", c.filler_begin},
       {"filler_end", c.filler_end},       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SynthCorpusConfig& c) {
  c.zipf_exponent = j.value("zipf_exponent", c.zipf_exponent);
  c.p_repeat = j.value("p_repeat", c.p_repeat);
  c.span_min = j.value("span_min", c.span_min);
  c.span_max = j.value("span_max", c.span_max);
  c.seq_len = j.value("seq_len", c.seq_len);
  c.filler_begin = j.value("filler_begin", c.filler_begin);
  c.filler_end = j.value("filler_end", c.filler_end);
  c.seed = j.value("seed", c.seed);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"steps", c.steps},
       {"batch_seqs", c.batch_seqs},
       {"lr", c.lr},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"eps", c.eps},
       {"warmup_steps", c.warmup_steps},
       {"checkpoint_steps", c.checkpoint_steps},
       {"eval_seqs", c.eval_seqs},
       {"eval_seed", c.eval_seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.steps = j.value("steps", c.steps);
  c.batch_seqs = j.value("batch_seqs", c.batch_seqs);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.checkpoint_steps = j.value("checkpoint_steps", c.checkpoint_steps);
  c.eval_seqs = j.value("eval_seqs", c.eval_seqs);
  c.eval_seed = j.value("eval_seed", c.eval_seed);
}

}  // namespace reprobe::toylm

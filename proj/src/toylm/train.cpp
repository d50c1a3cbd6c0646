#include "reprobe/toylm/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "reprobe/toylm/corpus.hpp"

namespace reprobe::toylm {

namespace {

TrainResult run(ToyCheckpoint state, const TrainOptions& opts) {
  const TrainConfig& tc = state.train;
  tc.validate();
  const ToyConfig& cfg = state.params.config();
  if (state.corpus.seq_len > cfg.context_len) {
    throw InputError("train: corpus seq_len exceeds the model context");
  }
  SynthCorpus corpus(state.corpus, cfg.vocab_size);
  corpus.set_rng_state(state.corpus_rng_state);
  const auto heldout = heldout_batch(cfg, state.corpus, tc);

  TrainResult result;
  auto next_ckpt = std::lower_bound(tc.checkpoint_steps.begin(), tc.checkpoint_steps.end(), state.step);

  auto emit = [&] {
    EvalPoint ep{state.step, state.tokens_seen,
                 batch_loss(state.params, heldout) / std::numbers::ln2};
    state.corpus_rng_state = corpus.rng_state();
    result.eval.push_back(ep);
    if (opts.on_checkpoint) opts.on_checkpoint(state, ep);
    if (opts.keep_checkpoints) result.checkpoints.push_back(state);
    ++next_ckpt;
  };

  if (next_ckpt != tc.checkpoint_steps.end() && *next_ckpt == state.step) emit();

  auto& theta = state.params.flat();
  auto& m = state.adam_m;
  auto& v = state.adam_v;
  while (state.step < tc.steps) {
    const auto batch = corpus.next_batch(tc.batch_seqs);
    auto lg = loss_and_grad(state.params, batch);
    if (!std::isfinite(lg.loss)) {
      throw Error("train: non-finite loss at step " + std::to_string(state.step));
    }
    result.train_loss.push_back(lg.loss);
    const auto& g = lg.grad.flat();

    const double t = static_cast<double>(state.step + 1);
    const double warm = tc.warmup_steps == 0
                            ? 1.0
                            : std::min(1.0, t / static_cast<double>(tc.warmup_steps));
    const double lr = tc.lr * warm;
    const double c1 = 1.0 - std::pow(tc.beta1, t);
    const double c2 = 1.0 - std::pow(tc.beta2, t);
    m = tc.beta1 * m + (1.0 - tc.beta1) * g;
    v = tc.beta2 * v + (1.0 - tc.beta2) * g.cwiseAbs2();
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + tc.eps);

    ++state.step;
    state.tokens_seen = state.step * state.batch_tokens;
    if (next_ckpt != tc.checkpoint_steps.end() && *next_ckpt == state.step) emit();
  }
  return result;
}

}  // namespace

std::vector<TokenSeq> heldout_batch(const ToyConfig& cfg, const SynthCorpusConfig& corpus,
                                    const TrainConfig& train) {
  SynthCorpusConfig held = corpus;
  held.seed = train.eval_seed;
  SynthCorpus c(held, cfg.vocab_size);
  return c.next_batch(train.eval_seqs);
}

TrainResult train(const ToyConfig& cfg, const SynthCorpusConfig& corpus,
                  const TrainConfig& train, const TrainOptions& opts) {
  cfg.validate();
  corpus.validate(cfg.vocab_size);
  train.validate();
  ToyCheckpoint state(cfg);
  state.params = init_params(cfg);
  state.corpus = corpus;
  state.train = train;
  state.batch_tokens = train.batch_seqs * corpus.seq_len;
  state.adam_m = Eigen::VectorXd::Zero(state.params.flat().size());
  state.adam_v = Eigen::VectorXd::Zero(state.params.flat().size());
  state.corpus_rng_state = corpus.seed;
  return run(std::move(state), opts);
}

TrainResult resume(const ToyCheckpoint& from, const TrainOptions& opts) {
  if (from.step > from.train.steps) throw InputError("resume: checkpoint is past the final step");
  return run(from, opts);
}

}  // namespace reprobe::toylm

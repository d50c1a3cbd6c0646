#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "reprobe/toylm/checkpoint.hpp"
#include "reprobe/toylm/config.hpp"

namespace reprobe::toylm {

struct EvalPoint {
  std::size_t step = 0;
  std::size_t tokens_seen = 0;
  double loss_bits = 0.0;  // held-out batch, mean bits per predicted token
};

struct TrainResult {
  std::vector<double> train_loss;  // per update, nats on that update's batch
  std::vector<EvalPoint> eval;     // one per checkpoint step
  std::vector<ToyCheckpoint> checkpoints;  // empty unless kept
};

// Called for every checkpoint step as it is reached (step 0 included).
using CheckpointSink = std::function<void(const ToyCheckpoint&, const EvalPoint&)>;

struct TrainOptions {
  CheckpointSink on_checkpoint;
  bool keep_checkpoints = true;
};

// Adam with linear warmup on synthetic batches of train.batch_seqs sequences.
// Deterministic given the three configs.
TrainResult train(const ToyConfig& cfg, const SynthCorpusConfig& corpus,
                  const TrainConfig& train, const TrainOptions& opts = {});

// Continues an interrupted run from `from`; the remaining checkpoints are
// identical to those of an uninterrupted run.
TrainResult resume(const ToyCheckpoint& from, const TrainOptions& opts = {});

// The fixed held-out batch used for EvalPoint::loss_bits.
std::vector<TokenSeq> heldout_batch(const ToyConfig& cfg, const SynthCorpusConfig& corpus,
                                    const TrainConfig& train);

}  // namespace reprobe::toylm

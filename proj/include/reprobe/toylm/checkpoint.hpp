#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reprobe/toylm/config.hpp"
#include "reprobe/toylm/model.hpp"

namespace reprobe::toylm {

// Parameters after `step` optimizer updates, with everything needed to resume.
struct ToyCheckpoint {
  explicit ToyCheckpoint(const ToyConfig& cfg) : params(cfg) {}

  ToyParams<double> params;
  SynthCorpusConfig corpus;
  TrainConfig train;
  std::size_t step = 0;
  std::size_t tokens_seen = 0;  // step * batch_tokens
  std::size_t batch_tokens = 0;
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;
  std::uint64_t corpus_rng_state = 0;

  friend bool operator==(const ToyCheckpoint& a, const ToyCheckpoint& b);
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

// Layout: version byte, u64 LE header length, JSON header, then params,
// adam_m and adam_v as raw LE f64 in ParamLayout order.
std::string serialize_checkpoint(const ToyCheckpoint& ckpt);
ToyCheckpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const ToyCheckpoint& ckpt, const std::filesystem::path& path);
ToyCheckpoint load_checkpoint(const std::filesystem::path& path);

// "step-00016384.ckpt"
std::string checkpoint_filename(std::size_t step);
// Revision label used by providers: "step16384".
std::string step_revision(std::size_t step);

struct CheckpointEntry {
  std::size_t step = 0;
  std::filesystem::path path;
};

// Checkpoint files in `dir`, ascending by step.
std::vector<CheckpointEntry> list_checkpoints(const std::filesystem::path& dir);

}  // namespace reprobe::toylm

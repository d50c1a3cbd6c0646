#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reprobe/provider.hpp"
#include "reprobe/stimulus.hpp"

namespace reprobe {

// How a noun spanning several tokens is scored. kSum is the joint
// log-probability of the noun.
enum class SubtokenMode { kSum, kMean };

std::string_view to_string(SubtokenMode m);
SubtokenMode parse_subtoken_mode(std::string_view s);

// Surprisal of one list position at its first and its second occurrence.
// In the control condition `repeat_noun` differs from `noun`.
struct NounLoss {
  std::string noun;
  std::string repeat_noun;
  std::size_t position = 0;  // 1-based ordinal position in the list
  double first_bits = 0.0;
  double repeat_bits = 0.0;
  std::size_t first_tokens = 0;
  std::size_t repeat_tokens = 0;
};

struct AlignedVignette {
  std::vector<NounLoss> losses;
  // Token index of the second list's first noun minus that of the first list's.
  std::size_t repeat_token_gap = 0;
};

AlignedVignette align_noun_losses(const Vignette& vignette, const ScoredText& scored,
                                  SubtokenMode mode = SubtokenMode::kSum);

inline constexpr double kDegenerateFirstBits = 1e-9;

// Repeat loss change of one vignette, as fractions (x100 for percent).
// Degenerate vignettes keep lr/lr_per_position empty.
struct RetrievalScore {
  std::string vignette_id;
  double lr = 0.0;
  std::vector<double> lr_per_position;
  std::size_t repeat_token_gap = 0;
  bool degenerate = false;
};

// lr_per_position[p] = 1 - repeat/first; lr = 1 - mean of the ratios.
RetrievalScore repeat_loss_change(const std::vector<NounLoss>& losses, std::string vignette_id = {},
                                  std::size_t repeat_token_gap = 0);

// {"id":..., "lr":..., "lr_pos":[...], "gap":..., "degenerate":...}
nlohmann::ordered_json score_to_json(const RetrievalScore& s);
RetrievalScore score_from_json(const nlohmann::json& j);

}  // namespace reprobe

#include "reprobe/metrics.hpp"

#include <cmath>
#include <limits>

namespace reprobe {

std::string_view to_string(SubtokenMode m) { return m == SubtokenMode::kSum ? "sum" : "mean"; }

SubtokenMode parse_subtoken_mode(std::string_view s) {
  if (s == "sum") return SubtokenMode::kSum;
  if (s == "mean") return SubtokenMode::kMean;
  throw InputError("unknown subtoken mode '" + std::string(s) + "' (expected sum|mean)");
}

namespace {

struct SpanLoss {
  double bits = 0.0;
  std::size_t n_tokens = 0;
  std::size_t first_token = 0;
};

SpanLoss span_loss(const NounSpan& span, const ScoredText& scored, SubtokenMode mode,
                   const std::string& id) {
  SpanLoss out;
  double total = 0.0;
  for (std::size_t i = 0; i < scored.tokens.size(); ++i) {
    const auto& t = scored.tokens[i];
    if (t.end <= span.begin) continue;
    if (t.start >= span.end) break;
    if (!t.logprob) {
      throw InputError(id + ": noun '" + span.word +
                       "' overlaps the first token, which has no conditional probability");
    }
    if (out.n_tokens == 0) out.first_token = i;
    total += bits(*t.logprob);
    ++out.n_tokens;
  }
  if (out.n_tokens == 0) throw InputError(id + ": noun '" + span.word + "' overlaps no token");
  out.bits = mode == SubtokenMode::kSum ? total : total / static_cast<double>(out.n_tokens);
  return out;
}

}  // namespace

AlignedVignette align_noun_losses(const Vignette& vignette, const ScoredText& scored,
                                  SubtokenMode mode) {
  if (scored.text != vignette.text) {
    throw InputError(vignette.id + ": scored text does not match the vignette text");
  }
  if (vignette.first_list.size() != vignette.second_list.size()) {
    throw InputError(vignette.id + ": list lengths differ");
  }
  AlignedVignette out;
  for (std::size_t p = 0; p < vignette.first_list.size(); ++p) {
    const auto a = span_loss(vignette.first_list[p], scored, mode, vignette.id);
    const auto b = span_loss(vignette.second_list[p], scored, mode, vignette.id);
    out.losses.push_back({vignette.first_list[p].word, vignette.second_list[p].word, p + 1, a.bits,
                          b.bits, a.n_tokens, b.n_tokens});
    if (p == 0) out.repeat_token_gap = b.first_token - a.first_token;
  }
  return out;
}

RetrievalScore repeat_loss_change(const std::vector<NounLoss>& losses, std::string vignette_id,
                                  std::size_t repeat_token_gap) {
  if (losses.empty()) throw InputError(vignette_id + ": no noun losses");
  std::vector<bool> seen(losses.size(), false);
  for (const auto& l : losses) {
    if (l.position == 0 || l.position > losses.size() || seen[l.position - 1]) {
      throw InputError(vignette_id + ": each position needs exactly one noun loss");
    }
    seen[l.position - 1] = true;
  }

  RetrievalScore s;
  s.vignette_id = std::move(vignette_id);
  s.repeat_token_gap = repeat_token_gap;
  for (const auto& l : losses) {
    if (!(l.first_bits >= kDegenerateFirstBits)) {
      s.degenerate = true;
      s.lr = std::numeric_limits<double>::quiet_NaN();
      return s;
    }
  }
  s.lr_per_position.assign(losses.size(), 0.0);
  double ratio_sum = 0.0;
  for (const auto& l : losses) {
    const double r = l.repeat_bits / l.first_bits;
    s.lr_per_position[l.position - 1] = 1.0 - r;
    ratio_sum += r;
  }
  s.lr = 1.0 - ratio_sum / static_cast<double>(losses.size());
  return s;
}

nlohmann::ordered_json score_to_json(const RetrievalScore& s) {
  nlohmann::ordered_json j;
  j["id"] = s.vignette_id;
  j["lr"] = s.degenerate ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s.lr);
  j["lr_pos"] = s.lr_per_position;
  j["gap"] = s.repeat_token_gap;
  j["degenerate"] = s.degenerate;
  return j;
}

RetrievalScore score_from_json(const nlohmann::json& j) {
  RetrievalScore s;
  s.vignette_id = j.at("id").get<std::string>();
  s.degenerate = j.at("degenerate").get<bool>();
  s.lr = j.at("lr").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("lr").get<double>();
  s.lr_per_position = j.at("lr_pos").get<std::vector<double>>();
  s.repeat_token_gap = j.at("gap").get<std::size_t>();
  return s;
}

}  // namespace reprobe

#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reprobe/common.hpp"

namespace reprobe {

// One token as returned by a logprob provider. `logprob` is the natural-log
// conditional probability given the prefix; absent for the first token.
struct TokenScore {
  std::int64_t token_id = 0;
  std::string token_text;
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<double> logprob;

  friend bool operator==(const TokenScore&, const TokenScore&) = default;
};

struct ScoredText {
  std::string text;
  std::string model_id;
  std::string revision;
  std::vector<TokenScore> tokens;

  friend bool operator==(const ScoredText&, const ScoredText&) = default;
};

// Throws ProtocolError unless tokens tile [0, text.size()) in order, the
// first logprob is absent and every other one is present and <= 0.
// `context` (usually a vignette id) is prefixed to the message.
void validate_scored_text(const ScoredText& scored, std::string_view context = {});

// Natural-log probability to bits of surprisal.
template <typename Scalar>
Scalar bits(Scalar logprob_e) {
  if (!(logprob_e <= Scalar(0))) {
    throw std::domain_error("bits: log-probability must be <= 0");
  }
  return -logprob_e / Scalar(std::numbers::ln2);
}

inline constexpr const char* kProviderUrlEnv = "REPROBE_PROVIDER_URL";

struct ProviderEndpoint {
  std::string base_url;
  std::string model_id;
  std::string revision;
  std::chrono::duration<double> timeout{60.0};
  std::size_t max_inflight = 4;

  // base_url from REPROBE_PROVIDER_URL, empty when unset.
  static std::string default_base_url();
};

// Request/response bodies of POST {base_url}/v1/score.
nlohmann::ordered_json make_score_request(const std::string& model, const std::string& revision,
                                          const std::string& text);
ScoredText parse_score_response(const nlohmann::json& body, const std::string& text,
                                std::string_view context = {});
nlohmann::ordered_json score_response_to_json(const ScoredText& scored);

// Anything that scores text per token.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ScoredText score(const std::string& text) const = 0;
  virtual std::string model_id() const = 0;
  virtual std::string revision() const = 0;
  // Cheap reachability check; throws on failure.
  virtual void preflight() const { score("Mary read a list of words."); }
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
};

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(ProviderEndpoint endpoint, RetryPolicy retry = {});

  ScoredText score(const std::string& text) const override;
  std::string model_id() const override { return endpoint_.model_id; }
  std::string revision() const override { return endpoint_.revision; }
  const ProviderEndpoint& endpoint() const { return endpoint_; }

 private:
  ProviderEndpoint endpoint_;
  RetryPolicy retry_;
};

struct ScoreRequest {
  std::string id;
  std::string text;
};

// Scores every request with at most `max_inflight` concurrent calls. Results
// come back in request order regardless of completion order; a failure is
// rethrown with the request id attached once in-flight work drains.
std::vector<ScoredText> score_batch(const Provider& provider, std::span<const ScoreRequest> requests,
                                    std::size_t max_inflight);

}  // namespace reprobe

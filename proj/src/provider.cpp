#include "reprobe/provider.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "httplib.h"

namespace reprobe {
namespace {

std::string prefix(std::string_view context) {
  return context.empty() ? std::string() : std::string(context) + ": ";
}

}  // namespace

void validate_scored_text(const ScoredText& scored, std::string_view context) {
  const auto& toks = scored.tokens;
  if (toks.empty()) throw ProtocolError(prefix(context) + "response has no tokens");
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    const std::string where = prefix(context) + "token " + std::to_string(i) + ": ";
    if (t.start != cursor) {
      throw ProtocolError(where + (t.start > cursor ? "gap" : "overlap") + " in span coverage (start " +
                          std::to_string(t.start) + ", expected " + std::to_string(cursor) + ")");
    }
    if (t.end <= t.start) throw ProtocolError(where + "empty span");
    if (t.end > scored.text.size()) throw ProtocolError(where + "span runs past end of text");
    if (i == 0) {
      if (t.logprob.has_value()) {
        throw ProtocolError(where + "first token must carry a null logprob");
      }
    } else {
      if (!t.logprob.has_value()) throw ProtocolError(where + "missing logprob");
      if (!(*t.logprob <= 0.0)) {
        throw ProtocolError(where + "positive or NaN logprob " + format_double(*t.logprob));
      }
    }
    cursor = t.end;
  }
  if (cursor != scored.text.size()) {
    throw ProtocolError(prefix(context) + "spans cover " + std::to_string(cursor) + " of " +
                        std::to_string(scored.text.size()) + " bytes");
  }
}

std::string ProviderEndpoint::default_base_url() {
  const char* v = std::getenv(kProviderUrlEnv);
  return v ? std::string(v) : std::string();
}

nlohmann::ordered_json make_score_request(const std::string& model, const std::string& revision,
                                          const std::string& text) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["revision"] = revision;
  j["text"] = text;
  return j;
}

ScoredText parse_score_response(const nlohmann::json& body, const std::string& text,
                                std::string_view context) {
  ScoredText out;
  out.text = text;
  try {
    out.model_id = body.at("model").get<std::string>();
    out.revision = body.at("revision").get<std::string>();
    for (const auto& tok : body.at("tokens")) {
      TokenScore t;
      t.token_id = tok.at("id").get<std::int64_t>();
      t.token_text = tok.at("text").get<std::string>();
      t.start = tok.at("start").get<std::size_t>();
      t.end = tok.at("end").get<std::size_t>();
      const auto& lp = tok.at("logprob");
      if (!lp.is_null()) t.logprob = lp.get<double>();
      out.tokens.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(prefix(context) + "malformed response: " + e.what());
  }
  validate_scored_text(out, context);
  return out;
}

nlohmann::ordered_json score_response_to_json(const ScoredText& scored) {
  nlohmann::ordered_json j;
  j["model"] = scored.model_id;
  j["revision"] = scored.revision;
  auto toks = nlohmann::ordered_json::array();
  for (const auto& t : scored.tokens) {
    nlohmann::ordered_json tj;
    tj["id"] = t.token_id;
    tj["text"] = t.token_text;
    tj["start"] = t.start;
    tj["end"] = t.end;
    tj["logprob"] = t.logprob ? nlohmann::ordered_json(*t.logprob) : nlohmann::ordered_json(nullptr);
    toks.push_back(std::move(tj));
  }
  j["tokens"] = std::move(toks);
  return j;
}

HttpProvider::HttpProvider(ProviderEndpoint endpoint, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), retry_(retry) {
  if (endpoint_.base_url.empty()) endpoint_.base_url = ProviderEndpoint::default_base_url();
  if (endpoint_.base_url.empty()) {
    throw InputError(std::string("no provider URL given and ") + kProviderUrlEnv + " is unset");
  }
  if (endpoint_.max_inflight == 0) throw InputError("max_inflight must be >= 1");
}

ScoredText HttpProvider::score(const std::string& text) const {
  if (text.empty()) throw InputError("score: text must be non-empty");
  const auto body = make_score_request(endpoint_.model_id, endpoint_.revision, text).dump();
  auto backoff = retry_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client cli(endpoint_.base_url);
    const auto secs = endpoint_.timeout.count();
    const auto whole = static_cast<time_t>(secs);
    const auto micros = static_cast<time_t>((secs - static_cast<double>(whole)) * 1e6);
    cli.set_connection_timeout(whole, micros);
    cli.set_read_timeout(whole, micros);
    cli.set_write_timeout(whole, micros);
    auto res = cli.Post("/v1/score", body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
      }
      return parse_score_response(j, text);
    }
    std::string message = res->body;
    try {
      message = nlohmann::json::parse(res->body).at("error").get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + message;
      continue;
    }
    throw ProtocolError("HTTP " + std::to_string(res->status) + " from " + endpoint_.base_url +
                        ": " + message);
  }
  throw TransportError("scoring against " + endpoint_.base_url + " failed after " +
                       std::to_string(retry_.max_retries) + " retries: " + last_error);
}

std::vector<ScoredText> score_batch(const Provider& provider, std::span<const ScoreRequest> requests,
                                    std::size_t max_inflight) {
  std::vector<ScoredText> results(requests.size());
  if (requests.empty()) return results;
  const std::size_t workers = std::max<std::size_t>(1, std::min(max_inflight, requests.size()));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::exception_ptr first_error;
  std::string failed_id;

  auto work = [&] {
    while (!failed.load()) {
      const auto i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        auto scored = provider.score(requests[i].text);
        validate_scored_text(scored, requests[i].id);
        results[i] = std::move(scored);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) {
          first_error = std::current_exception();
          failed_id = requests[i].id;
        }
        failed = true;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (first_error) {
    try {
      std::rethrow_exception(first_error);
    } catch (const TransportError& e) {
      throw TransportError(failed_id + ": " + e.what());
    } catch (const ProtocolError& e) {
      const std::string what = e.what();
      throw ProtocolError(what.starts_with(failed_id) ? what : failed_id + ": " + what);
    }
  }
  return results;
}

}  // namespace reprobe

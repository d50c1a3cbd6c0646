#include "reprobe/provider.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "test_util.hpp"

namespace reprobe {
namespace {

nlohmann::ordered_json fixture() {
  return nlohmann::ordered_json::parse(
      read_file(testing::source_dir() / "fixtures/score_roundtrip.json"));
}

// Serves the fixture cases by exact request match; anything else is a 400.
class StubServer {
 public:
  StubServer() {
    const auto fx = fixture();
    server_.Post("/v1/score", [fx, this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      if (failures_left_ > 0) {
        --failures_left_;
        res.status = 503;
        res.set_content(R"({"error":"warming up"})", "application/json");
        return;
      }
      const auto body = nlohmann::ordered_json::parse(req.body);
      for (const auto& c : fx["cases"]) {
        if (c["request"] == body) {
          res.status = c["status"].get<int>();
          res.set_content(c["response"].dump(), "application/json");
          return;
        }
      }
      res.status = 400;
      res.set_content(R"({"error":"no such case"})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int hits() const { return hits_; }
  void fail_next(int n) { failures_left_ = n; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::atomic<int> failures_left_{0};
};

ProviderEndpoint endpoint(const std::string& url, const std::string& revision = "step143000") {
  ProviderEndpoint ep;
  ep.base_url = url;
  ep.model_id = "pythia-70m";
  ep.revision = revision;
  ep.timeout = std::chrono::seconds(5);
  return ep;
}

RetryPolicy fast_retry() { return {3, std::chrono::milliseconds(1)}; }

TEST(Bits, Values) {
  EXPECT_DOUBLE_EQ(bits(-std::log(2.0)), 1.0);
  EXPECT_EQ(bits(0.0), 0.0);
  // log2(10) by hand.
  EXPECT_NEAR(bits(-std::log(10.0)), 3.321928094887362, 1e-15);
  EXPECT_THROW(bits(0.1), std::domain_error);
}

TEST(Bits, AdditiveAndMonotone) {
  SplitMix64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double lp = std::log(rng.uniform01() + 1e-300);
    const double lq = std::log(rng.uniform01() + 1e-300);
    EXPECT_NEAR(bits(lp) + bits(lq), bits(lp + lq), 1e-12 * (1 + bits(lp + lq)));
    if (lp < lq) EXPECT_GT(bits(lp), bits(lq));
  }
}

ScoredText two_tokens(std::size_t second_start) {
  ScoredText s;
  s.text = "ab cdef";
  s.tokens = {{1, "ab ", 0, 3, std::nullopt}, {2, "cdef", second_start, 7, -1.0}};
  return s;
}

TEST(Validate, TilingRule) {
  EXPECT_NO_THROW(validate_scored_text(two_tokens(3)));
  try {
    validate_scored_text(two_tokens(4), "arb-0001");
    FAIL();
  } catch (const ProtocolError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("arb-0001"), std::string::npos) << msg;
    EXPECT_NE(msg.find("token 1"), std::string::npos) << msg;
  }
}

TEST(Validate, LogprobRules) {
  auto s = two_tokens(3);
  s.tokens[1].logprob = 0.5;
  EXPECT_THROW(validate_scored_text(s), ProtocolError);
  s = two_tokens(3);
  s.tokens[0].logprob = 0.0;
  EXPECT_THROW(validate_scored_text(s), ProtocolError);
  s = two_tokens(3);
  s.tokens[1].logprob.reset();
  EXPECT_THROW(validate_scored_text(s), ProtocolError);
}

TEST(Validate, SingleTokenAndConcatenation) {
  ScoredText s;
  s.text = "word";
  s.tokens = {{5, "word", 0, 4, std::nullopt}};
  EXPECT_NO_THROW(validate_scored_text(s));
  const auto t = two_tokens(3);
  std::string joined;
  for (const auto& tok : t.tokens) joined += t.text.substr(tok.start, tok.end - tok.start);
  EXPECT_EQ(joined, t.text);
}

TEST(WireFormat, RequestKeysInOrder) {
  EXPECT_EQ(make_score_request("m", "step1", "hi").dump(),
            R"({"model":"m","revision":"step1","text":"hi"})");
}

TEST(WireFormat, FixtureRoundTripsByteIdentically) {
  const auto fx = fixture();
  const auto& c = fx["cases"][0];
  const auto scored = parse_score_response(c["response"], c["request"]["text"]);
  EXPECT_EQ(score_response_to_json(scored).dump(), c["response"].dump());
  EXPECT_FALSE(scored.tokens[0].logprob.has_value());
}

TEST(HttpProvider, ReplaysFixtureAgainstStub) {
  StubServer server;
  HttpProvider provider(endpoint(server.url()), fast_retry());
  const auto c = fixture()["cases"][0];
  const auto scored = provider.score("Hello world");
  EXPECT_EQ(score_response_to_json(scored).dump(), c["response"].dump());
  EXPECT_EQ(scored.revision, "step143000");
  ASSERT_EQ(scored.tokens.size(), 2u);
  EXPECT_EQ(scored.tokens[1].token_id, 1533);
}

TEST(HttpProvider, UnknownRevisionIsNotRetried) {
  StubServer server;
  HttpProvider provider(endpoint(server.url(), "step7"), fast_retry());
  try {
    provider.score("Hello world");
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown revision"), std::string::npos) << e.what();
  }
  EXPECT_EQ(server.hits(), 1);
}

TEST(HttpProvider, EmptyTextRejectedLocally) {
  StubServer server;
  HttpProvider provider(endpoint(server.url()), fast_retry());
  EXPECT_THROW(provider.score(""), InputError);
  EXPECT_EQ(server.hits(), 0);
}

TEST(HttpProvider, RetriesServerErrors) {
  StubServer server;
  server.fail_next(2);
  HttpProvider provider(endpoint(server.url()), fast_retry());
  EXPECT_NO_THROW(provider.score("Hello world"));
  EXPECT_EQ(server.hits(), 3);
}

TEST(HttpProvider, GivesUpAfterThreeRetries) {
  StubServer server;
  server.fail_next(100);
  HttpProvider provider(endpoint(server.url()), fast_retry());
  EXPECT_THROW(provider.score("Hello world"), TransportError);
  EXPECT_EQ(server.hits(), 4);
}

TEST(HttpProvider, UnreachableIsTransportError) {
  int port = 0;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  auto ep = endpoint("http://127.0.0.1:" + std::to_string(port));
  ep.timeout = std::chrono::milliseconds(200);
  HttpProvider provider(ep, fast_retry());
  EXPECT_THROW(provider.score("Hello world"), TransportError);
}

TEST(HttpProvider, EnvDefaultUrl) {
  ::unsetenv(kProviderUrlEnv);
  EXPECT_THROW(HttpProvider(endpoint("")), InputError);
  ::setenv(kProviderUrlEnv, "http://127.0.0.1:1", 1);
  EXPECT_EQ(HttpProvider(endpoint("")).endpoint().base_url, "http://127.0.0.1:1");
  ::unsetenv(kProviderUrlEnv);
}

// Scores each text as one token after a text-dependent delay, so workers
// finish out of order.
class SlowProvider final : public Provider {
 public:
  ScoredText score(const std::string& text) const override {
    std::this_thread::sleep_for(std::chrono::milliseconds((text.size() * 7) % 5));
    if (text == "bad") return {text, "m", "r", {{0, text, 0, 2, std::nullopt}}};
    return {text, "m", "r", {{static_cast<std::int64_t>(text.size()), text, 0, text.size(), std::nullopt}}};
  }
  std::string model_id() const override { return "m"; }
  std::string revision() const override { return "r"; }
};

TEST(ScoreBatch, ResultsInRequestOrder) {
  std::vector<ScoreRequest> reqs;
  for (int i = 0; i < 40; ++i) reqs.push_back({"v" + std::to_string(i), std::string(i + 1, 'x')});
  SlowProvider p;
  const auto serial = score_batch(p, reqs, 1);
  const auto parallel = score_batch(p, reqs, 6);
  ASSERT_EQ(parallel.size(), reqs.size());
  EXPECT_EQ(serial, parallel);
  for (std::size_t i = 0; i < reqs.size(); ++i) EXPECT_EQ(parallel[i].text, reqs[i].text);
}

TEST(ScoreBatch, FailureCarriesRequestId) {
  std::vector<ScoreRequest> reqs{{"ok-1", "fine"}, {"arb-0042", "bad"}};
  SlowProvider p;
  try {
    score_batch(p, reqs, 2);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("arb-0042"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace reprobe

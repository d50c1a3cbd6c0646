#include "reprobe/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "reprobe/toylm/tokenizer.hpp"

namespace reprobe {
namespace {

std::vector<NounLoss> losses(const std::vector<double>& first, const std::vector<double>& repeat) {
  std::vector<NounLoss> out;
  for (std::size_t i = 0; i < first.size(); ++i) {
    out.push_back({"n" + std::to_string(i), "n" + std::to_string(i), i + 1, first[i], repeat[i], 1, 1});
  }
  return out;
}

// Straight-line re-implementation: loops over positions 1..k in order.
double oracle_lr(const std::vector<NounLoss>& ls) {
  const std::size_t k = ls.size();
  double acc = 0;
  for (std::size_t pos = 1; pos <= k; ++pos) {
    for (const auto& l : ls) {
      if (l.position == pos) acc += l.repeat_bits / l.first_bits;
    }
  }
  return 1.0 - acc / static_cast<double>(k);
}

TEST(RepeatLossChange, HandExample) {
  const auto s = repeat_loss_change(losses({2, 4, 6}, {1, 1, 1.5}));
  EXPECT_EQ(s.lr, 1.0 - 1.0 / 3.0);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", 100 * s.lr);
  EXPECT_STREQ(buf, "66.67");
  EXPECT_EQ(s.lr_per_position, (std::vector<double>{0.5, 0.75, 0.75}));
}

TEST(RepeatLossChange, Bounds) {
  EXPECT_EQ(repeat_loss_change(losses({3, 2, 5}, {3, 2, 5})).lr, 0.0);
  EXPECT_EQ(repeat_loss_change(losses({3, 2, 5}, {0, 0, 0})).lr, 1.0);
}

TEST(RepeatLossChange, MatchesOracleOnRandomSets) {
  SplitMix64 rng(2024);
  const auto t0 = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(10);
    std::vector<NounLoss> ls;
    for (std::size_t p = 1; p <= k; ++p) {
      ls.push_back({"w", "w", p, 1e-3 + 20 * rng.uniform01(), 20 * rng.uniform01(), 1, 1});
    }
    // Positions arrive in arbitrary order.
    for (std::size_t i = k; i > 1; --i) std::swap(ls[i - 1], ls[rng.uniform_index(i)]);
    const auto s = repeat_loss_change(ls);
    ASSERT_NEAR(s.lr, oracle_lr(ls), 1e-12);
    const double mean_pos =
        std::accumulate(s.lr_per_position.begin(), s.lr_per_position.end(), 0.0) / k;
    ASSERT_NEAR(s.lr, mean_pos, 1e-12);
    ASSERT_LE(s.lr, 1.0);
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.0);
}

TEST(RepeatLossChange, ScaleInvariant) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> f(3), r(3);
    for (int i = 0; i < 3; ++i) {
      f[i] = 0.1 + 10 * rng.uniform01();
      r[i] = 10 * rng.uniform01();
    }
    const double c = 0.01 + 100 * rng.uniform01();
    auto fc = f, rc = r;
    for (int i = 0; i < 3; ++i) {
      fc[i] *= c;
      rc[i] *= c;
    }
    EXPECT_NEAR(repeat_loss_change(losses(f, r)).lr, repeat_loss_change(losses(fc, rc)).lr, 1e-12);
  }
}

TEST(RepeatLossChange, PermutationInvariant) {
  const auto a = repeat_loss_change(losses({2, 4, 6}, {1, 3, 0.5}));
  const auto b = repeat_loss_change(losses({6, 2, 4}, {0.5, 1, 3}));
  EXPECT_NEAR(a.lr, b.lr, 1e-15);
}

TEST(RepeatLossChange, DegenerateFlagged) {
  const auto s = repeat_loss_change(losses({2, 1e-10, 6}, {1, 1, 1}), "v");
  EXPECT_TRUE(s.degenerate);
  EXPECT_TRUE(s.lr_per_position.empty());
  EXPECT_FALSE(repeat_loss_change(losses({2, 1e-9, 6}, {1, 0, 1})).degenerate);
}

TEST(RepeatLossChange, PositionErrors) {
  auto ls = losses({1, 2}, {1, 2});
  ls[1].position = 1;
  EXPECT_THROW(repeat_loss_change(ls), InputError);
  EXPECT_THROW(repeat_loss_change({}), InputError);
}

TEST(ScoreJson, RoundTrip) {
  const auto s = repeat_loss_change(losses({2, 4, 6}, {1, 1, 1.5}), "arb-0001", 31);
  const auto j = score_to_json(s);
  EXPECT_EQ(j.dump().substr(0, 17), "{\"id\":\"arb-0001\",");
  const auto back = score_from_json(j);
  EXPECT_EQ(back.lr, s.lr);
  EXPECT_EQ(back.lr_per_position, s.lr_per_position);
  EXPECT_EQ(back.repeat_token_gap, 31u);
}

// "ab cd ef" with nouns "cd" and "ef" in both lists is not a vignette, so
// these tests build the scored text by hand around a real vignette.
Vignette one_noun_vignette() {
  const auto pool = parse_noun_pool("fish\nbird\n", "p");
  return render_vignette({"fish"}, Condition::kRepeat, pool, 0, "v1");
}

// Tokens: everything before the noun, the noun split at `split` (0 = not
// split), and everything after; every conditional token gets `lp`.
ScoredText scored_around(const Vignette& v, const std::vector<std::pair<std::size_t, double>>& cuts) {
  ScoredText s;
  s.text = v.text;
  std::size_t start = 0;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const auto [end, lp] = cuts[i];
    TokenScore t{static_cast<std::int64_t>(i), v.text.substr(start, end - start), start, end,
                 i == 0 ? std::nullopt : std::optional<double>(lp)};
    s.tokens.push_back(t);
    start = end;
  }
  return s;
}

TEST(AlignNounLosses, SingleAndSplitTokens) {
  const auto v = one_noun_vignette();
  const auto& a = v.first_list[0];
  const auto& b = v.second_list[0];
  const double ln2 = std::log(2.0);
  // first noun in one token of 3 bits; second noun split into 1.5 + 0.5 bits.
  const auto s = scored_around(v, {{a.begin, 0},
                                   {a.end, -3 * ln2},
                                   {b.begin, -1.0},
                                   {b.begin + 2, -1.5 * ln2},
                                   {b.end, -0.5 * ln2},
                                   {v.text.size(), -0.1}});
  const auto sum = align_noun_losses(v, s);
  ASSERT_EQ(sum.losses.size(), 1u);
  EXPECT_NEAR(sum.losses[0].first_bits, 3.0, 1e-12);
  EXPECT_NEAR(sum.losses[0].repeat_bits, 2.0, 1e-12);
  EXPECT_EQ(sum.losses[0].repeat_tokens, 2u);
  EXPECT_EQ(sum.repeat_token_gap, 2u);
  const auto mean = align_noun_losses(v, s, SubtokenMode::kMean);
  EXPECT_NEAR(mean.losses[0].repeat_bits, 1.0, 1e-12);
}

TEST(AlignNounLosses, TokenStraddlingNounBoundary) {
  const auto v = one_noun_vignette();
  const auto& a = v.first_list[0];
  // One token covers ": fi", another "sh. After"; both overlap the noun.
  const auto s = scored_around(v, {{a.begin - 2, 0},
                                   {a.begin + 2, -1.0},
                                   {a.end + 7, -2.0},
                                   {v.text.size(), -0.5}});
  const auto out = align_noun_losses(v, s);
  EXPECT_NEAR(out.losses[0].first_bits, 3.0 / std::log(2.0), 1e-12);
  EXPECT_NEAR(out.losses[0].repeat_bits, 0.5 / std::log(2.0), 1e-12);
}

TEST(AlignNounLosses, Errors) {
  const auto v = one_noun_vignette();
  const auto& a = v.first_list[0];
  // Noun inside the first (unconditioned) token.
  EXPECT_THROW(align_noun_losses(v, scored_around(v, {{a.end, 0}, {v.text.size(), -1}})),
               InputError);
  auto s = scored_around(v, {{1, 0}, {v.text.size(), -1}});
  s.text += "x";
  EXPECT_THROW(align_noun_losses(v, s), InputError);
}

TEST(AlignNounLosses, ToyVignetteGivesThreePlusThree) {
  const auto vocab = toylm::ToyVocabulary::standard(2048);
  const auto pool = vocab.noun_pool();
  const std::vector<std::string> nouns(pool.nouns.begin(), pool.nouns.begin() + 3);
  const auto v = render_vignette(nouns, Condition::kRepeat, pool, 0, "toy");
  ScoredText s;
  s.text = v.text;
  for (const auto& t : vocab.tokenize(v.text)) {
    s.tokens.push_back({t.id, v.text.substr(t.start, t.end - t.start), t.start, t.end,
                        s.tokens.empty() ? std::nullopt : std::optional<double>(-1.0)});
  }
  const auto out = align_noun_losses(v, s);
  ASSERT_EQ(out.losses.size(), 3u);
  for (const auto& l : out.losses) {
    EXPECT_EQ(l.first_tokens, 1u);
    EXPECT_EQ(l.repeat_tokens, 1u);
  }
}

}  // namespace
}  // namespace reprobe

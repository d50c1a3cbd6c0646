#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "reprobe/metrics.hpp"
#include "reprobe/stimulus.hpp"
#include "reprobe/toylm/checkpoint.hpp"
#include "reprobe/toylm/corpus.hpp"
#include "reprobe/toylm/model.hpp"
#include "reprobe/toylm/tokenizer.hpp"
#include "reprobe/toylm/toy_provider.hpp"
#include "reprobe/toylm/train.hpp"
#include "test_util.hpp"

namespace reprobe::toylm {
namespace {

ToyConfig tiny_config(std::size_t d_model = 8) {
  ToyConfig cfg;
  cfg.vocab_size = 64;
  cfg.d_model = d_model;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 2 * d_model;
  cfg.context_len = 16;
  cfg.seed = 3;
  return cfg;
}

// Every entry, gains and biases included, drawn with a large std so the
// fixture exercises all parameters.
ToyParams<double> random_params(const ToyConfig& cfg, std::uint64_t seed, double std = 0.3) {
  ToyParams<double> p(cfg);
  SplitMix64 rng(seed);
  for (Eigen::Index i = 0; i < p.flat().size(); ++i) p.flat()(i) = std * rng.normal();
  for (const auto& s : p.layout().ordered) {
    if (s.kind == SlotKind::kGain) p[s].array() += 1.0;
  }
  return p;
}

// ---- Straight-line forward pass on std::vector, one position at a time ----

struct Oracle {
  const ToyParams<double>& p;
  double at(const TensorSlot& s, Eigen::Index r, Eigen::Index c) const {
    return p.flat()(s.offset + r + c * s.rows);
  }
  std::vector<double> layer_norm(const std::vector<double>& x, const TensorSlot& g,
                                 const TensorSlot& b) const {
    const double n = static_cast<double>(x.size());
    double mean = 0;
    for (double v : x) mean += v / n;
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean) / n;
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      y[i] = (x[i] - mean) / std::sqrt(var + 1e-5) * at(g, ii, 0) + at(b, ii, 0);
    }
    return y;
  }
  std::vector<double> affine(const TensorSlot& w, const TensorSlot* b, const std::vector<double>& x) const {
    std::vector<double> y(static_cast<std::size_t>(w.rows), 0.0);
    for (Eigen::Index r = 0; r < w.rows; ++r) {
      double acc = b ? at(*b, r, 0) : 0.0;
      for (Eigen::Index c = 0; c < w.cols; ++c) acc += at(w, r, c) * x[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(r)] = acc;
    }
    return y;
  }

  // logprobs[t][v]
  std::vector<std::vector<double>> run(const TokenSeq& toks) const {
    const auto& cfg = p.config();
    const auto& L = p.layout();
    const std::size_t T = toks.size(), D = cfg.d_model, H = cfg.n_heads, dh = D / H;
    std::vector<std::vector<double>> x(T, std::vector<double>(D));
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < D; ++i) {
        x[t][i] = at(L.tok_emb, static_cast<Eigen::Index>(i), toks[t]) +
                  at(L.pos_emb, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
      }
    }
    for (const auto& S : L.layers) {
      std::vector<std::vector<double>> qkv(T);
      for (std::size_t t = 0; t < T; ++t) qkv[t] = affine(S.w_qkv, &S.b_qkv, layer_norm(x[t], S.ln1_g, S.ln1_b));
      std::vector<std::vector<double>> heads(T, std::vector<double>(D, 0.0));
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t t = 0; t < T; ++t) {
          std::vector<double> score(t + 1);
          double mx = -1e300;
          for (std::size_t u = 0; u <= t; ++u) {
            double s = 0;
            for (std::size_t i = 0; i < dh; ++i) s += qkv[t][h * dh + i] * qkv[u][D + h * dh + i];
            score[u] = s / std::sqrt(static_cast<double>(dh));
            mx = std::max(mx, score[u]);
          }
          double z = 0;
          for (auto& s : score) z += (s = std::exp(s - mx));
          for (std::size_t u = 0; u <= t; ++u) {
            for (std::size_t i = 0; i < dh; ++i) heads[t][h * dh + i] += score[u] / z * qkv[u][2 * D + h * dh + i];
          }
        }
      }
      for (std::size_t t = 0; t < T; ++t) {
        const auto o = affine(S.w_o, &S.b_o, heads[t]);
        for (std::size_t i = 0; i < D; ++i) x[t][i] += o[i];
        auto f = affine(S.w_ff1, &S.b_ff1, layer_norm(x[t], S.ln2_g, S.ln2_b));
        for (auto& v : f) v = 0.5 * v * (1 + std::erf(v / std::sqrt(2.0)));
        const auto f2 = affine(S.w_ff2, &S.b_ff2, f);
        for (std::size_t i = 0; i < D; ++i) x[t][i] += f2[i];
      }
    }
    std::vector<std::vector<double>> out(T);
    for (std::size_t t = 0; t < T; ++t) {
      auto logits = affine(L.unembed, nullptr, layer_norm(x[t], L.lnf_g, L.lnf_b));
      double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0;
      for (double l : logits) z += std::exp(l - mx);
      for (auto& l : logits) l = l - mx - std::log(z);
      out[t] = logits;
    }
    return out;
  }
};

TEST(ToyForward, MatchesStraightLineOracle) {
  const auto cfg = tiny_config();
  const auto params = random_params(cfg, 17);
  const TokenSeq toks{5, 63, 0, 17, 5};
  const auto lp = forward(params, toks);
  const auto ref = Oracle{params}.run(toks);
  for (std::size_t t = 0; t < toks.size(); ++t) {
    for (std::size_t v = 0; v < cfg.vocab_size; ++v) {
      ASSERT_NEAR(lp(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(t)), ref[t][v], 1e-10)
          << "t=" << t << " v=" << v;
    }
  }
}

TEST(ToyForward, SoftmaxNormalized) {
  const auto cfg = tiny_config(16);
  const auto params = random_params(cfg, 2, 0.5);
  SplitMix64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    TokenSeq toks(1 + rng.uniform_index(cfg.context_len));
    for (auto& t : toks) t = static_cast<std::int32_t>(rng.uniform_index(cfg.vocab_size));
    const auto lp = forward(params, toks);
    for (Eigen::Index t = 0; t < lp.cols(); ++t) {
      ASSERT_NEAR(lp.col(t).array().exp().sum(), 1.0, 1e-6);
    }
  }
}

TEST(ToyForward, Causal) {
  const auto cfg = tiny_config(16);
  const auto params = random_params(cfg, 4);
  TokenSeq toks{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto base = forward(params, toks);
  for (std::size_t t = 0; t < toks.size(); ++t) {
    auto changed = toks;
    changed[t] = (changed[t] + 31) % 64;
    const auto lp = forward(params, changed);
    for (std::size_t u = 0; u < t; ++u) {
      ASSERT_EQ(lp.col(static_cast<Eigen::Index>(u)), base.col(static_cast<Eigen::Index>(u)))
          << "perturbing " << t << " moved " << u;
    }
    EXPECT_NE(lp.col(static_cast<Eigen::Index>(t)), base.col(static_cast<Eigen::Index>(t)));
  }
}

TEST(ToyForward, InputChecks) {
  const auto params = init_params(tiny_config());
  EXPECT_THROW(forward(params, TokenSeq(17, 1)), InputError);
  EXPECT_THROW(forward(params, TokenSeq{1, 64}), InputError);
  EXPECT_THROW(loss_bits(params, TokenSeq{1}), InputError);
}

TEST(ToyLoss, UniformOutputGivesLog2Vocab) {
  ToyConfig cfg;  // vocab 2048
  ToyParams<double> zero(cfg);
  for (const auto& s : zero.layout().ordered) {
    if (s.kind == SlotKind::kGain) zero[s].setOnes();
  }
  const TokenSeq toks{3, 9, 27, 81, 243};
  const auto res = loss_bits(zero, toks);
  ASSERT_EQ(res.per_token.size(), 4u);
  for (double b : res.per_token) EXPECT_NEAR(b, 11.0, 1e-12);
  EXPECT_NEAR(res.mean_bits, 11.0, 1e-12);
}

TEST(ToyLoss, MeanOfPerToken) {
  const auto params = random_params(tiny_config(), 8);
  const auto res = loss_bits(params, TokenSeq{1, 5, 9, 2, 2, 40});
  double s = 0;
  for (double b : res.per_token) s += b;
  EXPECT_NEAR(res.mean_bits, s / 5, 1e-12);
  EXPECT_NEAR(batch_loss(params, {TokenSeq{1, 5, 9, 2, 2, 40}}) / std::numbers::ln2, res.mean_bits, 1e-12);
}

TEST(ToyInit, StatisticsAndShapes) {
  ToyConfig cfg;
  EXPECT_EQ(cfg.head_dim(), 32u);
  const auto a = init_params(cfg);
  EXPECT_EQ(a, init_params(cfg));
  const auto emb = a[a.layout().tok_emb];
  const double mean = emb.mean();
  const double sd = std::sqrt((emb.array() - mean).square().mean());
  EXPECT_NEAR(sd, 0.02, 0.002);
  for (const auto& s : a.layout().ordered) {
    if (s.kind == SlotKind::kGain) EXPECT_TRUE((a[s].array() == 1.0).all()) << s.name;
    if (s.kind == SlotKind::kBias) EXPECT_TRUE(a[s].isZero(0)) << s.name;
  }
  cfg.seed = 1;
  EXPECT_FALSE(a == init_params(cfg));
}

TEST(ToyConfig, Validation) {
  ToyConfig cfg;
  cfg.n_heads = 3;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = ToyConfig{};
  cfg.vocab_size = 63;
  EXPECT_THROW(cfg.validate(), InputError);
  SynthCorpusConfig corpus;
  corpus.span_max = 64;
  EXPECT_THROW(corpus.validate(2048), InputError);
  corpus = SynthCorpusConfig{};
  corpus.p_repeat = 1.5;
  EXPECT_THROW(corpus.validate(2048), InputError);
}

TEST(ToyGrad, MatchesCentralDifferences) {
  auto cfg = tiny_config(16);
  const auto params = random_params(cfg, 21, 0.2);
  const std::vector<TokenSeq> batch{{1, 7, 7, 30, 2, 63, 1, 9}, {4, 4, 12, 50, 8, 1, 33, 2}};
  const auto lg = loss_and_grad(params, batch);
  EXPECT_NEAR(lg.loss, batch_loss(params, batch), 1e-12);

  std::vector<Eigen::Index> live;
  for (Eigen::Index i = 0; i < lg.grad.flat().size(); ++i) {
    if (std::abs(lg.grad.flat()(i)) > 1e-6) live.push_back(i);
  }
  ASSERT_GT(live.size(), 100u);
  SplitMix64 rng(5);
  const double h = 1e-4;
  std::set<std::string> slots_hit;
  for (int k = 0; k < 20; ++k) {
    const auto i = live[rng.uniform_index(live.size())];
    auto plus = params, minus = params;
    plus.flat()(i) += h;
    minus.flat()(i) -= h;
    const double fd = (batch_loss(plus, batch) - batch_loss(minus, batch)) / (2 * h);
    const double g = lg.grad.flat()(i);
    const double rel = std::abs(g - fd) / std::max(std::abs(g), std::abs(fd));
    EXPECT_LT(rel, 1e-4) << "coordinate " << i << " analytic " << g << " fd " << fd;
  }
}

TEST(ToyGrad, ZeroPerturbationZeroChange) {
  const auto params = random_params(tiny_config(), 1);
  const std::vector<TokenSeq> batch{{1, 2, 3, 4}};
  auto same = params;
  same.flat()(0) += 0.0;
  EXPECT_EQ(batch_loss(params, batch), batch_loss(same, batch));
}

// For a token u that is never a target, d loss / d unembed_u is
// mean_t p_u(t) z_t: a descent step lowers u's logit where u has mass.
TEST(ToyGrad, NeverTargetUnembedRowPushesLogitDown) {
  auto cfg = tiny_config();
  cfg.n_layers = 1;
  const auto params = random_params(cfg, 13);
  const TokenSeq seq{1, 2, 3, 4, 5, 6};
  const std::int32_t u = 40;
  const auto lg = loss_and_grad(params, {seq});
  const auto fc = detail::forward_cached(params, {seq});
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.d_model));
  for (Eigen::Index t = 0; t + 1 < static_cast<Eigen::Index>(seq.size()); ++t) {
    expected += std::exp(fc.logprobs(u, t)) * fc.z.col(t);
  }
  expected /= static_cast<double>(seq.size() - 1);
  const Eigen::VectorXd grad_row = lg.grad[params.layout().unembed].row(u).transpose();
  EXPECT_TRUE(grad_row.isApprox(expected, 1e-10));
  double weighted_change = 0;
  for (Eigen::Index t = 0; t + 1 < static_cast<Eigen::Index>(seq.size()); ++t) {
    weighted_change += std::exp(fc.logprobs(u, t)) * (-grad_row).dot(fc.z.col(t));
  }
  EXPECT_LT(weighted_change, 0.0);
}

TEST(SynthCorpus, RepeatProbabilityExtremes) {
  SynthCorpusConfig c;
  c.p_repeat = 0;
  SynthCorpus none(c, 2048);
  for (int i = 0; i < 200; ++i) EXPECT_FALSE(none.next().repeat.has_value());
  c.p_repeat = 1;
  SynthCorpus all(c, 2048);
  for (int i = 0; i < 200; ++i) {
    const auto s = all.next();
    ASSERT_TRUE(s.repeat.has_value());
    const auto& r = *s.repeat;
    EXPECT_GE(r.length, c.span_min);
    EXPECT_LE(r.length, c.span_max);
    EXPECT_GE(r.dest, r.source + r.length);
    EXPECT_LE(r.dest + r.length, c.seq_len);
    for (std::size_t k = 0; k < r.length; ++k) EXPECT_EQ(s.tokens[r.source + k], s.tokens[r.dest + k]);
  }
}

TEST(SynthCorpus, ZipfTopRanks) {
  SynthCorpusConfig c;
  c.p_repeat = 0;
  SynthCorpus corpus(c, 2048);
  std::vector<double> counts(2048, 0.0);
  std::size_t total = 0;
  while (total < 1000000) {
    for (auto t : corpus.next().tokens) {
      counts[static_cast<std::size_t>(t)] += 1;
      ++total;
    }
  }
  double norm = 0;
  for (int r = 1; r <= 2048; ++r) norm += std::pow(r, -1.1);
  for (int r = 1; r <= 50; ++r) {
    const double expected = std::pow(r, -1.1) / norm;
    const double observed = counts[static_cast<std::size_t>(r - 1)] / static_cast<double>(total);
    EXPECT_NEAR(observed / expected, 1.0, 0.2) << "rank " << r;
  }
}

TEST(SynthCorpus, FillerRangeAndDeterminism) {
  SynthCorpusConfig c;
  c.filler_begin = 10;
  c.filler_end = 300;
  c.seed = 4;
  SynthCorpus a(c, 2048), b(c, 2048);
  for (int i = 0; i < 50; ++i) {
    const auto s = a.next();
    EXPECT_EQ(s.tokens, b.next().tokens);
    for (auto t : s.tokens) {
      EXPECT_GE(t, 10);
      EXPECT_LT(t, 300);
    }
  }
}

TrainConfig quick_train(std::size_t steps) {
  TrainConfig t;
  t.steps = steps;
  t.batch_seqs = 2;
  t.lr = 3e-3;
  t.warmup_steps = 10;
  const std::set<std::size_t> marks{0, std::min<std::size_t>(1, steps), std::min<std::size_t>(4, steps),
                                    steps / 2, steps};
  t.checkpoint_steps.assign(marks.begin(), marks.end());
  t.eval_seqs = 4;
  return t;
}

SynthCorpusConfig quick_corpus() {
  SynthCorpusConfig c;
  c.seq_len = 16;
  c.span_min = 2;
  c.span_max = 5;
  return c;
}

TEST(ToyTrain, LossDropsAndCheckpointsAreConsistent) {
  const auto cfg = tiny_config(16);
  const auto res = train(cfg, quick_corpus(), quick_train(200));
  ASSERT_EQ(res.checkpoints.size(), 5u);
  EXPECT_EQ(res.checkpoints.front().params, init_params(cfg));
  EXPECT_LT(res.eval.back().loss_bits, res.eval.front().loss_bits);
  for (const auto& ck : res.checkpoints) {
    EXPECT_EQ(ck.tokens_seen, ck.step * ck.batch_tokens);
    EXPECT_EQ(ck.batch_tokens, 2u * 16u);
  }
  EXPECT_EQ(res.train_loss.size(), 200u);
}

TEST(ToyTrain, DeterministicAndResumable) {
  const auto cfg = tiny_config(16);
  const auto a = train(cfg, quick_corpus(), quick_train(60));
  const auto b = train(cfg, quick_corpus(), quick_train(60));
  EXPECT_EQ(a.train_loss, b.train_loss);
  EXPECT_EQ(a.checkpoints.back(), b.checkpoints.back());
  // Resume from the step-30 checkpoint after a disk round trip.
  const auto mid = deserialize_checkpoint(serialize_checkpoint(a.checkpoints[3]));
  ASSERT_EQ(mid.step, 30u);
  const auto c = resume(mid);
  ASSERT_FALSE(c.checkpoints.empty());
  EXPECT_EQ(c.checkpoints.back(), a.checkpoints.back());
}

TEST(ToyCheckpoint, RoundTripsBitExactly) {
  testing::TempDir dir;
  const auto res = train(tiny_config(16), quick_corpus(), quick_train(8));
  const auto& ck = res.checkpoints.back();
  save_checkpoint(ck, dir / checkpoint_filename(ck.step));
  const auto back = load_checkpoint(dir / checkpoint_filename(ck.step));
  EXPECT_EQ(back, ck);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ck));
  const auto listed = list_checkpoints(dir.path());
  ASSERT_EQ(listed.size(), 1u);
  EXPECT_EQ(listed[0].step, 8u);
  EXPECT_EQ(checkpoint_filename(16384), "step-00016384.ckpt");
  EXPECT_EQ(step_revision(16384), "step16384");
}

TEST(ToyCheckpoint, RejectsCorruption) {
  const auto res = train(tiny_config(), quick_corpus(), quick_train(2));
  const auto bytes = serialize_checkpoint(res.checkpoints.back());
  auto bad_version = bytes;
  bad_version[0] = 9;
  EXPECT_THROW(deserialize_checkpoint(bad_version), InputError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 8)), InputError);
  auto nan = bytes;
  const std::uint64_t bits = 0x7ff8000000000000ULL;
  for (int k = 0; k < 8; ++k) nan[nan.size() - 8 + k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  EXPECT_THROW(deserialize_checkpoint(nan), InputError);
}

TEST(ToyTokenizer, TilesTextAndMapsWords) {
  const auto vocab = ToyVocabulary::standard(2048);
  EXPECT_EQ(vocab.size(), 2048u);
  const std::string text = "Mary read a list of words: ";
  const auto toks = vocab.tokenize(text);
  std::size_t cursor = 0;
  for (const auto& t : toks) {
    EXPECT_EQ(t.start, cursor);
    cursor = t.end;
  }
  EXPECT_EQ(cursor, text.size());
  EXPECT_EQ(toks.size(), 7u);
  EXPECT_EQ(toks[0].id, vocab.id("Mary"));
  EXPECT_EQ(toks[6].id, vocab.id(":"));
  EXPECT_THROW(vocab.tokenize("Mary read a zebra"), InputError);
}

TEST(ToyTokenizer, NounPoolIsDistinctAndInVocabulary) {
  const auto vocab = ToyVocabulary::standard(2048);
  const auto pool = vocab.noun_pool();
  EXPECT_GE(pool.nouns.size(), 460u);
  std::set<std::string> seen(pool.nouns.begin(), pool.nouns.end());
  EXPECT_EQ(seen.size(), pool.nouns.size());
  for (const auto& w : pool.nouns) {
    EXPECT_GE(vocab.id(w), static_cast<std::int32_t>(vocab.template_size()));
  }
}

TEST(ToyProvider, ScoresVignetteLikeForward) {
  ToyCheckpoint ck(ToyConfig{});
  ck.params = init_params(ToyConfig{});
  ck.step = 4;
  const auto provider = ToyProvider::from_checkpoint(ck);
  EXPECT_EQ(provider->revision(), "step4");
  const auto pool = provider->vocabulary().noun_pool();
  const auto v = render_vignette({pool.nouns[0], pool.nouns[1], pool.nouns[2]}, Condition::kRepeat,
                                 pool, 0, "toy");
  const auto scored = provider->score(v.text);
  EXPECT_NO_THROW(validate_scored_text(scored));
  EXPECT_EQ(scored, provider->score(v.text));

  TokenSeq ids;
  for (const auto& t : scored.tokens) ids.push_back(static_cast<std::int32_t>(t.token_id));
  const auto lp = forward(ck.params, ids);
  for (std::size_t i = 1; i < ids.size(); ++i) {
    EXPECT_EQ(*scored.tokens[i].logprob, lp(ids[i], static_cast<Eigen::Index>(i - 1)));
  }
  EXPECT_EQ(align_noun_losses(v, scored).losses.size(), 3u);
  EXPECT_THROW(provider->score("Mary read a zebra"), InputError);
}

}  // namespace
}  // namespace reprobe::toylm

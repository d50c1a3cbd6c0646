#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "reprobe/common.hpp"
#include "reprobe/toylm/config.hpp"

namespace reprobe::toylm {

using TokenSeq = std::vector<std::int32_t>;

enum class SlotKind { kWeight, kGain, kBias };

// Position of one named tensor inside the flat parameter vector. Tensors are
// column-major; activations are laid out features x positions.
struct TensorSlot {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;
  SlotKind kind = SlotKind::kWeight;

  Eigen::Index size() const { return rows * cols; }
};

struct LayerSlots {
  TensorSlot ln1_g, ln1_b;
  TensorSlot w_qkv, b_qkv;  // (3 d_model) x d_model, rows ordered q | k | v
  TensorSlot w_o, b_o;
  TensorSlot ln2_g, ln2_b;
  TensorSlot w_ff1, b_ff1;
  TensorSlot w_ff2, b_ff2;
};

struct ParamLayout {
  TensorSlot tok_emb;  // d_model x vocab
  TensorSlot pos_emb;  // d_model x context
  std::vector<LayerSlots> layers;
  TensorSlot lnf_g, lnf_b;
  TensorSlot unembed;  // vocab x d_model
  std::vector<TensorSlot> ordered;  // declaration (and serialization) order
  Eigen::Index total = 0;

  explicit ParamLayout(const ToyConfig& cfg);
};

template <typename Scalar>
class ToyParams {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit ToyParams(const ToyConfig& cfg)
      : config_(cfg), layout_(cfg), data_(Vec::Zero(layout_.total)) {}

  Eigen::Map<Mat> operator[](const TensorSlot& s) {
    return Eigen::Map<Mat>(data_.data() + s.offset, s.rows, s.cols);
  }
  Eigen::Map<const Mat> operator[](const TensorSlot& s) const {
    return Eigen::Map<const Mat>(data_.data() + s.offset, s.rows, s.cols);
  }

  const ToyConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  Vec& flat() { return data_; }
  const Vec& flat() const { return data_; }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const ToyParams& a, const ToyParams& b) {
    return a.config_ == b.config_ && a.data_.size() == b.data_.size() && a.data_ == b.data_;
  }

 private:
  ToyConfig config_;
  ParamLayout layout_;
  Vec data_;
};

// Weights ~ N(0, init_std^2) from the config seed; gains 1, biases 0.
ToyParams<double> init_params(const ToyConfig& cfg);

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
struct LayerNormCache {
  Mat<Scalar> xhat;
  RowVec<Scalar> rstd;
};

template <typename Scalar, typename G, typename B>
Mat<Scalar> layer_norm(const Mat<Scalar>& x, const G& gain, const B& bias,
                       LayerNormCache<Scalar>& cache) {
  const RowVec<Scalar> mean = x.colwise().mean();
  Mat<Scalar> centered = x.rowwise() - mean;
  const RowVec<Scalar> var = centered.array().square().colwise().mean();
  cache.rstd = (var.array() + Scalar(kLayerNormEps)).rsqrt();
  cache.xhat = centered.array().rowwise() * cache.rstd.array();
  return (cache.xhat.array().colwise() * gain.col(0).array()).colwise() + bias.col(0).array();
}

// Accumulates gain/bias gradients and returns d(input).
template <typename Scalar, typename G, typename DG, typename DB>
Mat<Scalar> layer_norm_backward(const Mat<Scalar>& dy, const G& gain,
                                const LayerNormCache<Scalar>& cache, DG&& dgain, DB&& dbias) {
  dgain.col(0) += (dy.array() * cache.xhat.array()).rowwise().sum().matrix();
  dbias.col(0) += dy.rowwise().sum();
  const Mat<Scalar> dxhat = dy.array().colwise() * gain.col(0).array();
  const RowVec<Scalar> m1 = dxhat.colwise().mean();
  const RowVec<Scalar> m2 = (dxhat.array() * cache.xhat.array()).colwise().mean();
  Mat<Scalar> dx = (dxhat.rowwise() - m1).array() - cache.xhat.array().rowwise() * m2.array();
  return dx.array().rowwise() * cache.rstd.array();
}

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x * Scalar(std::numbers::sqrt2 / 2)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x * Scalar(std::numbers::sqrt2 / 2)));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) * Scalar(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + x * pdf;
}

template <typename Scalar>
struct LayerCache {
  Mat<Scalar> x_in;
  LayerNormCache<Scalar> ln1;
  Mat<Scalar> a1;
  Mat<Scalar> qkv;
  std::vector<Mat<Scalar>> probs;  // per (sequence, head): keys x queries
  Mat<Scalar> attn;                // concatenated head outputs, before w_o
  Mat<Scalar> x_mid;
  LayerNormCache<Scalar> ln2;
  Mat<Scalar> a2;
  Mat<Scalar> ff_pre;
  Mat<Scalar> ff_act;
};

template <typename Scalar>
struct ForwardCache {
  std::size_t n_seqs = 0;
  std::size_t seq_len = 0;
  std::vector<LayerCache<Scalar>> layers;
  LayerNormCache<Scalar> lnf;
  Mat<Scalar> z;
  Mat<Scalar> logprobs;  // vocab x (n_seqs * seq_len)
};

inline void check_batch(const ToyConfig& cfg, const std::vector<TokenSeq>& batch) {
  if (batch.empty()) throw InputError("toy model: empty batch");
  const std::size_t len = batch.front().size();
  if (len == 0) throw InputError("toy model: empty sequence");
  if (len > cfg.context_len) {
    throw InputError("toy model: sequence of " + std::to_string(len) +
                     " tokens exceeds context length " + std::to_string(cfg.context_len));
  }
  for (const auto& seq : batch) {
    if (seq.size() != len) throw InputError("toy model: batch sequences differ in length");
    for (auto id : seq) {
      if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
        throw InputError("toy model: token id " + std::to_string(id) + " outside vocabulary");
      }
    }
  }
}

// Causal multi-head attention over `qkv` for every sequence in the batch.
template <typename Scalar>
void attention_forward(const Mat<Scalar>& qkv, std::size_t n_seqs, std::size_t T, std::size_t D,
                       std::size_t n_heads, LayerCache<Scalar>& c) {
  const auto dh = static_cast<Eigen::Index>(D / n_heads);
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const auto Ti = static_cast<Eigen::Index>(T);
  const auto Di = static_cast<Eigen::Index>(D);
  c.attn.resize(Di, static_cast<Eigen::Index>(n_seqs * T));
  c.probs.assign(n_seqs * n_heads, Mat<Scalar>());
  for (std::size_t s = 0; s < n_seqs; ++s) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(s) * Ti;
    for (std::size_t h = 0; h < n_heads; ++h) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(h) * dh;
      const auto q = qkv.block(r0, c0, dh, Ti);
      const auto k = qkv.block(Di + r0, c0, dh, Ti);
      const auto v = qkv.block(2 * Di + r0, c0, dh, Ti);
      Mat<Scalar>& p = c.probs[s * n_heads + h];
      p.noalias() = (k.transpose() * q) * scale;
      for (Eigen::Index qi = 0; qi < Ti; ++qi) {
        auto col = p.col(qi);
        const Scalar mx = col.head(qi + 1).maxCoeff();
        col.head(qi + 1) = (col.head(qi + 1).array() - mx).exp();
        col.head(qi + 1) /= col.head(qi + 1).sum();
        col.tail(Ti - qi - 1).setZero();
      }
      c.attn.block(r0, c0, dh, Ti).noalias() = v * p;
    }
  }
}

template <typename Scalar>
ForwardCache<Scalar> forward_cached(const ToyParams<Scalar>& params, const std::vector<TokenSeq>& batch) {
  const auto& cfg = params.config();
  const auto& L = params.layout();
  check_batch(cfg, batch);
  ForwardCache<Scalar> fc;
  fc.n_seqs = batch.size();
  fc.seq_len = batch.front().size();
  const std::size_t T = fc.seq_len;
  const auto N = static_cast<Eigen::Index>(fc.n_seqs * T);
  const auto D = static_cast<Eigen::Index>(cfg.d_model);

  Mat<Scalar> x(D, N);
  {
    const auto emb = params[L.tok_emb];
    const auto pos = params[L.pos_emb];
    for (std::size_t s = 0; s < fc.n_seqs; ++s) {
      for (std::size_t t = 0; t < T; ++t) {
        x.col(static_cast<Eigen::Index>(s * T + t)) =
            emb.col(batch[s][t]) + pos.col(static_cast<Eigen::Index>(t));
      }
    }
  }

  fc.layers.resize(cfg.n_layers);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto& S = L.layers[l];
    auto& c = fc.layers[l];
    c.x_in = x;
    c.a1 = layer_norm(x, params[S.ln1_g], params[S.ln1_b], c.ln1);
    c.qkv.noalias() = params[S.w_qkv] * c.a1;
    c.qkv.colwise() += params[S.b_qkv].col(0);
    attention_forward(c.qkv, fc.n_seqs, T, cfg.d_model, cfg.n_heads, c);
    x.noalias() += params[S.w_o] * c.attn;
    x.colwise() += params[S.b_o].col(0);
    c.x_mid = x;
    c.a2 = layer_norm(x, params[S.ln2_g], params[S.ln2_b], c.ln2);
    c.ff_pre.noalias() = params[S.w_ff1] * c.a2;
    c.ff_pre.colwise() += params[S.b_ff1].col(0);
    c.ff_act = c.ff_pre.unaryExpr([](Scalar v) { return gelu(v); });
    x.noalias() += params[S.w_ff2] * c.ff_act;
    x.colwise() += params[S.b_ff2].col(0);
  }
  fc.z = layer_norm(x, params[L.lnf_g], params[L.lnf_b], fc.lnf);
  fc.logprobs.noalias() = params[L.unembed] * fc.z;
  for (Eigen::Index n = 0; n < N; ++n) {
    auto col = fc.logprobs.col(n);
    const Scalar mx = col.maxCoeff();
    const Scalar lse = mx + std::log((col.array() - mx).exp().sum());
    col.array() -= lse;
  }
  return fc;
}

}  // namespace detail

// Natural-log next-token distributions: column t is P(. | tokens[0..t]).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> forward(const ToyParams<Scalar>& params,
                                                              const TokenSeq& tokens) {
  return detail::forward_cached(params, std::vector<TokenSeq>{tokens}).logprobs;
}

template <typename Scalar>
struct BitsResult {
  Scalar mean_bits = 0;
  std::vector<Scalar> per_token;  // per_token[i] scores tokens[i + 1]
};

template <typename Scalar>
BitsResult<Scalar> loss_bits(const ToyParams<Scalar>& params, const TokenSeq& tokens) {
  if (tokens.size() < 2) throw InputError("loss_bits: need at least 2 tokens");
  const auto lp = forward(params, tokens);
  BitsResult<Scalar> out;
  Scalar sum = 0;
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    const Scalar b = -lp(tokens[t + 1], static_cast<Eigen::Index>(t)) / Scalar(std::numbers::ln2);
    out.per_token.push_back(b);
    sum += b;
  }
  out.mean_bits = sum / static_cast<Scalar>(out.per_token.size());
  return out;
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss;  // mean natural-log loss over all predicted positions
  ToyParams<Scalar> grad;
};

// Mean next-token loss (nats) over the batch and its full gradient.
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const ToyParams<Scalar>& params, const std::vector<TokenSeq>& batch) {
  using namespace detail;
  const auto& cfg = params.config();
  const auto& L = params.layout();
  auto fc = forward_cached(params, batch);
  const std::size_t T = fc.seq_len;
  if (T < 2) throw InputError("loss_and_grad: sequences need at least 2 tokens");
  const auto N = static_cast<Eigen::Index>(fc.n_seqs * T);
  const auto D = static_cast<Eigen::Index>(cfg.d_model);
  const Scalar n_pred = static_cast<Scalar>(fc.n_seqs * (T - 1));

  LossAndGrad<Scalar> out{Scalar(0), ToyParams<Scalar>(cfg)};
  auto& g = out.grad;

  // d loss / d logits = (softmax - onehot) / n_pred on predicted columns.
  Mat<Scalar> dlogits = fc.logprobs.array().exp();
  Scalar loss = 0;
  for (std::size_t s = 0; s < fc.n_seqs; ++s) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto n = static_cast<Eigen::Index>(s * T + t);
      if (t + 1 == T) {
        dlogits.col(n).setZero();
        continue;
      }
      const auto target = batch[s][t + 1];
      loss -= fc.logprobs(target, n);
      dlogits(target, n) -= Scalar(1);
    }
  }
  out.loss = loss / n_pred;
  dlogits /= n_pred;

  g[L.unembed].noalias() = dlogits * fc.z.transpose();
  Mat<Scalar> dz = params[L.unembed].transpose() * dlogits;
  Mat<Scalar> dx = layer_norm_backward(dz, params[L.lnf_g], fc.lnf, g[L.lnf_g], g[L.lnf_b]);

  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const auto Ti = static_cast<Eigen::Index>(T);

  for (std::size_t li = cfg.n_layers; li-- > 0;) {
    const auto& S = L.layers[li];
    auto& c = fc.layers[li];

    // Feed-forward residual branch.
    g[S.w_ff2].noalias() += dx * c.ff_act.transpose();
    g[S.b_ff2].col(0) += dx.rowwise().sum();
    Mat<Scalar> dpre = params[S.w_ff2].transpose() * dx;
    dpre.array() *= c.ff_pre.unaryExpr([](Scalar v) { return gelu_grad(v); }).array();
    g[S.w_ff1].noalias() += dpre * c.a2.transpose();
    g[S.b_ff1].col(0) += dpre.rowwise().sum();
    const Mat<Scalar> da2 = params[S.w_ff1].transpose() * dpre;
    dx += layer_norm_backward(da2, params[S.ln2_g], c.ln2, g[S.ln2_g], g[S.ln2_b]);

    // Attention residual branch.
    g[S.w_o].noalias() += dx * c.attn.transpose();
    g[S.b_o].col(0) += dx.rowwise().sum();
    const Mat<Scalar> dattn = params[S.w_o].transpose() * dx;
    Mat<Scalar> dqkv(3 * D, N);
    for (std::size_t s = 0; s < fc.n_seqs; ++s) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(s) * Ti;
      for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(h) * dh;
        const auto q = c.qkv.block(r0, c0, dh, Ti);
        const auto k = c.qkv.block(D + r0, c0, dh, Ti);
        const auto v = c.qkv.block(2 * D + r0, c0, dh, Ti);
        const auto& p = c.probs[s * cfg.n_heads + h];
        const auto dout = dattn.block(r0, c0, dh, Ti);
        dqkv.block(2 * D + r0, c0, dh, Ti).noalias() = dout * p.transpose();
        const Mat<Scalar> dp = v.transpose() * dout;
        const RowVec<Scalar> inner = (p.array() * dp.array()).colwise().sum();
        const Mat<Scalar> dscore = (p.array() * (dp.rowwise() - inner).array()) * scale;
        dqkv.block(r0, c0, dh, Ti).noalias() = k * dscore;
        dqkv.block(D + r0, c0, dh, Ti).noalias() = q * dscore.transpose();
      }
    }
    g[S.w_qkv].noalias() += dqkv * c.a1.transpose();
    g[S.b_qkv].col(0) += dqkv.rowwise().sum();
    const Mat<Scalar> da1 = params[S.w_qkv].transpose() * dqkv;
    dx += layer_norm_backward(da1, params[S.ln1_g], c.ln1, g[S.ln1_g], g[S.ln1_b]);
  }

  auto demb = g[L.tok_emb];
  auto dpos = g[L.pos_emb];
  for (std::size_t s = 0; s < fc.n_seqs; ++s) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto n = static_cast<Eigen::Index>(s * T + t);
      demb.col(batch[s][t]) += dx.col(n);
      dpos.col(static_cast<Eigen::Index>(t)) += dx.col(n);
    }
  }
  return out;
}

// Mean natural-log loss of a batch without the backward pass.
template <typename Scalar>
Scalar batch_loss(const ToyParams<Scalar>& params, const std::vector<TokenSeq>& batch) {
  const auto fc = detail::forward_cached(params, batch);
  const std::size_t T = fc.seq_len;
  Scalar loss = 0;
  for (std::size_t s = 0; s < fc.n_seqs; ++s) {
    for (std::size_t t = 0; t + 1 < T; ++t) {
      loss -= fc.logprobs(batch[s][t + 1], static_cast<Eigen::Index>(s * T + t));
    }
  }
  return loss / static_cast<Scalar>(fc.n_seqs * (T - 1));
}

}  // namespace reprobe::toylm

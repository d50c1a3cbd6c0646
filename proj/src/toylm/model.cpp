#include "reprobe/toylm/model.hpp"

namespace reprobe::toylm {

ParamLayout::ParamLayout(const ToyConfig& cfg) {
  cfg.validate();
  const auto V = static_cast<Eigen::Index>(cfg.vocab_size);
  const auto D = static_cast<Eigen::Index>(cfg.d_model);
  const auto F = static_cast<Eigen::Index>(cfg.d_ff);
  const auto C = static_cast<Eigen::Index>(cfg.context_len);
  auto slot = [&](std::string name, Eigen::Index rows, Eigen::Index cols, SlotKind kind) {
    TensorSlot s{std::move(name), rows, cols, total, kind};
    total += rows * cols;
    ordered.push_back(s);
    return s;
  };
  tok_emb = slot("tok_emb", D, V, SlotKind::kWeight);
  pos_emb = slot("pos_emb", D, C, SlotKind::kWeight);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    LayerSlots s;
    s.ln1_g = slot(p + "ln1.gain", D, 1, SlotKind::kGain);
    s.ln1_b = slot(p + "ln1.bias", D, 1, SlotKind::kBias);
    s.w_qkv = slot(p + "attn.w_qkv", 3 * D, D, SlotKind::kWeight);
    s.b_qkv = slot(p + "attn.b_qkv", 3 * D, 1, SlotKind::kBias);
    s.w_o = slot(p + "attn.w_o", D, D, SlotKind::kWeight);
    s.b_o = slot(p + "attn.b_o", D, 1, SlotKind::kBias);
    s.ln2_g = slot(p + "ln2.gain", D, 1, SlotKind::kGain);
    s.ln2_b = slot(p + "ln2.bias", D, 1, SlotKind::kBias);
    s.w_ff1 = slot(p + "ff.w1", F, D, SlotKind::kWeight);
    s.b_ff1 = slot(p + "ff.b1", F, 1, SlotKind::kBias);
    s.w_ff2 = slot(p + "ff.w2", D, F, SlotKind::kWeight);
    s.b_ff2 = slot(p + "ff.b2", D, 1, SlotKind::kBias);
    layers.push_back(std::move(s));
  }
  lnf_g = slot("lnf.gain", D, 1, SlotKind::kGain);
  lnf_b = slot("lnf.bias", D, 1, SlotKind::kBias);
  unembed = slot("unembed", V, D, SlotKind::kWeight);
}

ToyParams<double> init_params(const ToyConfig& cfg) {
  ToyParams<double> params(cfg);
  SplitMix64 rng(cfg.seed);
  for (const auto& s : params.layout().ordered) {
    auto m = params[s];
    switch (s.kind) {
      case SlotKind::kGain:
        m.setOnes();
        break;
      case SlotKind::kBias:
        m.setZero();
        break;
      case SlotKind::kWeight:
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = cfg.init_std * rng.normal();
        break;
    }
  }
  return params;
}

}  // namespace reprobe::toylm

#include "reprobe/toylm/toy_provider.hpp"

namespace reprobe::toylm {

ToyProvider::ToyProvider(std::shared_ptr<const ToyParams<double>> params, ToyVocabulary vocab,
                         std::string model_id, std::string revision)
    : params_(std::move(params)),
      vocab_(std::move(vocab)),
      model_id_(std::move(model_id)),
      revision_(std::move(revision)) {
  if (!params_) throw InputError("toy provider: null parameters");
  if (vocab_.size() != params_->config().vocab_size) {
    throw InputError("toy provider: vocabulary size does not match the model");
  }
}

std::unique_ptr<ToyProvider> ToyProvider::from_checkpoint(const ToyCheckpoint& ckpt,
                                                          std::string model_id) {
  return std::make_unique<ToyProvider>(std::make_shared<const ToyParams<double>>(ckpt.params),
                                       ToyVocabulary::standard(ckpt.params.config().vocab_size),
                                       std::move(model_id), step_revision(ckpt.step));
}

ScoredText ToyProvider::score(const std::string& text) const {
  const auto toks = vocab_.tokenize(text);
  if (toks.size() > params_->config().context_len) {
    throw InputError("toy provider: text is " + std::to_string(toks.size()) +
                     " tokens, context is " + std::to_string(params_->config().context_len));
  }
  TokenSeq ids;
  ids.reserve(toks.size());
  for (const auto& t : toks) ids.push_back(t.id);
  const auto lp = forward(*params_, ids);

  ScoredText out;
  out.text = text;
  out.model_id = model_id_;
  out.revision = revision_;
  out.tokens.reserve(toks.size());
  for (std::size_t i = 0; i < toks.size(); ++i) {
    TokenScore ts;
    ts.token_id = toks[i].id;
    ts.token_text = text.substr(toks[i].start, toks[i].end - toks[i].start);
    ts.start = toks[i].start;
    ts.end = toks[i].end;
    if (i > 0) ts.logprob = lp(toks[i].id, static_cast<Eigen::Index>(i - 1));
    out.tokens.push_back(std::move(ts));
  }
  return out;
}

}  // namespace reprobe::toylm

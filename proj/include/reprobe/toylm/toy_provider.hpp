#pragma once

#include <memory>
#include <string>

#include "reprobe/provider.hpp"
#include "reprobe/toylm/checkpoint.hpp"
#include "reprobe/toylm/model.hpp"
#include "reprobe/toylm/tokenizer.hpp"

namespace reprobe::toylm {

// In-process scorer over frozen toy parameters. Stateless after
// construction, so concurrent score() calls are safe.
class ToyProvider : public Provider {
 public:
  ToyProvider(std::shared_ptr<const ToyParams<double>> params, ToyVocabulary vocab,
              std::string model_id, std::string revision);

  // Vocabulary is ToyVocabulary::standard(cfg.vocab_size); revision is
  // step_revision(ckpt.step).
  static std::unique_ptr<ToyProvider> from_checkpoint(const ToyCheckpoint& ckpt,
                                                      std::string model_id = "toy");

  ScoredText score(const std::string& text) const override;
  std::string model_id() const override { return model_id_; }
  std::string revision() const override { return revision_; }

  const ToyVocabulary& vocabulary() const { return vocab_; }

 private:
  std::shared_ptr<const ToyParams<double>> params_;
  ToyVocabulary vocab_;
  std::string model_id_;
  std::string revision_;
};

}  // namespace reprobe::toylm

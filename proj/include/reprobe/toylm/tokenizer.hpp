#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "reprobe/wordpool.hpp"

namespace reprobe::toylm {

struct ToyToken {
  std::int32_t id = 0;
  std::size_t start = 0;
  std::size_t end = 0;
};

// Word-level vocabulary: the vignette template's words and punctuation take
// the lowest ids (the most frequent Zipf ranks in the synthetic corpus) and
// generated pseudo-nouns fill the rest.
class ToyVocabulary {
 public:
  explicit ToyVocabulary(std::vector<std::string> words);

  // Template words followed by pseudo-nouns, `vocab_size` entries in total.
  static ToyVocabulary standard(std::size_t vocab_size);

  std::size_t size() const { return words_.size(); }
  const std::string& word(std::int32_t id) const { return words_.at(static_cast<std::size_t>(id)); }
  // -1 when absent.
  std::int32_t id(std::string_view word) const;
  std::size_t template_size() const { return template_size_; }

  // The pseudo-nouns, shuffled with `seed` so the pool prefix spans many
  // Zipf ranks.
  NounPool noun_pool(std::uint64_t seed = 0) const;

  // Splits into words (letters, digits, ' and -) and single punctuation
  // characters; whitespace is attached to the following token, trailing
  // whitespace to the last one. Spans tile the text. Throws InputError on
  // out-of-vocabulary words.
  std::vector<ToyToken> tokenize(std::string_view text) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::size_t template_size_ = 0;
};

// Noun pool of ToyVocabulary::standard(vocab_size).
NounPool toy_noun_pool(std::size_t vocab_size = 2048);

// Template vocabulary in id order.
const std::vector<std::string>& template_words();

}  // namespace reprobe::toylm

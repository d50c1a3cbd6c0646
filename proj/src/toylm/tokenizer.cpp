#include "reprobe/toylm/tokenizer.hpp"

#include <cctype>

#include "reprobe/common.hpp"

namespace reprobe::toylm {

const std::vector<std::string>& template_words() {
  static const std::vector<std::string> words = {
      ",",     ".",    "the",     "a",    "of",    "and",  "she",   "read",
      "list",  ":",    "words",   "Mary", "After", "meeting", "took", "break",
      "had",   "cup",  "coffee",  "When", "got",   "back", "again"};
  return words;
}

ToyVocabulary::ToyVocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<std::int32_t>(i)).second) {
      throw InputError("toy vocabulary: duplicate word '" + words_[i] + "'");
    }
  }
  const auto& tmpl = template_words();
  while (template_size_ < tmpl.size() && template_size_ < words_.size() &&
         words_[template_size_] == tmpl[template_size_]) {
    ++template_size_;
  }
}

ToyVocabulary ToyVocabulary::standard(std::size_t vocab_size) {
  const auto& tmpl = template_words();
  if (vocab_size < tmpl.size() + 1) throw InputError("toy vocabulary: vocab_size too small");
  static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  std::vector<std::string> syllables;
  for (char c : kConsonants) {
    for (char v : kVowels) syllables.push_back(std::string{c, v});
  }
  std::vector<std::string> words(tmpl.begin(), tmpl.end());
  const std::size_t n_syl = syllables.size();
  for (std::size_t i = 0; words.size() < vocab_size; ++i) {
    // Two syllables, then three once those run out.
    std::string w;
    if (i < n_syl * n_syl) {
      w = syllables[i / n_syl] + syllables[i % n_syl];
    } else {
      const std::size_t j = i - n_syl * n_syl;
      w = syllables[j / (n_syl * n_syl) % n_syl] + syllables[(j / n_syl) % n_syl] +
          syllables[j % n_syl];
    }
    words.push_back(std::move(w));
  }
  return ToyVocabulary(std::move(words));
}

std::int32_t ToyVocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? -1 : it->second;
}

NounPool ToyVocabulary::noun_pool(std::uint64_t seed) const {
  std::vector<std::string> nouns(words_.begin() + static_cast<std::ptrdiff_t>(template_size_),
                                 words_.end());
  SplitMix64 rng(seed);
  for (std::size_t i = nouns.size(); i > 1; --i) {
    std::swap(nouns[i - 1], nouns[rng.uniform_index(i)]);
  }
  std::string text;
  for (const auto& n : nouns) text += n + "\n";
  return parse_noun_pool(text, "toy-nouns");
}

NounPool toy_noun_pool(std::size_t vocab_size) {
  return ToyVocabulary::standard(vocab_size).noun_pool();
}

std::vector<ToyToken> ToyVocabulary::tokenize(std::string_view text) const {
  auto is_word_char = [](unsigned char c) {
    return std::isalnum(c) != 0 || c == '\'' || c == '-' || c >= 0x80;
  };
  std::vector<ToyToken> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) {
      if (out.empty()) throw InputError("toy tokenizer: text has no tokens");
      out.back().end = i;
      break;
    }
    const std::size_t core = i;
    if (is_word_char(static_cast<unsigned char>(text[i]))) {
      while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;
    }
    const auto word = text.substr(core, i - core);
    const auto tok_id = id(word);
    if (tok_id < 0) {
      throw InputError("toy tokenizer: out-of-vocabulary word '" + std::string(word) + "'");
    }
    out.push_back({tok_id, start, i});
  }
  return out;
}

}  // namespace reprobe::toylm

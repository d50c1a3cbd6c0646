#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace reprobe {

// One duplicate line dropped while loading a pool.
struct DedupeEvent {
  std::string word;
  std::size_t line = 0;  // 1-based line in the source file
};

// Ordered list of lowercase single-word nouns. Duplicates are removed at load
// time, keeping the first occurrence; the drops are kept in `duplicates`.
struct NounPool {
  std::string name;
  std::vector<std::string> nouns;
  std::vector<DedupeEvent> duplicates;
  std::string source_hash;  // FNV-1a of the file bytes

  bool contains(const std::string& word) const;
  friend bool operator==(const NounPool& a, const NounPool& b) { return a.nouns == b.nouns; }
};

NounPool load_noun_pool(const std::filesystem::path& path);

// Parses pool text directly; `name` labels the result.
NounPool parse_noun_pool(const std::string& text, std::string name);

// One word per line, in pool order.
void save_noun_pool(const NounPool& pool, const std::filesystem::path& path);

// JSON lines, one {"event":"dedupe",...} record per dropped duplicate, plus a
// leading {"event":"source",...} record carrying the file hash.
void write_pool_provenance(const NounPool& pool, std::ostream& out);

// word -> mean concreteness rating on the 1..5 scale.
struct ConcretenessNorms {
  std::map<std::string, double> entries;
  std::string source_hash;
};

inline constexpr const char* kDefaultRatingColumn = "Conc.M";

// Delimited table with a header row; tab vs comma is detected from the header.
ConcretenessNorms load_concreteness_norms(const std::filesystem::path& path,
                                          const std::string& rating_column = kDefaultRatingColumn);
ConcretenessNorms parse_concreteness_norms(const std::string& text,
                                           const std::string& rating_column = kDefaultRatingColumn);

// Both lists are in extremity-rank order: concrete[0] is the most concrete
// word, abstract[0] the most abstract.
struct ConcretenessExtremes {
  std::vector<std::string> concrete;
  std::vector<std::string> abstract;
  std::vector<double> concrete_ratings;
  std::vector<double> abstract_ratings;
};

ConcretenessExtremes select_extremes(const ConcretenessNorms& norms, std::size_t n = 500);

}  // namespace reprobe

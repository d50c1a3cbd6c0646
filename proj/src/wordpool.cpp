#include "reprobe/wordpool.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "reprobe/common.hpp"

namespace reprobe {

bool NounPool::contains(const std::string& word) const {
  return std::find(nouns.begin(), nouns.end(), word) != nouns.end();
}

NounPool parse_noun_pool(const std::string& text, std::string name) {
  NounPool pool;
  pool.name = std::move(name);
  pool.source_hash = fnv1a_hex(text);
  std::unordered_set<std::string> seen;
  const auto lines = split(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto word = trim(lines[i]);
    if (word.empty()) continue;
    if (std::any_of(word.begin(), word.end(),
                    [](unsigned char c) { return std::isspace(c) != 0; })) {
      throw InputError("line " + std::to_string(i + 1) + ": entry contains whitespace: '" +
                       std::string(word) + "'");
    }
    auto lower = to_lower(word);
    if (!seen.insert(lower).second) {
      pool.duplicates.push_back({std::move(lower), i + 1});
      continue;
    }
    pool.nouns.push_back(std::move(lower));
  }
  if (pool.nouns.empty()) throw InputError("noun pool '" + pool.name + "' is empty");
  return pool;
}

NounPool load_noun_pool(const std::filesystem::path& path) {
  return parse_noun_pool(read_file(path), path.stem().string());
}

void save_noun_pool(const NounPool& pool, const std::filesystem::path& path) {
  std::string out;
  for (const auto& w : pool.nouns) {
    out += w;
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_pool_provenance(const NounPool& pool, std::ostream& out) {
  nlohmann::json src = {{"event", "source"},
                        {"pool", pool.name},
                        {"hash", pool.source_hash},
                        {"size", pool.nouns.size()}};
  out << src.dump() << '\n';
  for (const auto& d : pool.duplicates) {
    nlohmann::json ev = {{"event", "dedupe"}, {"word", d.word}, {"line", d.line}};
    out << ev.dump() << '\n';
  }
}

ConcretenessNorms parse_concreteness_norms(const std::string& text,
                                           const std::string& rating_column) {
  auto lines = split(text, '\n');
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw InputError("norms table is empty");

  std::string header(lines[first]);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  const auto columns = split(header, delim);
  auto find_column = [&](const std::string& name) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (trim(columns[c]) == name) return c;
    }
    throw InputError("norms table is missing required column '" + name + "'");
  };
  const std::size_t word_col = find_column("Word");
  const std::size_t rating_col = find_column(rating_column);

  ConcretenessNorms norms;
  norms.source_hash = fnv1a_hex(text);
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::size_t row = i - first;  // 1-based data row index
    const auto fields = split(lines[i], delim);
    if (fields.size() <= std::max(word_col, rating_col)) {
      throw InputError("norms row " + std::to_string(row) + ": too few fields");
    }
    const std::string word = to_lower(trim(fields[word_col]));
    double rating = 0.0;
    if (!parse_double(fields[rating_col], rating)) {
      throw InputError("norms row " + std::to_string(row) + ": non-numeric rating '" +
                       std::string(trim(fields[rating_col])) + "'");
    }
    if (rating < 1.0 || rating > 5.0) {
      throw InputError("norms row " + std::to_string(row) + ": rating " + format_double(rating) +
                       " outside [1, 5]");
    }
    if (!norms.entries.emplace(word, rating).second) {
      throw InputError("norms row " + std::to_string(row) + ": duplicate word '" + word + "'");
    }
  }
  return norms;
}

ConcretenessNorms load_concreteness_norms(const std::filesystem::path& path,
                                          const std::string& rating_column) {
  return parse_concreteness_norms(read_file(path), rating_column);
}

ConcretenessExtremes select_extremes(const ConcretenessNorms& norms, std::size_t n) {
  if (n == 0) throw InputError("select_extremes: n must be positive");
  if (norms.entries.size() < 2 * n) {
    throw InputError("select_extremes: need at least " + std::to_string(2 * n) +
                     " rated words, have " + std::to_string(norms.entries.size()));
  }
  using Entry = std::pair<std::string, double>;
  std::vector<Entry> by_desc(norms.entries.begin(), norms.entries.end());
  std::vector<Entry> by_asc = by_desc;
  // std::map iteration is already lexicographic, so stable sorts keep the
  // lexicographically smaller word first among equal ratings.
  std::stable_sort(by_desc.begin(), by_desc.end(),
                   [](const Entry& a, const Entry& b) { return a.second > b.second; });
  std::stable_sort(by_asc.begin(), by_asc.end(),
                   [](const Entry& a, const Entry& b) { return a.second < b.second; });

  ConcretenessExtremes ex;
  for (std::size_t i = 0; i < n; ++i) {
    ex.concrete.push_back(by_desc[i].first);
    ex.concrete_ratings.push_back(by_desc[i].second);
    ex.abstract.push_back(by_asc[i].first);
    ex.abstract_ratings.push_back(by_asc[i].second);
  }
  if (ex.concrete_ratings.back() <= ex.abstract_ratings.back()) {
    throw InputError(
        "select_extremes: concrete and abstract extremes meet at rating " +
        format_double(ex.concrete_ratings.back()) + "; the table cannot be split into two " +
        std::to_string(n) + "-word extremes");
  }
  return ex;
}

}  // namespace reprobe

#include "reprobe/stimulus.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <unordered_set>

#include "reprobe/common.hpp"

namespace reprobe {
namespace {

constexpr std::string_view kOpening = "Mary read a list of words: ";
constexpr std::string_view kMiddle =
    ". After the meeting, she took a break and had a cup of coffee. When she got back, she "
    "read the list again: ";
constexpr std::string_view kClosing = ".";

void append_list(std::string& text, const std::vector<std::string>& words,
                 std::vector<NounSpan>& spans) {
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) text += ", ";
    spans.push_back({words[i], text.size(), text.size() + words[i].size()});
    text += words[i];
  }
}

std::string make_id(std::string_view prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%04zu", index);
  return std::string(prefix) + buf;
}

// Expands `lists` into all cyclic rotations, truncated to `cap`.
std::vector<std::vector<std::string>> rotations(const std::vector<std::vector<std::string>>& lists,
                                                std::size_t cap) {
  std::vector<std::vector<std::string>> out;
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      std::vector<std::string> rot;
      for (std::size_t k = 0; k < std::min(cap, list.size()); ++k) {
        rot.push_back(list[(r + k) % list.size()]);
      }
      out.push_back(std::move(rot));
    }
  }
  return out;
}

StimulusSet render_all(const std::vector<std::vector<std::string>>& noun_lists,
                       std::string_view id_prefix, Condition condition, const NounPool& pool,
                       std::uint64_t seed) {
  StimulusSet set;
  set.vignettes.reserve(noun_lists.size());
  for (std::size_t i = 0; i < noun_lists.size(); ++i) {
    set.vignettes.push_back(render_vignette(noun_lists[i], condition, pool, derive_seed(seed, i),
                                            make_id(id_prefix, i)));
  }
  return set;
}

}  // namespace

std::string_view to_string(Condition c) {
  return c == Condition::kRepeat ? "repeat" : "control";
}

Condition parse_condition(std::string_view s) {
  if (s == "repeat") return Condition::kRepeat;
  if (s == "control") return Condition::kControl;
  throw InputError("unknown condition '" + std::string(s) + "' (expected repeat|control)");
}

Vignette render_vignette(const std::vector<std::string>& nouns, Condition condition,
                         const NounPool& pool, std::uint64_t seed, std::string id) {
  if (nouns.empty() || nouns.size() > kMaxListLen) {
    throw InputError("vignette list length must be in [1, 10], got " +
                     std::to_string(nouns.size()));
  }
  std::unordered_set<std::string> in_list;
  for (const auto& n : nouns) {
    if (!pool.contains(n)) throw InputError("noun '" + n + "' is not in pool '" + pool.name + "'");
    in_list.insert(n);
  }

  std::vector<std::string> second = nouns;
  if (condition == Condition::kControl) {
    std::vector<std::string> candidates;
    for (const auto& w : pool.nouns) {
      if (!in_list.contains(w)) candidates.push_back(w);
    }
    if (candidates.size() < nouns.size()) {
      throw InputError("pool '" + pool.name + "' too small for a control draw of " +
                       std::to_string(nouns.size()) + " nouns");
    }
    // Partial Fisher-Yates.
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < nouns.size(); ++i) {
      const auto j = i + rng.uniform_index(candidates.size() - i);
      std::swap(candidates[i], candidates[j]);
      second[i] = candidates[i];
    }
  }

  Vignette v;
  v.id = std::move(id);
  v.condition = condition;
  v.text = kOpening;
  append_list(v.text, nouns, v.first_list);
  v.text += kMiddle;
  append_list(v.text, second, v.second_list);
  v.text += kClosing;
  return v;
}

StimulusSet generate_arbitrary_set(const NounPool& pool, const ArbitrarySetOptions& opts) {
  if (opts.base_len == 0 || opts.n_lists == 0 || opts.cap == 0) {
    throw InputError("arbitrary set: n_lists, base_len and cap must be positive");
  }
  const std::size_t needed = opts.n_lists * opts.base_len;
  if (pool.nouns.size() < needed) {
    throw InputError("pool '" + pool.name + "' has " + std::to_string(pool.nouns.size()) +
                     " nouns; arbitrary set needs " + std::to_string(needed));
  }
  std::vector<std::vector<std::string>> lists(opts.n_lists);
  for (std::size_t i = 0; i < needed; ++i) lists[i / opts.base_len].push_back(pool.nouns[i]);

  auto set = render_all(rotations(lists, opts.cap), "arb", opts.condition, pool, opts.seed);
  set.provenance = {{"generator", "arbitrary"},
                    {"pool", pool.name},
                    {"pool_hash", pool.source_hash},
                    {"seed", opts.seed},
                    {"n_lists", opts.n_lists},
                    {"base_len", opts.base_len},
                    {"cap", opts.cap},
                    {"condition", to_string(opts.condition)},
                    {"template", kTemplateId}};
  return set;
}

ConcretenessSets generate_concreteness_sets(const ConcretenessExtremes& extremes,
                                            const ConcretenessSetOptions& opts) {
  if (opts.cap == 0) throw InputError("concreteness sets: cap must be positive");
  auto build = [&](const std::vector<std::string>& words, std::string_view label,
                   std::string_view prefix, std::uint64_t seed) {
    if (!opts.allow_any_size && words.size() != opts.expected_size) {
      throw InputError(std::string(label) + " category has " + std::to_string(words.size()) +
                       " words, expected " + std::to_string(opts.expected_size) +
                       " (use --allow-any-size to override)");
    }
    const std::size_t n_lists = words.size() / opts.cap;
    if (n_lists == 0) throw InputError(std::string(label) + " category too small for one list");
    // Words arrive in extremity-rank order; the leftovers dropped are the
    // least extreme ones at the tail.
    std::vector<std::vector<std::string>> lists(n_lists);
    for (std::size_t i = 0; i < n_lists * opts.cap; ++i) lists[i / opts.cap].push_back(words[i]);
    NounPool pool = parse_noun_pool(
        std::accumulate(words.begin(), words.end(), std::string(),
                        [](std::string acc, const std::string& w) { return acc + w + "\n"; }),
        std::string(label));
    auto set = render_all(rotations(lists, opts.cap), prefix, opts.condition, pool, seed);
    set.provenance = {{"generator", "concreteness"},
                      {"category", label},
                      {"pool_hash", pool.source_hash},
                      {"seed", opts.seed},
                      {"n_lists", n_lists},
                      {"cap", opts.cap},
                      {"dropped", words.size() - n_lists * opts.cap},
                      {"condition", to_string(opts.condition)},
                      {"template", kTemplateId}};
    return set;
  };
  ConcretenessSets out;
  out.concrete = build(extremes.concrete, "concrete", "conc", derive_seed(opts.seed, 0));
  out.abstract = build(extremes.abstract, "abstract", "abst", derive_seed(opts.seed, 1));
  return out;
}

nlohmann::ordered_json vignette_to_json(const Vignette& v) {
  auto spans = [](const std::vector<NounSpan>& list) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : list) arr.push_back({{"w", s.word}, {"s", s.begin}, {"e", s.end}});
    return arr;
  };
  nlohmann::ordered_json j;
  j["id"] = v.id;
  j["condition"] = to_string(v.condition);
  j["list_len"] = v.list_len();
  j["text"] = v.text;
  j["first"] = spans(v.first_list);
  j["second"] = spans(v.second_list);
  return j;
}

Vignette vignette_from_json(const nlohmann::json& j) {
  auto spans = [](const nlohmann::json& arr) {
    std::vector<NounSpan> out;
    for (const auto& s : arr) {
      out.push_back({s.at("w").get<std::string>(), s.at("s").get<std::size_t>(),
                     s.at("e").get<std::size_t>()});
    }
    return out;
  };
  Vignette v;
  v.id = j.at("id").get<std::string>();
  v.condition = parse_condition(j.at("condition").get<std::string>());
  v.text = j.at("text").get<std::string>();
  v.first_list = spans(j.at("first"));
  v.second_list = spans(j.at("second"));
  if (j.at("list_len").get<std::size_t>() != v.first_list.size() ||
      v.second_list.size() != v.first_list.size()) {
    throw InputError("vignette " + v.id + ": list_len disagrees with its spans");
  }
  for (const auto* list : {&v.first_list, &v.second_list}) {
    for (const auto& s : *list) {
      if (s.end > v.text.size() || s.begin >= s.end ||
          v.text.compare(s.begin, s.end - s.begin, s.word) != 0) {
        throw InputError("vignette " + v.id + ": span for '" + s.word + "' does not match text");
      }
    }
  }
  return v;
}

std::string serialize_stimulus_set(const StimulusSet& set) {
  std::string out;
  for (const auto& v : set.vignettes) {
    out += vignette_to_json(v).dump();
    out += '\n';
  }
  return out;
}

void save_stimulus_set(const StimulusSet& set, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_stimulus_set(set));
  auto meta = path;
  meta += ".provenance.json";
  write_file_atomic(meta, set.provenance.dump(2) + "\n");
}

StimulusSet load_stimulus_set(const std::filesystem::path& path) {
  StimulusSet set;
  const auto lines = split(read_file(path), '\n');
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    auto v = vignette_from_json(j);
    if (!ids.insert(v.id).second) throw InputError("duplicate vignette id " + v.id);
    set.vignettes.push_back(std::move(v));
  }
  auto meta = path;
  meta += ".provenance.json";
  if (std::filesystem::exists(meta)) set.provenance = nlohmann::json::parse(read_file(meta));
  return set;
}

}  // namespace reprobe

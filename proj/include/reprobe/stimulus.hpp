#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reprobe/wordpool.hpp"

namespace reprobe {

enum class Condition { kRepeat, kControl };

std::string_view to_string(Condition c);
Condition parse_condition(std::string_view s);

// A noun placed in vignette text; [begin, end) are byte offsets.
struct NounSpan {
  std::string word;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const NounSpan&, const NounSpan&) = default;
};

inline constexpr std::string_view kTemplateId = "mary-list-v1";

struct Vignette {
  std::string id;
  Condition condition = Condition::kRepeat;
  std::string text;
  std::vector<NounSpan> first_list;
  std::vector<NounSpan> second_list;
  std::string template_id{kTemplateId};

  std::size_t list_len() const { return first_list.size(); }
  friend bool operator==(const Vignette&, const Vignette&) = default;
};

struct StimulusSet {
  std::vector<Vignette> vignettes;
  // pool hash, seed and generator parameters
  nlohmann::json provenance = nlohmann::json::object();
};

inline constexpr std::size_t kMaxListLen = 10;

// Renders the single vignette template around `nouns`. In the control
// condition the second list is drawn without replacement from pool minus
// `nouns`, using `seed`.
Vignette render_vignette(const std::vector<std::string>& nouns, Condition condition,
                         const NounPool& pool, std::uint64_t seed, std::string id = {});

struct ArbitrarySetOptions {
  std::size_t n_lists = 23;
  std::size_t base_len = 10;
  std::size_t cap = 3;
  Condition condition = Condition::kRepeat;
  std::uint64_t seed = 0;
};

// Partitions the first n_lists*base_len pool nouns into lists, expands each
// list into its base_len cyclic rotations and truncates each rotation to cap.
StimulusSet generate_arbitrary_set(const NounPool& pool, const ArbitrarySetOptions& opts = {});

struct ConcretenessSetOptions {
  std::size_t cap = 3;
  Condition condition = Condition::kRepeat;
  std::uint64_t seed = 0;
  bool allow_any_size = false;
  std::size_t expected_size = 500;
};

struct ConcretenessSets {
  StimulusSet concrete;
  StimulusSet abstract;
};

ConcretenessSets generate_concreteness_sets(const ConcretenessExtremes& extremes,
                                            const ConcretenessSetOptions& opts = {});

// JSON Lines, one vignette per line, keys in id/condition/list_len/text/first/second order.
nlohmann::ordered_json vignette_to_json(const Vignette& v);
Vignette vignette_from_json(const nlohmann::json& j);
std::string serialize_stimulus_set(const StimulusSet& set);

// Writes `path` (JSONL) and `path`.provenance.json.
void save_stimulus_set(const StimulusSet& set, const std::filesystem::path& path);
StimulusSet load_stimulus_set(const std::filesystem::path& path);

}  // namespace reprobe

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reprobe/benchmarks.hpp"
#include "reprobe/metrics.hpp"
#include "reprobe/provider.hpp"
#include "reprobe/stats.hpp"
#include "reprobe/stimulus.hpp"

namespace reprobe {

// Where scores come from. Config syntax: "toy:<checkpoint-dir>",
// "replay:<responses-dir>" or {"base_url": ..., "model": ...}.
struct EndpointSpec {
  enum class Kind { kHttp, kToy, kReplay };
  Kind kind = Kind::kHttp;
  std::string model;
  std::string base_url;
  std::filesystem::path dir;
  std::chrono::milliseconds timeout{60'000};
  std::size_t max_inflight = 0;  // 0: use the sweep-wide limit
  std::int64_t tokens_per_step = kPythiaTokensPerStep;  // HTTP only
};

EndpointSpec parse_endpoint(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct NamedStimulusSet {
  std::string name;
  StimulusSet set;
  std::string hash;  // FNV-1a of the serialized set
};

// {"name": ..., "path": <jsonl>} or {"name": ..., "generate": {...}}; see README.
NamedStimulusSet resolve_stimuli(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct SweepConfig {
  std::vector<EndpointSpec> endpoints;
  // Step labels. Unset: the 18 Pythia steps for HTTP endpoints, every
  // available step for toy and replay endpoints.
  std::optional<std::vector<std::int64_t>> steps;
  std::vector<NamedStimulusSet> stimuli;
  SubtokenMode subtoken_mode = SubtokenMode::kSum;
  double trim = 0.2;
  std::size_t bootstrap_b = 5000;
  std::uint64_t bootstrap_seed = 0;
  std::filesystem::path output_dir = "reprobe-out";
  std::size_t max_inflight = 4;
  bool force = false;
};

// Relative paths inside the config resolve against `base_dir`.
SweepConfig parse_sweep_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
SweepConfig load_sweep_config(const std::filesystem::path& path);

// Describes one result file of the store.
struct ResultMeta {
  std::string model;
  std::string revision;
  std::string set;
  Condition condition = Condition::kRepeat;
  std::int64_t step = 0;
  std::int64_t tokens_seen = 0;
  std::string stimulus_hash;
  SubtokenMode subtoken_mode = SubtokenMode::kSum;
};

struct StoredResult {
  ResultMeta meta;
  std::vector<RetrievalScore> scores;
};

// Filesystem-safe form of a model id.
std::string path_component(const std::string& s);

std::filesystem::path result_path(const std::filesystem::path& out_dir, const ResultMeta& meta);
std::filesystem::path response_path(const std::filesystem::path& out_dir, const ResultMeta& meta);

void write_result(const std::filesystem::path& out_dir, const StoredResult& r);
// Every result in the store, ordered by (model, set, step).
std::vector<StoredResult> load_results(const std::filesystem::path& out_dir);

// Scores a stimulus set with one provider: score, align, repeat loss change.
std::vector<RetrievalScore> score_stimuli(const Provider& provider, const StimulusSet& set,
                                          SubtokenMode mode, std::size_t max_inflight,
                                          std::vector<ScoredText>* responses = nullptr);

// Serves recorded responses by exact text match.
class ReplayProvider : public Provider {
 public:
  ReplayProvider(std::string model, std::string revision, std::vector<ScoredText> responses);
  // Loads every recorded file for `revision` under a responses/<model> dir.
  static std::unique_ptr<ReplayProvider> from_dir(const std::filesystem::path& dir,
                                                  const std::string& revision);

  ScoredText score(const std::string& text) const override;
  std::string model_id() const override { return model_; }
  std::string revision() const override { return revision_; }
  // Nothing to probe: responses were loaded up front.
  void preflight() const override {}
  // As recorded with the responses; -1 when constructed directly.
  std::int64_t tokens_seen() const { return tokens_seen_; }

 private:
  std::string model_;
  std::string revision_;
  std::int64_t tokens_seen_ = -1;
  std::map<std::string, ScoredText> by_text_;
};

struct SweepReport {
  std::size_t scored = 0;
  std::size_t skipped = 0;
  std::vector<std::string> failures;
};

// Scores every (endpoint, step, stimulus set) not already in the store,
// then rewrites summary.csv and per_position.csv from the whole store.
SweepReport run_sweep(const SweepConfig& cfg, std::ostream& log);

struct PositionSummary {
  std::size_t position = 0;
  double lr = 0.0;  // percent
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct SummaryRow {
  ResultMeta meta;
  std::size_t n = 0;             // non-degenerate vignettes
  std::size_t n_degenerate = 0;  // excluded
  double lr = 0.0;               // trimmed mean, percent
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double mean = 0.0;  // plain mean, percent
  std::vector<PositionSummary> positions;
};

SummaryRow summarize(const StoredResult& r, double trim, std::size_t b, std::uint64_t seed);
std::vector<SummaryRow> summarize_all(const std::vector<StoredResult>& results, double trim,
                                      std::size_t b, std::uint64_t seed);

std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string per_position_csv(const std::vector<SummaryRow>& rows);

// Trimmed-mean L^r (percent) per step for one (model, set).
std::map<std::string, Trajectory> retrieval_trajectories(const std::vector<SummaryRow>& rows,
                                                         const std::string& set);

struct CorrelationRow {
  std::string model;
  std::string task_key;  // the group name for averaged MMLU groups
  std::optional<std::string> group;
  CorrelationResult result;
};

// Per model present in both inputs: intersect step grids (>= min_points
// shared), average grouped tasks, correlate. Skipped tasks are logged.
std::vector<CorrelationRow> correlate_all(const std::vector<SummaryRow>& rows, const std::string& set,
                                          const std::vector<BenchmarkRecord>& records, std::size_t b,
                                          std::uint64_t seed, std::ostream& log,
                                          std::size_t min_points = 10);
std::string correlations_csv(const std::vector<CorrelationRow>& rows);

struct ConcretenessDeltaRow {
  std::string model;
  std::int64_t step = 0;
  std::int64_t tokens_seen = 0;
  double concrete = 0.0;  // plain mean L^r, percent
  double abstract = 0.0;
  double delta = 0.0;
};

// Pairs the "concrete" and "abstract" sets per (model, step).
std::vector<ConcretenessDeltaRow> concreteness_deltas(const std::vector<SummaryRow>& rows,
                                                      const std::string& concrete_set = "concrete",
                                                      const std::string& abstract_set = "abstract");
std::string concreteness_delta_csv(const std::vector<ConcretenessDeltaRow>& rows);

}  // namespace reprobe

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reprobe/stats.hpp"

namespace reprobe {

// Tokens consumed per Pythia optimizer step.
inline constexpr std::int64_t kPythiaTokensPerStep = 2'097'152;

// The 18 Pythia checkpoints scored for retrieval.
const std::vector<std::int64_t>& pythia_retrieval_steps();

struct BenchmarkRecord {
  std::string model;
  std::string task_key;
  std::optional<std::string> group;  // MMLU category; empty for ungrouped tasks
  std::int64_t step = 0;
  double accuracy = 0.0;
};

// task_key -> group; "None" or an empty cell means ungrouped.
using TaskGroups = std::map<std::string, std::optional<std::string>>;

TaskGroups parse_task_groups(const std::string& text);
TaskGroups load_task_groups(const std::filesystem::path& path);

// CSV with header model,task_key,step,accuracy (any column order). When
// `groups` is given, every task_key must appear in it.
std::vector<BenchmarkRecord> parse_benchmark_csv(const std::string& text, const std::string& source,
                                                 const TaskGroups* groups);

// Reads every *.csv in `dir` except groups.csv, in filename order. A
// groups.csv in the same directory assigns groups.
std::vector<BenchmarkRecord> import_benchmarks(const std::filesystem::path& dir);

// model,task_key,group,step,accuracy
std::string benchmarks_to_csv(const std::vector<BenchmarkRecord>& records);
// Reads the format written by benchmarks_to_csv.
std::vector<BenchmarkRecord> load_benchmarks_csv(const std::filesystem::path& path);

// Chance accuracy used as a report annotation; nullopt when unknown.
std::optional<double> chance_level(const std::string& task_key);

// One trajectory per (model, task_key), labelled with the task_key.
// Duplicate (model, task_key, step) rows are rejected.
std::map<std::string, std::vector<Trajectory>> benchmark_trajectories(
    const std::vector<BenchmarkRecord>& records);

}  // namespace reprobe

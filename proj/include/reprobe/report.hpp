#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "reprobe/benchmarks.hpp"

namespace reprobe {

struct ReportOptions {
  std::filesystem::path store_dir;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> benchmarks_csv;  // as written by import-benchmarks
  std::string retrieval_set = "arbitrary";  // set correlated against benchmarks
  double trim = 0.2;
  std::size_t bootstrap_b = 5000;
  std::uint64_t bootstrap_seed = 0;
};

struct ReportFiles {
  std::vector<std::filesystem::path> csv;
  std::vector<std::filesystem::path> svg;
};

// Writes summary.csv, per_position.csv, correlations.csv,
// concreteness_delta.csv and four SVG charts. Throws InputError("no results")
// on an empty store.
ReportFiles write_report(const ReportOptions& opts, std::ostream& log);

}  // namespace reprobe

#include "reprobe/benchmarks.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "reprobe/common.hpp"

namespace reprobe {

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // rows[i] is data row i + 1
};

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  bool first = true;
  for (auto& raw : split(text, '\n')) {
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    for (auto& c : split(line, ',')) cells.emplace_back(trim(c));
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) {
        throw InputError(source + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                         std::to_string(cells.size()) + " cells, header has " +
                         std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw InputError(source + ": empty file");
  return t;
}

std::size_t column(const CsvTable& t, const std::string& name, const std::string& source) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw InputError(source + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

std::optional<std::string> group_cell(const std::string& s) {
  if (s.empty() || s == "None") return std::nullopt;
  return s;
}

std::int64_t parse_step(const std::string& s, const std::string& where) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0) {
    throw InputError(where + ": bad step '" + s + "'");
  }
  return v;
}

}  // namespace

const std::vector<std::int64_t>& pythia_retrieval_steps() {
  static const std::vector<std::int64_t> steps = {0,    1,    4,    32,    128,   256,
                                                  512,  1000, 2000, 3000,  4000,  8000,
                                                  10000, 30000, 40000, 50000, 100000, 143000};
  return steps;
}

TaskGroups parse_task_groups(const std::string& text) {
  const auto t = parse_csv(text, "groups");
  const auto kc = column(t, "task_key", "groups");
  const auto gc = column(t, "group", "groups");
  TaskGroups out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& key = t.rows[i][kc];
    if (key.empty()) throw InputError("groups: row " + std::to_string(i + 1) + ": empty task_key");
    if (!out.emplace(key, group_cell(t.rows[i][gc])).second) {
      throw InputError("groups: row " + std::to_string(i + 1) + ": duplicate task_key '" + key + "'");
    }
  }
  return out;
}

TaskGroups load_task_groups(const std::filesystem::path& path) {
  return parse_task_groups(read_file(path));
}

std::vector<BenchmarkRecord> parse_benchmark_csv(const std::string& text, const std::string& source,
                                                 const TaskGroups* groups) {
  const auto t = parse_csv(text, source);
  const auto mc = column(t, "model", source);
  const auto kc = column(t, "task_key", source);
  const auto sc = column(t, "step", source);
  const auto ac = column(t, "accuracy", source);
  std::vector<BenchmarkRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = source + ": row " + std::to_string(i + 1);
    BenchmarkRecord r;
    r.model = row[mc];
    r.task_key = row[kc];
    if (r.model.empty() || r.task_key.empty()) throw InputError(where + ": empty model or task_key");
    r.step = parse_step(row[sc], where);
    if (!parse_double(row[ac], r.accuracy)) {
      throw InputError(where + ": non-numeric accuracy '" + row[ac] + "'");
    }
    if (r.accuracy < 0.0 || r.accuracy > 1.0) {
      throw InputError(where + ": accuracy " + row[ac] + " outside [0, 1]");
    }
    if (groups) {
      auto it = groups->find(r.task_key);
      if (it == groups->end()) {
        throw InputError(where + ": unknown task_key '" + r.task_key + "' (not in groups file)");
      }
      r.group = it->second;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<BenchmarkRecord> import_benchmarks(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw InputError("benchmark directory not found: " + dir.string());
  }
  std::optional<TaskGroups> groups;
  const auto gpath = dir / "groups.csv";
  if (std::filesystem::exists(gpath)) groups = load_task_groups(gpath);

  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().filename() != "groups.csv") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<BenchmarkRecord> out;
  for (const auto& f : files) {
    auto recs = parse_benchmark_csv(read_file(f), f.filename().string(), groups ? &*groups : nullptr);
    out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return out;
}

std::string benchmarks_to_csv(const std::vector<BenchmarkRecord>& records) {
  std::string out = "model,task_key,group,step,accuracy\n";
  for (const auto& r : records) {
    out += r.model + "," + r.task_key + "," + r.group.value_or("None") + "," +
           std::to_string(r.step) + "," + format_double(r.accuracy) + "\n";
  }
  return out;
}

std::vector<BenchmarkRecord> load_benchmarks_csv(const std::filesystem::path& path) {
  const std::string source = path.filename().string();
  const auto text = read_file(path);
  auto recs = parse_benchmark_csv(text, source, nullptr);
  const auto t = parse_csv(text, source);
  const auto gc = column(t, "group", source);
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].group = group_cell(t.rows[i][gc]);
  return recs;
}

std::optional<double> chance_level(const std::string& task_key) {
  auto starts = [&](std::string_view p) { return task_key.rfind(p, 0) == 0; };
  if (starts("lambada")) return 0.016;
  if (starts("arc_") || starts("mmlu_") || task_key == "logiqa" || task_key == "sciq") return 0.25;
  if (task_key == "piqa" || task_key == "wsc" || task_key == "winogrande") return 0.5;
  return std::nullopt;
}

std::map<std::string, std::vector<Trajectory>> benchmark_trajectories(
    const std::vector<BenchmarkRecord>& records) {
  std::map<std::string, std::map<std::string, std::map<std::int64_t, double>>> by;
  for (const auto& r : records) {
    if (!by[r.model][r.task_key].emplace(r.step, r.accuracy).second) {
      throw InputError("duplicate benchmark record: " + r.model + " " + r.task_key + " step " +
                       std::to_string(r.step));
    }
  }
  std::map<std::string, std::vector<Trajectory>> out;
  for (const auto& [model, tasks] : by) {
    for (const auto& [task, points] : tasks) {
      std::vector<std::int64_t> steps;
      Vector<double> values(static_cast<Eigen::Index>(points.size()));
      Eigen::Index i = 0;
      for (const auto& [s, v] : points) {
        steps.push_back(s);
        values(i++) = v;
      }
      out[model].emplace_back(task, std::move(steps), std::move(values));
    }
  }
  return out;
}

}  // namespace reprobe

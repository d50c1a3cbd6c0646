#include "reprobe/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include "reprobe/common.hpp"
#include "reprobe/svg.hpp"
#include "reprobe/sweep.hpp"

namespace reprobe {

namespace {

std::string series_label(const SummaryRow& r) { return r.meta.model + " / " + r.meta.set; }

svg::LineChart lr_chart(const std::vector<SummaryRow>& rows) {
  svg::LineChart c;
  c.title = "Repeat loss change over training";
  c.x_label = "tokens seen (log scale)";
  c.y_label = "L^r (%), 20% trimmed mean";
  c.log_x = true;
  std::map<std::string, svg::Series> by;
  bool control = false;
  for (const auto& r : rows) {
    auto& s = by[series_label(r)];
    s.label = series_label(r);
    s.x.push_back(static_cast<double>(r.meta.tokens_seen));
    s.y.push_back(r.lr);
    s.lo.push_back(std::isfinite(r.ci_lo) ? r.ci_lo : r.lr);
    s.hi.push_back(std::isfinite(r.ci_hi) ? r.ci_hi : r.lr);
    control = control || r.meta.condition == Condition::kControl;
  }
  for (auto& [k, s] : by) c.series.push_back(std::move(s));
  c.hlines.emplace_back(0.0, "no retrieval");
  if (control) {
    c.hlines.emplace_back(10.0, "+10% band");
    c.hlines.emplace_back(-10.0, "-10% band");
  }
  return c;
}

svg::BarChart position_chart(const std::vector<SummaryRow>& rows) {
  svg::BarChart c;
  c.title = "Repeat loss change by list position, last checkpoint";
  c.y_label = "L^r (%), 20% trimmed mean";
  std::map<std::string, const SummaryRow*> last;
  for (const auto& r : rows) {
    auto& slot = last[series_label(r)];
    if (!slot || slot->meta.step < r.meta.step) slot = &r;
  }
  std::size_t n_pos = 0;
  for (const auto& [k, r] : last) n_pos = std::max(n_pos, r->positions.size());
  for (std::size_t p = 0; p < n_pos; ++p) c.series_labels.push_back("position " + std::to_string(p + 1));
  for (const auto& [k, r] : last) {
    svg::BarGroup g;
    g.label = k + " (" + r->meta.revision + ")";
    for (std::size_t p = 0; p < n_pos; ++p) {
      g.values.push_back(p < r->positions.size() ? r->positions[p].lr : std::nan(""));
    }
    c.groups.push_back(std::move(g));
  }
  return c;
}

svg::LineChart delta_chart(const std::vector<ConcretenessDeltaRow>& deltas) {
  svg::LineChart c;
  c.title = "Concreteness advantage over training";
  c.x_label = "tokens seen (log scale)";
  c.y_label = "mean L^r concrete - abstract (%)";
  c.log_x = true;
  std::map<std::string, svg::Series> by;
  for (const auto& d : deltas) {
    auto& s = by[d.model];
    s.label = d.model;
    s.x.push_back(static_cast<double>(d.tokens_seen));
    s.y.push_back(d.delta);
  }
  for (auto& [k, s] : by) c.series.push_back(std::move(s));
  c.hlines.emplace_back(0.0, "no difference");
  return c;
}

svg::LineChart normalized_chart(const std::vector<SummaryRow>& rows, const std::string& set,
                                const std::vector<BenchmarkRecord>& records, std::ostream& log) {
  svg::LineChart c;
  c.title = "Min-max normalized learning trajectories";
  c.x_label = "training step (log scale)";
  c.y_label = "normalized value";
  c.log_x = true;
  auto add = [&](const Trajectory& t, const std::string& label) {
    try {
      const auto n = minmax_normalize(t);
      svg::Series s;
      s.label = label;
      for (std::size_t i = 0; i < n.size(); ++i) {
        s.x.push_back(static_cast<double>(n.steps[i]));
        s.y.push_back(n.values(static_cast<Eigen::Index>(i)));
      }
      c.series.push_back(std::move(s));
    } catch (const InputError& e) {
      log << "note: " << label << " not plotted: " << e.what() << "\n";
    }
  };
  const auto ret = retrieval_trajectories(rows, set);
  std::map<std::string, std::vector<Trajectory>> bench;
  if (!records.empty()) bench = benchmark_trajectories(records);
  for (const auto& [model, t] : ret) {
    add(t, model + " retrieval");
    auto it = bench.find(model);
    if (it == bench.end()) continue;
    std::map<std::string, std::string> grouping;
    std::vector<Trajectory> grouped;
    for (const auto& r : records) {
      if (r.model == model && r.group) grouping[r.task_key] = *r.group;
    }
    for (const auto& bt : it->second) {
      if (grouping.count(bt.label)) {
        grouped.push_back(bt);
      } else {
        add(bt, model + " " + bt.label);
      }
    }
    if (!grouped.empty()) {
      for (const auto& [g, gt] : group_average(grouped, grouping)) add(gt, model + " " + g);
    }
  }
  return c;
}

}  // namespace

ReportFiles write_report(const ReportOptions& opts, std::ostream& log) {
  const auto results = load_results(opts.store_dir);
  if (results.empty()) throw InputError("no results");
  const auto rows = summarize_all(results, opts.trim, opts.bootstrap_b, opts.bootstrap_seed);
  std::vector<BenchmarkRecord> records;
  if (opts.benchmarks_csv) records = load_benchmarks_csv(*opts.benchmarks_csv);

  ReportFiles files;
  auto emit = [&](const std::string& name, const std::string& body, bool is_svg) {
    const auto p = opts.out_dir / name;
    write_file_atomic(p, body);
    (is_svg ? files.svg : files.csv).push_back(p);
  };
  emit("summary.csv", summary_csv(rows), false);
  emit("per_position.csv", per_position_csv(rows), false);
  std::vector<CorrelationRow> corr;
  if (!records.empty()) {
    corr = correlate_all(rows, opts.retrieval_set, records, opts.bootstrap_b, opts.bootstrap_seed, log);
  }
  emit("correlations.csv", correlations_csv(corr), false);
  const auto deltas = concreteness_deltas(rows);
  emit("concreteness_delta.csv", concreteness_delta_csv(deltas), false);

  emit("lr_vs_tokens.svg", svg::render(lr_chart(rows)), true);
  emit("lr_by_position.svg", svg::render(position_chart(rows)), true);
  emit("concreteness_delta.svg", svg::render(delta_chart(deltas)), true);
  emit("normalized_trajectories.svg", svg::render(normalized_chart(rows, opts.retrieval_set, records, log)), true);
  return files;
}

}  // namespace reprobe

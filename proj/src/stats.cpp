#include "reprobe/stats.hpp"

#include <algorithm>
#include <iterator>

namespace reprobe {

double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw InputError("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

SplitMix64 resample_rng(std::uint64_t seed, std::size_t resample) {
  return SplitMix64(derive_seed(seed, resample));
}

Trajectory::Trajectory(std::string label_, std::vector<std::int64_t> steps_, Vector<double> values_)
    : label(std::move(label_)), steps(std::move(steps_)), values(std::move(values_)) {
  if (static_cast<Eigen::Index>(steps.size()) != values.size()) {
    throw InputError("trajectory '" + label + "': steps and values differ in length");
  }
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (steps[i] <= steps[i - 1]) {
      throw InputError("trajectory '" + label + "': steps must be strictly increasing");
    }
  }
}

Trajectory restrict_to(const Trajectory& t, const std::vector<std::int64_t>& steps) {
  Vector<double> values(static_cast<Eigen::Index>(steps.size()));
  std::size_t j = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    while (j < t.steps.size() && t.steps[j] < steps[i]) ++j;
    if (j == t.steps.size() || t.steps[j] != steps[i]) {
      throw InputError("trajectory '" + t.label + "' has no value at step " +
                       std::to_string(steps[i]));
    }
    values(static_cast<Eigen::Index>(i)) = t.values(static_cast<Eigen::Index>(j));
  }
  return Trajectory(t.label, steps, std::move(values));
}

std::vector<std::int64_t> shared_steps(const Trajectory& a, const Trajectory& b) {
  std::vector<std::int64_t> out;
  std::set_intersection(a.steps.begin(), a.steps.end(), b.steps.begin(), b.steps.end(),
                        std::back_inserter(out));
  return out;
}

namespace {

bool is_constant(const Vector<double>& v) {
  return v.size() == 0 || (v.array() == v(0)).all();
}

void require_same_grid(const Trajectory& a, const Trajectory& b) {
  if (!a.same_grid(b)) {
    throw InputError("trajectories '" + a.label + "' and '" + b.label +
                     "' are on different step grids");
  }
}

}  // namespace

CorrelationResult trajectory_correlation(const Trajectory& retrieval, const Trajectory& bench,
                                         std::size_t b, std::uint64_t seed, double alpha) {
  require_same_grid(retrieval, bench);
  if (b < kMinBootstrapResamples) throw InputError("trajectory_correlation: b must be >= 100");
  CorrelationResult res;
  res.n_points = retrieval.size();
  res.bootstrap_b = b;
  res.seed = seed;
  res.rho = spearman(retrieval.values, bench.values);

  const auto n = static_cast<Eigen::Index>(res.n_points);
  const std::size_t max_attempts = 100 * b;
  std::vector<double> rhos;
  rhos.reserve(b);
  Vector<double> xs(n), ys(n);
  for (std::size_t attempt = 0; rhos.size() < b; ++attempt) {
    if (attempt >= max_attempts) {
      throw InputError("trajectory_correlation: too many degenerate resamples");
    }
    auto rng = resample_rng(seed, attempt);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      xs(i) = retrieval.values(k);
      ys(i) = bench.values(k);
    }
    if (is_constant(xs) || is_constant(ys)) {
      ++res.redraws;
      continue;
    }
    rhos.push_back(spearman(xs, ys));
  }
  std::sort(rhos.begin(), rhos.end());
  res.ci_lo = sorted_quantile(rhos, alpha / 2);
  res.ci_hi = sorted_quantile(rhos, 1 - alpha / 2);
  return res;
}

std::map<std::string, Trajectory> group_average(const std::vector<Trajectory>& trajectories,
                                                const std::map<std::string, std::string>& grouping) {
  std::map<std::string, std::vector<const Trajectory*>> members;
  for (const auto& t : trajectories) {
    auto it = grouping.find(t.label);
    if (it != grouping.end()) members[it->second].push_back(&t);
  }
  std::map<std::string, Trajectory> out;
  for (const auto& [group, list] : members) {
    std::vector<std::int64_t> grid = list.front()->steps;
    for (const auto* t : list) {
      std::vector<std::int64_t> keep;
      std::set_intersection(grid.begin(), grid.end(), t->steps.begin(), t->steps.end(),
                            std::back_inserter(keep));
      grid = std::move(keep);
    }
    if (grid.empty()) throw InputError("group_average: members of '" + group + "' share no steps");
    Vector<double> sum = Vector<double>::Zero(static_cast<Eigen::Index>(grid.size()));
    for (const auto* t : list) sum += restrict_to(*t, grid).values;
    out.emplace(group, Trajectory(group, grid, sum / static_cast<double>(list.size())));
  }
  return out;
}

Trajectory concreteness_delta(const Trajectory& concrete, const Trajectory& abstract) {
  require_same_grid(concrete, abstract);
  return Trajectory("concreteness_delta", concrete.steps, concrete.values - abstract.values);
}

Trajectory minmax_normalize(const Trajectory& t) {
  if (t.size() == 0) throw InputError("minmax_normalize: empty trajectory");
  const double lo = t.values.minCoeff();
  const double hi = t.values.maxCoeff();
  if (!(hi > lo)) throw InputError("minmax_normalize: trajectory '" + t.label + "' is constant");
  return Trajectory(t.label, t.steps, (t.values.array() - lo) / (hi - lo));
}

}  // namespace reprobe

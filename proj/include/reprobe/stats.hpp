#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "reprobe/common.hpp"

namespace reprobe {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Mean after sorting and dropping floor(prop * n) values from each end.
template <typename Derived>
typename Derived::Scalar trimmed_mean(const Eigen::DenseBase<Derived>& xs, double prop = 0.2) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = xs.size();
  if (n == 0) throw InputError("trimmed_mean: empty input");
  if (!(prop >= 0.0 && prop < 0.5)) throw InputError("trimmed_mean: prop must be in [0, 0.5)");
  Vector<Scalar> sorted = xs.derived().template cast<Scalar>();
  std::sort(sorted.data(), sorted.data() + n);
  const auto cut = static_cast<Eigen::Index>(std::floor(prop * static_cast<double>(n)));
  return sorted.segment(cut, n - 2 * cut).mean();
}

// Ranks starting at 1; tied values share the average of their ranks.
template <typename Derived>
Vector<typename Derived::Scalar> average_ranks(const Eigen::DenseBase<Derived>& xs) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = xs.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return xs(a) < xs(b); });
  Vector<Scalar> ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && xs(order[j + 1]) == xs(order[i])) ++j;
    const Scalar avg = Scalar(i + j + 2) / Scalar(2);
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[k]) = avg;
    i = j + 1;
  }
  return ranks;
}

template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar pearson(const Eigen::MatrixBase<DerivedX>& x,
                                  const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  const Vector<Scalar> dx = x.array() - x.mean();
  const Vector<Scalar> dy = y.array() - y.mean();
  const Scalar denom = std::sqrt(dx.squaredNorm() * dy.squaredNorm());
  if (!(denom > Scalar(0))) {
    throw InputError("correlation undefined: an input vector is constant (result would be NaN)");
  }
  return std::clamp(dx.dot(dy) / denom, Scalar(-1), Scalar(1));
}

// Pearson correlation of average ranks. Throws InputError when either input
// is constant.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar spearman(const Eigen::MatrixBase<DerivedX>& x,
                                   const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != y.size()) throw InputError("spearman: length mismatch");
  if (x.size() < 3) throw InputError("spearman: need at least 3 points");
  return pearson(average_ranks(x), average_ranks(y));
}

// Linear-interpolation empirical quantile of sorted data (numpy's default).
double sorted_quantile(const std::vector<double>& sorted, double q);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr std::size_t kMinBootstrapResamples = 100;

// Index stream for bootstrap resample `i`; each resample has its own seed so
// the draw does not depend on evaluation order.
SplitMix64 resample_rng(std::uint64_t seed, std::size_t resample);

// Percentile bootstrap: statistic over b resamples drawn with replacement,
// then the (alpha/2, 1 - alpha/2) quantiles.
template <typename Derived, typename Statistic>
Interval bootstrap_ci(const Eigen::DenseBase<Derived>& xs, Statistic&& statistic,
                      std::size_t b = 5000, double alpha = 0.05, std::uint64_t seed = 0) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = xs.size();
  if (n < 2) throw InputError("bootstrap_ci: need at least 2 observations");
  if (b < kMinBootstrapResamples) throw InputError("bootstrap_ci: b must be >= 100");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("bootstrap_ci: alpha must be in (0, 1)");
  std::vector<double> stats(b);
  Vector<Scalar> sample(n);
  for (std::size_t r = 0; r < b; ++r) {
    auto rng = resample_rng(seed, r);
    for (Eigen::Index i = 0; i < n; ++i) {
      sample(i) = xs(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
    }
    stats[r] = static_cast<double>(statistic(sample));
  }
  std::sort(stats.begin(), stats.end());
  return {sorted_quantile(stats, alpha / 2), sorted_quantile(stats, 1 - alpha / 2)};
}

// Ordered (training step -> value) series.
struct Trajectory {
  std::string label;
  std::vector<std::int64_t> steps;
  Vector<double> values;

  Trajectory() = default;
  Trajectory(std::string label, std::vector<std::int64_t> steps, Vector<double> values);

  std::size_t size() const { return steps.size(); }
  bool same_grid(const Trajectory& other) const { return steps == other.steps; }
};

// Restricts `t` to the given steps, which must all be present.
Trajectory restrict_to(const Trajectory& t, const std::vector<std::int64_t>& steps);
std::vector<std::int64_t> shared_steps(const Trajectory& a, const Trajectory& b);

struct CorrelationResult {
  double rho = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_points = 0;
  std::size_t bootstrap_b = 0;
  std::uint64_t seed = 0;
  // Resamples discarded because one side came out constant.
  std::size_t redraws = 0;
};

// Spearman correlation of two trajectories on the same step grid, with a
// percentile bootstrap over checkpoint pairs.
CorrelationResult trajectory_correlation(const Trajectory& retrieval, const Trajectory& bench,
                                         std::size_t b = 5000, std::uint64_t seed = 0,
                                         double alpha = 0.05);

// Pointwise mean of every trajectory whose label maps to a group, over the
// steps all members of that group share.
std::map<std::string, Trajectory> group_average(const std::vector<Trajectory>& trajectories,
                                                const std::map<std::string, std::string>& grouping);

Trajectory concreteness_delta(const Trajectory& concrete, const Trajectory& abstract);

Trajectory minmax_normalize(const Trajectory& t);

}  // namespace reprobe

#include "reprobe/stats.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace reprobe {
namespace {

using Vec = Vector<double>;

Vec vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

// Sort-based brute force on std::vector.
double oracle_trimmed_mean(std::vector<double> xs, double prop) {
  std::sort(xs.begin(), xs.end());
  const auto cut = static_cast<std::size_t>(std::floor(prop * static_cast<double>(xs.size())));
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = cut; i + cut < xs.size(); ++i) {
    s += xs[i];
    ++n;
  }
  return s / static_cast<double>(n);
}

// Rank of each element by counting; ties get the mean of their ranks.
std::vector<double> oracle_ranks(const std::vector<double>& xs) {
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : xs) {
      if (x < xs[i]) ++less;
      if (x == xs[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = oracle_ranks(x), ry = oracle_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

TEST(TrimmedMean, Examples) {
  EXPECT_DOUBLE_EQ(trimmed_mean(vec({1, 2, 3, 4, 5, 6, 7, 8, 9, 10})), 5.5);
  EXPECT_DOUBLE_EQ(trimmed_mean(vec({3.5, 3.5, 3.5, 3.5})), 3.5);
  EXPECT_DOUBLE_EQ(trimmed_mean(vec({1, 2, 100}), 0.0), 103.0 / 3.0);
  // floor(0.2 * 4) = 0: nothing trimmed.
  EXPECT_DOUBLE_EQ(trimmed_mean(vec({0, 0, 0, 100})), 25.0);
  EXPECT_THROW(trimmed_mean(Vec()), InputError);
  EXPECT_THROW(trimmed_mean(vec({1, 2}), 0.5), InputError);
}

TEST(TrimmedMean, MatchesBruteForce) {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(60);
    std::vector<double> xs(n);
    for (auto& x : xs) x = (rng.uniform01() < 0.2) ? std::round(5 * rng.normal()) : 10 * rng.normal();
    const double prop = 0.45 * rng.uniform01();
    ASSERT_NEAR(trimmed_mean(vec(xs), prop), oracle_trimmed_mean(xs, prop), 1e-12) << trial;
    ASSERT_NEAR(trimmed_mean(vec(xs)), oracle_trimmed_mean(xs, 0.2), 1e-12);
  }
}

TEST(Spearman, Examples) {
  EXPECT_DOUBLE_EQ(spearman(vec({1, 2, 3, 4}), vec({10, 20, 30, 40})), 1.0);
  EXPECT_DOUBLE_EQ(spearman(vec({1, 2, 3, 4}), vec({40, 30, 20, 10})), -1.0);
  // ranks x = [1, 2.5, 2.5, 4], y = [1, 3, 2, 4] -> 4.5 / sqrt(4.5 * 5)
  EXPECT_NEAR(spearman(vec({1, 2, 2, 4}), vec({1, 3, 2, 4})), 4.5 / std::sqrt(22.5), 1e-15);
  EXPECT_THROW(spearman(vec({1, 1, 1}), vec({1, 2, 3})), InputError);
  EXPECT_THROW(spearman(vec({1, 2}), vec({1, 2})), InputError);
}

TEST(Spearman, MatchesOracleWithTies) {
  SplitMix64 rng(4);
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(30);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.uniform_index(6));
      y[i] = (rng.uniform01() < 0.5) ? x[i] + rng.normal() : static_cast<double>(rng.uniform_index(4));
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
        std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
      continue;
    }
    ASSERT_NEAR(spearman(vec(x), vec(y)), oracle_spearman(x, y), 1e-12) << trial;
    ++checked;
  }
  EXPECT_GT(checked, 1900);
}

TEST(Bootstrap, ConstantDataIsDegenerate) {
  const Vec xs = Vec::Constant(50, 2.5);
  const auto ci = bootstrap_ci(xs, [](const Vec& s) { return s.mean(); }, 500, 0.05, 1);
  EXPECT_EQ(ci.lo, 2.5);
  EXPECT_EQ(ci.hi, 2.5);
}

TEST(Bootstrap, DeterministicPerSeed) {
  SplitMix64 rng(1);
  Vec xs(40);
  for (auto& x : xs) x = rng.normal();
  auto mean = [](const Vec& s) { return s.mean(); };
  const auto a = bootstrap_ci(xs, mean, 1000, 0.05, 7);
  const auto b = bootstrap_ci(xs, mean, 1000, 0.05, 7);
  const auto c = bootstrap_ci(xs, mean, 1000, 0.05, 8);
  EXPECT_EQ(a.lo, b.lo);
  EXPECT_EQ(a.hi, b.hi);
  EXPECT_TRUE(a.lo != c.lo || a.hi != c.hi);
  EXPECT_THROW(bootstrap_ci(xs, mean, 99), InputError);
}

TEST(Bootstrap, WidthMatchesCentralLimit) {
  SplitMix64 rng(12);
  Vec xs(1000);
  for (auto& x : xs) x = rng.normal();
  const auto ci = bootstrap_ci(xs, [](const Vec& s) { return s.mean(); }, 2000, 0.05, 3);
  const double expected = 2 * 1.96 / std::sqrt(1000.0);
  EXPECT_NEAR(ci.hi - ci.lo, expected, 0.25 * expected);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> s{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 0.25), 1.75);
}

Trajectory traj(const std::string& label, const std::vector<std::int64_t>& steps,
                const std::vector<double>& v) {
  return Trajectory(label, steps, vec(v));
}

std::vector<std::int64_t> grid(std::size_t n) {
  std::vector<std::int64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<std::int64_t>(i * 1000);
  return s;
}

TEST(TrajectoryType, Invariants) {
  EXPECT_THROW(traj("a", {0, 0}, {1, 2}), InputError);
  EXPECT_THROW(traj("a", {0, 1}, {1}), InputError);
}

TEST(TrajectoryCorrelation, MonotoneTransformIsOne) {
  SplitMix64 rng(5);
  std::vector<double> r(27), b(27);
  for (std::size_t i = 0; i < 27; ++i) {
    r[i] = rng.normal();
    b[i] = std::exp(3 * r[i]) + 0.5;
  }
  const auto res = trajectory_correlation(traj("ret", grid(27), r), traj("b", grid(27), b), 500, 1);
  EXPECT_EQ(res.rho, 1.0);
  EXPECT_EQ(res.ci_lo, 1.0);
  EXPECT_EQ(res.ci_hi, 1.0);
  EXPECT_EQ(res.n_points, 27u);
}

TEST(TrajectoryCorrelation, CiOrderedAndBounded) {
  SplitMix64 rng(6);
  std::vector<double> r(18), b(18);
  for (std::size_t i = 0; i < 18; ++i) {
    r[i] = static_cast<double>(i) + rng.normal();
    b[i] = static_cast<double>(i) + 3 * rng.normal();
  }
  const auto res = trajectory_correlation(traj("ret", grid(18), r), traj("b", grid(18), b), 1000, 2);
  EXPECT_LE(res.ci_lo, res.ci_hi);
  EXPECT_GE(res.ci_lo, -1.0);
  EXPECT_LE(res.ci_hi, 1.0);
  const auto again = trajectory_correlation(traj("ret", grid(18), r), traj("b", grid(18), b), 1000, 2);
  EXPECT_EQ(res.ci_lo, again.ci_lo);
}

TEST(TrajectoryCorrelation, ConstantResamplesAreRedrawn) {
  // Three points: a resample often repeats one index.
  const auto res =
      trajectory_correlation(traj("r", {1, 2, 3}, {1, 2, 3}), traj("b", {1, 2, 3}, {1, 3, 2}), 200, 0);
  EXPECT_GT(res.redraws, 0u);
  EXPECT_LE(res.ci_lo, res.ci_hi);
}

TEST(TrajectoryCorrelation, GridMismatch) {
  EXPECT_THROW(trajectory_correlation(traj("r", {1, 2, 3}, {1, 2, 3}), traj("b", {1, 2, 4}, {1, 2, 3})),
               InputError);
}

TEST(GroupAverage, Examples) {
  const auto a = traj("abstract_algebra", {0, 1, 2}, {0.2, 0.2, 0.2});
  const auto b = traj("anatomy", {0, 1, 2}, {0.4, 0.4, 0.4});
  const auto c = traj("lambada", {0, 1, 2}, {0.1, 0.5, 0.9});
  const std::map<std::string, std::string> groups{{"abstract_algebra", "MMLU (STEM)"},
                                                  {"anatomy", "MMLU (STEM)"},
                                                  {"lambada", "solo"}};
  const auto out = group_average({a, b, c}, groups);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out.at("MMLU (STEM)").values.isApprox(Vec::Constant(3, 0.3)));
  EXPECT_EQ(out.at("solo").values, c.values);
}

TEST(GroupAverage, UsesSharedGrid) {
  const auto a = traj("x", {0, 1, 2, 3}, {1, 2, 3, 4});
  const auto b = traj("y", {1, 3}, {10, 20});
  const auto out = group_average({a, b}, {{"x", "g"}, {"y", "g"}});
  EXPECT_EQ(out.at("g").steps, (std::vector<std::int64_t>{1, 3}));
  EXPECT_TRUE(out.at("g").values.isApprox(vec({6, 12})));
}

TEST(ConcretenessDelta, Examples) {
  const auto c = traj("c", {0, 1}, {0.9, 0.9});
  const auto a = traj("a", {0, 1}, {0.8, 0.8});
  EXPECT_TRUE(concreteness_delta(c, a).values.isApprox(vec({0.1, 0.1})));
  EXPECT_TRUE(concreteness_delta(c, c).values.isZero());
}

TEST(MinMax, Normalizes) {
  const auto n = minmax_normalize(traj("t", {0, 1, 2}, {2, 4, 3}));
  EXPECT_EQ(n.values, vec({0, 1, 0.5}));
  EXPECT_THROW(minmax_normalize(traj("t", {0, 1}, {2, 2})), InputError);
}

}  // namespace
}  // namespace reprobe

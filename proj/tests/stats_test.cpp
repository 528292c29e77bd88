#include <cmath>

#include <gtest/gtest.h>

#include "onesided/random/rng.hpp"
#include "onesided/stats.hpp"

using namespace onesided;

TEST(Stats, LinearRegressionExact) {
  const LinearFit f = linear_regression({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_DOUBLE_EQ(f.slope, 2.0);
  EXPECT_DOUBLE_EQ(f.intercept, 1.0);
  EXPECT_DOUBLE_EQ(f.r2, 1.0);
  EXPECT_DOUBLE_EQ(f.slope_stderr, 0.0);
  EXPECT_THROW(linear_regression({1, 1}, {2, 3}), Error);
  EXPECT_THROW(linear_regression({1}, {2}), Error);
}

TEST(Stats, RunningStatsAndMerge) {
  RunningStats a, b, all;
  for (int i = 1; i <= 10; ++i) {
    (i <= 4 ? a : b).add(i);
    all.add(i);
  }
  EXPECT_DOUBLE_EQ(all.mean(), 5.5);
  EXPECT_NEAR(all.variance(), 55.0 / 6, 1e-12);
  a.merge(b);
  EXPECT_EQ(a.count(), 10u);
  EXPECT_NEAR(a.mean(), all.mean(), 1e-12);
  EXPECT_NEAR(a.variance(), all.variance(), 1e-12);
}

TEST(Stats, ChiSquareTwoDegrees) {
  // two degrees of freedom: p = exp(-x/2)
  const ChiSquareResult r = chi_square_test({10, 20, 30}, {1, 1, 1});
  EXPECT_DOUBLE_EQ(r.statistic, 10.0);
  EXPECT_EQ(r.dof, 2u);
  EXPECT_NEAR(r.p_value, std::exp(-5.0), 1e-12);
}

TEST(Stats, ChiSquarePoolsSmallCells) {
  const ChiSquareResult r = chi_square_test({500, 495, 3, 2}, {0.5, 0.495, 0.003, 0.002});
  EXPECT_EQ(r.cells, 3u);
  EXPECT_NEAR(r.statistic, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_THROW(chi_square_test({1, 2}, {1}), Error);
}

TEST(Stats, ChiSquareDetectsBias) {
  EXPECT_LT(chi_square_test({600, 400}, {0.5, 0.5}).p_value, 1e-9);
}

TEST(Stats, MedianQuantile) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_DOUBLE_EQ(quantile({0, 10}, 0.25), 2.5);
  EXPECT_THROW(median({}), Error);
}

TEST(Stats, BootstrapCoversMean) {
  Rng rng = make_rng(5);
  std::normal_distribution<double> nd(3.0, 1.0);
  std::vector<double> x(400);
  for (auto& v : x) v = nd(rng);
  const Interval ci = bootstrap_interval(
      x.size(),
      [&](const std::vector<std::size_t>& idx) {
        double s = 0;
        for (auto i : idx) s += x[i];
        return s / static_cast<double>(idx.size());
      },
      500, 0.95, 17);
  EXPECT_LT(ci.lo, ci.hi);
  EXPECT_LT(ci.hi - ci.lo, 0.3);
  EXPECT_LT(ci.lo, 3.15);
  EXPECT_GT(ci.hi, 2.85);
}

TEST(Stats, SeedDerivation) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  Rng a = make_rng(9), b = make_rng(9);
  EXPECT_EQ(a(), b());
}

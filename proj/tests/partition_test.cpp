#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "onesided/partition.hpp"

using namespace onesided;

namespace {

const CountTable& tables() {
  static const CountTable t = build_tables(256);
  return t;
}

double d(const BigFloat& x) { return static_cast<double>(x); }

}  // namespace

TEST(Partition, SmallValues) {
  const CountTable& t = tables();
  EXPECT_DOUBLE_EQ(d(partition_W(kMu0, 1, t)), 2.0);
  EXPECT_DOUBLE_EQ(d(partition_W(kMu0, 3, t)), 12.0);
  for (std::size_t n = 1; n <= 30; ++n) EXPECT_EQ(d(partition_W(0, n, t)), static_cast<double>(t.omega(n)));
}

TEST(Partition, AllTreesValues) {
  const CountTable& t = tables();
  for (std::size_t n = 1; n <= 30; ++n) EXPECT_DOUBLE_EQ(d(partition_Z(0, n, t)), static_cast<double>(t.catalan(n - 1)));
  for (double mu : {-1.0, 0.5, 2.0}) {
    EXPECT_NEAR(d(partition_Z(mu, 1, t)), std::exp(-mu), 1e-15 * std::exp(-mu));
    EXPECT_NEAR(d(partition_Z(mu, 2, t)), std::exp(-2 * mu), 1e-15 * std::exp(-2 * mu));
  }
}

TEST(Partition, TableBound) {
  EXPECT_THROW(partition_W(0, 257, tables()), Error);
  EXPECT_THROW(partition_W(0, 0, tables()), Error);
}

TEST(Partition, CriticalG) {
  EXPECT_NEAR(critical_g(-std::log(4.0)), 3.0 / 16, 1e-16);
  EXPECT_DOUBLE_EQ(critical_g(kMu0), 0.25);
  EXPECT_DOUBLE_EQ(critical_g(1), 0.25);
  // continuity at the boundary
  EXPECT_NEAR(critical_g(kMu0 - 1e-9), 0.25, 1e-12);
  for (double mu = -5; mu < kMu0 - 1e-3; mu += 0.05) {
    const double g = critical_g(mu);
    EXPECT_GT(g, 0);
    EXPECT_LT(g, 0.25);
    EXPECT_NEAR(std::exp(-mu) * tree_gf(g), 1.0, 1e-14) << mu;
  }
}

TEST(Partition, PhaseParams) {
  EXPECT_EQ(phase_of(-2), Phase::Sub);
  EXPECT_EQ(phase_of(kMu0), Phase::Crit);
  EXPECT_EQ(phase_of(0), Phase::Super);
  const PhaseParams sub(-2);
  EXPECT_NEAR(sub.mean_offspring, std::exp(-2.0) / (1 - std::exp(-2.0)), 1e-14);
  for (double mu = -5; mu < kMu0 - 1e-3; mu += 0.25) {
    const PhaseParams p(mu);
    EXPECT_GT(p.mean_offspring, 0);
    EXPECT_LT(p.mean_offspring, 1);
  }
  const PhaseParams sup(0);
  EXPECT_NEAR(sup.saddle_A, 3 * std::pow(std::numbers::pi * std::numbers::ln2 / 2, 2.0 / 3.0), 1e-14);
  for (double mu : {-0.6, 0.0, 1.0, 3.0}) EXPECT_GT(PhaseParams(mu).saddle_B, 0);
}

TEST(Partition, MonotoneAndLogConvexInMu) {
  const CountTable& t = tables();
  for (std::size_t n : {5, 40, 200}) {
    std::vector<double> lw;
    for (double mu = -3; mu <= 2; mu += 0.25) lw.push_back(log_partition_W(mu, n, t));
    for (std::size_t i = 1; i < lw.size(); ++i) EXPECT_LT(lw[i], lw[i - 1]);
    for (std::size_t i = 1; i + 1 < lw.size(); ++i) EXPECT_GE(lw[i - 1] + lw[i + 1] - 2 * lw[i], -1e-12);
  }
}

TEST(Partition, ExactCouplingAtCriticalPoint) {
  PrecisionScope scope(128);
  EXPECT_EQ(coupling_weight(kMu0, 100), BigFloat(BigInt(1) << 100));
}

TEST(Partition, SubResidue) {
  const ResidueEstimate r = residue_r(-2);
  EXPECT_TRUE(r.converged);
  // the residue is the limit of W_N g_c^{N+1}
  const CountTable& t = tables();
  const double g = critical_g(-2);
  PrecisionScope scope(256);
  const double s100 = d(partition_W(-2, 100, t) * pow(BigFloat(g), 101));
  EXPECT_NEAR(s100 / r.value, 1.0, 1e-2);
  EXPECT_NEAR(residue_from_coefficients(-2, t, 100, 200) / r.value, 1.0, 1e-6);
}

TEST(Partition, SubAsymptotics) {
  const AsymptoticFit f = verify_sub_asymptotics(-2, 50, 200, tables());
  EXPECT_TRUE(f.ok) << f.to_json().dump();
  EXPECT_LT(f.details.at("max_deviation").get<double>(), 1e-2);
  EXPECT_LT(f.rel_err, 1e-6);
  EXPECT_GT(f.r2, 0.99);
}

TEST(Partition, SubRatioOfConsecutive) {
  const CountTable& t = tables();
  const double ratio = std::exp(log_partition_W(-2, 201, build_tables(201)) - log_partition_W(-2, 200, t));
  EXPECT_NEAR(ratio * critical_g(-2), 1.0, 1e-9);
}

TEST(Partition, CriticalSeries) {
  // terms of the recursion agree with the closed expression in z
  const long double g = 0.25L - 1e-3L, z = std::sqrt(1 - 4 * g);
  long double x = 0, term = 1;
  for (std::size_t m = 1; m <= 200; ++m) {
    x = g / (1 - x);
    term *= 2 * x;
    EXPECT_NEAR(static_cast<double>(term / critical_term_closed(m, z)), 1.0, 1e-12);
  }
  EXPECT_FALSE(critical_series(g).truncated);
  EXPECT_THROW(critical_series(0.25L), Error);
}

TEST(Partition, CriticalConstant) {
  const double a = c0_estimate(1e-3), b = c0_estimate(1e-4);
  EXPECT_LT(std::fabs(a - b), 1e-3);
  EXPECT_NEAR(b, std::numbers::ln2 + std::numbers::egamma - 1, 1e-3);
  std::vector<double> eps;
  for (int i = 0; i <= 12; ++i) eps.push_back(std::pow(10.0, -6 + 3.0 * i / 12));
  const AsymptoticFit f = verify_crit_singularity(eps);
  EXPECT_TRUE(f.ok) << f.to_json().dump();
  EXPECT_NEAR(f.fitted, 1.0, 0.02);
}

TEST(Partition, CriticalCoefficients) {
  const CountTable& t = tables();
  auto ratio = [&](std::size_t n) { return d(partition_W(kMu0, n, t)) * 2 * static_cast<double>(n) / std::pow(4.0, n); };
  EXPECT_DOUBLE_EQ(ratio(1), 1.0);
  EXPECT_DOUBLE_EQ(ratio(3), 1.125);
  const AsymptoticFit f = verify_crit_coefficients(64, 256, t);
  EXPECT_TRUE(f.ok) << f.to_json().dump();
}

TEST(Partition, SuperFit) {
  const CountTable& t = tables();
  const AsymptoticFit f = verify_super_asymptotics(1, 64, 256, t);
  EXPECT_TRUE(f.details.at("log_ratio_decreasing").get<bool>());
  EXPECT_TRUE(f.details.at("well_conditioned").get<bool>());
  EXPECT_LT(f.rel_err, 0.05) << f.to_json().dump();
  EXPECT_THROW(verify_super_asymptotics(-1, 96, 256, t), Error);
}

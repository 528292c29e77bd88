#include <cmath>
#include <map>
#include <numbers>

#include <gtest/gtest.h>

#include "onesided/enumeration.hpp"
#include "onesided/measures.hpp"
#include "onesided/partition.hpp"
#include "onesided/random/rng.hpp"

using namespace onesided;

TEST(Measures, BallMassExamples) {
  EXPECT_NEAR(ball_mass(MeasureKind::tau_super(0), PlanarTree()), 1.0, 1e-15);
  EXPECT_NEAR(ball_mass(MeasureKind::tau_crit(), PlanarTree::path(2)), 0.5, 1e-15);
  const double gc = critical_g(-2);
  for (std::size_t n = 1; n <= 10; ++n) {
    const double expected = std::exp(2.0) * gc * std::pow(std::exp(-2.0), static_cast<double>(n) - 1);
    EXPECT_NEAR(ball_mass(MeasureKind::tau_sub(-2), PlanarTree::star(n)), expected, 1e-14 * expected) << n;
  }
  // (1/4^3) 2^3 (1 + ln 2)
  EXPECT_NEAR(ball_mass(MeasureKind::tau_super(0), PlanarTree::star(2)), (1 + std::numbers::ln2) / 8, 1e-15);
}

TEST(Measures, SingleEdgeHasFullMass) {
  for (const MeasureKind& k : {MeasureKind::tau(-2), MeasureKind::tau_crit(), MeasureKind::tau_super(0.3),
                               MeasureKind::nu(0.5), MeasureKind::nu_tilde(0.7)})
    EXPECT_NEAR(ball_mass(k, PlanarTree()), 1.0, 1e-14) << k.name();
}

TEST(Measures, NotOneSidedHasZeroMass) {
  const PlanarTree t = PlanarTree::from_code("()(())");
  EXPECT_EQ(ball_mass(MeasureKind::tau_crit(), t), 0.0);
  EXPECT_EQ(ball_mass(MeasureKind::tau(-2), t), 0.0);
  EXPECT_EQ(ball_mass(MeasureKind::tau(1), t), 0.0);
  EXPECT_GT(ball_mass(MeasureKind::nu(1), t), 0.0);
}

TEST(Measures, MassesInUnitInterval) {
  for (std::size_t n = 1; n <= 9; ++n)
    for_each_tree(n, [](const PlanarTree& t) {
      for (const MeasureKind& k : {MeasureKind::tau(-2), MeasureKind::tau_crit(), MeasureKind::tau(0),
                                   MeasureKind::tau(1), MeasureKind::nu(1), MeasureKind::rho()}) {
        const double v = ball_mass(k, t);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0 + 1e-15);
      }
    });
}

TEST(Measures, KindValidation) {
  EXPECT_THROW(MeasureKind::tau_sub(0), Error);
  EXPECT_THROW(MeasureKind::tau_super(-2), Error);
  EXPECT_THROW(MeasureKind::nu(-0.1), Error);
  EXPECT_THROW(MeasureKind::parse("bogus", 0), Error);
  EXPECT_EQ(MeasureKind::parse("tau", kMu0).tag, MeasureKind::Tag::TauCrit);
  EXPECT_EQ(MeasureKind::parse("tau", -1).tag, MeasureKind::Tag::TauSub);
  EXPECT_EQ(MeasureKind::parse("rho", 0).tag, MeasureKind::Tag::RhoCritBGW);
}

TEST(Measures, OffspringLaws) {
  EXPECT_DOUBLE_EQ(offspring_pmf(MeasureKind::tau_crit(), 0), 0.5);
  EXPECT_NEAR(offspring_pmf(MeasureKind::tau_sub(-40), 0), 1.0, 1e-15);
  for (double mu : {-5.0, -2.0, -0.8}) {
    double total = 0, mean = 0;
    for (std::size_t n = 0; n < 4000; ++n) {
      const double p = offspring_pmf(MeasureKind::tau_sub(mu), n);
      total += p;
      mean += static_cast<double>(n) * p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_NEAR(mean, PhaseParams(mu).mean_offspring, 1e-10);
    EXPECT_LT(mean, 1.0);
  }
  double mean = 0;
  for (std::size_t n = 0; n < 200; ++n) mean += static_cast<double>(n) * offspring_pmf(MeasureKind::tau_crit(), n);
  EXPECT_NEAR(mean, 1.0, 1e-12);
}

TEST(Measures, Rho) {
  EXPECT_DOUBLE_EQ(rho_mass(PlanarTree()), 0.5);
  for (std::size_t n = 1; n <= 8; ++n)
    for_each_tree(n, [](const PlanarTree& t) {
      double prod = 1;
      for (NodeId v = 1; v < t.node_count(); ++v) prod *= std::ldexp(1.0, -static_cast<int>(t.child_count(v)) - 1);
      EXPECT_DOUBLE_EQ(rho_mass(t), prod);
    });
  const CountTable tab = build_tables(400);
  double total = 0;
  for (std::size_t n = 1; n <= 400; ++n) total += 2 * std::pow(4.0, -static_cast<double>(n)) * static_cast<double>(tab.catalan(n - 1));
  // the tail beyond 400 behaves like (pi n)^{-1/2}
  EXPECT_NEAR(total + 1 / std::sqrt(std::numbers::pi * 400), 1.0, 2e-3);
  EXPECT_LT(total, 1.0);
}

TEST(Measures, SimplexMoments) {
  EXPECT_EQ(simplex_moment({0, 0}), Rational(1));
  EXPECT_EQ(simplex_moment({1, 0}), Rational(1, 2));
  EXPECT_EQ(simplex_moment({1, 1, 1}), Rational(1, 60));
  EXPECT_EQ(simplex_moment({2, 0, 3}), simplex_moment({3, 2, 0}));
  // Monte Carlo over the uniform simplex
  Rng rng = make_rng(11);
  std::exponential_distribution<double> e(1.0);
  double acc = 0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double a = e(rng), b = e(rng), c = e(rng), s = a + b + c;
    acc += a * b * c / (s * s * s);
  }
  EXPECT_NEAR(acc / n, 1.0 / 60, 3e-4);
}

TEST(Measures, SpineIncrementLaw) {
  for (unsigned R = 1; R <= 10; ++R)
    for (double kappa : {0.1, std::numbers::ln2, 2.0}) {
      PrecisionScope scope(256);
      const BigFloat s = spine_increment_law_sum(R, kappa, 200);
      EXPECT_NEAR(static_cast<double>(s), 1.0, 1e-15) << R << ' ' << kappa;
    }
}

TEST(Measures, NuTildeBallMass) {
  const double kappa = 0.7;
  // height-2 spine balls: a vertex with R children
  for (std::size_t R = 1; R <= 6; ++R) {
    const double expected = std::exp(-kappa) * std::pow(kappa, static_cast<double>(R) - 1) / std::tgamma(static_cast<double>(R));
    EXPECT_NEAR(ball_mass(MeasureKind::nu_tilde(kappa), PlanarTree::star(R)), expected, 1e-15);
  }
  EXPECT_THROW(ball_mass(MeasureKind::nu_tilde(kappa), PlanarTree::from_code("()(())")), Error);
}

TEST(Measures, ProfilesMatchEnumeration) {
  for (std::size_t r = 1; r <= 4; ++r) {
    const auto prof = one_sided_profiles(r, 12);
    for (std::size_t n = 1; n <= 12; ++n) {
      std::map<std::size_t, double> counts;
      for_each_tree(n, [&](const PlanarTree& t) {
        if (t.height() == r && is_one_sided(t)) ++counts[level_vertices(t, r).size()];
      });
      for (std::size_t k = 1; k <= 12; ++k) EXPECT_EQ(prof.by_size[n][k], counts[k]) << r << ' ' << n << ' ' << k;
    }
  }
}

TEST(Measures, SumRuleRadiusOne) {
  for (double mu : {-2.0, kMu0, 0.0}) {
    const auto rep = sum_rule_check(MeasureKind::tau(mu), 1, 10);
    EXPECT_DOUBLE_EQ(rep.partial_sum, 1.0);
    EXPECT_TRUE(rep.certified(1e-12));
  }
}

TEST(Measures, SumRuleRadiusTwo) {
  for (double mu : {-2.0, kMu0, 0.0, 1.0}) {
    const auto rep = sum_rule_check(MeasureKind::tau(mu), 2, 160);
    EXPECT_TRUE(rep.monotone);
    EXPECT_LE(rep.partial_sum, 1.0 + 1e-12);
    EXPECT_TRUE(rep.certified(1e-8)) << rep.to_json().dump();
  }
}

TEST(Measures, SumRuleRadiusThree) {
  for (double mu : {-2.0, kMu0, 0.0}) {
    const auto rep = sum_rule_check(MeasureKind::tau(mu), 3, 160);
    EXPECT_TRUE(rep.monotone);
    EXPECT_GE(rep.partial_sum, 0.999);
    EXPECT_TRUE(rep.certified(1e-6)) << rep.to_json().dump();
  }
  EXPECT_THROW(sum_rule_check(MeasureKind::nu(1), 2, 10), Error);
}

TEST(Measures, OneStepConsistency) {
  double prev = 0;
  for (std::size_t cap = 1; cap <= 30; ++cap) {
    const double v = one_step_consistency(MeasureKind::tau_crit(), PlanarTree(), cap);
    EXPECT_GT(v, prev);
    EXPECT_NEAR(v, 1 - std::ldexp(1.0, -static_cast<int>(cap)), 1e-14);
    prev = v;
  }
  for (std::size_t n = 1; n <= 6; ++n)
    for_each_tree(n, [](const PlanarTree& t) {
      if (!is_one_sided(t)) return;
      for (std::size_t cap : {1, 4, 12}) EXPECT_LE(one_step_consistency(MeasureKind::tau(-2), t, cap), 1.0 + 1e-12);
    });
  const double a = one_step_consistency(MeasureKind::tau_super(0), PlanarTree::path(2), 12);
  const double b = one_step_consistency(MeasureKind::tau_super(0), PlanarTree::path(2), 40);
  EXPECT_GT(a, 0.99);
  EXPECT_GT(b, a);
  EXPECT_NEAR(b, 1.0, 1e-8);
}

TEST(Measures, DecompositionPathCentre) {
  const auto rep = decomposition_check(0, BallSpec(PlanarTree::path(2)), {BallSpec(PlanarTree::star(2))}, 10);
  EXPECT_NEAR(rep.monte_carlo, rep.direct, 1e-14);
  EXPECT_TRUE(rep.agree);
}

TEST(Measures, DecompositionTwoBranches) {
  const auto r1 = decomposition_check(0, BallSpec(PlanarTree::star(2)), {BallSpec(PlanarTree::path(2)), BallSpec(PlanarTree::star(2))}, 200000);
  EXPECT_TRUE(r1.agree) << r1.to_json().dump();
  const auto r2 = decomposition_check(0.5, BallSpec(PlanarTree::star(2)), {BallSpec(PlanarTree::path(2)), BallSpec(PlanarTree::path(2))}, 200000);
  EXPECT_TRUE(r2.agree) << r2.to_json().dump();
  EXPECT_THROW(decomposition_check(0, BallSpec(PlanarTree::star(2)), {BallSpec(PlanarTree::path(2)), BallSpec(PlanarTree::path(3))}, 10), Error);
}

TEST(Measures, FiniteBallProbabilitiesMatchEnumeration) {
  const std::size_t N = 9;
  const CountTable t = build_tables(N);
  std::vector<BallSpec> specs;
  for (std::size_t n = 1; n <= 4; ++n) for_each_tree(n, [&](const PlanarTree& s) { specs.emplace_back(s); });
  for (double mu : {-2.0, kMu0, 0.0, 1.0}) {
    const auto probs = finite_ball_probabilities(mu, N, specs, t);
    std::map<std::string, double> weight;
    double total = 0;
    for_each_tree(N, [&](const PlanarTree& tr) {
      if (!is_one_sided(tr)) return;
      const double w = std::exp(-mu * tr.height());
      total += w;
      for (const auto& s : specs)
        if (s.r <= tr.height() && ball(tr, s.r) == s.tree) weight[s.tree.code()] += w;
    });
    for (std::size_t i = 0; i < specs.size(); ++i)
      EXPECT_NEAR(probs[i], weight[specs[i].tree.code()] / total, 1e-13) << mu << ' ' << specs[i].tree.code();
  }
}

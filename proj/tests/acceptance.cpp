// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "onesided/enumeration.hpp"
#include "onesided/experiments.hpp"
#include "onesided/measures.hpp"
#include "onesided/partition.hpp"
#include "onesided/random/samplers.hpp"
#include "onesided/stats.hpp"

using namespace onesided;

namespace {

constexpr std::uint64_t kSeed = 20261015;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const CountTable& big_tables() {
  static const CountTable t = load_or_build_tables(512);
  return t;
}

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const CountTable t = build_tables(12);
  std::size_t mismatches = 0;
  for (std::size_t n = 1; n <= 12; ++n) {
    std::vector<BigInt> by_height(n + 1, 0), one_sided(n + 1, 0);
    BigInt omega = 0;
    for_each_tree(n, [&](const PlanarTree& tr) {
      ++by_height[tr.height()];
      if (is_one_sided(tr)) {
        ++one_sided[tr.height()];
        ++omega;
      }
    });
    BigInt cum = 0;
    for (std::size_t m = 1; m <= n; ++m) {
      cum += by_height[m];
      mismatches += t.a(m, n) != cum;
      mismatches += t.b(m, n) != one_sided[m];
    }
    mismatches += t.omega(n) != omega;
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "mismatches " << mismatches << ", " << secs << " s";
  return {mismatches == 0 && secs < 120, os.str()};
}

Outcome closed_forms() {
  const auto t0 = std::chrono::steady_clock::now();
  const CountTable& t = big_tables();
  double worst = 0;
  unsigned max_bits = 0;
  std::size_t raised = 0, pairs = 0;
  for (std::size_t n = 2; n <= 256; ++n)
    for (std::size_t m = 2; m <= n; ++m) {
      for (bool one_sided : {true, false}) {
        const ClosedFormValue v = one_sided ? closed_B(m, n) : closed_A(m, n);
        const BigFloat exact(one_sided ? t.b(m, n) : t.a(m, n));
        PrecisionScope scope(v.working_bits);
        worst = std::max(worst, static_cast<double>(abs(v.value - exact) / exact));
        max_bits = std::max(max_bits, v.working_bits);
        raised += v.working_bits > 128;
        ++pairs;
      }
    }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "max rel err " << worst << " over " << pairs << " evaluations; " << raised
     << " needed guard bits above 128 (max " << max_bits << "); " << secs << " s";
  return {worst < 1e-10 && secs < 300, os.str()};
}

Outcome sub_pole() {
  const AsymptoticFit f = verify_sub_asymptotics(-2, 100, 400, big_tables());
  std::ostringstream os;
  os << "max |W g^(N+1)/r - 1| " << f.details.at("max_deviation").get<double>() << ", r product "
     << f.details.at("residue_product").get<double>() << " vs extrapolated " << f.details.at("residue_richardson").get<double>()
     << " (rel " << f.rel_err << ")";
  return {f.ok, os.str()};
}

Outcome critical_singularity() {
  const double a = c0_estimate(1e-3), b = c0_estimate(1e-4);
  std::vector<double> eps;
  for (int i = 0; i <= 12; ++i) eps.push_back(std::pow(10.0, -6 + 3.0 * i / 12));
  const AsymptoticFit sing = verify_crit_singularity(eps);
  const AsymptoticFit coef = verify_crit_coefficients(64, 512, big_tables());
  std::ostringstream os;
  os << "c0 " << a << " / " << b << " (diff " << std::fabs(a - b) << "), slope " << sing.fitted << ", ratio "
     << coef.details.at("first_ratio").get<double>() << " -> " << coef.details.at("last_ratio").get<double>()
     << (coef.ok ? " monotone" : " not monotone");
  return {std::fabs(a - b) < 1e-3 && sing.ok && coef.ok, os.str()};
}

Outcome super_fit() {
  bool ok = true;
  std::ostringstream os;
  for (double mu : {0.0, 1.0}) {
    const AsymptoticFit f = verify_super_asymptotics(mu, 128, 512, big_tables());
    os << "mu=" << mu << ": A " << f.fitted << " vs " << f.formula << " (" << 100 * f.rel_err << "%)  ";
    ok = ok && f.ok;
  }
  return {ok, os.str()};
}

Outcome sum_rules() {
  bool ok = true;
  std::ostringstream os;
  for (double mu : {-2.0, kMu0, 0.0}) {
    const MeasureKind k = MeasureKind::tau(mu);
    const SumRuleReport r1 = sum_rule_check(k, 1, 160), r2 = sum_rule_check(k, 2, 160), r3 = sum_rule_check(k, 3, 160);
    const bool pass = r1.certified(1e-8) && r2.certified(1e-8) && r3.partial_sum >= 0.999 && r3.certified(1e-6) &&
                      r1.monotone && r2.monotone && r3.monotone;
    os << format_mu(mu) << ": r3 partial " << std::setprecision(10) << r3.partial_sum << " bound " << std::setprecision(3)
       << r3.deviation() + r3.tail_bound << "  ";
    ok = ok && pass;
  }
  return {ok, os.str()};
}

Outcome sampler_exactness() {
  double min_p = 1;
  std::string worst;
  for (double mu : {-2.0, kMu0, 0.0, 1.0})
    for (std::size_t N = 1; N <= 8; ++N) {
      const CountTable& t = big_tables();
      std::map<std::string, std::size_t> index;
      std::vector<double> probs;
      for_each_tree(N, [&](const PlanarTree& tr) {
        if (!is_one_sided(tr)) return;
        index[tr.code()] = probs.size();
        probs.push_back(std::exp(-mu * tr.height()));
      });
      std::vector<std::uint64_t> counts(probs.size(), 0);
      FiniteSampler fs(mu, N, t);
      for_each_replica(kSeed, mu_key(mu) ^ N, 1'000'000, [&](std::size_t, Rng& rng) {
        ++counts[index.at(fs.uniform_one_sided(fs.draw_height(rng), rng).code())];
      });
      const double p = chi_square_test(counts, probs).p_value;
      if (p < min_p) {
        min_p = p;
        worst = format_mu(mu) + " N=" + std::to_string(N);
      }
    }
  std::ostringstream os;
  os << "min p " << min_p << (worst.empty() ? "" : " at " + worst);
  return {min_p >= 0.01, os.str()};
}

Outcome weak_convergence() {
  bool ok = true;
  std::ostringstream os;
  const auto specs = one_sided_specs(5);
  const std::vector<std::size_t> ns{64, 128, 256};
  for (double mu : {-2.0, kMu0, 0.0}) {
    const ConvergenceReport rep = run_convergence(mu, ns, specs, 3000, kSeed, big_tables());
    std::optional<ConvergenceReport> trend;
    if (phase_of(mu) != Phase::Sub) trend = run_convergence(mu, ns, specs, 100'000, derive_seed(kSeed, {1}), big_tables());
    const ConvergenceCheck chk = check_convergence(rep, trend ? &*trend : nullptr);
    const auto& ex = rep.exact_discrepancy;
    os << format_mu(mu) << ": max|z| " << std::setprecision(3) << chk.details.at("max_abs_z_at_largest_N").get<double>()
       << ", exact " << ex.at(64) << "->" << ex.at(256);
    if (trend) os << ", sq " << trend->empirical_discrepancy.at(64) << "->" << trend->empirical_discrepancy.at(256);
    os << "  ";
    ok = ok && chk.pass;
  }
  return {ok, os.str()};
}

Outcome growth_laws() {
  bool ok = true;
  std::ostringstream os;
  auto judge = [&](double mu, std::size_t r_max, std::size_t replicas) {
    const GrowthReport rep = run_growth({mu}, r_max, replicas, kSeed);
    const GrowthLawCheck chk = check_growth_laws(rep.series.front());
    os << format_mu(mu) << ' ' << chk.details.dump() << "  ";
    ok = ok && chk.pass;
  };
  judge(kMu0, 30, 100'000);
  judge(-2, 64, 10'000);
  judge(0, 64, 10'000);
  return {ok, os.str()};
}

Outcome spine_law() {
  const SpineLawReport rep = run_spine_law(0, 10, 100'000, kSeed);
  std::ostringstream os;
  os << "min level p " << rep.min_p << ", branch p " << rep.branch_test.p_value;
  return {rep.pass(0.01), os.str()};
}

Outcome dimension_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  RunSummary s;
  const int rc = run_all(std::filesystem::path(ONESIDED_SOURCE_DIR) / "manifests" / "default.json", &s);
  const double secs = seconds_since(t0);
  std::ostringstream os;
  bool ok = rc == kExitOk && secs < 1800;
  bool found = false;
  for (const auto& r : s.results) {
    if (r.at("type") == "dimension") {
      found = true;
      ok = ok && r.at("pass").get<bool>();
      for (const auto& e : r.at("estimates")) os << e.at("mu").get<std::string>() << ": " << e.at("d_h").get<double>() << "  ";
    } else if (!r.at("pass").get<bool>()) {
      os << "[" << r.at("name").get<std::string>() << " failed] ";
    }
  }
  os << "manifest exit " << rc << ", " << secs << " s";
  return {ok && found, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"closed formulas", closed_forms},
      {"sub-phase pole", sub_pole},
      {"critical singularity", critical_singularity},
      {"super-phase saddle fit", super_fit},
      {"sum rules", sum_rules},
      {"sampler exactness", sampler_exactness},
      {"weak convergence", weak_convergence},
      {"growth laws", growth_laws},
      {"spine law", spine_law},
      {"dimension ordering", dimension_ordering},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << i + 1 << ' ' << criteria[i].first << ": " << o.detail << " ["
              << std::setprecision(3) << seconds_since(t0) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

#pragma once

// Ball masses of the limit measures and numerical checks of their
// consistency: sum rules over Omega^(r), one-level Kolmogorov consistency
// and the simplex decomposition of the multi-spine measure.
//
// A ball is identified by a finite tree T0 with r = h(T0), K = |D_r(T0)|.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "onesided/enumeration.hpp"
#include "onesided/numeric.hpp"
#include "onesided/partition.hpp"
#include "onesided/random/rng.hpp"
#include "onesided/stats.hpp"
#include "onesided/tree.hpp"

namespace onesided {

struct MeasureKind {
  enum class Tag { TauSub, TauCrit, TauSuper, NuSuper, NuTildeSpine, RhoCritBGW };

  Tag tag = Tag::TauCrit;
  /// mu for the tau and nu kinds, kappa for NuTildeSpine, unused otherwise.
  double param = kMu0;

  static MeasureKind tau(double mu) {
    switch (phase_of(mu)) {
      case Phase::Sub: return {Tag::TauSub, mu};
      case Phase::Crit: return {Tag::TauCrit, kMu0};
      case Phase::Super: return {Tag::TauSuper, mu};
    }
    return {};
  }
  static MeasureKind tau_sub(double mu) { return checked({Tag::TauSub, mu}); }
  static MeasureKind tau_crit() { return {Tag::TauCrit, kMu0}; }
  static MeasureKind tau_super(double mu) { return checked({Tag::TauSuper, mu}); }
  static MeasureKind nu(double mu) { return checked({Tag::NuSuper, mu}); }
  static MeasureKind nu_tilde(double kappa) { return checked({Tag::NuTildeSpine, kappa}); }
  static MeasureKind rho() { return {Tag::RhoCritBGW, 0}; }

  /// Parses "tau" (phase from mu), "tau-sub", "tau-crit", "tau-super",
  /// "nu", "nu-tilde" (param is kappa) and "rho".
  static MeasureKind parse(const std::string& name, double param) {
    if (name == "tau") return tau(param);
    if (name == "tau-sub") return tau_sub(param);
    if (name == "tau-crit") return tau_crit();
    if (name == "tau-super") return tau_super(param);
    if (name == "nu") return nu(param);
    if (name == "nu-tilde") return nu_tilde(param);
    if (name == "rho") return rho();
    throw Error("unknown measure kind: " + name);
  }

  bool is_tau() const { return tag == Tag::TauSub || tag == Tag::TauCrit || tag == Tag::TauSuper; }
  double mu() const { return param; }

  std::string name() const {
    switch (tag) {
      case Tag::TauSub: return "tau-sub";
      case Tag::TauCrit: return "tau-crit";
      case Tag::TauSuper: return "tau-super";
      case Tag::NuSuper: return "nu";
      case Tag::NuTildeSpine: return "nu-tilde";
      case Tag::RhoCritBGW: return "rho";
    }
    return "?";
  }

 private:
  static MeasureKind checked(MeasureKind k) {
    const double p = k.param;
    bool ok = std::isfinite(p);
    switch (k.tag) {
      case Tag::TauSub: ok = ok && phase_of(p) == Phase::Sub; break;
      case Tag::TauSuper: ok = ok && phase_of(p) == Phase::Super; break;
      case Tag::NuSuper:
      case Tag::NuTildeSpine: ok = ok && p > 0; break;
      default: break;
    }
    if (!ok) throw Error("measure kind " + k.name() + " does not accept parameter " + std::to_string(p));
    return k;
  }
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// log sum_{R=1}^{K} binom(K-1, R-1) c^{R-1} / (R-1)!       (shift = 1)
// log sum_{R=1}^{K} binom(K, R) c^{R-1} / (R-1)!           (shift = 0)
inline double log_spine_sum(std::size_t K, double c, bool tau_form) {
  std::vector<double> terms;
  const double n = tau_form ? static_cast<double>(K) - 1 : static_cast<double>(K);
  const double lc = std::log(c);
  for (std::size_t R = 1; R <= K; ++R) {
    const double j = static_cast<double>(R - 1);
    const double k = tau_form ? j : static_cast<double>(R);
    terms.push_back(log_binomial(n, k) + j * lc - std::lgamma(j + 1));
  }
  return log_sum_exp(terms);
}

}  // namespace detail

/// log of the ball mass as a function of (|T0|, K, r) for the tau kinds,
/// nu and rho; all these masses depend on T0 only through these numbers.
inline double log_ball_mass(const MeasureKind& kind, std::size_t size, std::size_t K, std::size_t r) {
  const double n = static_cast<double>(size), k = static_cast<double>(K), rr = static_cast<double>(r);
  const double ln2 = std::numbers::ln2;
  switch (kind.tag) {
    case MeasureKind::Tag::TauSub: {
      const double mu = kind.mu();
      const double gc = critical_g(mu);
      return -mu * (rr - 1) + (n - k) * std::log(gc) + (k - 1) * mu;
    }
    case MeasureKind::Tag::TauCrit: return (k + rr - 2 * n) * ln2;
    case MeasureKind::Tag::TauSuper: {
      const double mu = kind.mu();
      return -mu * (rr - 1) + (k + 1 - 2 * n) * ln2 + detail::log_spine_sum(K, mu + ln2, true);
    }
    case MeasureKind::Tag::NuSuper: {
      const double mu = kind.mu();
      return -mu * (rr - 1) + (k + 1 - 2 * n) * ln2 + detail::log_spine_sum(K, mu, false);
    }
    case MeasureKind::Tag::RhoCritBGW: return (k + 1 - 2 * n) * ln2;
    case MeasureKind::Tag::NuTildeSpine: break;
  }
  throw Error("log_ball_mass: kind " + kind.name() + " needs the tree");
}

inline double ball_mass(const MeasureKind& kind, const BallSpec& spec) {
  if (kind.tag == MeasureKind::Tag::NuTildeSpine) {
    if (!is_spine_ball(spec.tree)) throw Error("ball_mass: nu-tilde requires a spine ball");
    const double kappa = kind.param, R = static_cast<double>(spec.K);
    return std::exp(-(static_cast<double>(spec.r) - 1) * kappa + (R - 1) * std::log(kappa) - std::lgamma(R));
  }
  if (kind.is_tau() && !spec.one_sided) return 0.0;
  return std::exp(log_ball_mass(kind, spec.size(), spec.K, spec.r));
}

inline double ball_mass(const MeasureKind& kind, const PlanarTree& t) { return ball_mass(kind, BallSpec(t)); }

inline double offspring_pmf(const MeasureKind& kind, std::size_t n) {
  switch (kind.tag) {
    case MeasureKind::Tag::TauSub: {
      const double x = std::exp(kind.mu());
      return std::exp(static_cast<double>(n) * kind.mu()) * (1 - x);
    }
    case MeasureKind::Tag::TauCrit:
    case MeasureKind::Tag::RhoCritBGW: return std::ldexp(1.0, -static_cast<int>(n) - 1);
    default: break;
  }
  throw Error("offspring_pmf: no offspring law for kind " + kind.name());
}

inline double rho_mass(const PlanarTree& t) { return 2 * std::pow(4.0, -static_cast<double>(t.size())); }

/// Exact simplex moment (n-1)! prod m_i! / (sum m_i + n - 1)!.
inline Rational simplex_moment(const std::vector<unsigned>& exponents) {
  if (exponents.empty()) throw Error("simplex_moment: need at least one exponent");
  const unsigned n = static_cast<unsigned>(exponents.size());
  BigInt num = factorial(n - 1);
  unsigned total = n - 1;
  for (unsigned m : exponents) {
    num *= factorial(m);
    total += m;
  }
  return Rational(num, factorial(total));
}

/// Partial sum over R' >= R of binom(R'-1, R-1) e^{-kappa} kappa^{R'-R}
/// (R-1)! / (R'-1)!, up to R' = R + terms.
inline BigFloat spine_increment_law_sum(unsigned R, double kappa, unsigned terms, unsigned bits = 256) {
  PrecisionScope scope(bits);
  const BigFloat k(kappa);
  BigFloat sum = 0;
  for (unsigned j = 0; j <= terms; ++j) {
    const unsigned rp = R + j;
    BigFloat t = BigFloat(binomial(rp - 1, R - 1)) * exp(-k) * pow(k, static_cast<long>(j)) *
                 BigFloat(factorial(R - 1)) / BigFloat(factorial(rp - 1));
    sum += t;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Sum rules

/// Number of one-sided level profiles: trees whose level sizes are
/// d_1 = 1, d_2, ..., d_r with the leftmost vertex of every level below r
/// having a child. Profile (d_s) is realised by prod_s binom(d_{s+1}+d_s-2,
/// d_s-1) trees.
struct ProfileSums {
  /// by_size[n][K] = number of one-sided trees of height r, size n, K top
  /// vertices.
  std::vector<std::vector<double>> by_size;
};

inline ProfileSums one_sided_profiles(std::size_t r, std::size_t size_cap) {
  if (r < 1) throw Error("one_sided_profiles: r must be >= 1");
  // cur[d][n]: partial profiles ending with level size d at total size n
  std::vector<std::vector<double>> cur(size_cap + 2, std::vector<double>(size_cap + 1, 0.0));
  if (size_cap >= 1) cur[1][1] = 1;
  for (std::size_t s = 1; s < r; ++s) {
    std::vector<std::vector<double>> nxt(size_cap + 2, std::vector<double>(size_cap + 1, 0.0));
    for (std::size_t d = 1; d <= size_cap; ++d)
      for (std::size_t n = 1; n <= size_cap; ++n) {
        if (cur[d][n] == 0) continue;
        for (std::size_t e = 1; n + e <= size_cap; ++e)
          nxt[e][n + e] += cur[d][n] * std::exp(log_binomial(static_cast<double>(e + d - 2), static_cast<double>(d - 1)));
      }
    cur.swap(nxt);
  }
  ProfileSums out;
  out.by_size.assign(size_cap + 1, std::vector<double>(size_cap + 1, 0.0));
  for (std::size_t d = 1; d <= size_cap; ++d)
    for (std::size_t n = 1; n <= size_cap; ++n) out.by_size[n][d] = std::round(cur[d][n]);
  return out;
}

struct SumRuleReport {
  std::string kind;
  std::size_t r = 0;
  std::size_t size_cap = 0;
  /// partial[n] = mass of trees with |T0| <= n, n = 0..size_cap.
  std::vector<double> partial;
  double partial_sum = 0;
  double tail_estimate = 0;
  /// Conservative bound on the missing tail.
  double tail_bound = 0;
  double extrapolated = 0;
  bool monotone = true;
  bool tail_available = true;
  std::string tail_method;

  double deviation() const { return std::fabs(extrapolated - 1); }
  bool certified(double tol) const { return tail_available && deviation() + tail_bound <= tol; }

  nlohmann::json to_json() const {
    return {{"kind", kind},
            {"r", r},
            {"size_cap", size_cap},
            {"partial_sum", partial_sum},
            {"tail_estimate", tail_estimate},
            {"tail_bound", tail_bound},
            {"extrapolated", extrapolated},
            {"monotone", monotone},
            {"tail_available", tail_available},
            {"tail_method", tail_method}};
  }
};

/// Sums the ball masses of all one-sided T0 of height r with |T0| <=
/// size_cap and estimates the remaining tail. For r <= 2 the increments are
/// geometric (or have monotonically decreasing ratios) and the tail is
/// bounded by a geometric majorant; for r = 3, 4 a geometric fit on the last
/// three partial sums is used with a tenfold safety factor.
inline SumRuleReport sum_rule_check(const MeasureKind& kind, std::size_t r, std::size_t size_cap) {
  if (!kind.is_tau()) throw Error("sum_rule_check: defined for the tau kinds");
  if (r < 1) throw Error("sum_rule_check: r must be >= 1");
  if (size_cap < r) throw Error("sum_rule_check: size_cap below the smallest tree of height r");
  SumRuleReport rep;
  rep.kind = kind.name();
  rep.r = r;
  rep.size_cap = size_cap;
  const ProfileSums prof = one_sided_profiles(r, size_cap);
  rep.partial.assign(size_cap + 1, 0.0);
  std::vector<double> inc(size_cap + 1, 0.0);
  for (std::size_t n = 1; n <= size_cap; ++n) {
    for (std::size_t K = 1; K <= n; ++K)
      if (prof.by_size[n][K] > 0) inc[n] += prof.by_size[n][K] * std::exp(log_ball_mass(kind, n, K, r));
    rep.partial[n] = rep.partial[n - 1] + inc[n];
    if (rep.partial[n] < rep.partial[n - 1]) rep.monotone = false;
  }
  rep.partial_sum = rep.partial[size_cap];
  if (r == 1) {
    rep.tail_method = "none";
  } else if (r == 2) {
    // the next increments come from stars with K = size_cap, size_cap + 1, ...
    const double t1 = std::exp(log_ball_mass(kind, size_cap + 1, size_cap, 2));
    const double t2 = std::exp(log_ball_mass(kind, size_cap + 2, size_cap + 1, 2));
    const double q = t2 / t1;
    if (q >= 1) {
      rep.tail_available = false;
    } else {
      // t1 / (1 - q) majorises the tail when the ratios do not increase;
      // the tail is at least t1
      rep.tail_estimate = t1 / (1 - q);
      rep.tail_bound = rep.tail_estimate - t1;
    }
    rep.tail_method = "geometric-majorant";
  } else {
    const double d1 = inc[size_cap - 1], d2 = inc[size_cap];
    const double q = d1 > 0 ? d2 / d1 : 1.0;
    if (!(q < 1) || size_cap < r + 3) {
      rep.tail_available = false;
    } else {
      rep.tail_estimate = d2 * q / (1 - q);
      rep.tail_bound = 10 * rep.tail_estimate;
    }
    rep.tail_method = "geometric-fit";
  }
  rep.extrapolated = rep.partial_sum + rep.tail_estimate;
  return rep;
}

/// Sum of ball masses over the one-level extensions of t0 in which every
/// top vertex has at most n_cap children, divided by the mass of t0.
inline double one_step_consistency(const MeasureKind& kind, const PlanarTree& t0, std::size_t n_cap) {
  if (!kind.is_tau()) throw Error("one_step_consistency: defined for the tau kinds");
  const BallSpec spec(t0);
  if (!spec.one_sided) throw Error("one_step_consistency: t0 must be one-sided");
  // ways[k]: number of ordered child-count vectors summing to k, the first
  // entry at least 1
  std::vector<double> ways(1, 1.0);
  for (std::size_t i = 0; i < spec.K; ++i) {
    std::vector<double> nxt(ways.size() + n_cap, 0.0);
    for (std::size_t k = 0; k < ways.size(); ++k)
      for (std::size_t c = (i == 0 ? 1 : 0); c <= n_cap; ++c) nxt[k + c] += ways[k];
    ways.swap(nxt);
  }
  const double base = log_ball_mass(kind, spec.size(), spec.K, spec.r);
  double total = 0;
  for (std::size_t k = 1; k < ways.size(); ++k)
    if (ways[k] > 0) total += ways[k] * std::exp(log_ball_mass(kind, spec.size() + k, k, spec.r + 1) - base);
  return total;
}

// ---------------------------------------------------------------------------
// Simplex decomposition of the multi-spine measure

struct DecompositionReport {
  double direct = 0;
  double monte_carlo = 0;
  double stderr_mc = 0;
  double z = 0;
  bool agree = false;

  nlohmann::json to_json() const {
    return {{"direct", direct}, {"monte_carlo", monte_carlo}, {"stderr", stderr_mc}, {"z", z}, {"agree", agree}};
  }
};

/// Compares the multi-spine mass of the ball around T0 with branches
/// T_1..T_K grafted at its top vertices (left to right) against the sum over
/// infinite-branch sets D containing the leftmost top vertex of simplex
/// integrals of tau, nu and rho branch masses. The simplex integrals are
/// estimated by Monte Carlo. All branches must have the same height so that
/// the product of branch balls is itself a ball.
inline DecompositionReport decomposition_check(double mu, const BallSpec& t0, const std::vector<BallSpec>& branches,
                                               std::size_t mc_samples, std::uint64_t seed = 1) {
  if (phase_of(mu) != Phase::Super) throw Error("decomposition_check: requires mu > -ln 2");
  if (!t0.one_sided) throw Error("decomposition_check: t0 must be one-sided");
  if (branches.size() != t0.K) throw Error("decomposition_check: need one branch per top vertex");
  if (mc_samples < 2) throw Error("decomposition_check: need at least two samples");
  const std::uint32_t h = branches.front().r;
  for (const auto& b : branches)
    if (b.r != h) throw Error("decomposition_check: branch heights must agree");
  const std::size_t K = t0.K;
  if (K > 12) throw Error("decomposition_check: too many top vertices");
  const double kappa = mu + std::numbers::ln2;

  DecompositionReport rep;
  std::vector<PlanarTree> trees;
  for (const auto& b : branches) trees.push_back(b.tree);
  rep.direct = ball_mass(MeasureKind::tau_super(mu), BallSpec(graft_at_top(t0.tree, trees)));

  const double prefix = std::exp(-mu * (static_cast<double>(t0.r) - 1) - 2 * static_cast<double>(t0.size()) * std::numbers::ln2 +
                                 (static_cast<double>(K) + 1) * std::numbers::ln2);
  std::vector<double> rho_part(K);
  for (std::size_t i = 0; i < K; ++i) rho_part[i] = ball_mass(MeasureKind::rho(), branches[i]);

  double total_mean = 0, total_var = 0;
  // subsets D of {1..K} containing index 0 (w_r), as bit masks
  for (std::uint32_t mask = 0; mask < (1u << (K - 1)); ++mask) {
    std::vector<std::size_t> in_d{0};
    double fixed = 1;
    for (std::size_t i = 1; i < K; ++i) {
      if (mask & (1u << (i - 1)))
        in_d.push_back(i);
      else
        fixed *= rho_part[i];
    }
    const std::size_t n = in_d.size();
    const double weight = prefix * std::pow(kappa, static_cast<double>(n - 1)) / std::tgamma(static_cast<double>(n));
    if (fixed == 0 || !branches[0].one_sided) continue;
    auto integrand = [&](const std::vector<double>& coords) {
      double v = ball_mass(MeasureKind::tau_super(coords[0] - std::numbers::ln2), branches[0]);
      for (std::size_t j = 1; j < n; ++j) v *= ball_mass(MeasureKind::nu(coords[j]), branches[in_d[j]]);
      return v;
    };
    if (n == 1) {
      total_mean += weight * fixed * integrand({kappa});
      continue;
    }
    RunningStats st;
    Rng rng = make_rng(seed, {mask});
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> coords(n);
    for (std::size_t s = 0; s < mc_samples; ++s) {
      double sum = 0;
      for (auto& c : coords) sum += (c = expo(rng));
      for (auto& c : coords) c = kappa * c / sum;
      // boundary points have measure zero; keep all coordinates positive
      bool interior = true;
      for (double c : coords) interior = interior && c > 0;
      st.add(interior ? integrand(coords) : 0.0);
    }
    total_mean += weight * fixed * st.mean();
    total_var += std::pow(weight * fixed * st.stderr_mean(), 2);
  }
  rep.monte_carlo = total_mean;
  rep.stderr_mc = std::sqrt(total_var);
  const double diff = std::fabs(rep.direct - rep.monte_carlo);
  rep.z = rep.stderr_mc > 0 ? diff / rep.stderr_mc : (diff == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  rep.agree = diff <= 3 * rep.stderr_mc + 1e-12 * std::max(1.0, rep.direct);
  return rep;
}

// ---------------------------------------------------------------------------
// Finite-N ball probabilities

/// Exact probability under the size-N one-sided ensemble that the ball of
/// radius r = h(T0) equals T0:
///   e^{-mu(r-1)} sum_m e^{-mu m} [g^{N-|T0|+K}] Y_m X_m^{K-1} / W_N.
/// Evaluates all specs in one pass; specs that are not one-sided get 0.
inline std::vector<double> finite_ball_probabilities(double mu, std::size_t N, const std::vector<BallSpec>& specs,
                                                     const CountTable& t, unsigned bits = 256) {
  if (N > t.n_max()) throw Error("finite_ball_probabilities: N beyond table bound");
  PrecisionScope scope(bits);
  std::size_t kmax = 1;
  for (const auto& s : specs) kmax = std::max(kmax, s.K);
  // acc[K][n] = sum_m e^{-mu m} [g^n] Y_m X_m^{K-1}
  std::vector<std::vector<BigFloat>> acc(kmax + 1, std::vector<BigFloat>(N + 1, BigFloat(0)));
  for (std::size_t m = 1; m <= N; ++m) {
    const BigFloat w = coupling_weight(mu, m);
    std::vector<BigInt> x(N + 1), y(N + 1);
    for (std::size_t n = 0; n <= N; ++n) {
      x[n] = t.a(m, n);
      y[n] = t.b(m, n);
    }
    x[0] = 0;
    std::vector<BigInt> prod = y;  // Y_m X_m^{K-1}
    for (std::size_t K = 1; K <= kmax; ++K) {
      if (K > 1) {
        std::vector<BigInt> next(N + 1);
        for (std::size_t i = 0; i <= N; ++i) {
          if (prod[i] == 0) continue;
          for (std::size_t j = 1; i + j <= N; ++j) next[i + j] += prod[i] * x[j];
        }
        prod.swap(next);
      }
      for (std::size_t n = 0; n <= N; ++n)
        if (prod[n] != 0) acc[K][n] += w * BigFloat(prod[n]);
    }
  }
  const BigFloat W = partition_W(mu, N, t, bits);
  std::vector<double> out;
  for (const auto& s : specs) {
    if (!s.one_sided || s.size() > N) {
      out.push_back(s.one_sided && s.size() == N ? 1.0 : 0.0);
      continue;
    }
    const std::size_t n = N - s.size() + s.K;
    const BigFloat p = acc[s.K][n] * coupling_weight(mu, s.r - 1) / W;
    out.push_back(static_cast<double>(p));
  }
  return out;
}

}  // namespace onesided

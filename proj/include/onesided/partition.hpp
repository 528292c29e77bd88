#pragma once

// Partition functions of the height-coupled ensembles and their large-N
// behaviour in the three phases.
//
//   W_N(mu) = sum_m e^{-mu m} B(m, N)     (one-sided trees)
//   Z_N(mu) = sum_m e^{-mu m} A=(m, N)    (all trees, height exactly m)

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "onesided/enumeration.hpp"
#include "onesided/numeric.hpp"
#include "onesided/stats.hpp"

namespace onesided {

enum class Phase { Sub, Crit, Super };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Sub: return "sub";
    case Phase::Crit: return "crit";
    case Phase::Super: return "super";
  }
  return "?";
}

/// Couplings within this distance of -ln 2 are treated as critical, so that
/// the exact weights 2^m are used there.
inline constexpr double kCriticalTolerance = 1e-12;

inline bool is_critical(double mu) { return std::fabs(mu - kMu0) <= kCriticalTolerance; }

inline Phase phase_of(double mu) {
  if (is_critical(mu)) return Phase::Crit;
  return mu < kMu0 ? Phase::Sub : Phase::Super;
}

/// Radius of convergence of the one-sided partition-function series.
inline double critical_g(double mu) {
  if (phase_of(mu) == Phase::Super) return 0.25;
  if (is_critical(mu)) return 0.25;
  const double e = std::exp(mu);
  return e * (1 - e);
}

struct PhaseParams {
  double mu = 0;
  Phase phase = Phase::Super;
  double g_c = 0.25;
  /// mu + ln 2; the spine coupling in the multi-spine phase.
  double kappa = 0;
  /// Mean offspring X(g_c) / (1 - X(g_c)); sub-critical phase only.
  double mean_offspring = std::numeric_limits<double>::quiet_NaN();
  /// Saddle constants of the stretched-exponential law; multi-spine only.
  double saddle_A = std::numeric_limits<double>::quiet_NaN();
  double saddle_B = std::numeric_limits<double>::quiet_NaN();

  explicit PhaseParams(double coupling) : mu(coupling), phase(phase_of(coupling)), g_c(critical_g(coupling)) {
    kappa = mu + std::numbers::ln2;
    if (phase == Phase::Sub) {
      const double x = tree_gf(g_c);
      mean_offspring = x / (1 - x);
    } else if (phase == Phase::Crit) {
      mean_offspring = 1;
    } else {
      saddle_A = 3 * std::pow(std::numbers::pi * kappa / 2, 2.0 / 3.0);
      saddle_B = 3 * std::pow(kappa * kappa / (4 * std::numbers::pi), 2.0 / 3.0);
    }
  }
};

/// e^{-mu m} in the current precision; exactly 2^m at the critical point.
inline BigFloat coupling_weight(double mu, std::size_t m) {
  if (is_critical(mu)) {
    BigFloat w = 1;
    mpfr_mul_2ui(w.backend().data(), w.backend().data(), m, MPFR_RNDN);
    return w;
  }
  return exp(BigFloat(-mu) * static_cast<long>(m));
}

inline BigFloat partition_W(double mu, std::size_t N, const CountTable& t, unsigned bits = 256) {
  if (N < 1) throw Error("partition_W: N must be >= 1");
  if (N > t.n_max()) throw Error("partition_W: N beyond table bound");
  PrecisionScope scope(bits);
  BigFloat w = 0;
  for (std::size_t m = 1; m <= N; ++m)
    if (t.b(m, N) != 0) w += coupling_weight(mu, m) * BigFloat(t.b(m, N));
  return w;
}

inline BigFloat partition_Z(double mu, std::size_t N, const CountTable& t, unsigned bits = 256) {
  if (N < 1) throw Error("partition_Z: N must be >= 1");
  if (N > t.n_max()) throw Error("partition_Z: N beyond table bound");
  PrecisionScope scope(bits);
  BigFloat z = 0;
  for (std::size_t m = 1; m <= N; ++m) {
    BigInt c = t.a_exact(m, N);
    if (c != 0) z += coupling_weight(mu, m) * BigFloat(c);
  }
  return z;
}

inline double log_partition_W(double mu, std::size_t N, const CountTable& t) { return log_of(partition_W(mu, N, t)); }

// ---------------------------------------------------------------------------
// Single-spine phase: simple pole at g_c

struct ResidueEstimate {
  double value = 0;
  /// |r(m_max) - r(2 m_max)| / r.
  double doubling_change = 0;
  /// Observed ratio of successive log-factors in the product tail.
  double tail_ratio = 0;
  bool converged = false;
};

namespace detail {

// r = f(g_c) / (e^{-mu} X'(g_c)) with the product for f truncated after
// `terms` factors.
inline BigFloat residue_product(double mu, std::size_t terms, std::vector<double>* log_factors = nullptr) {
  const BigFloat e = exp(BigFloat(mu));
  const BigFloat g = e * (1 - e);
  const BigFloat x = tree_gf(g);
  BigFloat f = 1 - x;
  BigFloat xl = 0;
  for (std::size_t l = 1; l <= terms; ++l) {
    xl = g / (1 - xl);
    BigFloat factor = (1 - x) / (1 - xl);
    if (log_factors) log_factors->push_back(std::fabs(static_cast<double>(log(factor))));
    f *= factor;
  }
  const BigFloat dx = 1 / sqrt(1 - 4 * g);
  return f / (exp(BigFloat(-mu)) * dx);
}

}  // namespace detail

/// Residue of -W(g) at g_c for mu < mu0 from the analytic product formula.
inline ResidueEstimate residue_r(double mu, std::size_t m_max = 40) {
  if (phase_of(mu) != Phase::Sub) throw Error("residue_r: requires mu < -ln 2");
  if (m_max < 20) throw Error("residue_r: m_max must be >= 20");
  PrecisionScope scope(192);
  std::vector<double> logs;
  BigFloat r1 = detail::residue_product(mu, m_max, &logs);
  BigFloat r2 = detail::residue_product(mu, 2 * m_max);
  ResidueEstimate out;
  out.value = static_cast<double>(r1);
  out.doubling_change = static_cast<double>(abs(r1 - r2) / r2);
  // the factors approach 1 geometrically; estimate the ratio from the
  // stretch where they are still well above rounding level
  std::vector<double> ratios;
  for (std::size_t i = 1; i < logs.size(); ++i)
    if (logs[i] > 1e-40 && logs[i - 1] > 1e-40) ratios.push_back(logs[i] / logs[i - 1]);
  out.tail_ratio = ratios.empty() ? 0.0 : ratios.back();
  bool geometric = !ratios.empty() && out.tail_ratio < 1;
  if (ratios.size() >= 3) {
    const double a = ratios[ratios.size() - 1], b = ratios[ratios.size() - 3];
    geometric = geometric && std::fabs(a - b) < 0.05 * std::max(a, 1e-3) + 1e-6;
  }
  out.converged = (geometric || ratios.empty()) && out.doubling_change < 1e-10;
  return out;
}

/// Residue from the coefficients: Aitken's delta-squared extrapolation of
/// s_N = W_N g_c^{N+1} at the top of [n_lo, n_hi].
inline double residue_from_coefficients(double mu, const CountTable& t, std::size_t n_lo, std::size_t n_hi) {
  if (phase_of(mu) != Phase::Sub) throw Error("residue_from_coefficients: requires mu < -ln 2");
  if (n_hi > t.n_max() || n_lo + 2 > n_hi) throw Error("residue_from_coefficients: bad N range");
  PrecisionScope scope(512);
  const BigFloat e = exp(BigFloat(mu));
  const BigFloat g = e * (1 - e);
  auto s = [&](std::size_t n) {
    BigFloat w = partition_W(mu, n, t, 512);
    return w * pow(g, static_cast<long>(n + 1));
  };
  BigFloat s0 = s(n_hi - 2), s1 = s(n_hi - 1), s2 = s(n_hi);
  BigFloat denom = s2 - 2 * s1 + s0;
  if (denom == 0) return static_cast<double>(s2);
  return static_cast<double>(s2 - (s2 - s1) * (s2 - s1) / denom);
}

struct AsymptoticFit {
  std::string regime;
  double fitted = 0;
  double formula = std::numeric_limits<double>::quiet_NaN();
  double rel_err = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const {
    nlohmann::json j = {{"regime", regime}, {"fitted", fitted}, {"formula", formula},
                        {"rel_err", rel_err}, {"r2", r2}, {"ok", ok}};
    j["details"] = details;
    return j;
  }
};

/// Compares W_N against r g_c^{-(N+1)} over [n_lo, n_hi] and fits the
/// exponential decay rate of the correction.
inline AsymptoticFit verify_sub_asymptotics(double mu, std::size_t n_lo, std::size_t n_hi, const CountTable& t) {
  if (phase_of(mu) != Phase::Sub) throw Error("verify_sub_asymptotics: requires mu < -ln 2");
  if (n_hi > t.n_max() || n_lo > n_hi || n_lo < 1) throw Error("verify_sub_asymptotics: bad N range");
  const unsigned bits = 640;
  PrecisionScope scope(bits);
  const ResidueEstimate prod = residue_r(mu);
  const double rich = residue_from_coefficients(mu, t, std::max<std::size_t>(n_lo, 3), n_hi);
  // higher-precision residue for resolving tiny corrections
  BigFloat r_hp = detail::residue_product(mu, 400);
  const BigFloat e = exp(BigFloat(mu));
  const BigFloat g = e * (1 - e);
  double max_dev = 0;
  std::vector<double> ns, logs;
  for (std::size_t n = n_lo; n <= n_hi; ++n) {
    BigFloat s = partition_W(mu, n, t, bits) * pow(g, static_cast<long>(n + 1));
    BigFloat dev = abs(s / r_hp - 1);
    const double d = static_cast<double>(dev);
    max_dev = std::max(max_dev, d);
    if (dev > 0 && log_of(dev) > -static_cast<double>(bits - 60) * std::numbers::ln2) {
      ns.push_back(static_cast<double>(n));
      logs.push_back(log_of(dev));
    }
  }
  AsymptoticFit fit;
  fit.regime = "sub";
  fit.fitted = rich;
  fit.formula = prod.value;
  fit.rel_err = std::fabs(rich - prod.value) / prod.value;
  fit.details["residue_product"] = prod.value;
  fit.details["residue_richardson"] = rich;
  fit.details["product_converged"] = prod.converged;
  fit.details["max_deviation"] = max_dev;
  fit.details["n_min"] = n_lo;
  fit.details["n_max"] = n_hi;
  fit.details["g_c"] = critical_g(mu);
  if (ns.size() >= 3) {
    LinearFit lf = linear_regression(ns, logs);
    fit.r2 = lf.r2;
    fit.details["decay_rate"] = -lf.slope;
    fit.details["fit_points"] = ns.size();
  }
  fit.ok = prod.converged && max_dev < 1e-2 && fit.rel_err < 1e-6;
  return fit;
}

// ---------------------------------------------------------------------------
// Critical point: logarithmic singularity

struct CriticalSeriesValue {
  long double value = 0;
  std::size_t terms = 0;
  bool truncated = false;
};

/// W(g) at mu = -ln 2, i.e. sum_m 2^m Y_m(g), summed until ten consecutive
/// terms contribute less than 1e-14 relative.
inline CriticalSeriesValue critical_series(long double g, std::size_t max_terms = 50'000'000) {
  if (!(g > 0) || g >= 0.25L) throw Error("critical_series: g must lie in (0, 1/4)");
  CriticalSeriesValue out;
  long double x = 0, term = 1, sum = 0;
  int quiet = 0;
  for (std::size_t m = 1; m <= max_terms; ++m) {
    x = g / (1 - x);
    term *= 2 * x;
    sum += term;
    out.terms = m;
    if (term < 1e-14L * sum) {
      if (++quiet >= 10) break;
    } else {
      quiet = 0;
    }
  }
  out.value = sum;
  out.truncated = quiet < 10;
  return out;
}

/// 2^m Y_m(g) through z = sqrt(1 - 4g): z / D_m(z) with
/// D_m(z) = (1+z)/2 (1-z)^{-m} - (1-z)/2 (1+z)^{-m}.
inline long double critical_term_closed(std::size_t m, long double z) {
  const long double md = static_cast<long double>(m);
  const long double d = (1 + z) / 2 * std::pow(1 - z, -md) - (1 - z) / 2 * std::pow(1 + z, -md);
  return z / d;
}

/// W + (1/2) ln(1 - 4g) at g = 1/4 - eps.
inline long double critical_offset(long double eps) {
  const long double g = 0.25L - eps;
  return critical_series(g).value + 0.5L * std::log(4 * eps);
}

/// Estimate of the constant c0 at scale eps: the offset is evaluated on the
/// ladder eps, eps/4, eps/16 (z halves at each step) and the O(z) and O(z^2)
/// corrections are removed by two Richardson steps.
inline double c0_estimate(double eps) {
  const long double f0 = critical_offset(eps), f1 = critical_offset(eps / 4), f2 = critical_offset(eps / 16);
  const long double r1 = 2 * f1 - f0, r2 = 2 * f2 - f1;
  return static_cast<double>((4 * r2 - r1) / 3);
}

/// Evaluates W at g = 1/4 - eps for each eps, estimates c0 at each scale and
/// regresses W on -(1/2) ln(1 - 4g).
inline AsymptoticFit verify_crit_singularity(const std::vector<double>& epsilons) {
  if (epsilons.size() < 2) throw Error("verify_crit_singularity: need at least two epsilons");
  AsymptoticFit fit;
  fit.regime = "crit-singularity";
  std::vector<double> xs, ws, c0s;
  bool truncated = false;
  nlohmann::json rows = nlohmann::json::array();
  for (double eps : epsilons) {
    if (!(eps > 0) || eps >= 0.25) throw Error("verify_crit_singularity: eps out of range");
    CriticalSeriesValue v = critical_series(0.25L - eps);
    truncated = truncated || v.truncated;
    const double lead = -0.5 * std::log(4 * eps);
    const double c0 = c0_estimate(eps);
    xs.push_back(lead);
    ws.push_back(static_cast<double>(v.value));
    c0s.push_back(c0);
    rows.push_back({{"eps", eps}, {"W", static_cast<double>(v.value)}, {"raw_offset", static_cast<double>(v.value) - lead},
                    {"c0_estimate", c0}, {"terms", v.terms}});
  }
  LinearFit lf = linear_regression(xs, ws);
  double spread = 0;
  for (double c : c0s) spread = std::max(spread, std::fabs(c - c0s.front()));
  fit.fitted = lf.slope;
  fit.formula = 1.0;
  fit.rel_err = std::fabs(lf.slope - 1.0);
  fit.r2 = lf.r2;
  fit.details["points"] = rows;
  fit.details["c0"] = c0s.back();
  fit.details["c0_spread"] = spread;
  fit.details["truncated"] = truncated;
  fit.ok = !truncated && fit.rel_err < 0.02;
  return fit;
}

/// Sequence W_N 2N / 4^N over [n_lo, n_hi] and whether it decreases
/// monotonically while staying above 1.
inline AsymptoticFit verify_crit_coefficients(std::size_t n_lo, std::size_t n_hi, const CountTable& t) {
  if (n_hi > t.n_max() || n_lo > n_hi || n_lo < 1) throw Error("verify_crit_coefficients: bad N range");
  AsymptoticFit fit;
  fit.regime = "crit-coefficients";
  std::vector<double> ratios;
  for (std::size_t n = n_lo; n <= n_hi; ++n) {
    PrecisionScope scope(256);
    BigFloat w = partition_W(kMu0, n, t);
    BigFloat q = w * 2 * static_cast<long>(n);
    mpfr_div_2ui(q.backend().data(), q.backend().data(), 2 * n, MPFR_RNDN);
    ratios.push_back(static_cast<double>(q));
  }
  bool monotone = true, above = true;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    above = above && ratios[i] > 1;
    if (i > 0) monotone = monotone && ratios[i] < ratios[i - 1];
  }
  fit.fitted = ratios.back();
  fit.formula = 1.0;
  fit.rel_err = std::fabs(ratios.back() - 1);
  fit.details["first_ratio"] = ratios.front();
  fit.details["last_ratio"] = ratios.back();
  fit.details["monotone_decreasing"] = monotone;
  fit.details["above_one"] = above;
  fit.ok = monotone && above;
  return fit;
}

// ---------------------------------------------------------------------------
// Multi-spine phase: stretched exponential

/// Fits ln(W_N / 4^N) + (5/6) ln N = c - A N^{1/3} over [n_lo, n_hi] and
/// compares A and e^c with the saddle-point constants.
inline AsymptoticFit verify_super_asymptotics(double mu, std::size_t n_lo, std::size_t n_hi, const CountTable& t) {
  if (phase_of(mu) != Phase::Super) throw Error("verify_super_asymptotics: requires mu > -ln 2");
  if (n_hi > t.n_max() || n_lo > n_hi || n_lo < 2) throw Error("verify_super_asymptotics: bad N range");
  const PhaseParams pp(mu);
  AsymptoticFit fit;
  fit.regime = "super";
  std::vector<double> xs, ys;
  double prev = std::numeric_limits<double>::infinity();
  bool decreasing = true;
  for (std::size_t n = n_lo; n <= n_hi; ++n) {
    const double lw = log_partition_W(mu, n, t) - static_cast<double>(n) * std::log(4.0);
    decreasing = decreasing && lw < prev;
    prev = lw;
    xs.push_back(std::cbrt(static_cast<double>(n)));
    ys.push_back(lw + 5.0 / 6.0 * std::log(static_cast<double>(n)));
  }
  const bool well_conditioned = xs.back() / xs.front() >= 1.5;
  LinearFit lf = linear_regression(xs, ys);
  const double pref_formula = 4 * std::exp(mu) * std::sqrt(std::numbers::pi / pp.saddle_B) * pp.kappa / 2;
  fit.fitted = -lf.slope;
  fit.formula = pp.saddle_A;
  fit.rel_err = std::fabs(fit.fitted - fit.formula) / fit.formula;
  fit.r2 = lf.r2;
  fit.details["prefactor_fitted"] = std::exp(lf.intercept);
  fit.details["prefactor_formula"] = pref_formula;
  fit.details["B_formula"] = pp.saddle_B;
  fit.details["log_ratio_decreasing"] = decreasing;
  fit.details["well_conditioned"] = well_conditioned;
  fit.details["saddle_t0"] = std::cbrt(2 * std::numbers::pi * std::numbers::pi * static_cast<double>(n_hi) / pp.kappa);
  // the dominant height at n_hi, for comparison with t0 - 1
  {
    PrecisionScope scope(256);
    std::size_t best = 1;
    BigFloat best_w = 0;
    for (std::size_t m = 1; m <= n_hi; ++m) {
      BigFloat w = coupling_weight(mu, m) * BigFloat(t.b(m, n_hi));
      if (w > best_w) {
        best_w = w;
        best = m;
      }
    }
    fit.details["dominant_height"] = best;
  }
  fit.ok = well_conditioned && fit.rel_err < 0.05;
  return fit;
}

}  // namespace onesided

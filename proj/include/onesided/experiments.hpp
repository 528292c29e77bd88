#pragma once

// Experiment harness: volume growth, convergence of ball frequencies,
// growth-exponent estimates, and a manifest runner that writes CSV and JSON
// artifacts.

#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "onesided/enumeration.hpp"
#include "onesided/measures.hpp"
#include "onesided/partition.hpp"
#include "onesided/random/rng.hpp"
#include "onesided/random/samplers.hpp"
#include "onesided/stats.hpp"
#include "onesided/tree.hpp"

namespace onesided {

/// Manifest could not be parsed or is inconsistent.
class ManifestError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::size_t kReplicaBlock = 1000;
inline constexpr std::size_t kMinReplicas = 100;

inline std::uint64_t mu_key(double mu) { return std::bit_cast<std::uint64_t>(is_critical(mu) ? kMu0 : mu); }

inline std::string format_mu(double mu) {
  if (is_critical(mu)) return "mu0";
  std::ostringstream os;
  os << std::setprecision(10) << mu;
  return os.str();
}

/// Runs `replicas` draws in blocks with independent sub-streams
/// (seed, mu, block); results do not depend on how blocks are scheduled.
template <class Body>
void for_each_replica(std::uint64_t seed, std::uint64_t key, std::size_t replicas, Body&& body) {
  for (std::size_t block = 0; block * kReplicaBlock < replicas; ++block) {
    Rng rng = make_rng(seed, {key, block});
    const std::size_t end = std::min(replicas, (block + 1) * kReplicaBlock);
    for (std::size_t i = block * kReplicaBlock; i < end; ++i) body(i, rng);
  }
}

// ---------------------------------------------------------------------------
// Growth

struct GrowthCell {
  double mu = 0;
  std::size_t r = 0;
  RunningStats D;
  RunningStats B;
};

struct GrowthSeries {
  double mu = 0;
  std::vector<GrowthCell> cells;  // r = 0..r_max
  std::size_t window_lo = 0;
  std::size_t window_hi = 0;
  LinearFit exponent;             // log E|B_r| against log r
  std::size_t discarded = 0;
};

struct GrowthReport {
  std::vector<GrowthSeries> series;
  std::size_t r_max = 0;
  std::size_t replicas = 0;
  std::uint64_t seed = 0;

  void write_csv(std::ostream& os, const std::string& tables_id = "-") const {
    os << "mu,r,mean_D,ci_lo_D,ci_hi_D,mean_B,ci_lo_B,ci_hi_B,seed,replicas,tables_id\n";
    os << std::setprecision(12);
    for (const auto& s : series)
      for (const auto& c : s.cells) {
        const double hd = 1.96 * c.D.stderr_mean(), hb = 1.96 * c.B.stderr_mean();
        os << format_mu(s.mu) << ',' << c.r << ',' << c.D.mean() << ',' << c.D.mean() - hd << ',' << c.D.mean() + hd << ','
           << c.B.mean() << ',' << c.B.mean() - hb << ',' << c.B.mean() + hb << ',' << seed << ',' << replicas << ','
           << tables_id << '\n';
      }
  }
};

inline GrowthReport run_growth(const std::vector<double>& mu_grid, std::size_t r_max, std::size_t replicas,
                               std::uint64_t seed, std::size_t window_lo = 8) {
  if (mu_grid.empty()) throw Error("run_growth: empty mu grid");
  if (replicas < kMinReplicas) throw Error("run_growth: need at least 100 replicas for confidence intervals");
  if (r_max < 2) throw Error("run_growth: r_max must be >= 2");
  GrowthReport rep;
  rep.r_max = r_max;
  rep.replicas = replicas;
  rep.seed = seed;
  for (double mu : mu_grid) {
    GrowthSeries s;
    s.mu = mu;
    s.cells.resize(r_max + 1);
    for (std::size_t r = 0; r <= r_max; ++r) {
      s.cells[r].mu = mu;
      s.cells[r].r = r;
    }
    LimitOptions opt;
    opt.r_max = r_max;
    opt.keep_tree = false;
    DiscardCounter dc;
    for_each_replica(seed, mu_key(mu), replicas, [&](std::size_t, Rng& rng) {
      const SampleRecord rec = sample_limit(mu, opt, rng, &dc);
      for (std::size_t r = 0; r <= r_max; ++r) {
        s.cells[r].D.add(static_cast<double>(rec.levels[r]));
        s.cells[r].B.add(static_cast<double>(rec.volumes[r]));
      }
    });
    s.discarded = dc.discarded;
    s.window_lo = std::min(window_lo, r_max / 2);
    s.window_hi = r_max;
    std::vector<double> x, y;
    for (std::size_t r = s.window_lo; r <= s.window_hi; ++r) {
      x.push_back(std::log(static_cast<double>(r)));
      y.push_back(std::log(s.cells[r].B.mean()));
    }
    s.exponent = linear_regression(x, y);
    rep.series.push_back(std::move(s));
  }
  return rep;
}

struct GrowthLawCheck {
  bool pass = true;
  nlohmann::json details = nlohmann::json::object();
};

/// Phase-wise laws for E|D_r|: exactly r at the critical point (3 sigma per
/// radius up to 30), a plateau at 1/(1-m) within 5% below it, and
/// E|D_r| / (kappa r^2) within 15% of 1 at the largest radius above it,
/// closer to 1 there than at the start of the window.
inline GrowthLawCheck check_growth_laws(const GrowthSeries& s) {
  GrowthLawCheck out;
  const PhaseParams pp(s.mu);
  const std::size_t r_max = s.cells.size() - 1;
  out.details["mu"] = format_mu(s.mu);
  out.details["phase"] = to_string(pp.phase);
  if (pp.phase == Phase::Crit) {
    double worst = 0;
    for (std::size_t r = 1; r <= std::min<std::size_t>(r_max, 30); ++r) {
      const auto& c = s.cells[r].D;
      const double z = std::fabs(c.mean() - static_cast<double>(r)) / c.stderr_mean();
      worst = std::max(worst, z);
    }
    out.details["max_abs_z"] = worst;
    out.pass = worst <= 3;
  } else if (pp.phase == Phase::Sub) {
    const double plateau = 1 / (1 - pp.mean_offspring);
    double worst = 0;
    for (std::size_t r = std::min<std::size_t>(10, r_max); r <= r_max; ++r)
      worst = std::max(worst, std::fabs(s.cells[r].D.mean() / plateau - 1));
    out.details["plateau"] = plateau;
    out.details["observed_at_r_max"] = s.cells[r_max].D.mean();
    out.details["max_rel_dev"] = worst;
    out.pass = worst <= 0.05;
  } else {
    auto ratio = [&](std::size_t r) { return s.cells[r].D.mean() / (pp.kappa * static_cast<double>(r * r)); };
    const std::size_t lo = s.window_lo;
    const double at_hi = ratio(r_max), at_lo = ratio(lo);
    out.details["ratio_at_r_max"] = at_hi;
    out.details["ratio_at_window_start"] = at_lo;
    out.details["window_start"] = lo;
    out.details["ratio_stderr_at_r_max"] = s.cells[r_max].D.stderr_mean() / (pp.kappa * static_cast<double>(r_max * r_max));
    out.pass = std::fabs(at_hi - 1) <= 0.15 && std::fabs(at_hi - 1) < std::fabs(at_lo - 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence of ball frequencies

struct ConvergenceRow {
  std::size_t N = 0;
  std::string code;
  std::size_t r = 0;
  std::size_t K = 0;
  std::uint64_t hits = 0;
  double frequency = 0;
  double stderr_freq = 0;
  double limit = 0;
  double exact = 0;
  double z = 0;
};

struct ConvergenceReport {
  double mu = 0;
  std::size_t replicas = 0;
  std::uint64_t seed = 0;
  std::string tables_id;
  std::vector<ConvergenceRow> rows;
  /// Per N: max |exact - limit|, sum |frequency - limit|, and the
  /// unbiased estimate of sum (P_N - limit)^2 obtained by subtracting the
  /// binomial variance f(1-f)/(n-1) from each squared deviation.
  std::map<std::size_t, double> exact_discrepancy;
  std::map<std::size_t, double> empirical_l1;
  std::map<std::size_t, double> empirical_discrepancy;

  void write_csv(std::ostream& os) const {
    os << "mu,N,code,r,K,hits,frequency,stderr,limit,exact,z,seed,replicas,tables_id\n";
    os << std::setprecision(12);
    for (const auto& r : rows)
      os << format_mu(mu) << ',' << r.N << ",\"" << r.code << "\"," << r.r << ',' << r.K << ',' << r.hits << ','
         << r.frequency << ',' << r.stderr_freq << ',' << r.limit << ',' << r.exact << ',' << r.z << ',' << seed << ','
         << replicas << ',' << tables_id << '\n';
  }
};

/// All one-sided trees with at most max_size edges.
inline std::vector<BallSpec> one_sided_specs(std::size_t max_size) {
  std::vector<BallSpec> out;
  for (std::size_t n = 1; n <= max_size; ++n)
    for_each_tree(n, [&](const PlanarTree& t) {
      if (is_one_sided(t)) out.emplace_back(t);
    });
  return out;
}

inline ConvergenceReport run_convergence(double mu, const std::vector<std::size_t>& n_list,
                                         const std::vector<BallSpec>& specs, std::size_t replicas, std::uint64_t seed,
                                         const CountTable& t) {
  if (n_list.empty() || specs.empty()) throw Error("run_convergence: empty grid");
  const MeasureKind kind = MeasureKind::tau(mu);
  ConvergenceReport rep;
  rep.mu = mu;
  rep.replicas = replicas;
  rep.seed = seed;
  rep.tables_id = t.id();
  std::uint32_t r_top = 1;
  for (const auto& s : specs) r_top = std::max(r_top, s.r);
  for (std::size_t N : n_list) {
    FiniteSampler sampler(mu, N, t);
    std::map<std::string, std::uint64_t> hits;
    for_each_replica(seed, mu_key(mu) ^ (static_cast<std::uint64_t>(N) << 1), replicas, [&](std::size_t, Rng& rng) {
      const PlanarTree tree = sampler.uniform_one_sided(sampler.draw_height(rng), rng);
      for (std::uint32_t r = 1; r <= r_top; ++r) {
        if (tree.height() < r) break;
        ++hits[std::to_string(r) + ":" + ball(tree, r).code()];
      }
    });
    const std::vector<double> exact = finite_ball_probabilities(mu, N, specs, t);
    double max_exact = 0, l1 = 0, sq = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      ConvergenceRow row;
      row.N = N;
      row.code = specs[i].tree.code();
      row.r = specs[i].r;
      row.K = specs[i].K;
      row.hits = hits[std::to_string(row.r) + ":" + row.code];
      row.frequency = static_cast<double>(row.hits) / static_cast<double>(replicas);
      row.limit = ball_mass(kind, specs[i]);
      row.exact = exact[i];
      row.stderr_freq = std::sqrt(row.limit * (1 - row.limit) / static_cast<double>(replicas));
      const double diff = row.frequency - row.limit;
      row.z = row.stderr_freq > 0 ? diff / row.stderr_freq : (diff == 0 ? 0.0 : std::copysign(INFINITY, diff));
      max_exact = std::max(max_exact, std::fabs(row.exact - row.limit));
      l1 += std::fabs(diff);
      sq += diff * diff - row.frequency * (1 - row.frequency) / (static_cast<double>(replicas) - 1);
      rep.rows.push_back(row);
    }
    rep.exact_discrepancy[N] = max_exact;
    rep.empirical_l1[N] = l1;
    rep.empirical_discrepancy[N] = sq;
  }
  return rep;
}

/// Judges a convergence run: every |z| at the largest N at most 3, the
/// exact discrepancy non-increasing in N (strictly away from the sub phase),
/// and, when a larger trend run is supplied, its bias-corrected squared
/// discrepancy smaller at the largest N than at the smallest.
struct ConvergenceCheck {
  bool pass = false;
  nlohmann::json details = nlohmann::json::object();
};

inline ConvergenceCheck check_convergence(const ConvergenceReport& rep, const ConvergenceReport* trend = nullptr) {
  ConvergenceCheck out;
  const std::size_t n_lo = rep.exact_discrepancy.begin()->first, n_hi = rep.exact_discrepancy.rbegin()->first;
  const bool strict = phase_of(rep.mu) != Phase::Sub;
  double worst_z = 0;
  for (const auto& row : rep.rows)
    if (row.N == n_hi) worst_z = std::max(worst_z, std::fabs(row.z));
  bool exact_trend = true;
  double prev = INFINITY;
  for (const auto& [n, d] : rep.exact_discrepancy) {
    exact_trend = exact_trend && (strict ? d < prev : d <= prev + 1e-12);
    prev = d;
  }
  out.details["max_abs_z_at_largest_N"] = worst_z;
  out.details["exact_discrepancy"] = rep.exact_discrepancy;
  out.details["empirical_l1"] = rep.empirical_l1;
  out.pass = worst_z <= 3 && exact_trend;
  if (trend) {
    const auto& sq = trend->empirical_discrepancy;
    out.details["trend_replicas"] = trend->replicas;
    out.details["trend_discrepancy"] = sq;
    if (strict) out.pass = out.pass && sq.at(n_hi) < sq.at(n_lo);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Growth exponent

struct DimensionEstimate {
  double mu = 0;
  double estimate = 0;
  Interval ci;
  double r2 = 0;
  std::size_t r_lo = 0;
  std::size_t r_hi = 0;
  std::size_t replicas = 0;
};

inline std::vector<DimensionEstimate> run_dimension(const std::vector<double>& mu_grid, std::size_t r_lo,
                                                    std::size_t r_hi, std::size_t replicas, std::uint64_t seed,
                                                    std::size_t bootstrap = 200) {
  if (mu_grid.empty()) throw Error("run_dimension: empty mu grid");
  if (r_lo < 8 || r_hi < 2 * r_lo) throw Error("run_dimension: window must lie in [8, r_max] and span a factor >= 2");
  if (replicas < kMinReplicas) throw Error("run_dimension: need at least 100 replicas");
  std::vector<DimensionEstimate> out;
  std::vector<double> log_r;
  for (std::size_t r = r_lo; r <= r_hi; ++r) log_r.push_back(std::log(static_cast<double>(r)));
  for (double mu : mu_grid) {
    LimitOptions opt;
    opt.r_max = r_hi;
    opt.keep_tree = false;
    // logs[j][i]: log |B_r| of replica i at r = r_lo + j
    std::vector<std::vector<double>> logs(log_r.size(), std::vector<double>(replicas));
    for_each_replica(seed, mu_key(mu), replicas, [&](std::size_t i, Rng& rng) {
      const SampleRecord rec = sample_limit(mu, opt, rng);
      for (std::size_t j = 0; j < log_r.size(); ++j) logs[j][i] = std::log(static_cast<double>(rec.volumes[r_lo + j]));
    });
    auto slope_of = [&](const std::vector<std::size_t>& idx) {
      std::vector<double> med(log_r.size());
      std::vector<double> buf(idx.size());
      for (std::size_t j = 0; j < log_r.size(); ++j) {
        for (std::size_t k = 0; k < idx.size(); ++k) buf[k] = logs[j][idx[k]];
        med[j] = median(buf);
      }
      return linear_regression(log_r, med);
    };
    std::vector<std::size_t> all(replicas);
    for (std::size_t i = 0; i < replicas; ++i) all[i] = i;
    const LinearFit fit = slope_of(all);
    DimensionEstimate est;
    est.mu = mu;
    est.estimate = fit.slope;
    est.r2 = fit.r2;
    est.r_lo = r_lo;
    est.r_hi = r_hi;
    est.replicas = replicas;
    est.ci = bootstrap_interval(
        replicas, [&](const std::vector<std::size_t>& idx) { return slope_of(idx).slope; }, bootstrap, 0.95,
        derive_seed(seed, {mu_key(mu), 0xb00754a9ULL}));
    out.push_back(est);
  }
  return out;
}

/// Expected growth-exponent range of each phase.
inline Interval dimension_range(double mu) {
  switch (phase_of(mu)) {
    case Phase::Sub: return {0.9, 1.2};
    case Phase::Crit: return {1.8, 2.2};
    case Phase::Super: return {2.8, 3.2};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Spine level law of the multi-spine sampler

struct SpineLawReport {
  double mu = 0;
  std::size_t replicas = 0;
  std::vector<ChiSquareResult> level_tests;  // r = 2..r_max
  ChiSquareResult branch_test;
  double min_p = 1;

  // family-wise level alpha (Bonferroni over all level tests and the branch test)
  bool pass(double alpha = 0.01) const {
    const double a = alpha / static_cast<double>(level_tests.size() + 1);
    bool ok = branch_test.p_value >= a;
    for (const auto& t : level_tests) ok = ok && t.p_value >= a;
    return ok;
  }
};

/// Tests R_r - 1 ~ Poisson((r-1) kappa) for r = 2..r_max and the sizes of
/// the branches at the depth-1 spine vertex against 2 4^{-n} C_{n-1}.
inline SpineLawReport run_spine_law(double mu, std::size_t r_max, std::size_t replicas, std::uint64_t seed) {
  if (phase_of(mu) != Phase::Super) throw Error("run_spine_law: requires mu > -ln 2");
  if (r_max < 3) throw Error("run_spine_law: r_max must be >= 3");
  const double kappa = mu + std::numbers::ln2;
  SpineLawReport rep;
  rep.mu = mu;
  rep.replicas = replicas;
  const std::size_t kmax = 200;
  std::vector<std::vector<std::uint64_t>> counts(r_max + 1, std::vector<std::uint64_t>(kmax + 1, 0));
  // sizes 1..r_max-1 are fully resolved inside the truncation
  const std::size_t size_cut = r_max - 1;
  std::vector<std::uint64_t> branch(size_cut + 1, 0);
  LimitOptions opt;
  opt.r_max = r_max;
  opt.keep_tree = false;
  for_each_replica(seed, mu_key(mu) ^ 0x5b1e, replicas, [&](std::size_t, Rng& rng) {
    const SampleRecord rec = sample_limit_super(mu, opt, rng);
    for (std::size_t r = 2; r <= r_max; ++r) ++counts[r][std::min(rec.spine_levels[r] - 1, kmax)];
    for (std::size_t n : rec.depth1_branch_sizes) ++branch[std::min(n, size_cut + 1) - 1];
  });
  for (std::size_t r = 2; r <= r_max; ++r) {
    const double lambda = static_cast<double>(r - 1) * kappa;
    std::vector<double> probs(kmax + 1);
    double acc = 0;
    for (std::size_t k = 0; k < kmax; ++k) {
      probs[k] = std::exp(-lambda + static_cast<double>(k) * std::log(lambda) - std::lgamma(static_cast<double>(k) + 1));
      acc += probs[k];
    }
    probs[kmax] = std::max(0.0, 1 - acc);
    rep.level_tests.push_back(chi_square_test(counts[r], probs));
    rep.min_p = std::min(rep.min_p, rep.level_tests.back().p_value);
  }
  std::vector<double> bprobs(size_cut + 1);
  double acc = 0;
  for (std::size_t n = 1; n <= size_cut; ++n) {
    const double nd = static_cast<double>(n);
    // 2 4^{-n} C_{n-1}, C_k = binom(2k, k) / (k + 1)
    bprobs[n - 1] = std::exp(std::numbers::ln2 * (1 - 2 * nd) + log_binomial(2 * nd - 2, nd - 1) - std::log(nd));
    acc += bprobs[n - 1];
  }
  bprobs[size_cut] = 1 - acc;
  rep.branch_test = chi_square_test(branch, bprobs);
  rep.min_p = std::min(rep.min_p, rep.branch_test.p_value);
  return rep;
}

// ---------------------------------------------------------------------------
// Manifest runner

enum ExitCode : int { kExitOk = 0, kExitAcceptance = 1, kExitUsage = 2, kExitIo = 3 };

inline double parse_mu(const nlohmann::json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "mu0") return kMu0;
    throw ManifestError("mu must be a number or \"mu0\"");
  }
  if (!v.is_number()) throw ManifestError("mu must be a number or \"mu0\"");
  return v.get<double>();
}

inline std::vector<double> parse_mu_list(const nlohmann::json& v) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& x : v) out.push_back(parse_mu(x));
  } else {
    out.push_back(parse_mu(v));
  }
  if (out.empty()) throw ManifestError("mu grid is empty");
  return out;
}

struct RunSummary {
  int exit_code = kExitOk;
  nlohmann::json results = nlohmann::json::array();
  double seconds = 0;
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

template <class T>
T require(const nlohmann::json& e, const char* key) {
  if (!e.contains(key)) throw ManifestError(std::string("experiment is missing \"") + key + "\"");
  try {
    return e.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ManifestError(std::string("experiment field \"") + key + "\" has the wrong type");
  }
}

inline nlohmann::json run_experiment(const nlohmann::json& e, std::uint64_t seed, const std::filesystem::path& out_dir,
                                     const std::function<const CountTable&(std::size_t)>& tables) {
  const std::string type = require<std::string>(e, "type");
  const std::string name = e.value("name", type);
  const std::uint64_t s = e.contains("seed") ? require<std::uint64_t>(e, "seed") : derive_seed(seed, {std::hash<std::string>{}(name)});
  nlohmann::json res = {{"name", name}, {"type", type}, {"seed", s}};
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  if (type == "growth") {
    const auto mus = parse_mu_list(e.at("mu"));
    const auto r_max = require<std::size_t>(e, "r_max");
    const auto replicas = require<std::size_t>(e, "replicas");
    GrowthReport rep = run_growth(mus, r_max, replicas, s, e.value("window_lo", std::size_t{8}));
    auto os = open_output(out_dir / (name + ".csv"));
    rep.write_csv(os);
    res["series"] = nlohmann::json::array();
    for (const auto& ser : rep.series) {
      GrowthLawCheck chk = check_growth_laws(ser);
      chk.details["B_exponent"] = ser.exponent.slope;
      chk.details["window"] = {ser.window_lo, ser.window_hi};
      chk.details["discarded"] = ser.discarded;
      chk.details["pass"] = chk.pass;
      res["series"].push_back(chk.details);
      pass = pass && chk.pass;
    }
  } else if (type == "dimension") {
    const auto mus = parse_mu_list(e.at("mu"));
    const auto window = require<std::vector<std::size_t>>(e, "r_window");
    if (window.size() != 2) throw ManifestError("r_window must have two entries");
    const auto replicas = require<std::size_t>(e, "replicas");
    const auto est = run_dimension(mus, window[0], window[1], replicas, s, e.value("bootstrap", std::size_t{200}));
    auto os = open_output(out_dir / (name + ".csv"));
    os << "mu,d_h,ci_lo,ci_hi,r2,r_lo,r_hi,seed,replicas,tables_id\n" << std::setprecision(12);
    res["estimates"] = nlohmann::json::array();
    for (std::size_t i = 0; i < est.size(); ++i) {
      const auto& d = est[i];
      os << format_mu(d.mu) << ',' << d.estimate << ',' << d.ci.lo << ',' << d.ci.hi << ',' << d.r2 << ',' << d.r_lo << ','
         << d.r_hi << ',' << s << ',' << d.replicas << ",-\n";
      const Interval range = dimension_range(d.mu);
      const bool in_range = d.estimate >= range.lo && d.estimate <= range.hi;
      res["estimates"].push_back({{"mu", format_mu(d.mu)}, {"d_h", d.estimate}, {"ci", {d.ci.lo, d.ci.hi}},
                                  {"expected", {range.lo, range.hi}}, {"in_range", in_range}});
      pass = pass && in_range;
      if (i > 0 && mus[i - 1] < mus[i]) pass = pass && est[i - 1].estimate < d.estimate;
    }
  } else if (type == "convergence") {
    const double mu = parse_mu(e.at("mu"));
    const auto ns = require<std::vector<std::size_t>>(e, "N");
    const auto replicas = require<std::size_t>(e, "replicas");
    const auto max_size = e.value("max_spec_size", std::size_t{5});
    std::size_t n_top = *std::max_element(ns.begin(), ns.end());
    const CountTable& t = tables(n_top);
    const auto specs = one_sided_specs(max_size);
    const auto rep = run_convergence(mu, ns, specs, replicas, s, t);
    auto os = open_output(out_dir / (name + ".csv"));
    rep.write_csv(os);
    std::optional<ConvergenceReport> trend;
    if (e.contains("trend_replicas")) {
      trend = run_convergence(mu, ns, specs, require<std::size_t>(e, "trend_replicas"), derive_seed(s, {1}), t);
      auto ts = open_output(out_dir / (name + "-trend.csv"));
      trend->write_csv(ts);
    }
    const ConvergenceCheck chk = check_convergence(rep, trend ? &*trend : nullptr);
    res["check"] = chk.details;
    pass = chk.pass;
  } else if (type == "fit") {
    const std::string regime = require<std::string>(e, "regime");
    AsymptoticFit fit;
    if (regime == "crit") {
      std::vector<double> eps = e.value("epsilons", std::vector<double>{});
      if (eps.empty())
        for (int i = 0; i <= 12; ++i) eps.push_back(std::pow(10.0, -6 + 3.0 * i / 12));
      fit = verify_crit_singularity(eps);
    } else {
      if (regime != "sub" && regime != "super" && regime != "crit-coefficients")
        throw ManifestError("unknown fit regime " + regime);
      const auto lo = require<std::size_t>(e, "n_min"), hi = require<std::size_t>(e, "n_max");
      const CountTable& t = tables(hi);
      if (regime == "crit-coefficients")
        fit = verify_crit_coefficients(lo, hi, t);
      else if (regime == "sub")
        fit = verify_sub_asymptotics(parse_mu(e.at("mu")), lo, hi, t);
      else
        fit = verify_super_asymptotics(parse_mu(e.at("mu")), lo, hi, t);
    }
    auto os = open_output(out_dir / (name + ".json"));
    os << fit.to_json().dump(2) << '\n';
    res["fit"] = fit.to_json();
    pass = fit.ok;
  } else if (type == "sumrule") {
    const auto mus = parse_mu_list(e.at("mu"));
    const auto rs = require<std::vector<std::size_t>>(e, "r");
    const auto cap = require<std::size_t>(e, "cap");
    const double tol = e.value("tolerance", 1e-6);
    auto os = open_output(out_dir / (name + ".csv"));
    os << "kind,mu,r,size_cap,partial_sum,tail_estimate,tail_bound,extrapolated\n" << std::setprecision(15);
    res["checks"] = nlohmann::json::array();
    for (double mu : mus)
      for (std::size_t r : rs) {
        const auto rep = sum_rule_check(MeasureKind::tau(mu), r, cap);
        os << rep.kind << ',' << format_mu(mu) << ',' << r << ',' << cap << ',' << rep.partial_sum << ','
           << rep.tail_estimate << ',' << rep.tail_bound << ',' << rep.extrapolated << '\n';
        const bool ok = rep.certified(tol) && rep.monotone;
        res["checks"].push_back({{"mu", format_mu(mu)}, {"r", r}, {"report", rep.to_json()}, {"pass", ok}});
        pass = pass && ok;
      }
  } else if (type == "spine") {
    const double mu = parse_mu(e.at("mu"));
    const auto rep = run_spine_law(mu, require<std::size_t>(e, "r_max"), require<std::size_t>(e, "replicas"), s);
    auto os = open_output(out_dir / (name + ".csv"));
    os << "test,r,statistic,dof,p_value,seed,replicas,tables_id\n" << std::setprecision(12);
    for (std::size_t i = 0; i < rep.level_tests.size(); ++i) {
      const auto& t = rep.level_tests[i];
      os << "level," << i + 2 << ',' << t.statistic << ',' << t.dof << ',' << t.p_value << ',' << s << ',' << rep.replicas
         << ",-\n";
    }
    os << "branch,1," << rep.branch_test.statistic << ',' << rep.branch_test.dof << ',' << rep.branch_test.p_value << ','
       << s << ',' << rep.replicas << ",-\n";
    res["min_p"] = rep.min_p;
    pass = rep.pass();
  } else {
    throw ManifestError("unknown experiment type " + type);
  }
  res["pass"] = pass;
  res["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace detail

/// Runs every experiment of a manifest:
///   {"seed": S, "output_dir": "...", "experiments": [{"type": ..., ...}]}
/// An empty manifest succeeds without writing anything.
inline RunSummary run_manifest(const nlohmann::json& manifest, const std::filesystem::path& base_dir = ".") {
  const auto t0 = std::chrono::steady_clock::now();
  RunSummary sum;
  if (!manifest.is_object()) throw ManifestError("manifest must be a JSON object");
  if (!manifest.contains("experiments") || manifest.at("experiments").empty()) return sum;
  if (!manifest.contains("seed")) throw ManifestError("manifest needs an explicit seed");
  if (!manifest.at("experiments").is_array()) throw ManifestError("\"experiments\" must be an array");
  std::uint64_t seed = 0;
  const auto& sj = manifest.at("seed");
  if (!sj.is_number_integer() || (!sj.is_number_unsigned() && sj.get<std::int64_t>() < 0))
    throw ManifestError("seed must be a non-negative integer");
  seed = sj.get<std::uint64_t>();
  const std::filesystem::path out_dir = base_dir / manifest.value("output_dir", std::string("results"));
  std::map<std::size_t, CountTable> cache;
  auto tables = [&](std::size_t n) -> const CountTable& {
    auto it = cache.lower_bound(n);
    if (it != cache.end()) return it->second;
    return cache.emplace(n, load_or_build_tables(n)).first->second;
  };
  for (const auto& e : manifest.at("experiments")) {
    if (!e.is_object()) throw ManifestError("each experiment must be an object");
    nlohmann::json res;
    try {
      res = detail::run_experiment(e, seed, out_dir, tables);
    } catch (const ManifestError&) {
      throw;
    } catch (const IoError&) {
      throw;
    } catch (const Error& err) {
      throw ManifestError(err.what());
    } catch (const nlohmann::json::exception& err) {
      throw ManifestError(err.what());
    }
    if (!res.at("pass").get<bool>()) sum.exit_code = kExitAcceptance;
    sum.results.push_back(res);
  }
  sum.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto os = detail::open_output(out_dir / "summary.json");
  os << nlohmann::json({{"results", sum.results}, {"pass", sum.exit_code == kExitOk}}).dump(2) << '\n';
  return sum;
}

/// Reads and runs a manifest file; maps failures to exit codes.
inline int run_all(const std::filesystem::path& manifest_path, RunSummary* out = nullptr) {
  std::ifstream is(manifest_path);
  if (!is) {
    std::cerr << "cannot open " << manifest_path << '\n';
    return kExitIo;
  }
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }
  try {
    RunSummary s = run_manifest(m);
    if (out) *out = s;
    return s.exit_code;
  } catch (const ManifestError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace onesided

#pragma once

// Exact counts of planar trees by height and size.
//
//   A(m, N)  trees with height <= m and N edges (coefficients of X_m)
//   B(m, N)  one-sided trees with height exactly m and N edges (of Y_m)
//
// built from X_1 = g, X_m = g / (1 - X_{m-1}), Y_1 = g, Y_m = X_m Y_{m-1},
// together with a brute-force enumerator and the closed trigonometric sums
// that the tables are checked against.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "onesided/numeric.hpp"
#include "onesided/series.hpp"
#include "onesided/tree.hpp"

namespace onesided {

/// Calls `visit` for every planar tree with N edges, in lexicographic order
/// of canonical codes ('(' < ')').
inline void for_each_tree(std::size_t N, const std::function<void(const PlanarTree&)>& visit) {
  if (N < 1) throw Error("for_each_tree: N must be >= 1");
  const std::size_t len = 2 * (N - 1);
  std::string code;
  code.reserve(len);
  // depth-first generation of balanced words
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t open, std::size_t close) {
    if (code.size() == len) {
      visit(PlanarTree::from_code(code));
      return;
    }
    if (open < N - 1) {
      code.push_back('(');
      rec(open + 1, close);
      code.pop_back();
    }
    if (close < open) {
      code.push_back(')');
      rec(open, close + 1);
      code.pop_back();
    }
  };
  rec(0, 0);
}

inline constexpr std::size_t kMaxEnumerationSize = 14;

/// All planar trees with N edges (1 <= N <= 14), C_{N-1} of them.
inline std::vector<PlanarTree> enumerate_trees(std::size_t N) {
  if (N < 1 || N > kMaxEnumerationSize)
    throw Error("enumerate_trees: N outside oracle range [1, 14]");
  std::vector<PlanarTree> out;
  for_each_tree(N, [&](const PlanarTree& t) { out.push_back(t); });
  return out;
}

class CountTable {
 public:
  CountTable() = default;

  std::size_t n_max() const { return n_max_; }

  /// A(m, N); equals C_{N-1} whenever m >= N.
  const BigInt& a(std::size_t m, std::size_t n) const {
    check(n);
    if (n == 0) return zero_;
    return a_[std::min(m, n_max_)][n];
  }
  /// B(m, N); zero for N < m.
  const BigInt& b(std::size_t m, std::size_t n) const {
    check(n);
    if (m > n_max_) return zero_;
    return b_[m][n];
  }
  /// Trees of height exactly m: A(m, N) - A(m-1, N).
  BigInt a_exact(std::size_t m, std::size_t n) const {
    return m == 0 ? BigInt(0) : BigInt(a(m, n) - a(m - 1, n));
  }
  /// Catalan number C_k.
  const BigInt& catalan(std::size_t k) const {
    if (k + 1 > n_max_) throw Error("CountTable: Catalan index beyond table");
    return a_[n_max_][k + 1];
  }
  /// |Omega_N| = sum_m B(m, N).
  BigInt omega(std::size_t n) const {
    BigInt s = 0;
    for (std::size_t m = 1; m <= n; ++m) s += b(m, n);
    return s;
  }

  /// Writes `m,N,value` rows of the requested table ("A" or "B").
  void write_csv(std::ostream& os, char which) const {
    os << "m,N,value\n";
    for (std::size_t m = 1; m <= n_max_; ++m)
      for (std::size_t n = 1; n <= n_max_; ++n) {
        const BigInt& v = which == 'A' ? a(m, n) : b(m, n);
        if (which == 'B' && n < m) continue;
        os << m << ',' << n << ',' << v << '\n';
      }
  }

  /// Plain-text cache: a header line, then one line per (m) row of A and B.
  void save(std::ostream& os) const {
    os << "onesided-count-table v1 " << n_max_ << '\n';
    for (std::size_t m = 0; m <= n_max_; ++m) {
      os << 'A' << ' ' << m;
      for (std::size_t n = 0; n <= n_max_; ++n) os << ' ' << a_[m][n];
      os << '\n' << 'B' << ' ' << m;
      for (std::size_t n = 0; n <= n_max_; ++n) os << ' ' << b_[m][n];
      os << '\n';
    }
  }

  static CountTable load(std::istream& is) {
    std::string magic, version;
    CountTable t;
    if (!(is >> magic >> version >> t.n_max_) || magic != "onesided-count-table" || version != "v1")
      throw Error("CountTable::load: bad header");
    t.a_.assign(t.n_max_ + 1, std::vector<BigInt>(t.n_max_ + 1));
    t.b_.assign(t.n_max_ + 1, std::vector<BigInt>(t.n_max_ + 1));
    for (std::size_t m = 0; m <= t.n_max_; ++m) {
      for (auto* row : {&t.a_[m], &t.b_[m]}) {
        std::string tag;
        std::size_t idx = 0;
        if (!(is >> tag >> idx) || idx != m) throw Error("CountTable::load: corrupt row");
        for (auto& v : *row) {
          std::string s;
          if (!(is >> s)) throw Error("CountTable::load: truncated");
          v = BigInt(s);
        }
      }
    }
    return t;
  }

  /// Short content identifier (N_max plus a hash of the B table), used to
  /// tag experiment output.
  std::string id() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t m = 1; m <= n_max_; ++m) {
      std::string s = b_[m][n_max_].str();
      for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    }
    std::ostringstream os;
    os << "N" << n_max_ << "-" << std::hex << (h & 0xffffffffULL);
    return os.str();
  }

  friend CountTable build_tables(std::size_t n_max);

 private:
  void check(std::size_t n) const {
    if (n > n_max_) throw Error("CountTable: size " + std::to_string(n) + " beyond table bound " + std::to_string(n_max_));
  }
  std::size_t n_max_ = 0;
  std::vector<std::vector<BigInt>> a_;  // a_[m][n], m = 0..n_max
  std::vector<std::vector<BigInt>> b_;
  inline static const BigInt zero_ = 0;
};

/// Builds A and B up to size n_max from the series recursion.
inline CountTable build_tables(std::size_t n_max) {
  if (n_max < 1) throw Error("build_tables: n_max must be >= 1");
  CountTable t;
  t.n_max_ = n_max;
  t.a_.reserve(n_max + 1);
  t.b_.reserve(n_max + 1);
  const SeriesPoly g = SeriesPoly::variable(n_max);
  const SeriesPoly one = SeriesPoly::constant(n_max, 1);
  SeriesPoly x(n_max);  // X_0 = 0
  SeriesPoly y(n_max);  // Y_0 unused
  t.a_.push_back(x.coefficients());
  t.b_.push_back(y.coefficients());
  for (std::size_t m = 1; m <= n_max; ++m) {
    x = m == 1 ? g : (one - x).inverse().shifted();
    y = m == 1 ? g : x * y;
    t.a_.push_back(x.coefficients());
    t.b_.push_back(y.coefficients());
  }
  return t;
}

/// Loads tables for n_max from $ONESIDED_TABLE_CACHE (a directory) when a
/// cache file exists there, otherwise builds them and writes the cache.
/// Without the variable set, tables are always built in memory.
inline CountTable load_or_build_tables(std::size_t n_max) {
  const char* dir = std::getenv("ONESIDED_TABLE_CACHE");
  if (dir == nullptr || *dir == '\0') return build_tables(n_max);
  std::filesystem::path p = std::filesystem::path(dir) / ("count_table_N" + std::to_string(n_max) + ".txt");
  if (std::ifstream in{p}; in) return CountTable::load(in);
  CountTable t = build_tables(n_max);
  std::filesystem::create_directories(dir);
  std::filesystem::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write table cache " + tmp.string());
    t.save(out);
  }
  std::filesystem::rename(tmp, p);
  return t;
}

// ---------------------------------------------------------------------------
// Closed trigonometric sums

struct ClosedFormOptions {
  /// Requested working precision in bits.
  unsigned precision_bits = 128;
  /// Accuracy the caller needs; the evaluation fails when the cancellation
  /// bound says it cannot be met.
  double target_rel_error = 1e-10;
  /// Raise the working precision by the number of bits lost to
  /// cancellation instead of failing.
  bool auto_guard = true;
};

struct ClosedFormValue {
  BigFloat value;
  unsigned working_bits = 0;
  /// Upper bound on the relative error of `value`.
  double rel_error_bound = 0;
};

namespace detail {

// log2 of |term_k| for the sums over k = 1..floor(m/2); `shift` is the
// extra exponent (m-1)/2 in the one-sided sum and 0 for A.
inline double log2_term(std::size_t m, std::size_t k, std::size_t N, double shift, bool one_sided) {
  const double th = std::numbers::pi * static_cast<double>(k) / static_cast<double>(m + 1);
  const double t2 = std::tan(th) * std::tan(th);
  double out = std::log2(t2) + (shift - static_cast<double>(N)) * std::log2(1 + t2) +
               2.0 * static_cast<double>(N) - std::log2(static_cast<double>(m + 1));
  if (one_sided) out -= static_cast<double>(m - 1);
  return out;
}

inline double log2_abs_sum(std::size_t m, std::size_t N, bool one_sided) {
  const double shift = one_sided ? (static_cast<double>(m) - 1) / 2 : 0.0;
  double mx = -1e300;
  std::vector<double> v;
  for (std::size_t k = 1; k <= m / 2; ++k) v.push_back(log2_term(m, k, N, shift, one_sided));
  for (double x : v) mx = std::max(mx, x);
  double s = 0;
  for (double x : v) s += std::exp2(x - mx);
  return mx + std::log2(s);
}

// Evaluates the closed sum for one (m, N) at the given precision.
inline BigFloat closed_sum(std::size_t m, std::size_t N, bool one_sided, unsigned bits) {
  PrecisionScope scope(bits);
  BigFloat pi_f;
  mpfr_const_pi(pi_f.backend().data(), MPFR_RNDN);
  BigFloat total = 0;
  BigFloat pair = 0;
  const BigFloat shift = one_sided ? BigFloat(static_cast<long>(m) - 1) / 2 : BigFloat(0);
  for (std::size_t k = 1; k <= m / 2; ++k) {
    BigFloat th = pi_f * static_cast<long>(k) / static_cast<long>(m + 1);
    BigFloat t = tan(th);
    BigFloat t2 = t * t;
    BigFloat term = t2 * pow(1 + t2, shift - static_cast<long>(N));
    if (one_sided && k % 2 == 0) term = -term;
    pair += term;
    if (!one_sided || k % 2 == 0 || k == m / 2) {
      total += pair;
      pair = 0;
    }
  }
  BigFloat scale = pow(BigFloat(4), static_cast<long>(N)) / static_cast<long>(m + 1);
  if (one_sided) scale /= pow(BigFloat(2), static_cast<long>(m - 1));
  return total * scale;
}

inline ClosedFormValue closed_eval(std::size_t m, std::size_t N, bool one_sided, const ClosedFormOptions& opt) {
  if (m < 2 || N < m) throw Error("closed form requires 2 <= m <= N");
  // Every count in range is >= 1, so the absolute rounding error of the sum
  // bounds its relative error. Rounding per term is a few ulps; budget m+8.
  const double lost = std::max(0.0, log2_abs_sum(m, N, one_sided)) + std::log2(static_cast<double>(m + 8));
  const double needed = -std::log2(opt.target_rel_error) + lost + 4;
  unsigned bits = opt.precision_bits;
  if (opt.auto_guard) bits = std::max<unsigned>(bits, static_cast<unsigned>(std::ceil(needed)) + 8);
  const double bound = std::exp2(lost - static_cast<double>(bits));
  if (bound > opt.target_rel_error)
    throw PrecisionError("closed form at " + std::to_string(bits) + " bits cannot reach relative error " +
                         std::to_string(opt.target_rel_error) + " (about " + std::to_string(static_cast<int>(lost)) +
                         " bits lost to cancellation)");
  return {closed_sum(m, N, one_sided, bits), bits, bound};
}

}  // namespace detail

/// One-sided trees of height m and size N via the alternating tangent sum.
inline ClosedFormValue closed_B(std::size_t m, std::size_t N, const ClosedFormOptions& opt = {}) {
  return detail::closed_eval(m, N, true, opt);
}

/// Trees of height <= m and size N via the positive tangent sum.
inline ClosedFormValue closed_A(std::size_t m, std::size_t N, const ClosedFormOptions& opt = {}) {
  return detail::closed_eval(m, N, false, opt);
}

/// Evaluates X_m and Y_m at g both through Chebyshev polynomials of the
/// second kind and through the recursion, returning the largest relative
/// discrepancy.
inline long double chebyshev_check(std::size_t m, long double g) {
  if (m < 1) throw Error("chebyshev_check: m must be >= 1");
  const long double pole = m >= 2 ? (1 + std::pow(std::tan(std::numbers::pi_v<long double> / (m + 1)), 2.0L)) / 4 : INFINITY;
  if (!(g > 0) || g >= pole) throw Error("chebyshev_check: g must lie in (0, g_{m,1})");
  const long double x = 1 / (2 * std::sqrt(g));
  long double u_prev = 1, u = 2 * x;  // U_0, U_1
  for (std::size_t k = 1; k < m; ++k) {
    long double next = 2 * x * u - u_prev;
    u_prev = u;
    u = next;
  }
  const long double cheb_x = std::sqrt(g) * u_prev / u;
  const long double cheb_y = std::pow(g, static_cast<long double>(m) / 2) / u;
  long double rx = 0, ry = 1;
  for (std::size_t k = 1; k <= m; ++k) {
    rx = g / (1 - rx);
    ry *= rx;
  }
  return std::max(std::fabs(cheb_x - rx) / std::fabs(rx), std::fabs(cheb_y - ry) / std::fabs(ry));
}

}  // namespace onesided

#pragma once

// Small statistics kit: least squares, summary moments, chi-square
// goodness of fit and percentile bootstrap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "onesided/numeric.hpp"

namespace onesided {

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
  double slope_stderr = 0;
};

inline LinearFit linear_regression(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("linear_regression: need two or more paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw Error("linear_regression: degenerate abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    sse += e * e;
  }
  f.r2 = syy > 0 ? 1 - sse / syy : 1.0;
  f.slope_stderr = x.size() > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  return f;
}

/// Running mean and variance (Welford).
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    const double n = static_cast<double>(n_ + o.n_);
    const double d = o.mean_ - mean_;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    mean_ += d * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }
  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stderr_mean() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0;
  double m2_ = 0;
};

struct ChiSquareResult {
  double statistic = 0;
  std::size_t dof = 0;
  double p_value = 1;
  /// Number of cells after pooling of small expectations.
  std::size_t cells = 0;
};

/// Pearson test of observed counts against expected probabilities. Cells
/// with expectation below `min_expected` are pooled into one cell.
inline ChiSquareResult chi_square_test(const std::vector<std::uint64_t>& observed, const std::vector<double>& probs,
                                       double min_expected = 5.0) {
  if (observed.size() != probs.size() || observed.empty()) throw Error("chi_square_test: size mismatch");
  const double total = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::uint64_t{0}));
  const double psum = std::accumulate(probs.begin(), probs.end(), 0.0);
  ChiSquareResult res;
  double pooled_obs = 0, pooled_exp = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = total * probs[i] / psum;
    const double o = static_cast<double>(observed[i]);
    if (e < min_expected) {
      pooled_obs += o;
      pooled_exp += e;
      continue;
    }
    res.statistic += (o - e) * (o - e) / e;
    ++res.cells;
  }
  if (pooled_exp > 0) {
    res.statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++res.cells;
  } else if (pooled_obs > 0) {
    res.statistic = std::numeric_limits<double>::infinity();
  }
  if (res.cells < 2) {
    res.p_value = 1;
    return res;
  }
  res.dof = res.cells - 1;
  if (!std::isfinite(res.statistic)) {
    res.p_value = 0;
    return res;
  }
  boost::math::chi_squared dist(static_cast<double>(res.dof));
  res.p_value = boost::math::cdf(boost::math::complement(dist, res.statistic));
  return res;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error("median: empty sample");
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  const double hi = v[h];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h));
  return (lo + hi) / 2;
}

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1 - frac) + v[i + 1] * frac : v[i];
}

struct Interval {
  double lo = 0;
  double hi = 0;
};

/// Percentile bootstrap interval of `stat` over resamples of indices
/// 0..n-1.
template <class Stat>
Interval bootstrap_interval(std::size_t n, Stat stat, std::size_t resamples, double level, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> values;
  values.reserve(resamples);
  std::vector<std::size_t> idx(n);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& i : idx) i = pick(rng);
    values.push_back(stat(idx));
  }
  const double a = (1 - level) / 2;
  return {quantile(values, a), quantile(values, 1 - a)};
}

}  // namespace onesided

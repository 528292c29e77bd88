#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "onesided/numeric.hpp"

namespace onesided {

/// Formal power series in g with exact integer coefficients, truncated
/// after degree `degree()`. Arithmetic between series of different
/// truncation degrees is an error.
class SeriesPoly {
 public:
  explicit SeriesPoly(std::size_t degree) : c_(degree + 1) {}
  SeriesPoly(std::size_t degree, std::vector<BigInt> coeffs) : c_(std::move(coeffs)) {
    c_.resize(degree + 1);
  }

  /// The series g.
  static SeriesPoly variable(std::size_t degree) {
    SeriesPoly out(degree);
    if (degree >= 1) out.c_[1] = 1;
    return out;
  }
  static SeriesPoly constant(std::size_t degree, long v) {
    SeriesPoly out(degree);
    out.c_[0] = v;
    return out;
  }

  std::size_t degree() const { return c_.size() - 1; }
  const BigInt& operator[](std::size_t n) const { return c_[n]; }
  BigInt& operator[](std::size_t n) { return c_[n]; }
  const std::vector<BigInt>& coefficients() const { return c_; }

  /// Index of the first nonzero coefficient, or degree()+1 for zero.
  std::size_t valuation() const {
    for (std::size_t n = 0; n < c_.size(); ++n)
      if (c_[n] != 0) return n;
    return c_.size();
  }

  SeriesPoly& operator+=(const SeriesPoly& o) {
    check(o);
    for (std::size_t n = 0; n < c_.size(); ++n) c_[n] += o.c_[n];
    return *this;
  }
  SeriesPoly& operator-=(const SeriesPoly& o) {
    check(o);
    for (std::size_t n = 0; n < c_.size(); ++n) c_[n] -= o.c_[n];
    return *this;
  }
  friend SeriesPoly operator+(SeriesPoly a, const SeriesPoly& b) { return a += b; }
  friend SeriesPoly operator-(SeriesPoly a, const SeriesPoly& b) { return a -= b; }

  friend SeriesPoly operator*(const SeriesPoly& a, const SeriesPoly& b) {
    a.check(b);
    const std::size_t deg = a.degree();
    SeriesPoly out(deg);
    const std::size_t va = a.valuation(), vb = b.valuation();
    for (std::size_t i = va; i <= deg; ++i) {
      if (a.c_[i] == 0) continue;
      for (std::size_t j = vb; i + j <= deg; ++j) out.c_[i + j] += a.c_[i] * b.c_[j];
    }
    return out;
  }

  /// Multiplication by g (the top coefficient falls off).
  SeriesPoly shifted() const {
    SeriesPoly out(degree());
    for (std::size_t n = 0; n < degree(); ++n) out.c_[n + 1] = c_[n];
    return out;
  }

  /// 1 / *this for a series with constant term +1 or -1, by sequential
  /// solution of the convolution equation.
  SeriesPoly inverse() const {
    if (c_[0] != 1 && c_[0] != -1) throw Error("SeriesPoly::inverse: constant term is not a unit");
    const int sign = c_[0] == 1 ? 1 : -1;
    SeriesPoly out(degree());
    out.c_[0] = sign;
    for (std::size_t n = 1; n <= degree(); ++n) {
      BigInt acc = 0;
      for (std::size_t j = 1; j <= n; ++j)
        if (c_[j] != 0) acc += c_[j] * out.c_[n - j];
      out.c_[n] = sign == 1 ? BigInt(-acc) : acc;
    }
    return out;
  }

  friend bool operator==(const SeriesPoly& a, const SeriesPoly& b) { return a.c_ == b.c_; }

 private:
  void check(const SeriesPoly& o) const {
    if (o.c_.size() != c_.size()) throw Error("SeriesPoly: truncation degrees differ");
  }
  std::vector<BigInt> c_;
};

}  // namespace onesided

#pragma once

// Number types shared by the whole library: exact integers and rationals
// backed by GMP, and variable-precision floats backed by MPFR.

#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace onesided {

// Expression templates are off so that `auto` never captures a dangling
// expression.
using BigInt = boost::multiprecision::number<boost::multiprecision::gmp_int, boost::multiprecision::et_off>;
using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational, boost::multiprecision::et_off>;
using BigFloat = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>, boost::multiprecision::et_off>;

/// Coupling value at the phase boundary, -ln 2.
inline constexpr double kMu0 = -std::numbers::ln2;

/// Base error type for everything thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a high-precision evaluation cannot certify the requested
/// accuracy at the working precision it was given.
class PrecisionError : public Error {
 public:
  using Error::Error;
};

inline unsigned bits_to_digits10(unsigned bits) {
  return static_cast<unsigned>(std::ceil(bits * 0.30102999566398120)) + 1;
}

/// Sets the default MPFR precision for the lifetime of the scope. All
/// BigFloat values created inside the scope carry at least `bits` bits.
class PrecisionScope {
 public:
  explicit PrecisionScope(unsigned bits) : saved_(BigFloat::default_precision()) {
    BigFloat::default_precision(bits_to_digits10(bits));
  }
  ~PrecisionScope() { BigFloat::default_precision(saved_); }
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  unsigned saved_;
};

/// Natural log of a positive big integer, in double. Works far beyond the
/// double exponent range.
inline double log_of(const BigInt& v) {
  if (v <= 0) throw Error("log_of: non-positive argument");
  long exp = 0;
  double mant = mpz_get_d_2exp(&exp, v.backend().data());
  return std::log(mant) + static_cast<double>(exp) * std::numbers::ln2;
}

inline double log_of(const BigFloat& v) {
  if (v <= 0) throw Error("log_of: non-positive argument");
  long exp = 0;
  double mant = mpfr_get_d_2exp(&exp, v.backend().data(), MPFR_RNDN);
  return std::log(mant) + static_cast<double>(exp) * std::numbers::ln2;
}

inline BigFloat to_float(const BigInt& v) { return BigFloat(v); }

/// Relative difference |a - b| / |b| computed in BigFloat.
inline BigFloat relative_error(const BigFloat& a, const BigInt& b) {
  BigFloat bf(b);
  return abs(a - bf) / abs(bf);
}

inline BigInt factorial(unsigned n) {
  BigInt out;
  mpz_fac_ui(out.backend().data(), n);
  return out;
}

inline BigInt binomial(unsigned n, unsigned k) {
  BigInt out;
  mpz_bin_uiui(out.backend().data(), n, k);
  return out;
}

/// log of binom(n, k) in double via lgamma.
inline double log_binomial(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// Generic x(g) = (1 - sqrt(1 - 4g)) / 2, the generating function of all
/// finite planar trees by edge count.
template <class Real>
Real tree_gf(const Real& g) {
  using std::sqrt;
  return (Real(1) - sqrt(Real(1) - 4 * g)) / 2;
}

}  // namespace onesided

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

namespace bergman {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(1 + e^x), stable for any x.
inline double log1p_exp(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// log(1 + u) given log(u), stable across the full dynamic range.
inline double log1p_from_log(double log_u) { return log1p_exp(log_u); }

/// A number held as phase * exp(log_mag). exp(log_mag) is only materialized
/// through to_double(), which saturates instead of overflowing.
struct LogValue {
  double log_mag = kNegInf;
  std::complex<double> phase{1.0, 0.0};  // unit modulus (arbitrary when log_mag = -inf)

  LogValue() = default;
  LogValue(double lm, std::complex<double> ph) : log_mag(lm), phase(ph) {}

  static LogValue zero() { return LogValue(); }
  static LogValue from_log(double lm) { return LogValue(lm, {1.0, 0.0}); }
  static LogValue from_real(double x) {
    if (x == 0.0) return zero();
    return LogValue(std::log(std::abs(x)), {x > 0 ? 1.0 : -1.0, 0.0});
  }
  static LogValue from_complex(std::complex<double> v) {
    const double a = std::abs(v);
    if (a == 0.0) return zero();
    return LogValue(std::log(a), v / a);
  }

  bool is_zero() const { return log_mag == kNegInf; }

  /// |value|^2 (a positive LogValue).
  LogValue abs2() const { return from_log(2.0 * log_mag); }

  double to_double() const {
    if (is_zero()) return 0.0;
    if (log_mag > 709.0) return phase.real() >= 0 ? std::numeric_limits<double>::infinity()
                                                  : -std::numeric_limits<double>::infinity();
    if (log_mag < -745.0) return 0.0;
    return std::exp(log_mag) * phase.real();
  }

  friend LogValue operator*(const LogValue& a, const LogValue& b) {
    if (a.is_zero() || b.is_zero()) return zero();
    return LogValue(a.log_mag + b.log_mag, a.phase * b.phase);
  }
  friend LogValue operator/(const LogValue& a, const LogValue& b) {
    if (a.is_zero()) return zero();
    return LogValue(a.log_mag - b.log_mag, a.phase / b.phase);
  }
  friend LogValue operator+(const LogValue& a, const LogValue& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    const LogValue& hi = a.log_mag >= b.log_mag ? a : b;
    const LogValue& lo = a.log_mag >= b.log_mag ? b : a;
    const std::complex<double> s = hi.phase + lo.phase * std::exp(lo.log_mag - hi.log_mag);
    const double m = std::abs(s);
    if (m == 0.0) return zero();
    return LogValue(hi.log_mag + std::log(m), s / m);
  }

  LogValue pow_real(double e) const {
    if (is_zero()) return zero();
    // only safe for positive values or integer-like use; callers keep phases trivial
    return LogValue(log_mag * e, std::pow(phase, e));
  }
};

/// log(sum_i exp(x_i)) over a span, in index order after the max shift.
inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline double log_sum_exp(const std::vector<double>& xs) {
  return log_sum_exp(std::span<const double>(xs.data(), xs.size()));
}

}  // namespace bergman

#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace bergman {

/// Exact rational, used wherever a floor of t*p must be platform-deterministic.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    if (den < 0) { num = -num; den = -den; }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
  }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  /// floor(t * p) in exact integer arithmetic (requires t >= 0, p >= 0).
  int floor_mul(int p) const {
    if (num < 0) throw std::invalid_argument("Rational::floor_mul: negative value");
    return static_cast<int>((num * static_cast<std::int64_t>(p)) / den);
  }

  bool is_zero() const { return num == 0; }

  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }

  /// Parses "n/d" or a bare integer "n".
  static Rational parse(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) return Rational(std::stoll(s), 1);
    return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
  }
};

inline bool operator==(const Rational& a, const Rational& b) {
  return a.num == b.num && a.den == b.den;
}

}  // namespace bergman

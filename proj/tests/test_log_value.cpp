#include "doctest.h"

#include <cmath>
#include <complex>

#include "bergman/log_value.hpp"

using bergman::LogValue;
using bergman::kNegInf;

TEST_CASE("log-domain arithmetic matches direct arithmetic in range") {
  const std::complex<double> a(3.0, 4.0), b(1.0, -2.0);
  const auto la = LogValue::from_complex(a), lb = LogValue::from_complex(b);

  auto back = [](const LogValue& v) { return std::exp(v.log_mag) * v.phase; };
  CHECK(std::abs(back(la * lb) - a * b) < 1e-12);
  CHECK(std::abs(back(la / lb) - a / b) < 1e-12);
  CHECK(std::abs(back(la + lb) - (a + b)) < 1e-12);
  CHECK((la * lb).log_mag == doctest::Approx(std::log(std::abs(a * b))));
}

TEST_CASE("addition far outside double range") {
  const auto x = LogValue::from_log(-1000.0);
  const auto y = LogValue::from_log(-1000.0);
  CHECK((x + y).log_mag == doctest::Approx(-1000.0 + std::log(2.0)));

  const auto big = LogValue::from_log(900.0);
  const auto small = LogValue::from_log(-900.0);
  CHECK((big + small).log_mag == doctest::Approx(900.0));
}

TEST_CASE("cancellation keeps a meaningful magnitude") {
  const auto x = LogValue::from_real(1.0);
  const auto y = LogValue::from_real(-1.0 + 1e-9);
  CHECK((x + y).log_mag == doctest::Approx(std::log(1e-9)).epsilon(1e-6));
}

TEST_CASE("zero element and saturation") {
  CHECK(LogValue::zero().is_zero());
  CHECK(LogValue::from_real(0.0).is_zero());
  CHECK((LogValue::zero() + LogValue::from_log(2.0)).log_mag == doctest::Approx(2.0));
  CHECK((LogValue::zero() * LogValue::from_log(2.0)).is_zero());
  CHECK(LogValue::from_log(800.0).to_double() == std::numeric_limits<double>::infinity());
  CHECK(LogValue::from_log(-800.0).to_double() == 0.0);
  CHECK(LogValue::from_real(-2.0).to_double() == doctest::Approx(-2.0));
}

TEST_CASE("log_sum_exp agrees with the naive sum and survives extremes") {
  std::vector<double> xs = {0.3, -1.2, 2.7, 0.0};
  double direct = 0.0;
  for (double x : xs) direct += std::exp(x);
  CHECK(bergman::log_sum_exp(xs) == doctest::Approx(std::log(direct)));

  std::vector<double> far = {-2000.0, -2001.0};
  CHECK(bergman::log_sum_exp(far) == doctest::Approx(-2000.0 + std::log1p(std::exp(-1.0))));
  std::vector<double> empty;
  CHECK(bergman::log_sum_exp(empty) == kNegInf);
}

TEST_CASE("log1p_from_log across the full range") {
  CHECK(bergman::log1p_from_log(-700.0) == doctest::Approx(0.0));
  CHECK(bergman::log1p_from_log(700.0) == doctest::Approx(700.0));
  CHECK(bergman::log1p_from_log(std::log(3.0)) == doctest::Approx(std::log(4.0)));
}

#pragma once

// Test-side oracles, independent of the implementation paths they check.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "bergman/geometry.hpp"
#include "bergman/log_value.hpp"

namespace oracles {

inline constexpr double kPi = std::numbers::pi;

// int_0^inf u^a (1+u)^{-b} du = Gamma(a+1) Gamma(b-a-1) / Gamma(b)
inline double beta_integral(double a, double b) {
  return std::exp(std::lgamma(a + 1.0) + std::lgamma(b - a - 1.0) - std::lgamma(b));
}

// the same integral by brute-force quadrature (split at u = 1, u -> 1/u tail),
// composite Simpson so it shares nothing with the library's Gauss tables
inline double beta_integral_quadrature(double a, double b, int n = 4000) {
  auto simpson = [&](auto f) {
    const double h = 1.0 / n;
    double acc = f(1e-300) + f(1.0);
    for (int i = 1; i < n; ++i) acc += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
  };
  const double head = simpson([&](double u) { return std::pow(u, a) * std::pow(1.0 + u, -b); });
  // u = 1/v: du = dv/v^2 -> v^{b-a-2} (1+v)^{-b}
  const double tail =
      simpson([&](double v) { return std::pow(v, b - a - 2.0) * std::pow(1.0 + v, -b); });
  return head + tail;
}

inline double log_binom(int p, int k) {
  return std::lgamma(p + 1.0) - std::lgamma(k + 1.0) - std::lgamma(p - k + 1.0);
}

// log of the FS partial kernel (p+1)(1+u)^{-p} sum_{k>=m} binom(p,k) u^k
inline double log_partial_tail(int p, int m, double log_u) {
  std::vector<double> terms;
  for (int k = m; k <= p; ++k) terms.push_back(log_binom(p, k) + k * log_u);
  return std::log(p + 1.0) - p * bergman::log1p_from_log(log_u) + bergman::log_sum_exp(terms);
}

// analytic curvature data for a perturbed metric, built on the mode family's
// closed-form value/gradient/Laplacian (the finite-difference path never
// touches these)
struct AnalyticCurvature {
  double density;
  double lap_fs_log_density;  // Delta_FS log(density), analysts' sign
  double scalar_curvature;
  double b1;
};

inline AnalyticCurvature analytic_curvature(const bergman::MetricSpec& m,
                                            const bergman::ChartPoint& xin) {
  const bergman::ChartPoint x = xin.canonical();
  double dens = 1.0, lap_d = 0.0;
  std::complex<double> grad_d{0.0, 0.0};
  for (const auto& mode : m.perturbation) {
    const auto ev = bergman::eval_mode(mode, x.chart, x.z);
    const double scale = -2.0 * mode.coef * mode.l * (mode.l + 1.0);
    dens += scale * ev.value;
    lap_d += scale * (-4.0 * kPi * mode.l * (mode.l + 1.0)) * ev.value;  // Delta_FS of the mode
    grad_d += scale * ev.dz;
  }
  const double u = std::norm(x.z);
  const double grad2 = 4.0 * kPi * (1.0 + u) * (1.0 + u) * std::norm(grad_d);  // |grad D|^2_FS
  AnalyticCurvature out;
  out.density = dens;
  out.lap_fs_log_density = lap_d / dens - grad2 / (dens * dens);
  out.scalar_curvature = (8.0 * kPi - out.lap_fs_log_density) / dens;
  out.b1 = dens / (8.0 * kPi) * (out.scalar_curvature + 2.0 * out.lap_fs_log_density / dens);
  return out;
}

}  // namespace oracles

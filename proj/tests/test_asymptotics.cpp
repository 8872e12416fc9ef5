#include "doctest.h"

#include <cmath>
#include <numbers>

#include "bergman/asymptotics.hpp"
#include "oracles.hpp"

using namespace bergman;
namespace {
constexpr double kPi = std::numbers::pi;

MetricSpec fs(double c = 0.9, double a = -0.9, double b = -0.35) {
  MetricSpec m;
  m.hsigma_scale = c;
  m.eta.a = a;
  m.eta.b = b;
  return m;
}

MetricSpec perturbed(double a = -0.65, double b = -0.14) {
  MetricSpec m;
  m.perturbation = {PerturbationMode{2, 0, 0.012}, PerturbationMode{3, 2, 0.008}};
  m.hsigma_scale = 0.9;
  m.eta.a = a;
  m.eta.b = b;
  return m;
}
}  // namespace

TEST_CASE("fit_log_slope: exact on affine input, translation equivariant") {
  std::vector<std::pair<int, double>> series;
  for (int p = 10; p <= 30; ++p) series.emplace_back(p, -0.7 * p + 3.0);
  const RateFit fit = fit_log_slope(series, 10, 30);
  CHECK(fit.slope == doctest::Approx(-0.7).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fit.residual_max < 1e-10);

  std::vector<std::pair<int, double>> shifted;
  for (auto& [p, v] : series) shifted.emplace_back(p + 57, v);
  CHECK(fit_log_slope(shifted, 67, 87).slope == doctest::Approx(-0.7).epsilon(1e-12));

  std::vector<std::pair<int, double>> constant;
  for (int p = 1; p <= 8; ++p) constant.emplace_back(p, 2.5);
  CHECK(fit_log_slope(constant, 1, 8).slope == doctest::Approx(0.0));

  std::vector<std::pair<int, double>> few = {{1, 0.0}, {2, 1.0}, {3, 2.0}};
  CHECK_THROWS(fit_log_slope(few, 1, 3));
}

TEST_CASE("kendall tau") {
  CHECK(kendall_tau({1.0, 2.0, 3.0, 4.0}) == doctest::Approx(1.0));
  CHECK(kendall_tau({4.0, 3.0, 2.0, 1.0}) == doctest::Approx(-1.0));
  CHECK(kendall_tau({1.0, 1.0, 1.0}) == doctest::Approx(0.0));
}

TEST_CASE("expansion coefficients: FS gives (1, 1)") {
  const MetricSpec m = fs();
  const auto c = expansion_coefficients(m, ChartPoint{0, {0.5, 0.2}});
  CHECK(c.b0 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(c.b1 == doctest::Approx(1.0).epsilon(1e-4));
  // b0 p + b1 reproduces the exact FS kernel for all p
  for (int p : {1, 10, 40})
    CHECK(c.b0 * p + c.b1 ==
          doctest::Approx(fs_oracle_kernel(p, Rational{0, 1}, c.point, OracleKind::Full).to_double())
              .epsilon(1e-6));
}

TEST_CASE("expansion coefficients: perturbed metric matches the analytic oracle") {
  const MetricSpec m = perturbed();
  SplitMix64 rng(14);
  for (int i = 0; i < 6; ++i) {
    const ChartPoint x{static_cast<int>(rng.next() % 2),
                       std::polar(0.2 + 0.7 * rng.uniform(), 2.0 * kPi * rng.uniform())};
    const auto ref = oracles::analytic_curvature(m, x);
    const auto c = expansion_coefficients(m, x);
    CHECK(c.b0 == doctest::Approx(ref.density).epsilon(1e-6));
    CHECK(c.b1 == doctest::Approx(ref.b1).epsilon(1e-4));
  }
}

TEST_CASE("decay analysis: FS rate at u = 0.01") {
  const MetricSpec m = fs(1.0, -1e-9, -5e-10);
  auto backend = make_oracle_backend(m);
  std::vector<int> grid;
  for (int p = 100; p <= 200; ++p) grid.push_back(p);
  const std::vector<ChartPoint> pts = {ChartPoint{0, {0.1, 0.0}}};
  const DecayReport rep = decay_analysis(m, Rational{1, 2}, pts, grid, *backend);
  REQUIRE(rep.fits.size() == 1);
  CHECK(rep.fits[0].slope == doctest::Approx(-1.6193882).epsilon(0.02));
  CHECK(rep.fits[0].slope < 0.0);
  const double two_t_rho = rho_at(m, pts[0]);  // 2 t rho with t = 1/2
  CHECK(two_t_rho == doctest::Approx(-2.3075603).epsilon(1e-6));
  CHECK(rep.fits[0].slope >= two_t_rho);
  CHECK(rep.verdicts.at("Thm1.1:exp-decay").pass);
  CHECK(rep.verdicts.at("e:exp2:lower-rate").pass);
  CHECK(rep.verdicts.at("e:exp1:M-bound").pass);
  CHECK(rep.fitted_constants.at("h_inf") == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-4));

  // independent oracle for the rate: difference the exact tail at p = 2000
  const double l0 = oracles::log_partial_tail(2000, 1000, std::log(0.01));
  const double l2 = oracles::log_partial_tail(2002, 1001, std::log(0.01));
  CHECK(0.5 * (l2 - l0) == doctest::Approx(-1.6193882).epsilon(2e-3));
}

TEST_CASE("decay analysis: out-of-regime flag and preconditions") {
  const MetricSpec m = fs();
  auto backend = make_oracle_backend(m);
  const std::vector<int> grid = {4, 6, 8, 10, 12};
  const DecayReport rep =
      decay_analysis(m, Rational{1, 20}, {ChartPoint{0, {0.1, 0.0}}}, grid, *backend);
  CHECK_FALSE(rep.decay_regime);  // floor(tp) = 0 across the grid
  REQUIRE(rep.fits.size() == 1);
  // no decay: only the log(p+1) drift of the full kernel remains
  CHECK(rep.fits[0].slope > 0.0);
  CHECK(rep.fits[0].slope < 0.2);
}

TEST_CASE("localization: oracle head sums and the m = 0 degenerate case") {
  const MetricSpec m = fs();
  auto backend = make_oracle_backend(m);
  const ChartPoint far{0, {3.0, 0.0}};
  // delta_50 at u = 9, t = 3/10: far below 1e-20, computable only in log domain
  const double ld50 = backend->log_delta(50, Rational{3, 10}, far);
  CHECK(ld50 < std::log(1e-20));
  // m = 0: delta identically zero
  CHECK(backend->log_delta(10, Rational{1, 20}, far) == kNegInf);

  std::vector<int> grid = {20, 30, 40, 50, 60};
  const LocalizationReport rep =
      localization_analysis(m, Rational{3, 10}, {far.canonical()}, grid, *backend);
  CHECK(rep.verdicts.at("e:exp3o:delta-nonneg").pass);
  CHECK(rep.verdicts.at("e:exp3o:superpoly").pass);
  CHECK(rep.verdicts.at("e:exp3o:p5-decreasing").pass);
  CHECK(rep.flagged_points.empty());

  // a point inside the cutoff support is flagged, not failed
  const LocalizationReport rep2 =
      localization_analysis(m, Rational{3, 10}, {ChartPoint{0, {0.3, 0.0}}}, grid, *backend);
  CHECK(rep2.flagged_points.size() == 1);
}

TEST_CASE("localization on the quadrature path (perturbed)") {
  const MetricSpec m = perturbed(-0.9, -0.35);
  auto backend = make_quadrature_backend(m);
  const std::vector<int> grid = {20, 28, 36, 44, 52, 60};
  const std::vector<ChartPoint> K = {ChartPoint{0, {std::sqrt(1.8), 0.0}}.canonical(),
                                     ChartPoint{1, {1.0 / std::sqrt(2.2), 0.4}}};
  const LocalizationReport rep = localization_analysis(m, Rational{1, 4}, K, grid, *backend, 0.1);
  CHECK(rep.flagged_points.empty());
  CHECK(rep.verdicts.at("e:exp3o:delta-nonneg").pass);
  CHECK(rep.verdicts.at("e:exp3o:superpoly").pass);
  CHECK(rep.verdicts.at("e:exp3o:p5-decreasing").pass);
  for (const auto& f : rep.fits) CHECK(f.slope <= -0.1);
}

TEST_CASE("ratio analysis: oracle probe schedule has tau <= 0") {
  const MetricSpec m = fs(1.0, -1e-9, -5e-10);
  auto backend = make_oracle_backend(m);
  std::vector<int> grid;
  for (int p = 52; p <= 300; p += 8) grid.push_back(p);
  const RatioReport rep = ratio_analysis(m, Rational{1, 4}, 1.0, grid,
                                         {ChartPoint{0, {1.0, 0.0}}}, *backend);
  CHECK(rep.verdicts.at("Thm1.2:r-no-growth").pass);
  CHECK(rep.verdicts.at("Thm1.2:r-bounded").pass);
  CHECK(rep.tau_probe <= 0.0);
  CHECK(rep.sup_r < 1.0);

  // t >= t0 is a precondition error
  CHECK_THROWS(ratio_analysis(m, Rational{999, 1000}, 1.0, grid, {}, *backend));
}

TEST_CASE("ratio analysis: quadrature path on the perturbed metric") {
  const MetricSpec m = perturbed();  // profile (-0.65, -0.14), t0 ~ 0.19
  auto backend = make_quadrature_backend(m);
  const std::vector<int> grid = {24, 32, 40, 48, 56};
  const RatioReport rep = ratio_analysis(m, Rational{1, 8}, 0.5, grid, {}, *backend);
  CHECK(rep.tau_probe <= 0.0);
  CHECK(std::isfinite(rep.sup_r));
  for (const auto& row : rep.rows) CHECK(row.ratio == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("expansion analysis: FS oracle extraction is exact") {
  const MetricSpec m = fs();
  auto backend = make_oracle_backend(m);
  std::vector<int> grid;
  for (int p = 40; p <= 120; p += 8) grid.push_back(p);
  const std::vector<ChartPoint> K = {ChartPoint{0, {3.0, 0.0}}.canonical()};
  const ExpansionReport rep = expansion_analysis(m, Rational{3, 10}, K, grid, *backend);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].b0_hat == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(rep.rows[0].b1_hat == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.rows[0].residual <= 1e-6);
  CHECK(rep.verdicts.at("e:exp3:b0").pass);
  CHECK(rep.verdicts.at("e:coeff:b1").pass);

  // too close to the divisor: flagged
  const ExpansionReport rep2 =
      expansion_analysis(m, Rational{3, 10}, {ChartPoint{0, {0.2, 0.0}}}, grid, *backend);
  CHECK(rep2.flagged_points.size() == 1);
}

TEST_CASE("expansion analysis: perturbed quadrature within tolerances") {
  const MetricSpec m = perturbed(-0.9, -0.35);
  auto backend = make_quadrature_backend(m);
  std::vector<int> grid;
  for (int p = 24; p <= 60; p += 4) grid.push_back(p);
  const std::vector<ChartPoint> K = {ChartPoint{1, {1.0 / 3.0, 0.1}}};
  const ExpansionReport rep = expansion_analysis(m, Rational{1, 4}, K, grid, *backend);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.verdicts.at("e:exp3:b0").pass);
  CHECK(rep.verdicts.at("e:coeff:b1").pass);
  CHECK(std::abs(rep.rows[0].b0_hat - rep.rows[0].b0) <= 0.01 * rep.rows[0].b0);
  CHECK(std::abs(rep.rows[0].b1_hat - rep.rows[0].b1) <= 0.05 * std::abs(rep.rows[0].b1));
}

TEST_CASE("oracle backend refuses perturbed metrics") {
  CHECK_THROWS(make_oracle_backend(perturbed()));
}

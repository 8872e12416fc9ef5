#include "bergman/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bergman {

namespace {
constexpr double kPi = std::numbers::pi;

double log_binom(int p, int k) {
  return std::lgamma(p + 1.0) - std::lgamma(k + 1.0) - std::lgamma(p - k + 1.0);
}
}  // namespace

RateFit fit_log_slope(const std::vector<std::pair<int, double>>& series, int p_min, int p_max) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [p, v] : series) {
    if (p < p_min || p > p_max) continue;
    if (!std::isfinite(v)) throw std::invalid_argument("fit_log_slope: non-finite value");
    pts.emplace_back(p, v);
  }
  if (pts.size() < 4) throw std::invalid_argument("fit_log_slope: need at least 4 points in range");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pts.size());
  for (auto& [x, y] : pts) { sx += x; sy += y; sxx += x * x; sxy += x * y; }
  const double det = n * sxx - sx * sx;
  RateFit fit;
  fit.slope = (n * sxy - sx * sy) / det;
  fit.intercept = (sy * sxx - sx * sxy) / det;
  fit.p_min = p_min;
  fit.p_max = p_max;
  for (auto& [x, y] : pts)
    fit.residual_max = std::max(fit.residual_max, std::abs(y - fit.slope * x - fit.intercept));
  return fit;
}

double kendall_tau(const std::vector<double>& xs) {
  const int n = static_cast<int>(xs.size());
  if (n < 2) return 0.0;
  long concordant = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (xs[j] > xs[i]) ++concordant;
      else if (xs[j] < xs[i]) --concordant;
    }
  return 2.0 * concordant / (static_cast<double>(n) * (n - 1));
}

ExpansionCoeffs expansion_coefficients(const MetricSpec& m, const ChartPoint& x) {
  ExpansionCoeffs c;
  c.point = x.canonical();
  c.b0 = curvature_density(m, x, WeightMode::Smooth);
  if (!(c.b0 > 0.0)) throw std::domain_error("expansion_coefficients: metric degenerate");
  const double r_x = scalar_curvature_at(m, x);
  const double lap = laplacian_log_density(m, x);
  c.b1 = c.b0 / (8.0 * kPi) * (r_x - 2.0 * lap);
  return c;
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

double KernelBackend::log_delta(int p, const Rational& t, const ChartPoint& x) {
  const double lf = log_full(p, x).log_mag;
  const double lp = log_partial(p, t, x).log_mag;
  const double delta = -std::expm1(lp - lf);
  return delta > 0 ? std::log(delta) : kNegInf;
}

namespace {

class OracleBackend : public KernelBackend {
 public:
  explicit OracleBackend(const MetricSpec& m) : m_(m) {
    if (!m.is_fs())
      throw std::invalid_argument("oracle backend requires the unperturbed FS metric");
  }
  LogValue log_full(int p, const ChartPoint& x) override {
    return fs_oracle_kernel(p, Rational{0, 1}, x, OracleKind::Full, m_.hsigma_scale, m_.sigma);
  }
  LogValue log_partial(int p, const Rational& t, const ChartPoint& x) override {
    return fs_oracle_kernel(p, t, x, OracleKind::Partial, m_.hsigma_scale, m_.sigma);
  }
  LogValue log_singular(int p, const Rational& t, const ChartPoint& x) override {
    return fs_oracle_kernel(p, t, x, OracleKind::SingularEtaOne, m_.hsigma_scale, m_.sigma);
  }
  double log_delta(int p, const Rational& t, const ChartPoint& x) override {
    // exact head sum: delta = sum_{k<m} binom(p,k) u^k / (1+u)^p
    const int m = t.floor_mul(p);
    if (m == 0) return kNegInf;
    DivisorFrame frame(m_.sigma);
    const double log_u = 2.0 * frame.log_abs_zeta(x);
    std::vector<double> terms;
    terms.reserve(m);
    for (int k = 0; k < m; ++k) terms.push_back(log_binom(p, k) + k * log_u);
    return log_sum_exp(terms) - p * log1p_from_log(log_u);
  }
  int max_p() const override { return 300; }

 private:
  MetricSpec m_;
};

class QuadratureBackend : public KernelBackend {
 public:
  QuadratureBackend(const MetricSpec& m, GramProvider provider)
      : m_(m), provider_(std::move(provider)) {
    if (!provider_) {
      provider_ = [this](const SubspaceSpec& spec, KernelMode mode, const Rational& t,
                         const QuadratureRule& rule) {
        return gram_matrix(spec, m_, mode, t, rule);
      };
    }
  }

  LogValue log_full(int p, const ChartPoint& x) override {
    return eval(SubspaceSpec{p, 0}, KernelMode::Smooth, Rational{0, 1}, x);
  }
  LogValue log_partial(int p, const Rational& t, const ChartPoint& x) override {
    return eval(SubspaceSpec{p, t.floor_mul(p)}, KernelMode::Smooth, t, x);
  }
  LogValue log_singular(int p, const Rational& t, const ChartPoint& x) override {
    return eval(SubspaceSpec{p, t.floor_mul(p)}, KernelMode::Singular, t, x);
  }
  int max_p() const override { return 60; }

 private:
  LogValue eval(const SubspaceSpec& spec, KernelMode mode, const Rational& t, const ChartPoint& x) {
    if (spec.p > max_p()) throw std::invalid_argument("quadrature backend: p exceeds 60");
    const std::string key = gram_key(m_, spec, mode, t, QuadratureRule::for_degree(spec.p));
    auto it = memo_.find(key);
    if (it == memo_.end()) {
      GramData g = provider_(spec, mode, t, QuadratureRule::for_degree(spec.p));
      it = memo_.emplace(key, std::move(g)).first;
    }
    return kernel_at(it->second, spec, m_, mode, x);
  }

  MetricSpec m_;
  GramProvider provider_;
  std::map<std::string, GramData> memo_;
};

}  // namespace

std::unique_ptr<KernelBackend> make_oracle_backend(const MetricSpec& m) {
  return std::make_unique<OracleBackend>(m);
}

std::unique_ptr<KernelBackend> make_quadrature_backend(const MetricSpec& m, GramProvider provider) {
  return std::make_unique<QuadratureBackend>(m, std::move(provider));
}

// ---------------------------------------------------------------------------
// Analyses
// ---------------------------------------------------------------------------

double weight_sup_norm(const MetricSpec& m, int n_grid) {
  double sup = 0.0;
  for (int chart = 0; chart < 2; ++chart)
    for (int i = 0; i <= n_grid; ++i) {  // include the hemisphere boundary r = 1
      const double r = static_cast<double>(i) / n_grid;
      for (int j = 0; j < n_grid / 8; ++j) {
        const double th = 2.0 * kPi * j / (n_grid / 8);
        sup = std::max(sup, std::abs(weight_chart(m, chart, std::polar(r, th))));
      }
    }
  return sup;
}

DecayReport decay_analysis(const MetricSpec& m, const Rational& t,
                           const std::vector<ChartPoint>& points, const std::vector<int>& p_grid,
                           KernelBackend& backend, double rate_tol) {
  if (p_grid.empty() || points.empty())
    throw std::invalid_argument("decay_analysis: empty grid or point list");
  DecayReport rep;
  const int p_max = *std::max_element(p_grid.begin(), p_grid.end());
  const int p_min = *std::min_element(p_grid.begin(), p_grid.end());
  if (p_max > backend.max_p()) throw std::invalid_argument("decay_analysis: p beyond backend range");
  rep.decay_regime = t.floor_mul(p_max) > 0;

  const double h_inf = weight_sup_norm(m);
  rep.fitted_constants["h_inf"] = h_inf;
  const double tv = t.value();

  bool all_negative = true, all_above_lower = true;
  double m_fit = 0.0, c_fit = 0.0, a_fit = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    const ChartPoint x = points[i].canonical();
    const double rho = rho_at(m, x);
    if (!(rho < 0)) throw std::invalid_argument("decay_analysis: point with rho >= 0");
    std::vector<std::pair<int, double>> series;
    for (int p : p_grid) {
      const double lp = backend.log_partial(p, t, x).log_mag;
      if (!std::isfinite(lp)) throw std::runtime_error("decay_analysis: non-finite kernel value");
      rep.rows.push_back(DecayRow{static_cast<int>(i), x, rho, p, lp});
      series.emplace_back(p, lp);
      if (p > 2.0 / tv) {
        m_fit = std::max(m_fit, std::exp(lp / p - tv * rho));
        a_fit = std::max(a_fit, std::exp((lp / p - 4.0 * h_inf) / tv - rho));
      }
      c_fit = std::max(c_fit, std::exp(std::log(static_cast<double>(p)) + 2.0 * tv * p * rho - lp));
    }
    RateFit fit = fit_log_slope(series, p_min, p_max);
    if (rep.decay_regime && !(fit.slope < 0)) all_negative = false;
    if (fit.slope < 2.0 * tv * rho - rate_tol) all_above_lower = false;
    rep.fits.push_back(fit);
  }
  rep.fitted_constants["M"] = m_fit;
  rep.fitted_constants["C"] = c_fit;
  rep.fitted_constants["A"] = a_fit;

  if (rep.decay_regime) {
    rep.verdicts["Thm1.1:exp-decay"] = Verdict{all_negative, all_negative ? 1.0 : 0.0, 0.0};
    rep.verdicts["e:exp2:lower-rate"] = Verdict{all_above_lower, all_above_lower ? 1.0 : 0.0, rate_tol};
    bool m_in_ut = true;
    for (const auto& x : points)
      if (!(m_fit * std::exp(tv * rho_at(m, x)) < 1.0)) m_in_ut = false;
    rep.verdicts["e:exp1:M-bound"] = Verdict{m_in_ut, m_fit, 1.0};
    rep.verdicts["Cor3.3:estb1"] = Verdict{std::isfinite(a_fit), a_fit, 0.0};
  }
  return rep;
}

RatioReport ratio_analysis(const MetricSpec& m, const Rational& t, double c_probe,
                           const std::vector<int>& p_grid, const std::vector<ChartPoint>& fixed,
                           KernelBackend& backend, double probe_theta) {
  RatioReport rep;
  const double t0 = estimate_t0(m, {}, m.eta, 1e-3);
  if (!(t.value() < t0))
    throw std::invalid_argument("ratio_analysis: t is not below the certified t0 estimate");

  auto ratio_at = [&](int p, const ChartPoint& x) {
    const double lp = backend.log_singular(p, t, x).log_mag;
    const double dens = curvature_density(m, x, WeightMode::Singular, t.value());
    return std::exp(lp - std::log(static_cast<double>(p)) - std::log(dens));
  };

  std::vector<double> probe_stats;
  for (int p : p_grid) {
    const double dist = std::pow(c_probe / p, 0.375);
    const ChartPoint x = point_at_dist(m.sigma, dist, probe_theta);
    const double ratio = ratio_at(p, x);
    const double r = std::pow(p, 0.125) * std::abs(ratio - 1.0);
    rep.rows.push_back(RatioRow{p, dist, ratio, r});
    probe_stats.push_back(r);
    rep.sup_r = std::max(rep.sup_r, r);
  }
  for (const auto& xf : fixed) {
    const double dist = sphere_dist(xf, m.sigma);
    for (int p : p_grid) {
      const double ratio = ratio_at(p, xf);
      const double r = std::pow(p, 0.125) * std::abs(ratio - 1.0);
      rep.rows.push_back(RatioRow{p, dist, ratio, r});
      rep.sup_r = std::max(rep.sup_r, r);
    }
  }
  rep.tau_probe = kendall_tau(probe_stats);
  rep.verdicts["Thm1.2:r-no-growth"] = Verdict{rep.tau_probe <= 0.0, rep.tau_probe, 0.0};
  rep.verdicts["Thm1.2:r-bounded"] = Verdict{std::isfinite(rep.sup_r), rep.sup_r, 0.0};
  return rep;
}

LocalizationReport localization_analysis(const MetricSpec& m, const Rational& t,
                                         const std::vector<ChartPoint>& K,
                                         const std::vector<int>& p_grid, KernelBackend& backend,
                                         double slope_min) {
  LocalizationReport rep;
  const int p_min = *std::min_element(p_grid.begin(), p_grid.end());
  const int p_max = *std::max_element(p_grid.begin(), p_grid.end());

  bool nonneg = true, superpoly = true, poly_decreasing = true;
  for (size_t i = 0; i < K.size(); ++i) {
    const ChartPoint x = K[i].canonical();
    if (rho_at(m, x) < m.eta.b) {  // not in the localization regime
      rep.flagged_points.push_back(static_cast<int>(i));
      continue;
    }
    std::vector<std::pair<int, double>> series;
    std::vector<double> logd;
    for (int p : p_grid) {
      const double lf = backend.log_full(p, x).log_mag;
      const double lp = backend.log_partial(p, t, x).log_mag;
      if (lp > lf + 1e-10) nonneg = false;  // monotonicity breach
      const double ld = backend.log_delta(p, t, x);
      rep.rows.push_back(LocalizationRow{static_cast<int>(i), p, ld});
      // a delta below the subtraction resolution is consistent with rapid
      // decay; it joins the rows but not the fit
      if (std::isfinite(ld)) {
        series.emplace_back(p, ld);
        logd.push_back(ld);
      } else {
        logd.push_back(kNegInf);
      }
    }
    if (t.floor_mul(p_max) == 0) continue;  // delta identically 0
    if (series.size() < 4) continue;        // everything below resolution
    rep.fits.push_back(fit_log_slope(series, p_min, p_max));
    if (!(rep.fits.back().slope <= -slope_min)) superpoly = false;
    // delta * p^ell eventually decreasing, ell = 1..5, on the top half
    for (int ell = 1; ell <= 5; ++ell) {
      const size_t half = p_grid.size() / 2;
      for (size_t j = half; j + 1 < p_grid.size(); ++j) {
        if (!std::isfinite(logd[j]) || !std::isfinite(logd[j + 1])) continue;
        const double a = logd[j] + ell * std::log(static_cast<double>(p_grid[j]));
        const double b = logd[j + 1] + ell * std::log(static_cast<double>(p_grid[j + 1]));
        if (!(b < a)) poly_decreasing = false;
      }
    }
  }
  rep.verdicts["e:exp3o:delta-nonneg"] = Verdict{nonneg, nonneg ? 1.0 : 0.0, 1e-10};
  rep.verdicts["e:exp3o:superpoly"] = Verdict{superpoly, superpoly ? 1.0 : 0.0, slope_min};
  rep.verdicts["e:exp3o:p5-decreasing"] = Verdict{poly_decreasing, poly_decreasing ? 1.0 : 0.0, 0.0};
  return rep;
}

ExpansionReport expansion_analysis(const MetricSpec& m, const Rational& t,
                                   const std::vector<ChartPoint>& K,
                                   const std::vector<int>& p_grid, KernelBackend& backend,
                                   double b0_tol, double b1_tol) {
  if (p_grid.size() < 4) throw std::invalid_argument("expansion_analysis: need >= 4 grid points");
  ExpansionReport rep;
  bool b0_ok = true, b1_ok = true;
  for (size_t i = 0; i < K.size(); ++i) {
    const ChartPoint x = K[i].canonical();
    if (rho_at(m, x) < m.eta.b) {
      rep.flagged_points.push_back(static_cast<int>(i));
      continue;
    }
    // least squares for P = b0 p + b1 + c/p
    double ata[3][3] = {};
    double atb[3] = {};
    std::vector<std::pair<double, double>> data;
    for (int p : p_grid) {
      const double val = backend.log_partial(p, t, x).to_double();
      const double basis[3] = {static_cast<double>(p), 1.0, 1.0 / p};
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) ata[a][b] += basis[a] * basis[b];
        atb[a] += basis[a] * val;
      }
      data.emplace_back(p, val);
    }
    Eigen::Matrix3d A;
    Eigen::Vector3d rhs;
    for (int a = 0; a < 3; ++a) {
      rhs(a) = atb[a];
      for (int b = 0; b < 3; ++b) A(a, b) = ata[a][b];
    }
    const Eigen::Vector3d coef = A.ldlt().solve(rhs);
    const ExpansionCoeffs ref = expansion_coefficients(m, x);
    ExpansionRow row;
    row.point_id = static_cast<int>(i);
    row.b0_hat = coef(0);
    row.b1_hat = coef(1);
    row.b0 = ref.b0;
    row.b1 = ref.b1;
    for (auto& [p, v] : data)
      row.residual = std::max(row.residual, std::abs(v - coef(0) * p - coef(1) - coef(2) / p));
    rep.rows.push_back(row);
    if (!(std::abs(row.b0_hat - row.b0) <= b0_tol * std::abs(row.b0))) b0_ok = false;
    if (!(std::abs(row.b1_hat - row.b1) <= b1_tol * std::abs(row.b1))) b1_ok = false;
  }
  rep.verdicts["e:exp3:b0"] = Verdict{b0_ok, b0_ok ? 1.0 : 0.0, b0_tol};
  rep.verdicts["e:coeff:b1"] = Verdict{b1_ok, b1_ok ? 1.0 : 0.0, b1_tol};
  return rep;
}

}  // namespace bergman

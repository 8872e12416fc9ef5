#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bergman/spectra.hpp"

namespace bergman {

struct RateFit {
  double slope = 0;
  double intercept = 0;
  double residual_max = 0;
  int p_min = 0;
  int p_max = 0;
};

/// Least-squares line through (p, log_mag) restricted to [p_min, p_max].
RateFit fit_log_slope(const std::vector<std::pair<int, double>>& series, int p_min, int p_max);

/// Kendall tau (tau-a; ties contribute zero) of a sequence against its index.
double kendall_tau(const std::vector<double>& xs);

struct ExpansionCoeffs {
  double b0 = 1;
  double b1 = 1;
  ChartPoint point;
};

/// b0 = curvature density; b1 = (b0/8pi)(r^X - 2 Lap log b0) with the metric
/// Laplacian of c_1(L,h) (positive-spectrum convention).
ExpansionCoeffs expansion_coefficients(const MetricSpec& m, const ChartPoint& x);

struct Verdict {
  bool pass = false;
  double measured = 0;
  double tolerance = 0;
};

/// Kernel values for the analyses; either closed-form FS or the quadrature
/// path with per-p Gram construction.
class KernelBackend {
 public:
  virtual ~KernelBackend() = default;
  virtual LogValue log_full(int p, const ChartPoint& x) = 0;
  virtual LogValue log_partial(int p, const Rational& t, const ChartPoint& x) = 0;
  virtual LogValue log_singular(int p, const Rational& t, const ChartPoint& x) = 0;
  /// log of (P_p - P_{0,p})/P_p; exact head sums where available, else
  /// computed from the two kernels (resolution limited to ~1e-14).
  virtual double log_delta(int p, const Rational& t, const ChartPoint& x);
  virtual int max_p() const = 0;
};

/// Closed-form backend; requires an unperturbed (FS) metric.
std::unique_ptr<KernelBackend> make_oracle_backend(const MetricSpec& m);
/// Quadrature backend (valid to p = 60); Gram matrices may come from a cache
/// via the optional provider hook.
using GramProvider =
    std::function<GramData(const SubspaceSpec&, KernelMode, const Rational&, const QuadratureRule&)>;
std::unique_ptr<KernelBackend> make_quadrature_backend(const MetricSpec& m,
                                                       GramProvider provider = nullptr);

// ---------------------------------------------------------------------------
// Theorem-verification analyses
// ---------------------------------------------------------------------------

struct DecayRow {
  int point_id = 0;
  ChartPoint x;
  double rho = 0;
  int p = 0;
  double log_p0p = 0;
};

struct DecayReport {
  std::vector<DecayRow> rows;
  std::vector<RateFit> fits;            // one per point
  std::map<std::string, Verdict> verdicts;
  std::map<std::string, double> fitted_constants;  // M, C, A, h_inf
  bool decay_regime = true;             // false when floor(t p) = 0 across the grid
};

DecayReport decay_analysis(const MetricSpec& m, const Rational& t,
                           const std::vector<ChartPoint>& points, const std::vector<int>& p_grid,
                           KernelBackend& backend, double rate_tol = 1e-3);

struct RatioRow {
  int p = 0;
  double dist = 0;
  double ratio = 0;
  double r_statistic = 0;
};

struct RatioReport {
  std::vector<RatioRow> rows;        // probe schedule, then fixed points
  double tau_probe = 0;
  double sup_r = 0;
  std::map<std::string, Verdict> verdicts;
};

/// Probe schedule dist = (c_probe/p)^{3/8} plus optional fixed points; needs
/// positivity of h~ certified (t below the t0 estimate for m.eta).
RatioReport ratio_analysis(const MetricSpec& m, const Rational& t, double c_probe,
                           const std::vector<int>& p_grid, const std::vector<ChartPoint>& fixed,
                           KernelBackend& backend, double probe_theta = 0.6);

struct LocalizationRow {
  int point_id = 0;
  int p = 0;
  double log_delta = 0;
};

struct LocalizationReport {
  std::vector<LocalizationRow> rows;
  std::vector<RateFit> fits;
  std::map<std::string, Verdict> verdicts;
  std::vector<int> flagged_points;  // outside the localization regime (rho < b)
};

LocalizationReport localization_analysis(const MetricSpec& m, const Rational& t,
                                         const std::vector<ChartPoint>& K,
                                         const std::vector<int>& p_grid, KernelBackend& backend,
                                         double slope_min = 0.05);

struct ExpansionRow {
  int point_id = 0;
  double b0_hat = 0;
  double b1_hat = 0;
  double b0 = 0;
  double b1 = 0;
  double residual = 0;
};

struct ExpansionReport {
  std::vector<ExpansionRow> rows;
  std::map<std::string, Verdict> verdicts;
  std::vector<int> flagged_points;
};

ExpansionReport expansion_analysis(const MetricSpec& m, const Rational& t,
                                   const std::vector<ChartPoint>& K,
                                   const std::vector<int>& p_grid, KernelBackend& backend,
                                   double b0_tol = 0.01, double b1_tol = 0.05);

/// sup over the canonical charts of |phi| (the local-weight bound entering
/// the decay constants).
double weight_sup_norm(const MetricSpec& m, int n_grid = 400);

}  // namespace bergman

#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bergman/log_value.hpp"

namespace bergman {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Points of the model manifold (two affine charts, w = 1/z on the overlap).
// ---------------------------------------------------------------------------

struct ChartPoint {
  int chart = 0;        // 0 or 1
  Complex z{0.0, 0.0};  // affine coordinate in that chart

  /// Representative with |z| <= 1 (re-expressed in the other chart if needed).
  ChartPoint canonical() const;
  /// Same point expressed in the other chart. Undefined at that chart's origin image (z = 0 maps to infinity).
  ChartPoint other_chart() const;
};

bool same_point(const ChartPoint& a, const ChartPoint& b, double tol = 1e-12);

/// Chordal invariant |z-w|/sqrt((1+|z|^2)(1+|w|^2)) in [0,1].
double chordal(const ChartPoint& a, const ChartPoint& b);

/// Geodesic distance for the metric with Kahler form omega_FS (total area 1).
double sphere_dist(const ChartPoint& a, const ChartPoint& b);

/// Point at prescribed geodesic distance from `center` along direction theta.
ChartPoint point_at_dist(const ChartPoint& center, double dist, double theta);

// ---------------------------------------------------------------------------
// Built-in globally smooth perturbation family (real spherical-harmonic modes
// in s = (|z|^2-1)/(|z|^2+1) and the angle).
// ---------------------------------------------------------------------------

struct PerturbationMode {
  int l = 0;
  int m = 0;        // m < 0 selects the sin branch
  double coef = 0;  // amplitude
};

/// Value, holomorphic chart-derivative and flat Laplacian of one unit mode at
/// a chart point. dz is taken in the coordinate of `chart`; it degrades near
/// the chart origin for |m| >= 1 (the value itself stays exact).
struct ModeEval {
  double value = 0;
  Complex dz{0, 0};
  double lap_flat = 0;
};

ModeEval eval_mode(const PerturbationMode& mode, int chart, Complex z);
double mode_value(const PerturbationMode& mode, int chart, Complex z);

// ---------------------------------------------------------------------------
// Cutoff profile: eta = chi(rho) with a smooth step built from exp(-1/x).
// ---------------------------------------------------------------------------

struct CutoffProfile {
  double a = -0.65;  // eta = 1 where rho <= a (exactly)
  double b = -0.14;  // eta = 0 where rho >= b (exactly)

  double chi(double rho) const;
  bool valid() const { return a < b && b < 0.0; }
};

// ---------------------------------------------------------------------------
// Metric data for (L,h): FS base weight plus smooth perturbation, divisor
// location, h_Sigma scale and the cutoff profile.
// ---------------------------------------------------------------------------

struct CurvatureReport {
  double epsilon_min = 0;
  int grid_size = 0;
  ChartPoint worst_point;
};

enum class WeightMode { Smooth, Singular };

struct MetricSpec {
  std::vector<PerturbationMode> perturbation;
  ChartPoint sigma{0, {0.0, 0.0}};
  double hsigma_scale = 0.9;  // c in (0, 1]; c = 1 allows rho = 0 at the antipode only
  CutoffProfile eta;

  bool is_fs() const { return perturbation.empty(); }

  /// Collects all validation problems (empty means valid). Positivity of the
  /// curvature is certified separately by validate_positivity.
  std::vector<std::string> validate() const;

  /// Grid-certified lower bound for the curvature density (smooth mode).
  CurvatureReport validate_positivity(int n_s = 160, int n_theta = 32) const;

  std::string to_canonical_json() const;  // fixed key order, %.17g floats
  static MetricSpec from_json_text(const std::string& text);
};

// Chart-local evaluators. They accept any finite coordinate in the given
// chart (no canonicalization), which finite-difference stencils rely on.
double perturbation_value(const MetricSpec& m, int chart, Complex z);
double weight_chart(const MetricSpec& m, int chart, Complex z);                      // smooth weight
double rho_chart(const MetricSpec& m, int chart, Complex z);                         // -inf at Sigma
double weight_chart_mode(const MetricSpec& m, int chart, Complex z, WeightMode mode, double t);

// Point-level operations (use the canonical representative).
double weight_at(const MetricSpec& m, const ChartPoint& x, WeightMode mode, double t = 0.0);
double rho_at(const MetricSpec& m, const ChartPoint& x);
double eta_at(const MetricSpec& m, const ChartPoint& x);

// ---------------------------------------------------------------------------
// Curvature quantities (finite differences with one Richardson level).
// ---------------------------------------------------------------------------

// Steps validated against the analytic FS case and the mode-family oracle:
// the standalone density uses kFdStep; the nested log-density Laplacian uses
// a wider pair so inner round-off does not get amplified by the outer stencil.
inline constexpr double kFdStep = 1e-3;
inline constexpr double kFdStepInnerNested = 1.2e-2;
inline constexpr double kFdStepOuter = 1.6e-2;

/// c_1(L,h)/omega_FS at x; singular mode adds t dd^c(eta rho) off Sigma.
double curvature_density(const MetricSpec& m, const ChartPoint& x, WeightMode mode, double t = 0.0);

/// Density of dd^c(eta rho) against omega_FS (exactly -1 on the eta = 1 plateau).
double eta_rho_ddc_density(const MetricSpec& m, const ChartPoint& x);

/// Scalar curvature of the Riemannian metric with Kahler form c_1(L,h).
double scalar_curvature_at(const MetricSpec& m, const ChartPoint& x);

/// Laplace-Beltrami (geometers' sign, nonnegative spectrum) of log of the
/// curvature density, for the metric associated with c_1(L,h).
double laplacian_log_density(const MetricSpec& m, const ChartPoint& x);

/// Largest t (bisection, resolution 1e-3) with grid-min density of
/// c_1(L,h) + t dd^c(eta rho) >= delta_floor. K is a point list that must be
/// disjoint from supp eta.
double estimate_t0(const MetricSpec& m, const std::vector<ChartPoint>& K,
                   const CutoffProfile& profile, double delta_floor,
                   int n_s = 220, int n_theta = 44);

// ---------------------------------------------------------------------------
// Divisor-centered frame: the isometry moving sigma to the origin. All
// spectral computations run in this frame, where rho is exactly radial.
// ---------------------------------------------------------------------------

class DivisorFrame {
 public:
  explicit DivisorFrame(const ChartPoint& sigma);

  /// zeta-representation of x (chart 0/1 of the rotated sphere, |coord| <= 1).
  ChartPoint to_frame(const ChartPoint& x) const;
  /// Original point for a zeta-representation (canonical form).
  ChartPoint from_frame(const ChartPoint& zeta) const;
  /// log |zeta(x)| (-inf at sigma, +inf at the antipode), overflow-free.
  double log_abs_zeta(const ChartPoint& x) const;

 private:
  int sigma_chart_ = 0;
  Complex sigma_coord_{0.0, 0.0};  // sigma in its own chart, |coord| <= 1
};

/// rho expressed through the frame radius: log c + log(r/sqrt(1+r^2)).
double rho_from_log_r(double c, double log_r);

}  // namespace bergman

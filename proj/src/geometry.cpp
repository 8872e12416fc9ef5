#include "bergman/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace bergman {

namespace {
constexpr double kPi = std::numbers::pi;

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
}  // namespace

// ---------------------------------------------------------------------------
// ChartPoint
// ---------------------------------------------------------------------------

ChartPoint ChartPoint::canonical() const {
  if (std::abs(z) <= 1.0) return *this;
  return other_chart();
}

ChartPoint ChartPoint::other_chart() const {
  return ChartPoint{1 - chart, 1.0 / z};
}

bool same_point(const ChartPoint& a, const ChartPoint& b, double tol) {
  return chordal(a, b) <= tol;
}

double chordal(const ChartPoint& a, const ChartPoint& b) {
  const ChartPoint p = a.canonical(), q = b.canonical();
  const double np = std::sqrt(1.0 + std::norm(p.z));
  const double nq = std::sqrt(1.0 + std::norm(q.z));
  if (p.chart == q.chart) {
    return std::abs(p.z - q.z) / (np * nq);
  }
  // p = (z, chart j), q = (w, chart 1-j): |z - 1/w| / (np sqrt(1+|1/w|^2)) = |z w - 1| / (np nq)
  return std::abs(p.z * q.z - 1.0) / (np * nq);
}

double sphere_dist(const ChartPoint& a, const ChartPoint& b) {
  const double chi = std::min(1.0, chordal(a, b));
  const double radius = 1.0 / std::sqrt(4.0 * kPi);  // area(omega_FS) = 1
  return 2.0 * radius * std::asin(chi);
}

ChartPoint point_at_dist(const ChartPoint& center, double dist, double theta) {
  const double radius = 1.0 / std::sqrt(4.0 * kPi);
  const double half_angle = 0.5 * dist / radius;
  if (half_angle < 0 || half_angle > 0.5 * kPi + 1e-12)
    throw std::invalid_argument("point_at_dist: distance outside [0, half circumference]");
  const double r = std::tan(std::min(half_angle, 0.5 * kPi));
  const ChartPoint local{0, std::polar(std::min(r, 1e300), theta)};
  DivisorFrame frame(center);
  return frame.from_frame(local.canonical());
}

// ---------------------------------------------------------------------------
// Perturbation modes: normalized real spherical harmonics in (s, theta).
// ---------------------------------------------------------------------------

namespace {

// Associated Legendre P_l^m(s) (no Condon-Shortley phase) and d/ds, via the
// standard recurrences; l is small here (validated l <= 12).
void legendre_plm(int l, int m, double s, double* val, double* dval) {
  const double somx2 = std::max(0.0, 1.0 - s * s);
  double pmm = 1.0;
  for (int i = 1; i <= m; ++i) pmm *= (2.0 * i - 1.0) * std::sqrt(somx2);
  if (l == m) {
    *val = pmm;
  } else {
    double pmmp1 = s * (2.0 * m + 1.0) * pmm;
    if (l == m + 1) {
      *val = pmmp1;
    } else {
      double pll = 0.0;
      for (int ll = m + 2; ll <= l; ++ll) {
        pll = (s * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
        pmm = pmmp1;
        pmmp1 = pll;
      }
      *val = pll;
    }
  }
  // derivative from (1-s^2) P' = -l s P + (l+m) P_{l-1}^m, with care at s = +-1
  if (dval) {
    if (somx2 < 1e-14) {
      // only needed by the analytic oracle away from the poles; finite fallback
      *dval = 0.0;
      if (m == 0) {
        // P_l'(+-1) = l(l+1)/2 * (+-1)^{l+1}
        const double sign = (s > 0) ? 1.0 : ((l % 2 == 0) ? -1.0 : 1.0);
        *dval = sign * 0.5 * l * (l + 1.0);
      }
      return;
    }
    double pl1 = 0.0;
    if (l - 1 >= m) {
      double tmp;
      legendre_plm(l - 1, m, s, &tmp, nullptr);
      pl1 = tmp;
    }
    *dval = (-static_cast<double>(l) * s * (*val) + (l + m) * pl1) / somx2;
  }
}

double mode_norm(int l, int m_abs) {
  double lognum = std::lgamma(l - m_abs + 1.0) - std::lgamma(l + m_abs + 1.0);
  double n = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * std::exp(lognum));
  if (m_abs > 0) n *= std::sqrt(2.0);
  return n;
}

struct SphereCoords {
  double s;       // height in [-1, 1]
  double theta;   // global angle
  double u;       // chart-local |z|^2
};

SphereCoords sphere_coords(int chart, Complex z) {
  const double u = std::norm(z);
  SphereCoords c;
  c.u = u;
  if (chart == 0) {
    c.s = (u - 1.0) / (u + 1.0);
    c.theta = std::arg(z);
  } else {
    c.s = (1.0 - u) / (1.0 + u);
    c.theta = -std::arg(z);
  }
  return c;
}

}  // namespace

ModeEval eval_mode(const PerturbationMode& mode, int chart, Complex z) {
  const int m_abs = std::abs(mode.m);
  const SphereCoords c = sphere_coords(chart, z);
  double plm, dplm;
  legendre_plm(mode.l, m_abs, c.s, &plm, &dplm);
  const double norm = mode_norm(mode.l, m_abs);
  const double trig = (mode.m >= 0) ? std::cos(m_abs * c.theta) : std::sin(m_abs * c.theta);
  const double dtrig = (mode.m >= 0) ? -m_abs * std::sin(m_abs * c.theta)
                                     : m_abs * std::cos(m_abs * c.theta);
  ModeEval out;
  out.value = norm * plm * trig;

  // chain rule in the active chart coordinate
  const double u = c.u;
  const Complex zbar = std::conj(z);
  const Complex ds_dz = (chart == 0) ? Complex(2.0, 0.0) * zbar / ((1.0 + u) * (1.0 + u))
                                     : Complex(-2.0, 0.0) * zbar / ((1.0 + u) * (1.0 + u));
  Complex dth_dz{0.0, 0.0};
  if (m_abs > 0 && std::abs(z) > 1e-300) {
    const Complex inv2iz = 1.0 / (Complex(0.0, 2.0) * z);
    dth_dz = (chart == 0) ? inv2iz : -inv2iz;
  }
  out.dz = norm * (dplm * trig * ds_dz + plm * dtrig * dth_dz);

  // Delta_flat f = lambda_FS * (-4 pi l(l+1)) f with lambda_FS = (1/pi)(1+u)^-2
  out.lap_flat = (1.0 / kPi) / ((1.0 + u) * (1.0 + u)) *
                 (-4.0 * kPi * mode.l * (mode.l + 1.0)) * out.value;
  return out;
}

double mode_value(const PerturbationMode& mode, int chart, Complex z) {
  const int m_abs = std::abs(mode.m);
  const SphereCoords c = sphere_coords(chart, z);
  double plm;
  legendre_plm(mode.l, m_abs, c.s, &plm, nullptr);
  const double trig = (mode.m >= 0) ? std::cos(m_abs * c.theta) : std::sin(m_abs * c.theta);
  return mode_norm(mode.l, m_abs) * plm * trig;
}

// ---------------------------------------------------------------------------
// Cutoff
// ---------------------------------------------------------------------------

namespace {
double glue(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
}

double CutoffProfile::chi(double rho) const {
  const double x = (b - rho) / (b - a);
  if (x >= 1.0) return 1.0;
  if (x <= 0.0) return 0.0;
  const double gx = glue(x), g1x = glue(1.0 - x);
  return gx / (gx + g1x);
}

// ---------------------------------------------------------------------------
// MetricSpec evaluators
// ---------------------------------------------------------------------------

double perturbation_value(const MetricSpec& m, int chart, Complex z) {
  double acc = 0.0;
  for (const auto& mode : m.perturbation) acc += mode.coef * mode_value(mode, chart, z);
  return acc;
}

double weight_chart(const MetricSpec& m, int chart, Complex z) {
  return 0.5 * std::log1p(std::norm(z)) + perturbation_value(m, chart, z);
}

double rho_chart(const MetricSpec& m, int chart, Complex z) {
  const double chi = chordal(ChartPoint{chart, z}, m.sigma);
  if (chi == 0.0) return kNegInf;
  return std::log(m.hsigma_scale) + std::log(chi);
}

double weight_chart_mode(const MetricSpec& m, int chart, Complex z, WeightMode mode, double t) {
  const double phi = weight_chart(m, chart, z);
  if (mode == WeightMode::Smooth) return phi;
  const double rho = rho_chart(m, chart, z);
  if (rho == kNegInf) return kNegInf;  // weight is -inf at the divisor
  return phi + t * m.eta.chi(rho) * rho;
}

double weight_at(const MetricSpec& m, const ChartPoint& x, WeightMode mode, double t) {
  const ChartPoint c = x.canonical();
  return weight_chart_mode(m, c.chart, c.z, mode, t);
}

double rho_at(const MetricSpec& m, const ChartPoint& x) {
  const ChartPoint c = x.canonical();
  return rho_chart(m, c.chart, c.z);
}

double eta_at(const MetricSpec& m, const ChartPoint& x) {
  const double rho = rho_at(m, x);
  if (rho == kNegInf) return 1.0;  // eta = 1 near Sigma
  return m.eta.chi(rho);
}

std::vector<std::string> MetricSpec::validate() const {
  std::vector<std::string> errs;
  if (!(hsigma_scale > 0.0) || hsigma_scale > 1.0)
    errs.push_back("hsigma_scale must lie in (0, 1]");
  if (!eta.valid()) errs.push_back("eta profile requires a < b < 0");
  for (const auto& mode : perturbation) {
    if (mode.l < 0 || mode.l > 12) errs.push_back("mode l out of range [0, 12]");
    if (std::abs(mode.m) > mode.l) errs.push_back("mode |m| must be <= l");
    if (!std::isfinite(mode.coef)) errs.push_back("mode coefficient must be finite");
  }
  if (!std::isfinite(sigma.z.real()) || !std::isfinite(sigma.z.imag()))
    errs.push_back("sigma coordinate must be finite");
  return errs;
}

CurvatureReport MetricSpec::validate_positivity(int n_s, int n_theta) const {
  CurvatureReport rep;
  rep.epsilon_min = std::numeric_limits<double>::infinity();
  rep.grid_size = n_s * n_theta;
  for (int i = 0; i < n_s; ++i) {
    const double s = -1.0 + (2.0 * i + 1.0) / n_s;
    const double u = (1.0 + s) / (1.0 - s);
    double r = std::sqrt(u);
    int chart = 0;
    if (r > 1.0) { chart = 1; r = 1.0 / r; }
    for (int j = 0; j < n_theta; ++j) {
      const double th = 2.0 * kPi * j / n_theta;
      const ChartPoint x{chart, std::polar(r, chart == 0 ? th : -th)};
      const double d = curvature_density(*this, x, WeightMode::Smooth);
      if (d < rep.epsilon_min) { rep.epsilon_min = d; rep.worst_point = x; }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

std::string MetricSpec::to_canonical_json() const {
  std::ostringstream os;
  os << "{\"perturbation\":[";
  for (size_t i = 0; i < perturbation.size(); ++i) {
    const auto& md = perturbation[i];
    if (i) os << ",";
    os << "{\"mode\":\"Y_lm_like\",\"l\":" << md.l << ",\"m\":" << md.m
       << ",\"coef\":" << fmt17(md.coef) << "}";
  }
  os << "],\"sigma\":{\"chart\":" << sigma.chart << ",\"z\":[" << fmt17(sigma.z.real())
     << "," << fmt17(sigma.z.imag()) << "]}"
     << ",\"hsigma_scale\":" << fmt17(hsigma_scale)
     << ",\"eta\":{\"a\":" << fmt17(eta.a) << ",\"b\":" << fmt17(eta.b) << "}}";
  return os.str();
}

MetricSpec MetricSpec::from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricSpec m;
  m.perturbation.clear();
  if (j.contains("perturbation")) {
    for (const auto& e : j.at("perturbation")) {
      PerturbationMode md;
      md.l = e.at("l").get<int>();
      md.m = e.at("m").get<int>();
      md.coef = e.at("coef").get<double>();
      m.perturbation.push_back(md);
    }
  }
  if (j.contains("sigma")) {
    m.sigma.chart = j.at("sigma").at("chart").get<int>();
    const auto& zz = j.at("sigma").at("z");
    m.sigma.z = Complex(zz.at(0).get<double>(), zz.at(1).get<double>());
  }
  if (j.contains("hsigma_scale")) m.hsigma_scale = j.at("hsigma_scale").get<double>();
  if (j.contains("eta")) {
    m.eta.a = j.at("eta").at("a").get<double>();
    m.eta.b = j.at("eta").at("b").get<double>();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Finite-difference curvature machinery
// ---------------------------------------------------------------------------

namespace {

// 5-point flat Laplacian with one Richardson level (kills the h^2 term).
double fd_laplacian(const std::function<double(Complex)>& f, Complex z, double h) {
  auto lap = [&](double hh) {
    return (f(z + hh) + f(z - hh) + f(z + Complex(0, hh)) + f(z - Complex(0, hh)) - 4.0 * f(z)) /
           (hh * hh);
  };
  const double c = lap(h), fnr = lap(0.5 * h);
  return (4.0 * fnr - c) / 3.0;
}

// density = flat_laplacian(weight) * (1+u)^2 / 2, chart-local.
double density_from_weight(const MetricSpec& m, int chart, Complex z, double h = kFdStep) {
  const double lap = fd_laplacian([&](Complex zz) { return weight_chart(m, chart, zz); }, z, h);
  const double u = std::norm(z);
  return 0.5 * lap * (1.0 + u) * (1.0 + u);
}

}  // namespace

double eta_rho_ddc_density(const MetricSpec& m, const ChartPoint& x) {
  const ChartPoint c = x.canonical();
  // plateau shortcut: dd^c rho = -omega_FS exactly for the scaled-FS h_Sigma,
  // valid when the whole stencil stays inside {eta = 1}
  bool plateau = true, outside = true;
  const double hs[] = {kFdStep, 0.5 * kFdStep};
  for (double hh : hs) {
    const Complex offs[] = {Complex(hh, 0), Complex(-hh, 0), Complex(0, hh), Complex(0, -hh),
                            Complex(0, 0)};
    for (const auto& o : offs) {
      const double rho = rho_chart(m, c.chart, c.z + o);
      if (!(rho <= m.eta.a)) plateau = false;
      if (!(rho >= m.eta.b)) outside = false;
    }
  }
  if (plateau) return -1.0;
  if (outside) return 0.0;
  const double lap = fd_laplacian(
      [&](Complex zz) {
        const double rho = rho_chart(m, c.chart, zz);
        return m.eta.chi(rho) * rho;
      },
      c.z, kFdStep);
  const double u = std::norm(c.z);
  return 0.5 * lap * (1.0 + u) * (1.0 + u);
}

double curvature_density(const MetricSpec& m, const ChartPoint& x, WeightMode mode, double t) {
  const ChartPoint c = x.canonical();
  const double smooth = density_from_weight(m, c.chart, c.z);
  if (!std::isfinite(smooth)) throw std::runtime_error("curvature_density: cannot stencil");
  if (mode == WeightMode::Smooth) return smooth;
  if (chordal(c, m.sigma) == 0.0)
    throw std::domain_error("curvature_density: singular mode at the divisor");
  return smooth + t * eta_rho_ddc_density(m, c);
}

namespace {

// Delta_FS log(density): flat FD of log density, scaled by pi (1+u)^2. The
// inner density runs at a wider step here; its truncation is smooth in the
// center point and drops out of the outer stencil, unlike its round-off.
double lap_fs_log_density(const MetricSpec& m, const ChartPoint& x) {
  const ChartPoint c = x.canonical();
  if (m.is_fs()) return 0.0;  // log density identically 0
  const double lap = fd_laplacian(
      [&](Complex zz) { return std::log(density_from_weight(m, c.chart, zz, kFdStepInnerNested)); },
      c.z, kFdStepOuter);
  const double u = std::norm(c.z);
  return kPi * (1.0 + u) * (1.0 + u) * lap;
}

}  // namespace

double scalar_curvature_at(const MetricSpec& m, const ChartPoint& x) {
  const double d = curvature_density(m, x, WeightMode::Smooth);
  if (!(d > 0.0)) throw std::domain_error("scalar_curvature_at: metric degenerate");
  return (8.0 * kPi - lap_fs_log_density(m, x)) / d;
}

double laplacian_log_density(const MetricSpec& m, const ChartPoint& x) {
  const double d = curvature_density(m, x, WeightMode::Smooth);
  if (!(d > 0.0)) throw std::domain_error("laplacian_log_density: metric degenerate");
  return -lap_fs_log_density(m, x) / d;
}

double estimate_t0(const MetricSpec& m, const std::vector<ChartPoint>& K,
                   const CutoffProfile& profile, double delta_floor, int n_s, int n_theta) {
  if (!(delta_floor > 0.0)) throw std::invalid_argument("estimate_t0: delta_floor must be > 0");
  for (const auto& k : K) {
    const double rho = rho_at(m, k);
    if (rho < profile.b)
      throw std::invalid_argument("estimate_t0: supp eta meets K (choose b below min rho on K)");
  }
  MetricSpec mp = m;
  mp.eta = profile;

  std::vector<double> dens, q;
  dens.reserve(n_s * n_theta);
  q.reserve(n_s * n_theta);
  for (int i = 0; i < n_s; ++i) {
    const double s = -1.0 + (2.0 * i + 1.0) / n_s;
    const double uu = (1.0 + s) / (1.0 - s);
    double r = std::sqrt(uu);
    int chart = 0;
    if (r > 1.0) { chart = 1; r = 1.0 / r; }
    for (int j = 0; j < n_theta; ++j) {
      const double th = 2.0 * kPi * (j + 0.5) / n_theta;
      const ChartPoint x{chart, std::polar(r, th)};
      dens.push_back(curvature_density(mp, x, WeightMode::Smooth));
      q.push_back(eta_rho_ddc_density(mp, x));
    }
  }
  auto feasible = [&](double t) {
    for (size_t i = 0; i < dens.size(); ++i)
      if (dens[i] + t * q[i] < delta_floor) return false;
    return true;
  };
  if (!feasible(0.0)) return 0.0;  // positivity already below the floor
  double hi = 1.0;
  while (feasible(hi) && hi < 1024.0) hi *= 2.0;
  double lo = 0.0;
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

// ---------------------------------------------------------------------------
// DivisorFrame
// ---------------------------------------------------------------------------

DivisorFrame::DivisorFrame(const ChartPoint& sigma) {
  const ChartPoint c = sigma.canonical();
  sigma_chart_ = c.chart;
  sigma_coord_ = c.z;
}

namespace {
// projective pair (A, B) representing x in a given chart: coord = A/B
struct Pair {
  Complex a, b;
};

Pair coord_pair(const ChartPoint& x, int chart) {
  if (x.chart == chart) return {x.z, Complex(1.0, 0.0)};
  return {Complex(1.0, 0.0), x.z};  // other chart: coordinate is 1/x.z
}
}  // namespace

ChartPoint DivisorFrame::to_frame(const ChartPoint& x) const {
  const Pair y = coord_pair(x, sigma_chart_);
  const Complex num = y.a - sigma_coord_ * y.b;
  const Complex den = y.b + std::conj(sigma_coord_) * y.a;
  if (std::abs(num) <= std::abs(den)) return ChartPoint{0, num / den};
  return ChartPoint{1, den / num};
}

ChartPoint DivisorFrame::from_frame(const ChartPoint& zeta) const {
  const Pair zp = zeta.chart == 0 ? Pair{zeta.z, Complex(1.0, 0.0)}
                                  : Pair{Complex(1.0, 0.0), zeta.z};
  const Complex num = zp.a + sigma_coord_ * zp.b;
  const Complex den = zp.b - std::conj(sigma_coord_) * zp.a;
  ChartPoint out;
  if (std::abs(num) <= std::abs(den)) {
    out = ChartPoint{sigma_chart_, num / den};
  } else {
    out = ChartPoint{1 - sigma_chart_, den / num};
  }
  return out.canonical();
}

double DivisorFrame::log_abs_zeta(const ChartPoint& x) const {
  const Pair y = coord_pair(x, sigma_chart_);
  const Complex num = y.a - sigma_coord_ * y.b;
  const Complex den = y.b + std::conj(sigma_coord_) * y.a;
  const double ln = std::abs(num), ld = std::abs(den);
  if (ln == 0.0) return kNegInf;
  if (ld == 0.0) return std::numeric_limits<double>::infinity();
  return std::log(ln) - std::log(ld);
}

double rho_from_log_r(double c, double log_r) {
  if (log_r == kNegInf) return kNegInf;
  // log(r / sqrt(1+r^2)) computed stably on both sides
  const double lr = (log_r <= 0.0) ? log_r - 0.5 * log1p_exp(2.0 * log_r)
                                   : -0.5 * log1p_exp(-2.0 * log_r);
  return std::log(c) + lr;
}

}  // namespace bergman

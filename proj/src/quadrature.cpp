#include "bergman/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace bergman {

namespace {
constexpr double kPi = std::numbers::pi;

// Golub-Welsch on the symmetric Jacobi matrix. Eigen's selfadjoint solver
// returns ascending eigenvalues, so tables are reproducible bit-for-bit.
void golub_welsch(const std::vector<double>& diag, const std::vector<double>& offdiag2,
                  double mu0, std::vector<double>* nodes, std::vector<double>* weights) {
  const int n = static_cast<int>(diag.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    J(i, i) = diag[i];
    if (i + 1 < n) {
      const double b = std::sqrt(offdiag2[i + 1]);
      J(i, i + 1) = b;
      J(i + 1, i) = b;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes->resize(n);
  weights->resize(n);
  for (int i = 0; i < n; ++i) {
    (*nodes)[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    (*weights)[i] = mu0 * v0 * v0;
  }
}

// recurrence coefficients for Jacobi weight (1-x)^a (1+x)^b on [-1,1]
void jacobi_recurrence(int n, double a, double b, std::vector<double>* diag,
                       std::vector<double>* offdiag2, double* mu0) {
  diag->resize(n);
  offdiag2->resize(n);
  *mu0 = std::exp((a + b + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                  std::lgamma(a + b + 2.0));
  for (int k = 0; k < n; ++k) {
    const double kk = k;
    const double denom = (2.0 * kk + a + b) * (2.0 * kk + a + b + 2.0);
    (*diag)[k] = (k == 0 && a + b == 0.0) ? 0.0 : (b * b - a * a) / denom;
    if (k > 0) {
      const double num = 4.0 * kk * (kk + a) * (kk + b) * (kk + a + b);
      const double den = (2.0 * kk + a + b) * (2.0 * kk + a + b) * (2.0 * kk + a + b + 1.0) *
                         (2.0 * kk + a + b - 1.0);
      (*offdiag2)[k] = num / den;
    } else {
      (*offdiag2)[k] = 0.0;
    }
  }
}
}  // namespace

std::string QuadratureRule::descriptor() const {
  std::ostringstream os;
  os << "(" << n_angular << "," << n_radial << "," << alpha;
  if (theta0 != 0.0) os << ",theta0=" << theta0;
  os << ")";
  return os.str();
}

QuadratureRule QuadratureRule::for_degree(int p, double alpha) {
  QuadratureRule r;
  r.n_radial = p + 16;
  r.n_angular = 2 * p + 16;
  r.alpha = alpha;
  return r;
}

QuadratureRule QuadratureRule::doubled() const {
  QuadratureRule r = *this;
  r.n_angular *= 2;
  r.n_radial *= 2;
  return r;
}

void gauss_legendre_01(int n, std::vector<double>* nodes, std::vector<double>* weights) {
  std::vector<double> d, o2;
  double mu0;
  jacobi_recurrence(n, 0.0, 0.0, &d, &o2, &mu0);
  golub_welsch(d, o2, mu0, nodes, weights);
  for (int i = 0; i < n; ++i) {
    (*nodes)[i] = 0.5 * ((*nodes)[i] + 1.0);
    (*weights)[i] *= 0.5;
  }
}

void gauss_jacobi_01(int n, double beta, std::vector<double>* nodes, std::vector<double>* weights) {
  if (!(beta > -1.0)) throw std::invalid_argument("gauss_jacobi_01: beta must be > -1");
  std::vector<double> d, o2;
  double mu0;
  jacobi_recurrence(n, 0.0, beta, &d, &o2, &mu0);
  golub_welsch(d, o2, mu0, nodes, weights);
  // map x -> u = (1+x)/2: weight (1+x)^beta dx = (2u)^beta 2 du
  const double scale = std::pow(2.0, -(beta + 1.0));
  for (int i = 0; i < n; ++i) {
    (*nodes)[i] = 0.5 * ((*nodes)[i] + 1.0);
    (*weights)[i] *= scale;
  }
}

std::vector<SphereNode> sphere_nodes(const QuadratureRule& rule) {
  if (rule.n_angular < 8 || rule.n_angular % 2 != 0)
    throw std::invalid_argument("QuadratureRule: n_angular must be even and >= 8");
  if (rule.n_radial < 4) throw std::invalid_argument("QuadratureRule: n_radial >= 4 required");
  if (!(rule.alpha > -2.0 && rule.alpha <= 0.0))
    throw std::invalid_argument("QuadratureRule: alpha must lie in (-2, 0]");

  std::vector<SphereNode> out;
  out.reserve(2 * rule.n_radial * rule.n_angular);
  const double wth = 2.0 * kPi / rule.n_angular;
  for (int hemi = 0; hemi < 2; ++hemi) {
    const bool sing = hemi == 0 && rule.alpha < 0.0;
    std::vector<double> un, uw;
    if (sing) {
      gauss_jacobi_01(rule.n_radial, 0.5 * rule.alpha, &un, &uw);
    } else {
      gauss_legendre_01(rule.n_radial, &un, &uw);
    }
    for (int i = 0; i < rule.n_radial; ++i) {
      const double u = un[i];
      const double r = std::sqrt(u);
      // omega_FS = (1/(2 pi)) du dtheta / (1+u)^2
      const double dens = 1.0 / (2.0 * kPi * (1.0 + u) * (1.0 + u));
      for (int j = 0; j < rule.n_angular; ++j) {
        const double th = rule.theta0 + wth * j;
        SphereNode n;
        n.x = ChartPoint{hemi, std::polar(r, th)};
        n.u = u;
        n.theta = th;
        n.weight = uw[i] * wth * dens;
        n.singular_hemisphere = sing;
        out.push_back(n);
      }
    }
  }
  return out;
}

namespace {
double integrate_once(const std::function<double(const ChartPoint&)>& f,
                      const QuadratureRule& rule) {
  double acc = 0.0;
  for (const auto& n : sphere_nodes(rule)) {
    const double v = f(n.x);
    if (std::isnan(v)) {
      std::ostringstream os;
      os << "integrate_sphere: integrand NaN at chart " << n.x.chart << " z=(" << n.x.z.real()
         << "," << n.x.z.imag() << ")";
      throw std::runtime_error(os.str());
    }
    acc += n.weight * v;
  }
  return acc;
}
}  // namespace

IntegralResult integrate_sphere(const std::function<double(const ChartPoint&)>& f,
                                const QuadratureRule& rule) {
  const double base = integrate_once(f, rule);
  const double fine = integrate_once(f, rule.doubled());
  return IntegralResult{fine, std::abs(fine - base)};
}

IntegralResult integrate_radial_singular(const std::function<double(double)>& g, double alpha,
                                         double r_max, const QuadratureRule& rule) {
  if (!(alpha > -2.0)) throw std::invalid_argument("integrate_radial_singular: non-integrable singularity");
  auto run = [&](int n) {
    // int_0^rmax r^{alpha+1} g(r) dr: Jacobi weight (1+x)^{alpha+1} on [-1,1]
    std::vector<double> d, o2;
    double mu0;
    jacobi_recurrence(n, 0.0, alpha + 1.0, &d, &o2, &mu0);
    std::vector<double> xn, xw;
    golub_welsch(d, o2, mu0, &xn, &xw);
    const double scale = std::pow(r_max / 2.0, alpha + 2.0);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = r_max * 0.5 * (xn[i] + 1.0);
      const double v = g(r);
      if (std::isnan(v)) throw std::runtime_error("integrate_radial_singular: integrand NaN");
      acc += scale * xw[i] * v;
    }
    return acc;
  };
  const double base = run(rule.n_radial);
  const double fine = run(2 * rule.n_radial);
  return IntegralResult{fine, std::abs(fine - base)};
}

DiskMomentResult disk_moment_check(const std::vector<Complex>& coeffs, int k) {
  if (k < 0) throw std::invalid_argument("disk_moment_check: k >= 0 required");
  // int_{|zeta|<=2} |zeta|^{2q} |f|^2 dm = 2 pi sum_j |a_j|^2 2^{2(j+q)+2} / (2(j+q)+2)
  auto moment = [&](int q) {
    double acc = 0.0;
    for (size_t j = 0; j < coeffs.size(); ++j) {
      const double jj = static_cast<double>(j) + q;
      acc += std::norm(coeffs[j]) * std::exp((2.0 * jj + 2.0) * std::log(2.0)) / (2.0 * jj + 2.0);
    }
    return 2.0 * kPi * acc;
  };
  DiskMomentResult res;
  res.lhs = moment(0);
  res.rhs = (k + 1.0) * std::exp(-2.0 * k * std::log(2.0)) * moment(k);
  res.holds = res.lhs <= res.rhs * (1.0 + 1e-12);
  return res;
}

double disk_moment_quadrature(const std::vector<Complex>& coeffs, int k, double radius,
                              int n_radial, int n_angular) {
  std::vector<double> rn, rw;
  gauss_legendre_01(n_radial, &rn, &rw);
  double acc = 0.0;
  for (int i = 0; i < n_radial; ++i) {
    const double r = radius * rn[i];
    double ring = 0.0;
    for (int j = 0; j < n_angular; ++j) {
      const double th = 2.0 * kPi * j / n_angular;
      const Complex zeta = std::polar(r, th);
      Complex f = 0.0;
      Complex zp = 1.0;
      for (const auto& c : coeffs) {
        f += c * zp;
        zp *= zeta;
      }
      ring += std::norm(f);
    }
    ring *= 2.0 * kPi / n_angular;
    acc += radius * rw[i] * std::pow(r, 2.0 * k) * ring * r;
  }
  return acc;
}

}  // namespace bergman

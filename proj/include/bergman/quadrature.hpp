#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bergman/geometry.hpp"

namespace bergman {

/// Deterministic rule on the sphere: trapezoid in the angle, Gauss nodes in
/// u = r^2 per hemisphere (split at |z| = 1). alpha < 0 declares a radial
/// factor r^alpha at the divisor-frame origin, handled by Gauss-Jacobi nodes
/// on hemisphere 0.
struct QuadratureRule {
  int n_angular = 32;
  int n_radial = 16;
  double alpha = 0.0;   // in (-2, 0]
  double theta0 = 0.0;  // angular grid offset

  std::string descriptor() const;
  static QuadratureRule for_degree(int p, double alpha = 0.0);  // p + 16 / 2p + 16 defaults
  QuadratureRule doubled() const;
};

struct IntegralResult {
  double value = 0;
  double err_estimate = 0;
};

/// Gauss-Legendre nodes/weights for integral over [0,1] of f(u) du.
void gauss_legendre_01(int n, std::vector<double>* nodes, std::vector<double>* weights);

/// Gauss-Jacobi nodes/weights for integral over [0,1] of u^beta f(u) du
/// (beta > -1); the weight u^beta is absorbed into the returned weights.
void gauss_jacobi_01(int n, double beta, std::vector<double>* nodes, std::vector<double>* weights);

/// One precomputed sphere node: a point plus its weight against omega_FS.
/// On hemisphere 0 of a rule with alpha < 0 the weight contains the
/// singular factor, i.e. sums approximate  int r^alpha f(x) omega  there.
struct SphereNode {
  ChartPoint x;       // point in frame coordinates (chart 0 = inner hemisphere)
  double u;           // chart-local |z|^2 at the node
  double theta;       // chart-local angle
  double weight;
  bool singular_hemisphere;  // true when the r^alpha factor is folded in
};

/// Immutable node table for a rule (frame coordinates; callers map points).
std::vector<SphereNode> sphere_nodes(const QuadratureRule& rule);

/// Integral of f against omega_FS over the sphere. Precondition: f is bounded
/// on each closed hemisphere once the declared r^alpha factor is removed;
/// the callback receives the point and must return the smooth part on the
/// singular hemisphere (full integrand elsewhere / when alpha = 0).
/// value is the order-doubled refinement, err_estimate the difference to the
/// base rule. NaN from the integrand raises with the offending node.
IntegralResult integrate_sphere(const std::function<double(const ChartPoint&)>& f,
                                const QuadratureRule& rule);

/// Integral over [0, r_max] of r^alpha g(r) r dr, alpha > -2, via Gauss-Jacobi
/// adapted to the weight r^{alpha+1}; exact for polynomial g of degree
/// <= 2 n_radial - 1.
IntegralResult integrate_radial_singular(const std::function<double(double)>& g, double alpha,
                                         double r_max, const QuadratureRule& rule);

/// Closed-form check of the disk moment inequality
///   int_{|zeta|<=2} |f|^2 <= ((k+1)/2^{2k}) int_{|zeta|<=2} |zeta|^{2k} |f|^2
/// for a polynomial f given by its coefficients.
struct DiskMomentResult {
  double lhs = 0;
  double rhs = 0;
  bool holds = false;
};
DiskMomentResult disk_moment_check(const std::vector<Complex>& coeffs, int k);

/// 2-D polar quadrature of int_{|zeta|<=R} |zeta|^{2k} |f(zeta)|^2 dm for the
/// disk-moment spot checks (flat Lebesgue measure).
double disk_moment_quadrature(const std::vector<Complex>& coeffs, int k, double radius,
                              int n_radial, int n_angular);

}  // namespace bergman

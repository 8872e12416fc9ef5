#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bergman/geometry.hpp"
#include "bergman/log_value.hpp"
#include "bergman/quadrature.hpp"
#include "bergman/rational.hpp"

namespace bergman {

/// (p, m): monomial sections of degree p vanishing to order >= m at Sigma.
struct SubspaceSpec {
  int p = 1;
  int m = 0;

  int dim() const { return p - m + 1; }
  bool valid() const { return p >= 0 && m >= 0 && m <= p; }
};

enum class KernelMode { Smooth, Singular };

/// ||z^k||^2 for the FS metric: 1/((p+1) binom(p,k)).
double fs_norm(int p, int k);
double fs_norm_log(int p, int k);

struct Basis {
  SubspaceSpec spec;
  std::vector<int> k;              // m..p
  std::vector<double> log_precond; // -1/2 log fs_norm(p,k)
};
Basis build_basis(const SubspaceSpec& spec);

struct GramData {
  SubspaceSpec spec;
  KernelMode mode = KernelMode::Smooth;
  Rational t{0, 1};
  Eigen::MatrixXcd matrix;  // FS-preconditioned, Hermitian PD
  Eigen::MatrixXcd chol;    // lower triangular, matrix = chol * chol^H
  double cond_estimate = 1.0;
  bool clipped = false;     // eigen fallback clipped small eigenvalues
  QuadratureRule rule;
  std::string metric_hash;
};

/// Hash of (canonical metric JSON, basis, mode, t, rule) used for cache keys.
std::string gram_key(const MetricSpec& m, const SubspaceSpec& spec, KernelMode mode,
                     const Rational& t, const QuadratureRule& rule);

/// Gram matrix of the preconditioned monomial basis in the divisor frame.
/// Singular mode requires spec.m = floor(t p) and integrates against
/// exp(-2 t p eta rho); the radial exponent alpha = 2(floor(tp) - tp) is
/// handled by the Gauss-Jacobi path.
GramData gram_matrix(const SubspaceSpec& spec, const MetricSpec& m, KernelMode mode,
                     const Rational& t, const QuadratureRule& rule);

/// log P(x) with P(x) = beta(x)^H G^{-1} beta(x), assembled in log domain.
LogValue kernel_at(const GramData& g, const SubspaceSpec& spec, const MetricSpec& m,
                   KernelMode mode, const ChartPoint& x);

enum class OracleKind { Full, Partial, SingularEtaOne };

/// Closed-form FS kernels (binomial tails / Beta norms); valid to p ~ 300+.
/// Singular kind assumes eta == 1 and h_Sigma scale c; t must satisfy t < 1.
LogValue fs_oracle_kernel(int p, const Rational& t, const ChartPoint& x, OracleKind kind,
                          double c = 1.0, const ChartPoint& sigma = ChartPoint{0, {0.0, 0.0}});

struct VariationalReport {
  bool ok = false;
  int n_samples = 0;
  int violations = 0;
  double max_ratio = 0;         // max |S(x)|^2 / P(x) over samples
  double extremal_rel_err = 0;  // | |S*(x)|^2 / P(x) - 1 |
};

/// Monte-Carlo check of the variational characterization
/// P(x) = max{ |S(x)|^2 : ||S|| = 1 } plus the extremal-section equality.
VariationalReport variational_check(const GramData& g, const SubspaceSpec& spec,
                                    const MetricSpec& m, KernelMode mode, const ChartPoint& x,
                                    int n_samples, std::uint64_t seed);

struct TraceResult {
  double integral = 0;
  int dim = 0;
  double err_estimate = 0;
};

/// int_X P omega computed with an independently refined rule; equals dim.
TraceResult trace_identity(const GramData& g, const SubspaceSpec& spec, const MetricSpec& m,
                           KernelMode mode, const QuadratureRule& rule);

// -- deterministic RNG (engine is pinned, no library distributions) --------
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return (next() >> 11) * 0x1.0p-53; }  // in [0,1)
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

}  // namespace bergman

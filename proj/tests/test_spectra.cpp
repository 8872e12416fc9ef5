#include "doctest.h"

#include <cmath>
#include <numbers>

#include "bergman/spectra.hpp"
#include "oracles.hpp"

using namespace bergman;
namespace {
constexpr double kPi = std::numbers::pi;

MetricSpec fs(double c = 0.9) {
  MetricSpec m;
  m.hsigma_scale = c;
  return m;
}

MetricSpec eta_one(MetricSpec m) {
  m.eta.a = -1e-9;
  m.eta.b = -5e-10;
  return m;
}

MetricSpec perturbed() {
  MetricSpec m;
  m.perturbation = {PerturbationMode{2, 0, 0.012}, PerturbationMode{3, 2, 0.008}};
  m.hsigma_scale = 0.9;
  m.eta.a = -0.65;
  m.eta.b = -0.14;
  return m;
}

double unprecond_diag(const GramData& g, int p, int k) {
  const int i = k - g.spec.m;
  return g.matrix(i, i).real() * fs_norm(p, k);
}
}  // namespace

TEST_CASE("fs_norm closed form vs independent quadrature oracle") {
  CHECK(fs_norm(2, 1) == doctest::Approx(1.0 / 6.0));
  CHECK(fs_norm(2, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(fs_norm(0, 0) == doctest::Approx(1.0));
  CHECK(fs_norm(2, 1) == doctest::Approx(oracles::beta_integral_quadrature(1.0, 4.0)).epsilon(1e-9));
  CHECK(fs_norm(2, 0) == doctest::Approx(oracles::beta_integral_quadrature(0.0, 4.0)).epsilon(1e-9));
  CHECK_THROWS(fs_norm(2, 3));
  CHECK_THROWS(fs_norm(2, -1));
}

TEST_CASE("basis dimensions") {
  CHECK(build_basis(SubspaceSpec{2, 0}).k.size() == 3);
  CHECK(build_basis(SubspaceSpec{10, 3}).k.size() == 8);
  CHECK(Rational(3, 10).floor_mul(10) == 3);
  CHECK(Rational(1, 20).floor_mul(10) == 0);
  CHECK_THROWS(build_basis(SubspaceSpec{3, 5}));
}

TEST_CASE("FS gram is the identity in the preconditioned basis") {
  const MetricSpec m = fs(0.9);
  const SubspaceSpec spec{2, 0};
  const GramData g = gram_matrix(spec, m, KernelMode::Smooth, Rational{0, 1},
                                 QuadratureRule::for_degree(2));
  CHECK((g.matrix - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(unprecond_diag(g, 2, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(unprecond_diag(g, 2, 1) == doctest::Approx(1.0 / 6.0));
  CHECK(unprecond_diag(g, 2, 2) == doctest::Approx(1.0 / 3.0));
  CHECK(g.cond_estimate < 1.0 + 1e-8);
  // matrix = chol chol^H and Hermiticity
  CHECK((g.matrix - g.chol * g.chol.adjoint()).cwiseAbs().maxCoeff() <
        1e-12 * g.matrix.cwiseAbs().maxCoeff() + 1e-15);
  CHECK((g.matrix - g.matrix.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("singular gram: Beta-norm diagonals") {
  // integer tp: p=10, t=3/10, eta == 1, c = 1 -> diagonal k=3 is 1/8
  const MetricSpec m = eta_one(fs(1.0));
  const SubspaceSpec spec{10, 3};
  const GramData g = gram_matrix(spec, m, KernelMode::Singular, Rational{3, 10},
                                 QuadratureRule::for_degree(10));
  CHECK(unprecond_diag(g, 10, 3) == doctest::Approx(1.0 / 8.0).epsilon(1e-10));

  // non-integer tp: p=10, t=1/4 -> m=2, alpha=-1; oracle Gamma-form diagonals
  const SubspaceSpec spec2{10, 2};
  const GramData g2 = gram_matrix(spec2, m, KernelMode::Singular, Rational{1, 4},
                                  QuadratureRule::for_degree(10));
  const double tp = 2.5;
  for (int k : {2, 4, 7, 10}) {
    const double oracle = std::exp(std::lgamma(k - tp + 1.0) + std::lgamma(10.0 - k + 1.0) -
                                   std::lgamma(10.0 - tp + 2.0));
    CHECK(unprecond_diag(g2, 10, k) == doctest::Approx(oracle).epsilon(1e-10));
  }

  // S^1-invariant metric: off-diagonal entries vanish
  CHECK(std::abs(g2.matrix(0, 3)) < 1e-12);
  CHECK(std::abs(g.matrix(1, 2)) < 1e-12);

  // singular mode demands m = floor(tp)
  CHECK_THROWS(gram_matrix(SubspaceSpec{10, 3}, m, KernelMode::Singular, Rational{1, 4},
                           QuadratureRule::for_degree(10)));
}

TEST_CASE("full FS kernel equals p+1, partial matches the binomial tail") {
  const MetricSpec m = fs(0.9);
  SplitMix64 rng(12);
  for (int p : {3, 11, 24, 40}) {
    const SubspaceSpec spec{p, 0};
    const GramData g = gram_matrix(spec, m, KernelMode::Smooth, Rational{0, 1},
                                   QuadratureRule::for_degree(p));
    for (int i = 0; i < 6; ++i) {
      const ChartPoint x{static_cast<int>(rng.next() % 2),
                         std::polar(rng.uniform(), 2.0 * kPi * rng.uniform())};
      CHECK(kernel_at(g, spec, m, KernelMode::Smooth, x).log_mag ==
            doctest::Approx(std::log(p + 1.0)).epsilon(1e-6));
    }
  }
  // frozen spec values
  const SubspaceSpec s3{3, 0};
  const GramData g3 = gram_matrix(s3, m, KernelMode::Smooth, Rational{0, 1},
                                  QuadratureRule::for_degree(3));
  CHECK(kernel_at(g3, s3, m, KernelMode::Smooth, ChartPoint{0, {0.5, 0.1}}).log_mag ==
        doctest::Approx(std::log(4.0)).epsilon(1e-9));

  const SubspaceSpec sp{10, 3};
  const GramData gp = gram_matrix(sp, m, KernelMode::Smooth, Rational{3, 10},
                                  QuadratureRule::for_degree(10));
  const ChartPoint x1{0, std::polar(1.0, 0.7)};
  CHECK(kernel_at(gp, sp, m, KernelMode::Smooth, x1).log_mag ==
        doctest::Approx(std::log(10.3984375)).epsilon(1e-9));
}

TEST_CASE("oracle equivalence on FS configurations including near the divisor") {
  const MetricSpec m = fs(0.9);
  for (int p : {7, 16, 29, 40}) {
    for (const Rational t : {Rational{1, 10}, Rational{3, 10}, Rational{1, 2}}) {
      const int mm = t.floor_mul(p);
      const SubspaceSpec spec{p, mm};
      const GramData g = gram_matrix(spec, m, KernelMode::Smooth, t,
                                     QuadratureRule::for_degree(p));
      for (const ChartPoint x : {ChartPoint{0, {0.02, 0.01}}, ChartPoint{0, {0.6, -0.3}},
                                 ChartPoint{1, {0.4, 0.2}}, ChartPoint{1, {0.0, 0.0}}}) {
        const double lq = kernel_at(g, spec, m, KernelMode::Smooth, x).log_mag;
        const double lo = fs_oracle_kernel(p, t, x, OracleKind::Partial, 0.9).log_mag;
        CHECK(lq == doctest::Approx(lo).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("oracle frozen values and the singular oracle") {
  // p=10, t=3/10, u=1 -> 10.3984375 exactly
  const double v = fs_oracle_kernel(10, Rational{3, 10}, ChartPoint{0, {1.0, 0.0}},
                                    OracleKind::Partial)
                       .to_double();
  CHECK(v == doctest::Approx(10.3984375).epsilon(1e-12));
  // t = 1/20 at p = 10 reduces to the full kernel
  CHECK(fs_oracle_kernel(10, Rational{1, 20}, ChartPoint{0, {0.3, 0.2}}, OracleKind::Partial)
            .to_double() == doctest::Approx(11.0).epsilon(1e-12));
  // singular oracle vs direct Beta-sum at p=10, t=3/10, u=1
  const double tp = 3.0;
  double direct = 0.0;
  for (int k = 3; k <= 10; ++k)
    direct += std::exp((k - tp) * 0.0 - (10.0 - tp) * std::log(2.0) +
                       std::lgamma(10.0 - tp + 2.0) - std::lgamma(k - tp + 1.0) -
                       std::lgamma(10.0 - k + 1.0));
  CHECK(fs_oracle_kernel(10, Rational{3, 10}, ChartPoint{0, {1.0, 0.0}},
                         OracleKind::SingularEtaOne)
            .to_double() == doctest::Approx(direct).epsilon(1e-12));
  CHECK_THROWS(fs_oracle_kernel(10, Rational{3, 2}, ChartPoint{0, {1.0, 0.0}},
                                OracleKind::SingularEtaOne));
}

TEST_CASE("quadrature path matches the singular oracle") {
  const MetricSpec m = eta_one(fs(1.0));
  for (int p : {10, 17}) {
    const Rational t{1, 4};
    const SubspaceSpec spec{p, t.floor_mul(p)};
    const GramData g = gram_matrix(spec, m, KernelMode::Singular, t, QuadratureRule::for_degree(p));
    for (const ChartPoint x : {ChartPoint{0, {0.3, 0.1}}, ChartPoint{0, {0.9, -0.2}},
                               ChartPoint{1, {0.5, 0.5}}}) {
      CHECK(kernel_at(g, spec, m, KernelMode::Singular, x).log_mag ==
            doctest::Approx(fs_oracle_kernel(p, t, x, OracleKind::SingularEtaOne, 1.0).log_mag)
                .epsilon(1e-6));
    }
  }
}

TEST_CASE("monotonicity in the subspace and m = 0 determinism") {
  const MetricSpec m = perturbed();
  const int p = 14;
  const QuadratureRule rule = QuadratureRule::for_degree(p);
  std::vector<GramData> grams;
  for (int mm : {0, 2, 5}) grams.push_back(gram_matrix(SubspaceSpec{p, mm}, m, KernelMode::Smooth,
                                                       Rational{mm, p == 0 ? 1 : p}, rule));
  SplitMix64 rng(8);
  for (int i = 0; i < 10; ++i) {
    const ChartPoint x{static_cast<int>(rng.next() % 2),
                       std::polar(rng.uniform() * 0.99 + 0.005, 2.0 * kPi * rng.uniform())};
    double prev = -std::numeric_limits<double>::infinity();
    for (int j = 2; j >= 0; --j) {  // shrinking m enlarges the subspace
      const double v = kernel_at(grams[j], grams[j].spec, m, KernelMode::Smooth, x).log_mag;
      CHECK(v >= prev - 1e-9);
      prev = v;
    }
  }
  // rebuilding the m = 0 gram is bit-for-bit reproducible
  const GramData g1 = gram_matrix(SubspaceSpec{p, 0}, m, KernelMode::Smooth, Rational{0, 1}, rule);
  CHECK((g1.matrix - grams[0].matrix).cwiseAbs().maxCoeff() == 0.0);
  const ChartPoint x0{0, {0.4, 0.3}};
  CHECK(kernel_at(g1, g1.spec, m, KernelMode::Smooth, x0).log_mag ==
        kernel_at(grams[0], grams[0].spec, m, KernelMode::Smooth, x0).log_mag);
}

TEST_CASE("gauge invariance: adding a constant to the weight changes nothing") {
  MetricSpec m = perturbed();
  MetricSpec shifted = m;
  shifted.perturbation.push_back(PerturbationMode{0, 0, 0.37});  // l=0 mode is constant
  const int p = 9;
  const SubspaceSpec spec{p, 2};
  const QuadratureRule rule = QuadratureRule::for_degree(p);
  const GramData g1 = gram_matrix(spec, m, KernelMode::Smooth, Rational{2, 9}, rule);
  const GramData g2 = gram_matrix(spec, shifted, KernelMode::Smooth, Rational{2, 9}, rule);
  for (const ChartPoint x : {ChartPoint{0, {0.2, 0.6}}, ChartPoint{1, {0.8, 0.0}}}) {
    const double v1 = kernel_at(g1, spec, m, KernelMode::Smooth, x).log_mag;
    const double v2 = kernel_at(g2, spec, shifted, KernelMode::Smooth, x).log_mag;
    CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
  }
}

TEST_CASE("kernel value is invariant under the preconditioning choice") {
  // raw-monomial route: assemble the unpreconditioned gram by quadrature and
  // solve densely; compare against the pipeline value
  const MetricSpec m = perturbed();
  const int p = 6;
  const SubspaceSpec spec{p, 0};
  const GramData g = gram_matrix(spec, m, KernelMode::Smooth, Rational{0, 1},
                                 QuadratureRule::for_degree(p));
  const int d = p + 1;
  Eigen::MatrixXcd raw(d, d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k)
      raw(j, k) = g.matrix(j, k) * std::exp(0.5 * (fs_norm_log(p, j) + fs_norm_log(p, k)));
  const ChartPoint x{0, {0.45, -0.35}};
  Eigen::VectorXcd beta(d);
  const double phi = weight_at(m, x, WeightMode::Smooth);
  for (int k = 0; k < d; ++k) beta(k) = std::pow(x.z, k) * std::exp(-p * phi);
  const double direct = (beta.adjoint() * raw.inverse() * beta).real()(0, 0);
  CHECK(kernel_at(g, spec, m, KernelMode::Smooth, x).log_mag ==
        doctest::Approx(std::log(direct)).epsilon(1e-10));
}

TEST_CASE("variational characterization") {
  const MetricSpec m = fs(0.9);
  // frozen example: FS, p=2, S = z/||z||, u=1: |S(x)|^2 = 6/4 = 1.5 <= P = 3
  const SubspaceSpec spec{2, 0};
  const GramData g = gram_matrix(spec, m, KernelMode::Smooth, Rational{0, 1},
                                 QuadratureRule::for_degree(2));
  const ChartPoint x{0, {1.0, 0.0}};
  const double sval = std::norm(1.0) / std::pow(1.0 + 1.0, 2.0) / fs_norm(2, 1);
  CHECK(sval == doctest::Approx(1.5));
  CHECK(kernel_at(g, spec, m, KernelMode::Smooth, x).to_double() == doctest::Approx(3.0));
  CHECK(sval <= 3.0);

  const auto rep = variational_check(g, spec, m, KernelMode::Smooth, x, 100, 4);
  CHECK(rep.ok);
  CHECK(rep.violations == 0);
  CHECK(rep.extremal_rel_err <= 1e-9);

  // perturbed metric, 500 samples, p = 20
  const MetricSpec mp = perturbed();
  const SubspaceSpec spec2{20, 0};
  const GramData g2 = gram_matrix(spec2, mp, KernelMode::Smooth, Rational{0, 1},
                                  QuadratureRule::for_degree(20));
  const auto rep2 = variational_check(g2, spec2, mp, KernelMode::Smooth,
                                      ChartPoint{1, {0.3, 0.4}}, 500, 99);
  CHECK(rep2.ok);
  CHECK(rep2.max_ratio <= 1.0 + 1e-9);
}

TEST_CASE("trace identity across modes and metrics") {
  const MetricSpec m = fs(0.9);
  {
    const SubspaceSpec spec{5, 0};
    const GramData g = gram_matrix(spec, m, KernelMode::Smooth, Rational{0, 1},
                                   QuadratureRule::for_degree(5));
    const auto tr = trace_identity(g, spec, m, KernelMode::Smooth, QuadratureRule::for_degree(5));
    CHECK(tr.dim == 6);
    CHECK(tr.integral == doctest::Approx(6.0).epsilon(1e-6));
  }
  {
    const SubspaceSpec spec{10, 3};
    const GramData g = gram_matrix(spec, m, KernelMode::Smooth, Rational{3, 10},
                                   QuadratureRule::for_degree(10));
    const auto tr = trace_identity(g, spec, m, KernelMode::Smooth, QuadratureRule::for_degree(10));
    CHECK(tr.integral == doctest::Approx(8.0).epsilon(1e-6));
  }
  {
    const MetricSpec mp = perturbed();
    const SubspaceSpec spec{20, 6};
    const GramData g = gram_matrix(spec, mp, KernelMode::Smooth, Rational{3, 10},
                                   QuadratureRule::for_degree(20));
    const auto tr = trace_identity(g, spec, mp, KernelMode::Smooth, QuadratureRule::for_degree(20));
    CHECK(tr.integral == doctest::Approx(15.0).epsilon(1e-5));
  }
}

TEST_CASE("sandwich inequality on sampled cells") {
  const MetricSpec m = perturbed();
  const Rational t{1, 8};
  SplitMix64 rng(77);
  for (int p : {8, 16, 24}) {
    const int mm = t.floor_mul(p);
    const SubspaceSpec full{p, 0}, sub{p, mm};
    const QuadratureRule rule = QuadratureRule::for_degree(p);
    const GramData gf = gram_matrix(full, m, KernelMode::Smooth, Rational{0, 1}, rule);
    const GramData gp = gram_matrix(sub, m, KernelMode::Smooth, t, rule);
    const GramData gs = gram_matrix(sub, m, KernelMode::Singular, t, rule);
    for (int i = 0; i < 8; ++i) {
      const double s = -0.995 + 1.97 * rng.uniform();
      double r = std::sqrt((1.0 + s) / (1.0 - s));
      const int chart = r > 1.0 ? 1 : 0;
      if (chart == 1) r = 1.0 / r;
      const ChartPoint x{chart, std::polar(r, 2.0 * kPi * rng.uniform())};
      const double lf = kernel_at(gf, full, m, KernelMode::Smooth, x).log_mag;
      const double lp = kernel_at(gp, sub, m, KernelMode::Smooth, x).log_mag;
      const double ls = kernel_at(gs, sub, m, KernelMode::Singular, x).log_mag;
      const double er = eta_at(m, x) * rho_at(m, x);
      CHECK(lp - (ls + 2.0 * t.value() * p * er) >= -1e-8);
      CHECK(lf - lp >= -1e-8);
    }
  }
}

TEST_CASE("rotated divisor: spectra in a moved frame") {
  for (const ChartPoint sigma : {ChartPoint{0, {0.3, 0.2}}, ChartPoint{1, {0.0, 0.0}}}) {
    MetricSpec m = fs(0.9);
    m.sigma = sigma;
    const int p = 8;
    const Rational t{1, 4};
    const SubspaceSpec spec{p, t.floor_mul(p)};
    const GramData g = gram_matrix(spec, m, KernelMode::Smooth, t, QuadratureRule::for_degree(p));
    SplitMix64 rng(55);
    for (int i = 0; i < 8; ++i) {
      const ChartPoint x{static_cast<int>(rng.next() % 2),
                         std::polar(rng.uniform(), 2.0 * kPi * rng.uniform())};
      CHECK(kernel_at(g, spec, m, KernelMode::Smooth, x).log_mag ==
            doctest::Approx(fs_oracle_kernel(p, t, x, OracleKind::Partial, 0.9, sigma).log_mag)
                .epsilon(1e-6));
    }
    const SubspaceSpec fullspec{p, 0};
    const GramData gf = gram_matrix(fullspec, m, KernelMode::Smooth, Rational{0, 1},
                                    QuadratureRule::for_degree(p));
    CHECK(kernel_at(gf, fullspec, m, KernelMode::Smooth, ChartPoint{0, {0.1, 0.7}}).to_double() ==
          doctest::Approx(p + 1.0).epsilon(1e-6));
  }
}

TEST_CASE("kernel errors") {
  const MetricSpec m = eta_one(fs(0.9));
  const SubspaceSpec spec{6, 1};
  const GramData g = gram_matrix(spec, m, KernelMode::Singular, Rational{1, 4},
                                 QuadratureRule::for_degree(6));
  CHECK_THROWS(kernel_at(g, spec, m, KernelMode::Singular, ChartPoint{0, {0.0, 0.0}}));
  CHECK_THROWS(kernel_at(g, SubspaceSpec{7, 1}, m, KernelMode::Singular, ChartPoint{0, {0.5, 0.0}}));
  // partial kernel at the divisor vanishes (m >= 1)
  CHECK(kernel_at(gram_matrix(SubspaceSpec{6, 1}, m, KernelMode::Smooth, Rational{1, 4},
                              QuadratureRule::for_degree(6)),
                  SubspaceSpec{6, 1}, m, KernelMode::Smooth, ChartPoint{0, {0.0, 0.0}})
            .is_zero());
}

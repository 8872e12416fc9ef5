#include "bergman/spectra.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace bergman {

namespace {
constexpr double kPi = std::numbers::pi;

double log_binom(int p, int k) {
  return std::lgamma(p + 1.0) - std::lgamma(k + 1.0) - std::lgamma(p - k + 1.0);
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}
}  // namespace

double fs_norm_log(int p, int k) {
  if (k < 0 || k > p) throw std::out_of_range("fs_norm: k outside [0, p]");
  return -(std::log(p + 1.0) + log_binom(p, k));
}

double fs_norm(int p, int k) { return std::exp(fs_norm_log(p, k)); }

Basis build_basis(const SubspaceSpec& spec) {
  if (!spec.valid()) throw std::invalid_argument("build_basis: require 0 <= m <= p");
  Basis b;
  b.spec = spec;
  for (int k = spec.m; k <= spec.p; ++k) {
    b.k.push_back(k);
    b.log_precond.push_back(-0.5 * fs_norm_log(spec.p, k));
  }
  return b;
}

std::string gram_key(const MetricSpec& m, const SubspaceSpec& spec, KernelMode mode,
                     const Rational& t, const QuadratureRule& rule) {
  std::ostringstream os;
  os << m.to_canonical_json() << "|p=" << spec.p << "|m=" << spec.m
     << "|mode=" << (mode == KernelMode::Smooth ? "smooth" : "singular");
  if (mode == KernelMode::Singular) os << "|t=" << t.str();
  os << "|rule=" << rule.descriptor() << "|v1";
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
  return buf;
}

namespace {

// Everything assembly and evaluation share: the divisor frame plus the
// singular-weight pieces expressed through the frame radius.
struct FrameContext {
  DivisorFrame frame;
  const MetricSpec& metric;
  KernelMode mode;
  double t = 0;
  double tp = 0;
  double alpha = 0;  // 2(m - tp) in singular mode, else 0

  FrameContext(const MetricSpec& m, const SubspaceSpec& spec, KernelMode md, const Rational& tr)
      : frame(m.sigma), metric(m), mode(md) {
    if (md == KernelMode::Singular) {
      t = tr.value();
      tp = static_cast<double>(tr.num) * spec.p / static_cast<double>(tr.den);
      if (spec.m != tr.floor_mul(spec.p))
        throw std::invalid_argument("gram_matrix: singular mode requires m = floor(t p)");
      alpha = 2.0 * (spec.m - tp);
      if (alpha == -0.0) alpha = 0.0;
    }
  }

  // total weight at a frame point; log_r is the log of the frame radius
  double total_weight(const ChartPoint& zeta_rep, double log_r) const {
    const ChartPoint x = frame.from_frame(zeta_rep);
    const double u = std::norm(zeta_rep.z);
    double phi = 0.5 * std::log1p(u) + perturbation_value(metric, x.chart, x.z);
    if (mode == KernelMode::Singular) {
      const double rho = rho_from_log_r(metric.hsigma_scale, log_r);
      if (rho == kNegInf) return kNegInf;
      phi += t * metric.eta.chi(rho) * rho;
    }
    return phi;
  }
};

// preconditioned section values at x, as a shifted exponential vector
struct EvalVector {
  double shift = kNegInf;
  Eigen::VectorXcd b;
};

EvalVector eval_sections(const Basis& basis, const FrameContext& ctx, const ChartPoint& x) {
  const ChartPoint zeta = ctx.frame.to_frame(x.canonical());
  const double u = std::norm(zeta.z);
  const double log_r_chart = u > 0.0 ? 0.5 * std::log(u) : kNegInf;
  const double log_r_frame = zeta.chart == 0 ? log_r_chart : -log_r_chart;
  const double phi = ctx.total_weight(zeta, log_r_frame);
  const int d = static_cast<int>(basis.k.size());
  const int p = basis.spec.p;
  const double th = std::arg(zeta.z);

  EvalVector ev;
  ev.b = Eigen::VectorXcd::Zero(d);
  if (phi == kNegInf) return ev;  // weight blown up only exactly on Sigma

  std::vector<double> lm(d);
  for (int i = 0; i < d; ++i) {
    const int pw = zeta.chart == 0 ? basis.k[i] : p - basis.k[i];
    lm[i] = (pw == 0) ? basis.log_precond[i] - p * phi
                      : pw * log_r_chart + basis.log_precond[i] - p * phi;
    ev.shift = std::max(ev.shift, lm[i]);
  }
  if (ev.shift == kNegInf) return ev;
  for (int i = 0; i < d; ++i) {
    const int pw = zeta.chart == 0 ? basis.k[i] : p - basis.k[i];
    ev.b(i) = std::polar(std::exp(lm[i] - ev.shift), th * pw);
  }
  return ev;
}

LogValue kernel_log_impl(const GramData& g, const Basis& basis, const FrameContext& ctx,
                         const ChartPoint& x) {
  const EvalVector ev = eval_sections(basis, ctx, x);
  if (ev.shift == kNegInf) return LogValue::zero();
  const Eigen::VectorXcd y = g.chol.triangularView<Eigen::Lower>().solve(ev.b);
  const double s = y.squaredNorm();
  if (s <= 0.0) return LogValue::zero();
  return LogValue::from_log(2.0 * ev.shift + std::log(s));
}

void factor_gram(GramData* g) {
  const int d = static_cast<int>(g->matrix.rows());
  Eigen::VectorXd diag = g->matrix.diagonal().real();
  for (int i = 0; i < d; ++i)
    if (!(diag(i) > 0.0)) throw std::runtime_error("gram_matrix: non-positive diagonal entry");
  Eigen::VectorXd dsqrt = diag.array().sqrt();
  Eigen::MatrixXcd scaled = g->matrix;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) scaled(i, j) /= dsqrt(i) * dsqrt(j);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(scaled);
  const double lmax = es.eigenvalues()(d - 1);
  const double lmin = es.eigenvalues()(0);
  g->cond_estimate = (lmin > 0.0) ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (g->cond_estimate > 1e12)
    throw std::runtime_error("gram_matrix: basis ill-conditioned, reduce p or refine rule");

  Eigen::MatrixXcd lhat;
  if (g->cond_estimate > 1e10 || lmin <= 0.0) {
    // eigendecomposition fallback: clip tiny eigenvalues, then re-triangularize
    Eigen::VectorXd ev = es.eigenvalues();
    const double floor_ev = 1e-13 * lmax;
    bool clip = false;
    for (int i = 0; i < d; ++i)
      if (ev(i) < floor_ev) { ev(i) = floor_ev; clip = true; }
    g->clipped = clip;
    Eigen::MatrixXcd root = es.eigenvectors() * ev.array().sqrt().matrix().asDiagonal();
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(root.adjoint());
    Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    lhat = r.adjoint();
    for (int j = 0; j < d; ++j) {  // positive diagonal convention
      const Complex dj = lhat(j, j);
      if (dj != Complex(0, 0)) {
        const Complex ph = std::abs(dj) / dj;
        for (int i = j; i < d; ++i) lhat(i, j) *= ph;
      }
    }
  } else {
    Eigen::LLT<Eigen::MatrixXcd> llt(scaled);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("gram_matrix: Cholesky failed on preconditioned matrix");
    lhat = llt.matrixL();
  }
  g->chol = dsqrt.asDiagonal() * lhat;
}

}  // namespace

GramData gram_matrix(const SubspaceSpec& spec, const MetricSpec& m, KernelMode mode,
                     const Rational& t, const QuadratureRule& rule_in) {
  if (!spec.valid()) throw std::invalid_argument("gram_matrix: empty subspace (m > p)");
  const FrameContext ctx(m, spec, mode, t);
  QuadratureRule rule = rule_in;
  rule.alpha = ctx.alpha;

  const Basis basis = build_basis(spec);
  const int d = spec.dim();
  const int p = spec.p;

  GramData g;
  g.spec = spec;
  g.mode = mode;
  g.t = mode == KernelMode::Singular ? t : Rational{0, 1};
  g.rule = rule;
  g.metric_hash = gram_key(m, spec, mode, t, rule);
  g.matrix = Eigen::MatrixXcd::Zero(d, d);

  Eigen::VectorXcd a(d);
  for (const auto& node : sphere_nodes(rule)) {
    const double log_r_chart = 0.5 * std::log(node.u);
    const double log_r_frame = node.x.chart == 0 ? log_r_chart : -log_r_chart;
    const double phi = ctx.total_weight(node.x, log_r_frame);
    if (std::isnan(phi)) throw std::runtime_error("gram_matrix: weight NaN at node");
    for (int i = 0; i < d; ++i) {
      const int pw = node.x.chart == 0 ? basis.k[i] : p - basis.k[i];
      double lm = pw * log_r_chart + basis.log_precond[i] - p * phi;
      if (node.singular_hemisphere) lm -= 0.25 * rule.alpha * std::log(node.u);
      a(i) = std::polar(std::exp(lm), node.theta * pw);
    }
    g.matrix.selfadjointView<Eigen::Lower>().rankUpdate(a, node.weight);
  }
  g.matrix = Eigen::MatrixXcd(g.matrix.selfadjointView<Eigen::Lower>());
  factor_gram(&g);
  return g;
}

LogValue kernel_at(const GramData& g, const SubspaceSpec& spec, const MetricSpec& m,
                   KernelMode mode, const ChartPoint& x) {
  if (spec.p != g.spec.p || spec.m != g.spec.m || mode != g.mode)
    throw std::invalid_argument("kernel_at: GramData was built for a different subspace/mode");
  if (mode == KernelMode::Singular && chordal(x, m.sigma) == 0.0)
    throw std::domain_error("kernel_at: singular mode at the divisor");
  const FrameContext ctx(m, spec, mode, g.t);
  const Basis basis = build_basis(spec);
  return kernel_log_impl(g, basis, ctx, x);
}

LogValue fs_oracle_kernel(int p, const Rational& t, const ChartPoint& x, OracleKind kind,
                          double c, const ChartPoint& sigma) {
  if (kind == OracleKind::Full) return LogValue::from_log(std::log(p + 1.0));
  const int m = t.floor_mul(p);
  DivisorFrame frame(sigma);
  const double log_u = 2.0 * frame.log_abs_zeta(x);

  if (kind == OracleKind::Partial) {
    if (log_u == kNegInf)
      return m == 0 ? LogValue::from_log(std::log(p + 1.0)) : LogValue::zero();
    if (std::isinf(log_u))  // antipode: only the top monomial survives
      return LogValue::from_log(std::log(p + 1.0));
    const double log1pu = log1p_from_log(log_u);
    std::vector<double> terms;
    terms.reserve(p - m + 1);
    for (int k = m; k <= p; ++k) terms.push_back(log_binom(p, k) + k * log_u);
    return LogValue::from_log(std::log(p + 1.0) - p * log1pu + log_sum_exp(terms));
  }

  // singular, eta == 1:
  // P~ = (1+u)^{-(p-tp)} sum_{k>=m} u^{k-tp} Gamma(p-tp+2)/(Gamma(k-tp+1) Gamma(p-k+1))
  if (!(t.value() < 1.0)) throw std::invalid_argument("fs_oracle_kernel: singular kind needs t < 1");
  (void)c;  // the h_Sigma scale cancels between norms and evaluation weight
  const double tp = static_cast<double>(t.num) * p / static_cast<double>(t.den);
  if (log_u == kNegInf) {
    if (static_cast<double>(m) == tp) return LogValue::from_log(std::log(p - tp + 1.0));
    return LogValue::from_log(std::numeric_limits<double>::infinity());  // blows up at Sigma
  }
  if (std::isinf(log_u)) return LogValue::from_log(std::log(p - tp + 1.0));  // antipode
  const double log1pu = log1p_from_log(log_u);
  std::vector<double> terms;
  terms.reserve(p - m + 1);
  for (int k = m; k <= p; ++k)
    terms.push_back((k - tp) * log_u + std::lgamma(p - tp + 2.0) - std::lgamma(k - tp + 1.0) -
                    std::lgamma(p - k + 1.0));
  return LogValue::from_log(-(p - tp) * log1pu + log_sum_exp(terms));
}

VariationalReport variational_check(const GramData& g, const SubspaceSpec& spec,
                                    const MetricSpec& m, KernelMode mode, const ChartPoint& x,
                                    int n_samples, std::uint64_t seed) {
  const FrameContext ctx(m, spec, mode, g.t);
  const Basis basis = build_basis(spec);
  const EvalVector ev = eval_sections(basis, ctx, x);
  const int d = spec.dim();

  const Eigen::VectorXcd y = g.chol.triangularView<Eigen::Lower>().solve(ev.b);
  const double p_shifted = y.squaredNorm();  // P(x) e^{-2 shift}

  VariationalReport rep;
  rep.n_samples = n_samples;
  if (ev.shift == kNegInf) {  // every section vanishes here; the bound is trivial
    rep.ok = true;
    return rep;
  }
  SplitMix64 rng(seed);
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXcd gv(d);
    for (int i = 0; i < d; ++i) gv(i) = Complex(rng.normal(), rng.normal());
    // vb = conj(coefficients); vb^H G vb = 1 makes the section unit-norm
    Eigen::VectorXcd vb = g.chol.adjoint().triangularView<Eigen::Upper>().solve(gv);
    vb /= gv.norm();
    const Complex sval = vb.dot(ev.b);  // S_v(x) e^{-shift} = vb^H b
    const double ratio = std::norm(sval) / p_shifted;
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (ratio > 1.0 + 1e-9) ++rep.violations;
  }

  // extremal section: conjugated coefficients G^{-1} beta (up to normalization)
  const Eigen::VectorXcd w = g.chol.adjoint().triangularView<Eigen::Upper>().solve(y);
  const double nrm2 = (w.adjoint() * g.matrix * w).real()(0, 0);
  const double extremal = std::norm(w.dot(ev.b)) / nrm2;
  rep.extremal_rel_err = std::abs(extremal / p_shifted - 1.0);
  rep.ok = rep.violations == 0 && rep.extremal_rel_err <= 1e-9;
  return rep;
}

TraceResult trace_identity(const GramData& g, const SubspaceSpec& spec, const MetricSpec& m,
                           KernelMode mode, const QuadratureRule& rule_in) {
  const FrameContext ctx(m, spec, mode, g.t);
  const Basis basis = build_basis(spec);
  QuadratureRule rule = rule_in;
  rule.alpha = ctx.alpha;

  auto run = [&](const QuadratureRule& r) {
    double acc = 0.0;
    for (const auto& node : sphere_nodes(r)) {
      const ChartPoint x = ctx.frame.from_frame(node.x);
      const LogValue lp = kernel_log_impl(g, basis, ctx, x);
      double lv = lp.log_mag;
      if (node.singular_hemisphere) lv -= 0.5 * r.alpha * std::log(node.u);
      acc += node.weight * std::exp(lv);
    }
    return acc;
  };
  const double base = run(rule);
  const double fine = run(rule.doubled());
  return TraceResult{fine, spec.dim(), std::abs(fine - base)};
}

}  // namespace bergman

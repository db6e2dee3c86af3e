#include "polytransfer/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "polytransfer/error.hpp"

namespace polytransfer::transfer {

using Vector = Eigen::VectorXd;

HolderPair HolderPair::from_alpha(double alpha) {
  require(alpha >= 1.0, "HolderPair: alpha must be >= 1");
  if (std::isinf(alpha)) return {alpha, 1.0};
  if (alpha == 1.0) return {1.0, dist::kInf};
  return {alpha, alpha / (alpha - 1.0)};
}

HolderPair HolderPair::from_beta(double beta) {
  const HolderPair swapped = from_alpha(beta);
  return {swapped.beta, swapped.alpha};
}

double carbery_wright_bound(std::size_t d, double q, double gamma, double moment, double C) {
  require(d >= 1, "carbery_wright_bound: degree must be >= 1");
  require(q > 0.0, "carbery_wright_bound: q must be positive");
  require(gamma >= 0.0, "carbery_wright_bound: gamma must be nonnegative");
  if (!(moment > 0.0)) throw InvalidArgument("carbery_wright_bound: moment must be positive");
  if (gamma == 0.0) return 0.0;
  const double raw = C * q * std::pow(gamma, 1.0 / static_cast<double>(d)) / std::pow(moment, 1.0 / q);
  return std::clamp(raw, 0.0, 1.0);
}

Coefficient thm_main_coefficient(std::size_t d, const HolderPair& holder, double d_q_mu, double d_p_mu, double C) {
  require(d >= 1, "thm_main_coefficient: degree must be >= 1");
  require(std::isfinite(holder.beta), "thm_main_coefficient: beta = inf is not supported");
  require(d_q_mu >= 1.0 - 1e-12 && d_p_mu >= 1.0 - 1e-12, "thm_main_coefficient: divergences must be >= 1");
  if (std::isinf(d_q_mu) || std::isinf(d_p_mu)) return {dist::kInf, true};
  const double dd = static_cast<double>(d);
  const double log_value = dd * std::log(C * dd) + dd * holder.beta * std::log(2.0) + std::log(d_q_mu) +
                           holder.beta * dd * std::log(d_p_mu);
  const double value = std::exp(log_value);
  return {value, std::isinf(value)};
}

Coefficient cor_logconcave_coefficient(std::size_t d, double ratio_pq, double C) {
  require(d >= 1, "cor_logconcave_coefficient: degree must be >= 1");
  require(ratio_pq >= 1.0 - 1e-12, "cor_logconcave_coefficient: ratio must be >= 1");
  if (std::isinf(ratio_pq)) return {dist::kInf, true};
  const double dd = static_cast<double>(d);
  const double value = std::exp(dd * std::log(2.0 * C * dd) + dd * std::log(ratio_pq));
  return {value, std::isinf(value)};
}

double optimal_gamma(std::size_t d, double beta, double moment, double d_p_mu, double C) {
  if (moment == 0.0) return 0.0;
  const double dd = static_cast<double>(d);
  const double log_denominator =
      beta * dd * (std::log(C * beta * dd) + beta * std::log(2.0) + beta * std::log(d_p_mu));
  return moment * std::exp(-log_denominator);
}

RatioEstimate empirical_transfer_ratio(const poly::MultiPoly& f, const dist::Density& p, const dist::Density& q,
                                       int power, const dist::McSpec& mc) {
  require(!f.is_zero(), "empirical_transfer_ratio: f is the zero polynomial");
  require(power == 1 || power == 2, "empirical_transfer_ratio: power must be 1 or 2");
  auto g = [&](const Vector& x) {
    const double v = std::abs(f.eval(x));
    return power == 1 ? v : v * v;
  };
  RatioEstimate out;
  out.lhs = poly::mc_functional(g, q, mc);
  dist::McSpec mc_p = mc;
  mc_p.seed = mc.seed ^ 0x5DEECE66DULL;
  out.rhs = poly::mc_functional(g, p, mc_p);
  out.degenerate = out.rhs.value <= 3.0 * out.rhs.stderr_;
  out.ratio = out.degenerate ? std::nan("") : out.lhs.value / out.rhs.value;
  return out;
}

namespace {

std::vector<double> real_roots_in(const std::vector<double>& c, double a, double b) {
  std::size_t deg = c.size() - 1;
  const double scale = *std::max_element(c.begin(), c.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
  while (deg > 0 && std::abs(c[deg]) <= 1e-14 * std::abs(scale)) --deg;
  std::vector<double> roots;
  if (deg == 0) return roots;
  const auto n = static_cast<Eigen::Index>(deg);
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) companion(i, n - 1) = -c[static_cast<std::size_t>(i)] / c[deg];
  const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues();
  auto value = [&](double x) {
    double v = 0.0;
    for (std::size_t k = deg + 1; k-- > 0;) v = v * x + c[k];
    return v;
  };
  auto slope = [&](double x) {
    double v = 0.0;
    for (std::size_t k = deg + 1; k-- > 1;) v = v * x + static_cast<double>(k) * c[k];
    return v;
  };
  for (const auto& z : eig) {
    if (std::abs(z.imag()) > 1e-7 * (1.0 + std::abs(z.real()))) continue;
    double x = z.real();
    for (int it = 0; it < 5; ++it) {
      const double s = slope(x);
      if (s == 0.0) break;
      x -= value(x) / s;
    }
    if (x > a && x < b) roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

}  // namespace

double abs_moment_1d(const poly::MultiPoly& f, const dist::Density& d, double power) {
  require(f.dim() == 1 && d.dim() == 1, "abs_moment_1d: univariate polynomial and density required");
  const poly::MultiPoly mono = f.to_monomial();
  std::vector<double> c(f.degree() + 1, 0.0);
  for (std::size_t i = 0; i < mono.size(); ++i) c[static_cast<std::size_t>(mono.indices()[i][0])] = mono.coefficients()[i];
  if (std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; })) return 0.0;
  auto fx = [&](double x) {
    double v = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) v = v * x + c[k];
    return std::pow(std::abs(v), power);
  };

  double a, b;
  std::function<double(double)> weight;
  std::size_t panels;
  if (const auto* u = std::get_if<dist::UniformBox>(&d.kind())) {
    a = u->lo[0];
    b = u->hi[0];
    const double w = 1.0 / (b - a);
    weight = [w](double) { return w; };
    panels = 4;
  } else if (const auto* g = std::get_if<dist::Gaussian>(&d.kind())) {
    const double m = g->mean[0], s = std::sqrt(g->cov(0, 0));
    a = m - 12.0 * s;
    b = m + 12.0 * s;
    weight = [m, s](double x) { return normal_pdf((x - m) / s) / s; };
    panels = 64;
  } else {
    throw InvalidArgument("abs_moment_1d: density must be uniform or Gaussian");
  }
  std::vector<double> cuts{a};
  for (double r : real_roots_in(c, a, b)) cuts.push_back(r);
  cuts.push_back(b);
  const std::size_t order = std::max<std::size_t>(20, static_cast<std::size_t>(power * static_cast<double>(f.degree())) / 2 + 2);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    total += integrate_gl([&](double x) { return fx(x) * weight(x); }, cuts[i], cuts[i + 1], panels, order);
  return total;
}

CatalogEntry catalog_coefficient(dist::BridgeRequest kind, const dist::BridgeParams& params, std::size_t d) {
  dist::Density bridge = dist::bridge_construct(kind, params);
  const double z = bridge.normalizer();
  Coefficient coef;
  const auto* shift = std::get_if<dist::ShiftBridge>(&bridge.kind());
  if (shift && !shift->log_concave) {
    coef = {dist::kInf, true};
  } else {
    coef.value = std::exp(static_cast<double>(d + 1) * std::log(z));
    coef.infinite = std::isinf(coef.value);
  }
  return {std::move(bridge), z, coef};
}

std::string TransferReport::csv_header() { return "kind,d,alpha,beta,C,coefficient,lhs,lhs_se,rhs,rhs_se,satisfied"; }

std::string TransferReport::csv_row() const {
  std::ostringstream out;
  out.precision(10);
  out << kind << ',' << d << ',' << holder.alpha << ',' << holder.beta << ',' << C << ',' << coefficient.value << ','
      << lhs.value << ',' << lhs.stderr_ << ',' << rhs.value << ',' << rhs.stderr_ << ',' << (satisfied ? "true" : "false");
  return out.str();
}

TransferReport verify_transfer(const poly::MultiPoly& f, const dist::Density& p, const dist::Density& q,
                               const std::optional<dist::Density>& bridge, std::size_t d, const HolderPair& holder,
                               double C, const dist::McSpec& mc) {
  require(!f.is_zero(), "verify_transfer: f is the zero polynomial");
  require_dim(p.dim(), f.dim(), "verify_transfer P");
  require_dim(q.dim(), f.dim(), "verify_transfer Q");
  TransferReport report;
  report.d = d;
  report.holder = holder;
  report.C = C;

  auto divergence = [&](const dist::Density& a, const dist::Density& b, std::uint64_t salt) {
    if (std::isinf(holder.alpha)) {
      const auto sup = dist::density_ratio_sup(a, b);
      return sup.infinite ? dist::kInf : sup.value;
    }
    dist::McSpec m = mc;
    m.seed = mc.seed + salt;
    const auto div = dist::renyi_divergence(a, b, holder.alpha, m);
    return div.infinite ? dist::kInf : div.value;
  };

  if (bridge) {
    require(bridge->is_log_concave(), "verify_transfer: the bridge must be log-concave");
    report.kind = "theorem";
    report.bridge = bridge->name();
    // A ratio sup can come out a hair below 1 on a grid; divergences are >= 1.
    const double dq = std::max(1.0, divergence(q, *bridge, 11));
    const double dp = std::max(1.0, divergence(p, *bridge, 12));
    report.coefficient = thm_main_coefficient(d, holder, dq, dp, C);
  } else {
    require(q.is_log_concave(), "verify_transfer: without a bridge the target must be log-concave");
    report.kind = "log-concave-target";
    report.bridge = "target-is-log-concave";
    const double dpq = std::max(1.0, divergence(p, q, 13));
    report.coefficient = std::isinf(holder.alpha) ? cor_logconcave_coefficient(d, dpq, C)
                                                  : thm_main_coefficient(d, holder, 1.0, dpq, C);
  }

  const double beta = holder.beta;
  require(std::isfinite(beta), "verify_transfer: beta = inf is not supported");
  report.lhs = poly::mc_functional([&](const Vector& x) { return std::abs(f.eval(x)); }, q, mc);
  dist::McSpec mc_p = mc;
  mc_p.seed = mc.seed ^ 0x5DEECE66DULL;
  const Estimate m = poly::mc_functional([&](const Vector& x) { return std::pow(std::abs(f.eval(x)), beta); }, p, mc_p);
  if (report.coefficient.infinite) {
    report.rhs = {dist::kInf, 0.0};
    report.satisfied = true;
    return report;
  }
  const double root = std::pow(m.value, 1.0 / beta);
  const double root_se = m.value > 0.0 ? std::pow(m.value, 1.0 / beta - 1.0) * m.stderr_ / beta : 0.0;
  report.rhs = {report.coefficient.value * root, report.coefficient.value * root_se};
  const double se = std::hypot(report.lhs.stderr_, report.rhs.stderr_);
  report.satisfied = report.lhs.value <= report.rhs.value + 3.0 * se;
  return report;
}

poly::MultiPoly random_polynomial(std::size_t n, std::size_t d, std::uint64_t seed) {
  poly::MultiPoly p(n, d);
  Rng rng(seed);
  double norm = 0.0;
  for (auto& c : p.coefficients()) {
    c = rng.normal();
    norm += c * c;
  }
  norm = std::sqrt(norm);
  for (auto& c : p.coefficients()) c /= norm;
  return p;
}

}  // namespace polytransfer::transfer

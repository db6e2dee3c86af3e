#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "polytransfer/dist.hpp"
#include "polytransfer/poly.hpp"

namespace polytransfer::transfer {

// Conjugate exponents, 1/alpha + 1/beta = 1 with 1/inf = 0.
struct HolderPair {
  double alpha;
  double beta;

  static HolderPair from_alpha(double alpha);
  static HolderPair from_beta(double beta);
  // The alpha = inf, beta = 1 pair.
  static HolderPair sup_norm() { return {dist::kInf, 1.0}; }
};

// Small-ball bound Pr[|f| <= gamma] <= C q gamma^{1/d} / (E|f|^{q/d})^{1/q},
// where `moment` is E|f|^{q/d}; clipped to [0, 1].
double carbery_wright_bound(std::size_t d, double q, double gamma, double moment, double C = 1.0);

// A coefficient that may be +inf (infinite divergence or ratio).
struct Coefficient {
  double value = 0.0;
  bool infinite = false;
};

// (C d)^d 2^{d beta} D_Q D_P^{beta d}, evaluated in log space. Finite beta only.
Coefficient thm_main_coefficient(std::size_t d, const HolderPair& holder, double d_q_mu, double d_p_mu,
                                 double C = 1.0);
// (2 C d)^d ratio^d for a log-concave target.
Coefficient cor_logconcave_coefficient(std::size_t d, double ratio_pq, double C = 1.0);

// gamma = moment / (C beta d 2^beta D^beta)^{beta d}: where the small-ball
// estimate in the change-of-measure argument equals 1/2.
double optimal_gamma(std::size_t d, double beta, double moment, double d_p_mu, double C = 1.0);

struct RatioEstimate {
  double ratio = 0.0;
  Estimate lhs;  // E_Q |f|^power
  Estimate rhs;  // E_P |f|^power
  bool degenerate = false;
};

// E_Q |f|^power / E_P |f|^power. Flags a denominator within three standard
// errors of zero as degenerate instead of dividing.
RatioEstimate empirical_transfer_ratio(const poly::MultiPoly& f, const dist::Density& p, const dist::Density& q,
                                       int power, const dist::McSpec& mc);

// E|f|^power for a univariate polynomial under a one-dimensional uniform or
// Gaussian density, by Gauss-Legendre quadrature on the pieces between real
// roots. Exact up to rounding for uniforms.
double abs_moment_1d(const poly::MultiPoly& f, const dist::Density& d, double power);

struct CatalogEntry {
  dist::Density bridge;
  double normalizer;  // Z of the bridge
  Coefficient coefficient;  // |dQ/dnu|_inf |dP/dnu|_inf^d
};

// Bridge for a catalog pair and its coefficient. Both sups equal Z for every
// catalog member, giving Z^{d+1}; a general covariance whose precision
// couples the shift direction with the rest gives +inf.
CatalogEntry catalog_coefficient(dist::BridgeRequest kind, const dist::BridgeParams& params, std::size_t d);

struct TransferReport {
  std::string kind;    // "theorem" (through a bridge) or "log-concave-target"
  std::string bridge;  // bridge name, or "target-is-log-concave"
  std::size_t d = 0;
  HolderPair holder{dist::kInf, 1.0};
  double C = 1.0;
  Coefficient coefficient;
  Estimate lhs;  // E_Q |f|
  Estimate rhs;  // coefficient * (E_P |f|^beta)^{1/beta}
  bool satisfied = false;

  static std::string csv_header();
  std::string csv_row() const;
};

// Measures both sides of the transfer inequality for f. Without a bridge the
// target must be log-concave; the coefficient then uses D_alpha(P || Q).
// satisfied = lhs <= rhs + 3 * combined standard error.
TransferReport verify_transfer(const poly::MultiPoly& f, const dist::Density& p, const dist::Density& q,
                               const std::optional<dist::Density>& bridge, std::size_t d, const HolderPair& holder,
                               double C, const dist::McSpec& mc);

// Random degree-d polynomial in n variables: i.i.d. standard normal monomial
// coefficients, rescaled to unit coefficient norm.
poly::MultiPoly random_polynomial(std::size_t n, std::size_t d, std::uint64_t seed);

}  // namespace polytransfer::transfer

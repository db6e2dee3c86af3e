#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "polytransfer/transfer.hpp"

using namespace polytransfer;
using namespace polytransfer::transfer;
using dist::Density;

namespace {

poly::MultiPoly univariate(std::vector<double> coeffs) {
  poly::MultiPoly p(1, coeffs.size() - 1);
  for (std::size_t k = 0; k < coeffs.size(); ++k) p.set_coefficient({static_cast<int>(k)}, coeffs[k]);
  return p;
}

// E|x|^k under N(0, 1).
double abs_normal_moment(double k) { return std::pow(2.0, k / 2.0) * std::tgamma((k + 1.0) / 2.0) / std::sqrt(std::numbers::pi); }

}  // namespace

TEST_SUITE("transfer") {
  TEST_CASE("Holder pairs") {
    CHECK(HolderPair::from_alpha(2.0).beta == doctest::Approx(2.0));
    CHECK(HolderPair::from_alpha(dist::kInf).beta == 1.0);
    CHECK(HolderPair::from_beta(1.5).alpha == doctest::Approx(3.0));
    CHECK(std::isinf(HolderPair::from_alpha(1.0).beta));
  }

  TEST_CASE("small-ball bound") {
    CHECK(carbery_wright_bound(2, 1.0, 0.0, 1.0) == 0.0);
    const double moment = std::sqrt(2.0 / std::numbers::pi);  // E|x|
    CHECK(carbery_wright_bound(1, 1.0, 0.1, moment) == doctest::Approx(0.1 / moment));
    CHECK(carbery_wright_bound(2, 2.0, 0.04, 1.0, 1.5) == doctest::Approx(1.5 * 2.0 * 0.2));
    CHECK(carbery_wright_bound(1, 1.0, 100.0, 1.0) == 1.0);
  }

  TEST_CASE("small-ball bound dominates x^d under a Gaussian") {
    for (std::size_t d = 1; d <= 4; ++d) {
      const double q = static_cast<double>(d);
      const double moment = abs_normal_moment(q);  // E|x^d|^{q/d} with q = d
      for (double gamma : {1e-4, 1e-3, 1e-2, 0.1, 0.5}) {
        const double truth = 2.0 * normal_cdf(std::pow(gamma, 1.0 / q)) - 1.0;
        CHECK(truth <= carbery_wright_bound(d, q, gamma, moment));
      }
    }
  }

  TEST_CASE("coefficients") {
    CHECK(thm_main_coefficient(1, HolderPair::from_beta(1.0), 1.0, 1.0).value == doctest::Approx(2.0));
    // (2)^2 * 2^{3} * 1.5 * 2^{3}
    CHECK(thm_main_coefficient(2, HolderPair::from_beta(1.5), 1.5, 2.0).value == doctest::Approx(384.0));
    CHECK(thm_main_coefficient(2, HolderPair::from_beta(1.0), 1.5, 2.0).value == doctest::Approx(96.0));
    CHECK(cor_logconcave_coefficient(1, 1.0).value == doctest::Approx(2.0));
    CHECK(cor_logconcave_coefficient(3, 3.0).value == doctest::Approx(5832.0));
    CHECK(thm_main_coefficient(2, HolderPair::from_beta(1.0), dist::kInf, 2.0).infinite);

    // With a bridge equal to the target (D_Q = 1) and beta = 1 the two coincide.
    for (std::size_t d = 1; d <= 5; ++d)
      for (double ratio : {1.0, 2.5, 7.0})
        CHECK(thm_main_coefficient(d, HolderPair::from_beta(1.0), 1.0, ratio).value ==
              doctest::Approx(cor_logconcave_coefficient(d, ratio).value).epsilon(1e-12));

    // Polynomial dependence on 1/alpha: coefficient * alpha^d is constant.
    const double base = cor_logconcave_coefficient(2, 1.0 / 0.5).value * 0.25;
    for (double a : {0.25, 0.1, 0.01}) CHECK(cor_logconcave_coefficient(2, 1.0 / a).value * a * a == doctest::Approx(base));
  }

  TEST_CASE("optimal gamma") {
    CHECK(optimal_gamma(1, 1.0, 1.0, 1.0) == doctest::Approx(0.5));
    CHECK(optimal_gamma(1, 1.0, 0.0, 1.0) == 0.0);
    CHECK(optimal_gamma(2, 1.0, 2.0, 1.0) == doctest::Approx(2.0 * optimal_gamma(2, 1.0, 1.0, 1.0)));
    // At the optimum the small-ball estimate equals 1/2.
    const double g = optimal_gamma(1, 1.0, 0.8, 1.0);
    CHECK(1.0 * 2.0 * 1.0 * carbery_wright_bound(1, 1.0, g, 0.8) == doctest::Approx(1.0));
  }

  TEST_CASE("absolute moments against quadrature") {
    const auto f = univariate({0.5, -2.0, 0.0, 1.0});  // x^3 - 2x + 1/2
    const auto fx = [](double x) { return std::abs(x * x * x - 2.0 * x + 0.5); };
    const auto u = Density::uniform1d(-1.0, 2.0);
    CHECK(abs_moment_1d(f, u, 1.0) == doctest::Approx(integrate_gl(fx, -1.0, 2.0, 20000, 10) / 3.0).epsilon(1e-8));
    const auto g = Density::gaussian1d(0.5, 2.0);
    const double ref = integrate_gl([&](double x) { return fx(x) * g.pdf(Eigen::VectorXd::Constant(1, x)); }, -20.0, 20.0, 20000, 10);
    CHECK(abs_moment_1d(f, g, 1.0) == doctest::Approx(ref).epsilon(1e-8));
  }

  TEST_CASE("empirical transfer ratio") {
    const auto p = Density::uniform1d(0.0, 1.0);
    const auto q = Density::uniform1d(0.0, 2.0);
    const auto one = univariate({1.0});
    CHECK(empirical_transfer_ratio(one, p, q, 1, {1000, 1}).ratio == doctest::Approx(1.0));
    const auto x = univariate({0.0, 1.0});
    const auto r = empirical_transfer_ratio(x, p, q, 1, {400000, 1});
    CHECK(r.ratio == doctest::Approx(2.0).epsilon(0.01));
    const auto zero = univariate({0.0});
    CHECK_THROWS(empirical_transfer_ratio(zero, p, q, 1, {1000, 1}));
  }

  TEST_CASE("catalog coefficients") {
    dist::BridgeParams params;
    params.mu = 0.0;
    CHECK(catalog_coefficient(dist::BridgeRequest::Gaussian1D, params, 2).coefficient.value == doctest::Approx(1.0));
    for (double mu : {0.5, 1.0, 2.0, 4.0}) {
      params.mu = mu;
      const auto e = catalog_coefficient(dist::BridgeRequest::Gaussian1D, params, 1);
      CHECK(e.coefficient.value == doctest::Approx(std::pow(1.0 + mu / std::sqrt(2.0 * std::numbers::pi), 2)));
    }
    // Rotation invariance: a shift of norm 3 in R^3 matches the 1-D shift by 3,
    // and the coefficient stays below (1 + |mu|)^{d+1}.
    params.mu_vec = Eigen::Vector3d(1.0, -2.0, 2.0);
    const auto nd = catalog_coefficient(dist::BridgeRequest::GaussianND, params, 2);
    params.mu = 3.0;
    const auto one_d = catalog_coefficient(dist::BridgeRequest::Gaussian1D, params, 2);
    CHECK(nd.coefficient.value == doctest::Approx(one_d.coefficient.value).epsilon(1e-12));
    CHECK(nd.coefficient.value <= std::pow(4.0, 3));

    // The closed form agrees with a numerical sup in 2-D.
    params.mu_vec = Eigen::Vector2d(1.0, 1.0);
    const auto e2 = catalog_coefficient(dist::BridgeRequest::GaussianND, params, 1);
    const auto q = Density::gaussian(params.mu_vec, Eigen::Matrix2d::Identity());
    CHECK(dist::density_ratio_sup(q, e2.bridge).value == doctest::Approx(e2.normalizer).epsilon(0.01));

    dist::BridgeParams coupled;
    coupled.cov = Eigen::Matrix2d{{1.0, 0.8}, {0.8, 1.0}};
    coupled.gamma = 1.0;
    CHECK(catalog_coefficient(dist::BridgeRequest::GaussianGeneralCov, coupled, 1).coefficient.infinite);
  }

  TEST_CASE("transfer inequality checks") {
    const auto g = Density::standard_normal(1);
    const auto f = univariate({0.3, -1.0, 0.5});
    const auto same = verify_transfer(f, g, g, std::nullopt, 2, HolderPair::sup_norm(), 1.0, {50000, 1});
    CHECK(same.satisfied);

    // Disjoint supports: no direct density ratio, but the bridge U([0, 3]) works.
    const auto p = Density::uniform1d(0.0, 1.0);
    const auto q = Density::uniform1d(2.0, 3.0);
    const auto b = Density::uniform1d(0.0, 3.0);
    const auto r = verify_transfer(f, p, q, b, 2, HolderPair::sup_norm(), 1.0, {50000, 1});
    CHECK_FALSE(r.coefficient.infinite);
    CHECK(r.satisfied);
    CHECK(TransferReport::csv_header().find("satisfied") != std::string::npos);
  }

  TEST_CASE("random polynomials have unit coefficient norm") {
    const auto p = random_polynomial(3, 4, 9);
    double s = 0.0;
    for (double c : p.coefficients()) s += c * c;
    CHECK(s == doctest::Approx(1.0));
    CHECK(random_polynomial(3, 4, 9).coefficients() == p.coefficients());
  }
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "polytransfer/dist.hpp"
#include "polytransfer/error.hpp"

using namespace polytransfer;
using namespace polytransfer::dist;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }
Matrix m1(double a) { return Matrix::Constant(1, 1, a); }

double integrate_1d(const Density& d) {
  const auto [lo, hi] = d.bounding_box(12.0);
  return integrate_gl([&](double x) { return d.pdf(v1(x)); }, lo[0], hi[0], 4000, 20);
}

}  // namespace

TEST_SUITE("dist") {
  TEST_CASE("pdf values") {
    CHECK(Density::standard_normal(1).pdf(v1(0.0)) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
    const auto u = Density::uniform1d(0.0, 2.0);
    CHECK(u.pdf(v1(1.0)) == doctest::Approx(0.5));
    CHECK(u.pdf(v1(3.0)) == 0.0);
    const auto g2 = Density::standard_normal(2);
    Vector x(2);
    x << 1.0, -1.0;
    CHECK(g2.pdf(x) == doctest::Approx(std::exp(-1.0) / (2.0 * std::numbers::pi)));
    CHECK(g2.log_pdf(x) == doctest::Approx(std::log(g2.pdf(x))));
  }

  TEST_CASE("one-dimensional members integrate to one") {
    const std::vector<Density> members = {
        Density::gaussian1d(0.3, 2.0),
        Density::uniform1d(-1.0, 2.0),
        Density::truncated_gaussian(v1(0.0), m1(1.0), TruncationSet::intervals({{0.0, kInf}})),
        Density::truncated_gaussian(v1(1.0), m1(1.0), TruncationSet::intervals({{-2.0, -1.0}, {0.5, 3.0}})),
        bridge_gaussian1d(2.0),
        bridge_gaussian1d(0.5),
    };
    for (const auto& d : members) {
      INFO(d.name());
      CHECK(integrate_1d(d) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("bridge with zero shift is the base density") {
    const auto b = bridge_gaussian1d(0.0);
    const auto g = Density::standard_normal(1);
    for (double x = -4.0; x <= 4.0; x += 0.25) CHECK(b.pdf(v1(x)) == doctest::Approx(g.pdf(v1(x))).epsilon(1e-14));
  }

  TEST_CASE("bridge normalizer") {
    CHECK(bridge_gaussian1d(std::sqrt(2.0 * std::numbers::pi)).normalizer() == doctest::Approx(2.0));
    CHECK(bridge_gaussian1d(0.0).normalizer() == doctest::Approx(1.0));
    Vector mu(3);
    mu << 1.0, 2.0, 2.0;  // norm 3
    CHECK(bridge_gaussian_nd(mu).normalizer() == doctest::Approx(1.0 + 3.0 / std::sqrt(2.0 * std::numbers::pi)));
  }

  TEST_CASE("bridges are log-concave along random chords") {
    Vector mu(2);
    mu << 1.5, -0.5;
    const std::vector<Density> bridges = {bridge_gaussian1d(2.0), bridge_gaussian_nd(mu)};
    for (const auto& b : bridges) {
      CHECK(b.is_log_concave());
      Rng rng(11);
      for (int t = 0; t < 2000; ++t) {
        Vector a(b.dim()), c(b.dim());
        for (Eigen::Index i = 0; i < a.size(); ++i) {
          a[i] = rng.uniform(-4.0, 5.0);
          c[i] = rng.uniform(-4.0, 5.0);
        }
        const Vector m = 0.5 * (a + c);
        CHECK(b.log_pdf(m) >= 0.5 * (b.log_pdf(a) + b.log_pdf(c)) - 1e-9);
      }
    }
  }

  TEST_CASE("general covariance bridge") {
    Matrix diag = Matrix::Zero(2, 2);
    diag(0, 0) = 4.0;
    diag(1, 1) = 0.5;
    const auto b = bridge_gaussian_general_cov(diag, 1.0);
    CHECK(b.is_log_concave());
    CHECK(b.normalizer() == doctest::Approx(1.0 + 1.0 / std::sqrt(2.0 * std::numbers::pi * 4.0)));
    Matrix coupled(2, 2);
    coupled << 1.0, 0.8, 0.8, 1.0;
    CHECK_FALSE(bridge_gaussian_general_cov(coupled, 1.0).is_log_concave());
  }

  TEST_CASE("sampling matches moments and is reproducible") {
    const auto d = Density::gaussian1d(1.0, 4.0);
    const auto xs = sample(d, 100000, 5);
    double s = 0.0, s2 = 0.0;
    for (const auto& x : xs) {
      s += x[0];
      s2 += x[0] * x[0];
    }
    const double n = static_cast<double>(xs.size());
    CHECK(std::abs(s / n - 1.0) < 5.0 * 2.0 / std::sqrt(n));
    CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(4.0).epsilon(0.03));
    const auto again = sample(d, 100000, 5);
    CHECK(std::equal(xs.begin(), xs.end(), again.begin(), [](const Vector& a, const Vector& b) { return a == b; }));
  }

  TEST_CASE("truncated sampler passes a Kolmogorov-Smirnov check") {
    const auto d = Density::truncated_gaussian(v1(0.0), m1(1.0), TruncationSet::intervals({{0.5, 2.0}}));
    const std::size_t n = 10000;
    auto xs = sample(d, n, 9);
    std::vector<double> v;
    for (const auto& x : xs) v.push_back(x[0]);
    std::sort(v.begin(), v.end());
    const double z = normal_cdf(2.0) - normal_cdf(0.5);
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK_UNARY(v[i] >= 0.5);
      CHECK_UNARY(v[i] <= 2.0);
      const double f = (normal_cdf(v[i]) - normal_cdf(0.5)) / z;
      ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks < 2.0 / std::sqrt(static_cast<double>(n)));
    CHECK(d.cdf(1.0) == doctest::Approx((normal_cdf(1.0) - normal_cdf(0.5)) / z));
    CHECK(d.quantile(d.cdf(1.3)) == doctest::Approx(1.3).epsilon(1e-9));
  }

  TEST_CASE("deep-tail truncation uses the inverse-CDF path") {
    const auto d = Density::truncated_gaussian(v1(0.0), m1(1.0), TruncationSet::intervals({{6.0, kInf}}));
    const auto xs = sample(d, 2000, 1);
    for (const auto& x : xs) CHECK_UNARY(x[0] >= 6.0);
  }

  TEST_CASE("density ratio sup") {
    const auto p = Density::uniform1d(0.0, 1.0);
    const auto q = Density::uniform1d(0.0, 3.0);
    const auto r = density_ratio_sup(p, q);
    CHECK(r.closed_form);
    CHECK(r.value == doctest::Approx(3.0));
    CHECK(density_ratio_sup(q, p).infinite);

    const auto g = Density::standard_normal(1);
    CHECK(density_ratio_sup(g, g).value == doctest::Approx(1.0).epsilon(1e-9));

    const double mu = 2.0;
    const auto b = bridge_gaussian1d(mu);
    const double z = 1.0 + mu / std::sqrt(2.0 * std::numbers::pi);
    CHECK(density_ratio_sup(g, b).value == doctest::Approx(z).epsilon(1e-3));
    CHECK(density_ratio_sup(Density::gaussian1d(mu, 1.0), b).value == doctest::Approx(z).epsilon(1e-3));
  }

  TEST_CASE("Renyi divergence") {
    const auto g = Density::standard_normal(1);
    const auto same = renyi_divergence(g, g, 2.0, {20000, 1});
    CHECK(same.value == doctest::Approx(1.0).epsilon(1e-12));

    const auto p = Density::uniform1d(0.0, 1.0);
    const auto q = Density::uniform1d(0.0, 2.0);
    // Under Q, P/Q is 2 on half the mass: alpha = 1 gives 1, alpha = 2 gives sqrt 2.
    const auto d1 = renyi_divergence(p, q, 1.0, {200000, 2});
    CHECK(std::abs(d1.value - 1.0) < 4.0 * d1.stderr_ + 1e-12);
    const auto d2 = renyi_divergence(p, q, 2.0, {200000, 2});
    CHECK(d2.value == doctest::Approx(std::sqrt(2.0)).epsilon(0.01));
    const auto d4 = renyi_divergence(p, q, 4.0, {200000, 2});
    const auto dinf = renyi_divergence(p, q, kInf);
    CHECK(dinf.value == doctest::Approx(2.0));
    CHECK(d1.value <= d2.value);
    CHECK(d2.value <= d4.value);
    CHECK(d4.value <= dinf.value + 1e-12);
    // Reversed roles: the ratio is 1/2 on the whole reference support.
    CHECK(renyi_divergence(q, p, 2.0, {10000, 3}).value == doctest::Approx(0.5));
  }

  TEST_CASE("Gaussian masses") {
    const Vector m = v1(0.0);
    const Matrix c = m1(1.0);
    CHECK(gaussian_mass(m, c, TruncationSet::intervals({{0.0, kInf}})).value == doctest::Approx(0.5));
    CHECK(gaussian_mass(m, c, TruncationSet::whole_line()).value == doctest::Approx(1.0));
    const auto tail = gaussian_mass(m, c, TruncationSet::intervals({{1.0, kInf}}));
    CHECK(tail.exact);
    CHECK(tail.value == doctest::Approx(0.15865525393145707).epsilon(1e-10));

    Vector n(2);
    n << 1.0, 1.0;
    const auto half = gaussian_mass(Vector::Zero(2), Matrix::Identity(2, 2), TruncationSet::halfspace(n, std::sqrt(2.0)));
    CHECK(half.value == doctest::Approx(normal_sf(1.0)).epsilon(1e-10));

    Vector lo(2), hi(2);
    lo << -1.0, -1.0;
    hi << 1.0, 1.0;
    const auto box = gaussian_mass(Vector::Zero(2), Matrix::Identity(2, 2), TruncationSet::box(lo, hi), {400000, 4});
    const double exact = std::pow(normal_interval_mass(-1.0, 1.0), 2);
    CHECK(std::abs(box.value - exact) < 4.0 * box.stderr_);
  }

  TEST_CASE("invalid arguments are rejected") {
    CHECK_THROWS(Density::uniform1d(1.0, 0.0));
    CHECK_THROWS(Density::gaussian1d(0.0, -1.0));
    CHECK_THROWS(TruncationSet::intervals({{2.0, 3.0}, {0.0, 1.0}}));
  }
}

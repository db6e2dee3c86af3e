#include <doctest.h>

#include <bit>
#include <cmath>
#include <sstream>
#include <vector>

#include "polytransfer/boolean.hpp"
#include "polytransfer/rng.hpp"

using namespace polytransfer;
using namespace polytransfer::boolean;

namespace {

// Coordinate i of a point, +1 or -1.
int coord(Mask point, std::size_t i) { return (point >> i) & 1u ? -1 : 1; }

BooleanFn random_fn(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> t(std::size_t{1} << n);
  for (auto& v : t) v = rng.normal();
  return BooleanFn::from_table(n, t);
}

}  // namespace

TEST_SUITE("boolean") {
  TEST_CASE("Fourier coefficients of simple functions") {
    const auto dict = fourier_transform(BooleanFn::from_function(4, [](const std::vector<int>& x) { return x[2]; }));
    CHECK(dict.coefficient(1u << 2) == doctest::Approx(1.0));
    CHECK(dict.fourier().size() == 1);
    CHECK(dict.degree() == 1);

    const auto maj = fourier_transform(BooleanFn::from_function(
        3, [](const std::vector<int>& x) { return x[0] + x[1] + x[2] > 0 ? 1.0 : -1.0; }));
    for (Mask s : {1u, 2u, 4u}) CHECK(maj.coefficient(s) == doctest::Approx(0.5));
    CHECK(maj.coefficient(7u) == doctest::Approx(-0.5));
    CHECK(maj.coefficient(3u) == doctest::Approx(0.0));
  }

  TEST_CASE("transform against the defining sum, Parseval, and inversion") {
    const std::size_t n = 6;
    const auto f = fourier_transform(random_fn(n, 3));
    double energy = 0.0, table_energy = 0.0;
    for (Mask s = 0; s < (1u << n); ++s) {
      double direct = 0.0;
      for (Mask x = 0; x < (1u << n); ++x) direct += f.table()[x] * (std::popcount(s & x) % 2 ? -1.0 : 1.0);
      direct /= 64.0;
      CHECK(f.coefficient(s) == doctest::Approx(direct).epsilon(1e-12));
      energy += direct * direct;
    }
    for (double v : f.table()) table_energy += v * v / 64.0;
    CHECK(energy == doctest::Approx(table_energy).epsilon(1e-12));

    const auto back = fourier_transform(BooleanFn::from_fourier(n, f.fourier()));
    for (Mask x = 0; x < 64; ++x) CHECK(back.value(x) == doctest::Approx(f.table()[x]).epsilon(1e-10));
  }

  TEST_CASE("influences match the enumeration formula") {
    const std::size_t n = 5;
    const auto f = fourier_transform(random_fn(n, 5));
    const auto inf = influences(f);
    double tau = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      for (Mask x = 0; x < 32; ++x) {
        const double d = (f.value(x) - f.value(x ^ (1u << i))) / 2.0;
        e += d * d / 32.0;
      }
      CHECK(inf.inf[i] == doctest::Approx(e).epsilon(1e-10));
      tau = std::max(tau, e);
    }
    CHECK(inf.tau == doctest::Approx(tau));
  }

  TEST_CASE("variance normalization") {
    const auto nf = normalize_variance(fourier_transform(random_fn(4, 8)));
    double var = 0.0;
    for (const auto& [s, c] : fourier_transform(nf.f).fourier())
      if (s != 0) var += c * c;
    CHECK(var == doctest::Approx(1.0));
  }

  TEST_CASE("conditional moments by restriction") {
    const std::size_t n = 5;
    const auto f = fourier_transform(random_fn(n, 12));
    const auto s = SeenSet::frozen(n, 1, -1);
    CHECK(s.mass() == 0.5);
    // Restriction identity: fixing x_2 = -1 maps chi_T to -chi_{T \ {2}} when 2 is in T.
    double mean = 0.0;
    for (const auto& [t, c] : f.fourier())
      if ((t & ~2u) == 0) mean += (t & 2u) ? -c : c;
    const auto m = conditional_moments(f, s);
    CHECK(m.ep == doctest::Approx(mean).epsilon(1e-10));
    CHECK(m.eq == doctest::Approx(f.coefficient(0)).epsilon(1e-10));

    std::vector<bool> members(32);
    for (Mask x = 0; x < 32; ++x) members[x] = coord(x, 1) == -1;
    const auto m2 = conditional_moments(f, SeenSet::bitmask(n, members));
    CHECK(m2.ep2 == doctest::Approx(m.ep2).epsilon(1e-12));
  }

  TEST_CASE("invariance gap and degree constants") {
    CHECK(invariance_gap(1, 1.0, 1.0) == doctest::Approx(1.0));
    CHECK(invariance_gap(1, 1.0, std::pow(2.0, -24)) == doctest::Approx(0.125));
    CHECK(invariance_gap(2, 8.0, 1.0, 0.5) == doctest::Approx(2.0));
    CHECK(default_k(1) == 1.0);
    CHECK(default_k(2) == 16.0);
  }

  TEST_CASE("transfer reports") {
    // A dictator on the frozen coordinate has all its influence there.
    const auto dict = BooleanFn::from_function(16, [](const std::vector<int>& x) { return x[0]; });
    const auto r = boolean_transfer_report(dict, SeenSet::frozen(16, 0, 1), 1.0, 1.0);
    CHECK_FALSE(r.hypothesis_holds);
    CHECK(r.status() == "condition violated");

    // The normalized sum has influence 1/n per coordinate.
    const auto sum = BooleanFn::from_function(16, [](const std::vector<int>& x) {
      double s = 0;
      for (int v : x) s += v;
      return s / 4.0;
    });
    const auto s16 = boolean_transfer_report(sum, SeenSet::frozen(16, 0, 1), 1.0, 1.0);
    CHECK(s16.tau == doctest::Approx(1.0 / 16.0));
    CHECK(s16.status() == "condition violated");
    const auto forced = boolean_transfer_report(sum, SeenSet::frozen(16, 0, 1), 1.0, 1.0, std::pow(2.0, -24));
    CHECK(forced.hypothesis_holds);
    CHECK(forced.status() == "satisfied");

    const auto s20 = BooleanFn::from_function(20, [](const std::vector<int>& x) {
      double s = 0;
      for (int v : x) s += v;
      return s / std::sqrt(20.0);
    });
    const auto r20 = boolean_transfer_report(s20, SeenSet::frozen(20, 0, 1), 1.0, 1.0, 1e-30);
    CHECK(r20.moments.eq2 == doctest::Approx(1.0));
    CHECK(r20.moments.ep2 == doctest::Approx(1.0));
    CHECK(r20.bound == doctest::Approx(4.0));
    CHECK(r20.bound_observed);
  }

  TEST_CASE("sparse and dense formats round trip") {
    const auto f = fourier_transform(random_fn(5, 2));
    std::stringstream sparse;
    write_sparse(sparse, f);
    const auto g = fourier_transform(read_sparse(sparse));
    for (Mask x = 0; x < 32; ++x) CHECK(g.value(x) == doctest::Approx(f.value(x)).epsilon(1e-12));

    std::stringstream dense;
    write_dense(dense, f);
    const auto h = read_dense(dense);
    CHECK(h.table() == f.table());
  }
}

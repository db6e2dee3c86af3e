#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "polytransfer/gotu.hpp"

using namespace polytransfer::gotu;

namespace {

// Exact losses by enumerating the cube.
Losses enumerate(const DiagonalLinearNet& net, const LinearTarget& f, std::size_t k) {
  const std::size_t n = net.n;
  double full = 0.0, seen = 0.0;
  std::size_t seen_count = 0;
  for (std::size_t m = 0; m < (std::size_t{1} << n); ++m) {
    std::vector<int> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = (m >> i) & 1 ? -1 : 1;
    const double r = net.eval(x) - f.eval(x);
    full += r * r;
    if (x[k] == 1) {
      seen += r * r;
      ++seen_count;
    }
  }
  return {seen / static_cast<double>(seen_count), full / static_cast<double>(std::size_t{1} << n)};
}

}  // namespace

TEST_SUITE("gotu") {
  TEST_CASE("initialization") {
    const auto a = init_weights(6, 3, 0.05, 4);
    CHECK(a.w.size() == 18);
    CHECK(a.b == 0.0);
    for (double w : a.w) CHECK(std::abs(w) <= 0.05);
    CHECK(init_weights(6, 3, 0.05, 4).w == a.w);
    CHECK_THROWS(init_weights(6, 3, 0.75, 4));
  }

  TEST_CASE("closed-form losses match enumeration") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto net = init_weights(5, 2 + seed % 2, 0.5, seed);
      net.b = 0.3 - 0.1 * static_cast<double>(seed);
      LinearTarget f{0.2, {1.0, -0.5, 0.0, 0.25, 2.0}};
      for (std::size_t k : {0u, 3u}) {
        const auto exact = enumerate(net, f, k);
        const auto closed = closed_form_losses(net, f, k);
        CHECK(closed.full == doctest::Approx(exact.full).epsilon(1e-12));
        CHECK(closed.seen == doctest::Approx(exact.seen).epsilon(1e-12));
        CHECK(transfer_ratio(closed) == doctest::Approx(exact.full / exact.seen));
      }
    }
  }

  TEST_CASE("tau") {
    DiagonalLinearNet net{3, 1, 0.0, {1.0, 1.0, 2.0}};
    CHECK(*tau(net, LinearTarget::uniform(3, 0.0)) == doctest::Approx(4.0 / 6.0));
    CHECK_FALSE(tau(net, LinearTarget{0.0, {1.0, 1.0, 2.0}}).has_value());
    // Near zero the network leaves tau = max c_i^2 / sum c_i^2.
    const auto small = init_weights(4, 2, 1e-4, 1);
    CHECK(*tau(small, LinearTarget{0.0, {1.0, 1.0, 1.0, 3.0}}) == doctest::Approx(9.0 / 12.0).epsilon(1e-6));
  }

  TEST_CASE("alpha max") {
    const auto f = LinearTarget::dictator(10, 0);
    const auto a = alpha_max(3, 0.1, f, 0);
    // R = 2, T = log 20: (2 log 20 + 80^{1/3})^{-1}
    CHECK(a.value == doctest::Approx(1.0 / (2.0 * std::log(20.0) + std::cbrt(80.0))).epsilon(1e-12));
    CHECK_FALSE(a.fallback);
    CHECK(alpha_max(3, 0.01, f, 0).value < a.value);
    CHECK(alpha_max(4, 0.1, f, 0).value < 0.5);
    const auto two = alpha_max(2, 0.1, f, 0);
    CHECK(two.fallback);
    CHECK(two.value == 0.5);
  }

  TEST_CASE("critical time interpolation") {
    const std::vector<TraceRow> rows = {{0.0, 1, 1, 0.1, 0}, {1.0, 1, 1, 0.2, 0}, {2.0, 1, 1, 0.4, 0}};
    CHECK(*critical_time(rows, 0.25) == doctest::Approx(1.25));
    const std::vector<TraceRow> flat = {{0.0, 1, 1, 0.2, 0}, {1.0, 1, 1, 0.2, 0}};
    CHECK_FALSE(critical_time(flat, 0.25).has_value());
  }

  TEST_CASE("gradient flow") {
    const auto f = LinearTarget::dictator(4, 0);
    DiagonalLinearNet fixed{4, 2, 0.0, {1, 0, 0, 0, 1, 0, 0, 0}};
    const auto still = gradient_flow(fixed, f, 0, {1e-2, 1.0, 10, 0.25});
    CHECK(still.final_net.w == fixed.w);

    const auto init = init_weights(4, 2, 0.1, 3);
    const auto tr = gradient_flow(init, f, 0, {1e-2, 20.0, 10, 0.25});
    for (std::size_t i = 1; i < tr.rows.size(); ++i) CHECK(tr.rows[i].seen_loss <= tr.rows[i - 1].seen_loss + 1e-15);
    CHECK(tr.rows.back().seen_loss < 1e-3 * tr.rows.front().seen_loss);

    // Off-target coordinates only shrink.
    double prev[4] = {1e300, 1e300, 1e300, 1e300};
    for (double T : {0.5, 1.0, 2.0, 4.0}) {
      const auto net = gradient_flow(init, f, 0, {1e-2, T, 10, 0.25}).final_net;
      for (std::size_t i = 1; i < 4; ++i) {
        const double d = net.pi(i) * net.pi(i);
        CHECK(d <= prev[i] + 1e-18);
        prev[i] = d;
      }
    }

    std::ostringstream out;
    write_trace_csv(out, tr);
    CHECK(out.str().rfind("t,", 0) == 0);
  }
}

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "polytransfer/trunc.hpp"

using namespace polytransfer;
using namespace polytransfer::trunc;
using dist::TruncationSet;

namespace {

std::vector<Vector> grid(std::size_t points) {
  std::vector<Vector> xs;
  for (std::size_t i = 0; i < points; ++i)
    xs.push_back(Vector::Constant(1, -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points - 1)));
  return xs;
}

const double kHalfNormalMean = std::sqrt(2.0 / std::numbers::pi);

}  // namespace

TEST_SUITE("trunc") {
  TEST_CASE("truncated normal sampling") {
    const auto half = sample_truncated_normal(0.0, 1.0, TruncationSet::intervals({{0.0, dist::kInf}}), 100000, 1);
    double s = 0.0;
    for (double y : half) {
      CHECK_UNARY(y >= 0.0);
      s += y;
    }
    CHECK(s / 1e5 == doctest::Approx(kHalfNormalMean).epsilon(0.01));

    const auto far = sample_truncated_normal(5.0, 1.0, TruncationSet::intervals({{0.0, dist::kInf}}), 20000, 2);
    double m = 0.0;
    for (double y : far) m += y;
    CHECK(m / 2e4 == doctest::Approx(5.0).epsilon(0.01));
  }

  TEST_CASE("whole line reduces to the ordinary loss") {
    const auto inst = make_instance(grid(11), [](const Vector& x) { return x[0]; }, TruncationSet::whole_line());
    const auto f = [](const Vector& x) { return x[0]; };
    CHECK(truncated_mse(f, inst).value == doctest::Approx(1.0));
    CHECK(full_mse(f, inst).value == doctest::Approx(1.0));
    const auto zero = [](const Vector&) { return 0.0; };
    const auto two = make_instance(grid(5), [](const Vector&) { return 2.0; }, TruncationSet::whole_line());
    CHECK(truncated_mse(zero, two).value == doctest::Approx(5.0));
    CHECK(full_mse(zero, two).value == doctest::Approx(5.0));
  }

  TEST_CASE("half-line closed forms") {
    // mu = 0, S = [0, inf): E[(y - f)^2 | y >= 0] = 1 - 2 f m + f^2 with m the half-normal mean.
    const auto inst = make_instance({Vector::Zero(1)}, [](const Vector&) { return 0.0; },
                                    TruncationSet::intervals({{0.0, dist::kInf}}));
    for (double f : {0.0, 0.5, 1.0, 2.0}) {
      const auto model = [f](const Vector&) { return f; };
      CHECK(truncated_mse(model, inst).value == doctest::Approx(1.0 - 2.0 * f * kHalfNormalMean + f * f).epsilon(1e-9));
      CHECK(full_mse(model, inst).value == doctest::Approx(1.0 + f * f).epsilon(1e-12));
      const auto mc = truncated_mse(model, inst, {200000, 3}, Method::MonteCarlo);
      CHECK(std::abs(mc.value - (1.0 - 2.0 * f * kHalfNormalMean + f * f)) < 5.0 * mc.stderr_);
    }
  }

  TEST_CASE("smallest retained mass") {
    const auto f = [](const Vector& x) { return x[0]; };
    CHECK(alpha_mass_min(make_instance(grid(3), f, TruncationSet::whole_line())).value == doctest::Approx(1.0));
    std::vector<Vector> two = {Vector::Zero(1), Vector::Ones(1)};
    const auto half = alpha_mass_min(make_instance(two, f, TruncationSet::intervals({{0.0, dist::kInf}})));
    CHECK(half.value == doctest::Approx(0.5));
    CHECK(half.usable);
    const auto tiny =
        alpha_mass_min(make_instance({Vector::Zero(1)}, f, TruncationSet::intervals({{10.0, dist::kInf}})));
    CHECK(tiny.value == doctest::Approx(normal_sf(10.0)).epsilon(1e-8));
    CHECK_FALSE(tiny.usable);
  }

  TEST_CASE("transfer checks") {
    const auto f_star = [](const Vector& x) { return x[0]; };
    const auto f = [](const Vector& x) { return 0.5 * x[0] + 0.1; };
    const auto whole = truncated_transfer_check(f, make_instance(grid(11), f_star, TruncationSet::whole_line()), 1.0);
    CHECK(whole.ratio == doctest::Approx(1.0));
    CHECK(whole.forward.satisfied);
    CHECK(whole.reverse.satisfied);

    // Half line at alpha = 1/2: reverse always holds, forward ratio has the closed form.
    const auto inst = make_instance({Vector::Zero(1)}, [](const Vector&) { return 0.0; },
                                    TruncationSet::intervals({{0.0, dist::kInf}}));
    double worst = 0.0;
    for (double c = -3.0; c <= 3.0; c += 0.05) {
      const auto r = truncated_transfer_check([c](const Vector&) { return c; }, inst, 1.25);
      CHECK(r.alpha == doctest::Approx(0.5));
      CHECK(r.reverse.satisfied);
      CHECK(r.forward.satisfied);
      CHECK(r.ratio == doctest::Approx((1 + c * c) / (1 + c * c - 2 * c * kHalfNormalMean)).epsilon(1e-9));
      worst = std::max(worst, r.ratio);
    }
    CHECK(worst > 4.9);
    CHECK(worst <= 1.25 / 0.25);
  }

  TEST_CASE("set descriptors and instance files") {
    for (const std::string text : {"R", "[0,inf)", "[-1,2]u[3,4]", "(-inf,0.5]"}) {
      CHECK(describe_set(parse_set(text)) == text);
    }
    CHECK_THROWS(parse_set("[2,1]"));
    const auto inst = make_instance(grid(4), [](const Vector& x) { return x[0] * x[0]; },
                                    TruncationSet::intervals({{-1.0, 2.0}, {3.0, 4.0}}));
    std::stringstream ss;
    write_instance(ss, inst);
    const auto back = read_instance(ss);
    CHECK(back.mu == inst.mu);
    CHECK(describe_set(back.set) == describe_set(inst.set));
    REQUIRE(back.x.size() == inst.x.size());
    for (std::size_t i = 0; i < inst.x.size(); ++i) CHECK(back.x[i] == inst.x[i]);
  }
}

#include <doctest.h>

#include <cmath>
#include <vector>

#include "polytransfer/icl.hpp"
#include "polytransfer/poly.hpp"

using namespace polytransfer;
using namespace polytransfer::icl;

namespace {

std::vector<Prompt> prompts(std::size_t n, std::size_t N, std::size_t count, std::uint64_t seed) {
  const auto d = gaussian_setup(n, N);
  std::vector<Prompt> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(build_prompt(d, seed + i));
  return out;
}

double mean_loss(const std::vector<Prompt>& batch, const LSAParams& p) {
  double s = 0.0;
  for (const auto& pr : batch) s += prompt_loss(pr, p);
  return s / static_cast<double>(batch.size());
}

}  // namespace

TEST_SUITE("icl") {
  TEST_CASE("prompt layout") {
    PromptDistribution d{Law::point_mass(Vector::Constant(1, 3.0)), Law::point_mass(Vector::Constant(1, -1.0)),
                         Law::point_mass(Vector::Constant(1, 2.0)), 1};
    const auto p = build_prompt(d, 0);
    Matrix expected(2, 2);
    expected << 3.0, -1.0, 6.0, 0.0;
    CHECK(p.E == expected);
    CHECK(p.target() == doctest::Approx(-2.0));
    const auto g = gaussian_setup(3, 5);
    CHECK(build_prompt(g, 17).E == build_prompt(g, 17).E);
  }

  TEST_CASE("forward pass by hand") {
    const Matrix E = Matrix::Ones(2, 2);
    LSAParams p{Matrix::Ones(2, 2), Matrix::Ones(2, 2), 1.0};
    CHECK(lsa_forward(E, p) == Matrix::Constant(2, 2, 17.0));
    CHECK(lsa_forward(E, LSAParams::zeros(1, 1.0)) == E);
    const auto pr = build_prompt(gaussian_setup(1, 3), 4);
    CHECK(predict_query(pr.E, LSAParams::zeros(1, 3.0)) == 0.0);
  }

  TEST_CASE("closed-form prediction and scaling") {
    const auto params = LSAParams::random(3, 5.0, 0.7, 2);
    for (const auto& pr : prompts(3, 5, 100, 40)) {
      CHECK(predict_closed_form(pr.E, params) == doctest::Approx(predict_query(pr.E, params)).epsilon(1e-10));
      // Linear in W_PV.
      LSAParams twice = params;
      twice.W_PV *= 2.0;
      CHECK(predict_query(pr.E, twice) == doctest::Approx(2.0 * predict_query(pr.E, params)).epsilon(1e-10));
    }
    // Cubic in the prompt.
    const auto pr = prompts(3, 5, 1, 90).front();
    std::vector<Vector> xs;
    for (Eigen::Index i = 0; i < 5; ++i) xs.push_back(1.5 * pr.E.col(i).head(3));
    const auto scaled = make_prompt(xs, pr.w, 1.5 * pr.x_query);
    CHECK(predict_query(scaled.E, params) == doctest::Approx(std::pow(1.5, 3) * predict_query(pr.E, params)).epsilon(1e-10));
  }

  TEST_CASE("H matrix") {
    CHECK(build_H(Matrix::Ones(2, 1), Vector::Zero(1), 1).isZero());
    Matrix expected(4, 4);
    expected << 0, 0, .5, .5, 0, 0, .5, .5, .5, .5, 0, 0, .5, .5, 0, 0;
    const Matrix H = build_H(Matrix::Ones(2, 1), Vector::Ones(1), 1);
    CHECK(H.isApprox(expected));
    const auto pr = prompts(2, 4, 1, 5).front();
    const Matrix H2 = build_H(pr.E.leftCols(4), pr.x_query, 4);
    CHECK(H2.isApprox(H2.transpose()));
  }

  TEST_CASE("losses") {
    const auto zero = LSAParams::zeros(3, 5.0);
    PromptDistribution d{Law::of(dist::Density::standard_normal(3)), Law::of(dist::Density::standard_normal(3)),
                         Law::point_mass(Vector::Zero(3)), 5};
    CHECK(population_loss(d, zero, {1000, 1}).value == 0.0);
    const auto pop = population_loss(gaussian_setup(3, 5), zero, {200000, 1});
    CHECK(std::abs(pop.value - 3.0) < 5.0 * pop.stderr_);

    // Invariant under permutations of the context columns.
    const auto params = LSAParams::random(2, 4.0, 0.5, 3);
    const auto pr = prompts(2, 4, 1, 8).front();
    std::vector<Vector> xs = {pr.E.col(2).head(2), pr.E.col(0).head(2), pr.E.col(3).head(2), pr.E.col(1).head(2)};
    CHECK(prompt_loss(make_prompt(xs, pr.w, pr.x_query), params) == doctest::Approx(prompt_loss(pr, params)).epsilon(1e-12));
  }

  TEST_CASE("gradient matches finite differences") {
    const auto batch = prompts(2, 3, 16, 100);
    const auto params = LSAParams::random(2, 3.0, 0.4, 4);
    const auto g = loss_gradient(batch, params);
    CHECK(g.loss == doctest::Approx(mean_loss(batch, params)));
    const double h = 1e-6;
    for (int which = 0; which < 2; ++which) {
      for (Eigen::Index i = 0; i < 9; ++i) {
        LSAParams up = params, down = params;
        (which == 0 ? up.W_PV : up.W_KQ).data()[i] += h;
        (which == 0 ? down.W_PV : down.W_KQ).data()[i] -= h;
        const double fd = (mean_loss(batch, up) - mean_loss(batch, down)) / (2 * h);
        const double an = (which == 0 ? g.W_PV : g.W_KQ).data()[i];
        CHECK(an == doctest::Approx(fd).epsilon(1e-5).scale(1e-8));
      }
    }
  }

  TEST_CASE("training") {
    const auto d = gaussian_setup(1, 10);
    TrainOptions opt;
    opt.steps = 0;
    opt.seed = 3;
    const auto init = train_lsa(d, opt).params;
    opt.steps = 50;
    opt.learning_rate = 0.0;
    const auto frozen = train_lsa(d, init, opt).params;
    CHECK(frozen.W_PV == init.W_PV);
    CHECK(frozen.W_KQ == init.W_KQ);

    opt.steps = 400;
    opt.learning_rate = 0.05;
    const auto trained = train_lsa(d, init, opt);
    const dist::McSpec mc{20000, 9};
    CHECK(population_loss(d, trained.params, mc).value < population_loss(d, init, mc).value);
  }

  TEST_CASE("prediction has degree three in the prompt entries") {
    const auto params = LSAParams::random(2, 3.0, 1.0, 6);
    const auto g = [&](const Vector& v) {
      Matrix E = Eigen::Map<const Matrix>(v.data(), 3, 4);
      E(2, 3) = 0.0;
      return predict_query(E, params);
    };
    const auto r = poly::restricted_degree_random(g, 12, 10, 6, 1);
    CHECK_FALSE(r.exceeded);
    CHECK(r.degree == 3);
  }

  TEST_CASE("shift report with no shift") {
    const auto params = LSAParams::random(2, 5.0, 0.3, 1);
    const auto d = gaussian_setup(2, 5);
    const auto r = shift_report(params, d, d, ShiftKind::Task, 1.0, 10.0, std::nullopt, {40000, 2});
    const double rel = std::hypot(r.source_loss.stderr_ / r.source_loss.value, r.target_loss.stderr_ / r.target_loss.value);
    CHECK(std::abs(r.ratio - 1.0) < 4.0 * rel);
    CHECK(parse_shift_kind(to_string(ShiftKind::Covariate)) == ShiftKind::Covariate);
  }
}

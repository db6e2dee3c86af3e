#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "polytransfer/nets.hpp"
#include "polytransfer/rng.hpp"

using namespace polytransfer;
using namespace polytransfer::nets;

namespace {

Dataset sin_data(std::size_t count, std::uint64_t seed) {
  Dataset d;
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = rng.uniform(), y = rng.uniform(-1, 1);
    d.x.push_back(Eigen::Vector2d(x, y));
    d.y.push_back(std::sin(2 * std::numbers::pi * x) * std::sin(2 * std::numbers::pi * y));
  }
  return d;
}

}  // namespace

TEST_SUITE("nets") {
  TEST_CASE("shapes and simple forwards") {
    MLP m(MLP::default_sizes(), Activation::ReLU, 1);
    CHECK(m.parameter_count() == 2 * 20 + 20 + 4 * (20 * 20 + 20) + 20 * 10 + 10 + 10 + 1);
    m.set_parameters(Vector::Zero(static_cast<Eigen::Index>(m.parameter_count())));
    m.biases().back()[0] = 0.7;
    CHECK(m.forward(Eigen::Vector2d(3.0, -2.0)) == 0.7);

    MLP affine({3, 1}, Activation::Smoothstep, 2);
    const Eigen::Vector3d x(1.0, -2.0, 0.5);
    CHECK(affine.forward(x) == doctest::Approx((affine.weights()[0] * x)[0] + affine.biases()[0][0]));
    CHECK_THROWS(affine.forward(Eigen::Vector2d(1.0, 2.0)));
    CHECK(parse_activation("poly") == Activation::Smoothstep);
  }

  TEST_CASE("initialization scale") {
    MLP m({4, 50, 1}, Activation::ReLU, 3, 0.5);
    CHECK(m.weights()[0].cwiseAbs().maxCoeff() <= 0.5 / 2.0);
    CHECK(m.weights()[1].cwiseAbs().maxCoeff() <= 0.5 / std::sqrt(50.0));
  }

  TEST_CASE("backpropagation matches finite differences") {
    for (Activation a : {Activation::ReLU, Activation::Smoothstep}) {
      MLP m({2, 6, 5, 1}, a, 7, a == Activation::Smoothstep ? 0.5 : 1.0);
      const Vector x = Eigen::Vector2d(0.3, -0.7);
      double out;
      const Vector g = m.output_gradient(x, out);
      CHECK(out == doctest::Approx(m.forward(x)));
      const Vector theta = m.parameters();
      const double h = 1e-6;
      for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Vector tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        MLP up = m, down = m;
        up.set_parameters(tp);
        down.set_parameters(tm);
        const double fd = (up.forward(x) - down.forward(x)) / (2 * h);
        CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5).scale(1e-7));
      }
    }
  }

  TEST_CASE("AdaGrad follows its recursion") {
    // Input fixed at 0: only the output bias moves, with g = 2 (b - y).
    MLP m({1, 1}, Activation::ReLU, 4);
    Dataset d{{Vector::Zero(1)}, {1.5}};
    AdaGradOptions opt;
    opt.epochs = 25;
    opt.rate = 0.3;
    opt.batch = 1;
    double b = m.biases()[0][0], accum = 0.0;
    const double w = m.weights()[0](0, 0);
    train_adagrad(m, d, opt);
    for (int t = 0; t < 25; ++t) {
      const double g = 2.0 * (b - 1.5);
      accum += g * g;
      b -= 0.3 * g / std::sqrt(accum + opt.eps);
    }
    CHECK(m.biases()[0][0] == doctest::Approx(b).epsilon(1e-14));
    CHECK(m.weights()[0](0, 0) == w);

    MLP frozen(MLP::default_sizes(), Activation::ReLU, 5);
    const Vector before = frozen.parameters();
    opt.rate = 0.0;
    opt.epochs = 2;
    opt.batch = 16;
    train_adagrad(frozen, sin_data(64, 1), opt);
    CHECK(frozen.parameters() == before);
  }

  TEST_CASE("fits a constant") {
    Dataset d;
    Rng rng(2);
    for (int i = 0; i < 256; ++i) {
      d.x.push_back(Eigen::Vector2d(rng.uniform(), rng.uniform(-1, 1)));
      d.y.push_back(0.4);
    }
    MLP m(MLP::default_sizes(), Activation::ReLU, 6);
    AdaGradOptions opt;
    opt.epochs = 300;
    opt.batch = 256;
    opt.rate = 0.01;
    train_adagrad(m, d, opt);
    CHECK(mse(m, d) < 1e-6);
  }

  TEST_CASE("fits the product of sines on the seen box") {
    const auto d = sin_data(4000, 3);
    MLP m(MLP::default_sizes(), Activation::ReLU, 8);
    AdaGradOptions opt;
    opt.epochs = 150;
    const auto trace = train_adagrad(m, d, opt);
    CHECK(trace.back().train_mse < 1e-2);
    CHECK(trace.back().train_mse < trace.front().train_mse);
    // Same seed, same result.
    MLP again(MLP::default_sizes(), Activation::ReLU, 8);
    opt.epochs = 3;
    MLP once(MLP::default_sizes(), Activation::ReLU, 8);
    train_adagrad(again, d, opt);
    train_adagrad(once, d, opt);
    CHECK(again.parameters() == once.parameters());
  }

  TEST_CASE("checkpoint round trip") {
    MLP m({2, 5, 3, 1}, Activation::Smoothstep, 9);
    std::stringstream ss;
    write_checkpoint(ss, m);
    const auto back = read_checkpoint(ss);
    CHECK(back.sizes() == m.sizes());
    CHECK(back.activation() == m.activation());
    CHECK(back.parameters() == m.parameters());
    std::stringstream bad("not-a-checkpoint\n");
    CHECK_THROWS(read_checkpoint(bad));
  }
}

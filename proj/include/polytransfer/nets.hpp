#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace polytransfer::nets {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { ReLU, Smoothstep };  // Smoothstep: 3x^2 - 2x^3

std::string to_string(Activation a);
Activation parse_activation(const std::string& text);

// Fully connected network; every layer but the last applies the activation.
class MLP {
 public:
  MLP() = default;
  // Weights and biases uniform on +-gain/sqrt(fan_in).
  MLP(std::vector<std::size_t> sizes, Activation activation, std::uint64_t seed, double init_gain = 1.0);
  // Input 2, five hidden layers of 20, one of 10, scalar output.
  static std::vector<std::size_t> default_sizes() { return {2, 20, 20, 20, 20, 20, 10, 1}; }

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  std::size_t parameter_count() const;

  std::vector<Matrix>& weights() { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  const std::vector<Vector>& biases() const { return biases_; }

  double forward(const Vector& x) const;

  // Flat parameter vector: each layer's weights (column-major) then biases.
  Vector parameters() const;
  void set_parameters(const Vector& theta);

  // Gradient of the output with respect to parameters(), plus the output.
  Vector output_gradient(const Vector& x, double& output) const;

 private:
  std::vector<std::size_t> sizes_;
  Activation activation_ = Activation::ReLU;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

struct Dataset {
  std::vector<Vector> x;
  std::vector<double> y;
};

double mse(const MLP& m, const Dataset& data);

struct AdaGradOptions {
  std::size_t epochs = 200;
  double rate = 1e-2;
  std::size_t batch = 64;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  double divergence_threshold = 1e8;
};

struct EpochRow {
  std::size_t epoch;
  double train_mse;
};

// Mini-batch AdaGrad on the mean squared error. Each epoch visits the data
// in a seeded random order.
std::vector<EpochRow> train_adagrad(MLP& m, const Dataset& data, const AdaGradOptions& options);

// Text header "polytransfer-mlp", sizes, activation and parameter count,
// then the parameters as little-endian doubles.
void write_checkpoint(std::ostream& out, const MLP& m);
MLP read_checkpoint(std::istream& in);

}  // namespace polytransfer::nets

#include "polytransfer/nets.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "polytransfer/error.hpp"
#include "polytransfer/kernels.hpp"
#include "polytransfer/rng.hpp"

namespace polytransfer::nets {

namespace {

double act(Activation a, double z) {
  if (a == Activation::ReLU) return z > 0.0 ? z : 0.0;
  return z * z * (3.0 - 2.0 * z);
}

double act_slope(Activation a, double z) {
  if (a == Activation::ReLU) return z > 0.0 ? 1.0 : 0.0;
  return 6.0 * z * (1.0 - z);
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "smoothstep"; }

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::ReLU;
  if (text == "smoothstep" || text == "poly") return Activation::Smoothstep;
  throw InvalidArgument("unknown activation '" + text + "' (relu, smoothstep)");
}

MLP::MLP(std::vector<std::size_t> sizes, Activation activation, std::uint64_t seed, double init_gain)
    : sizes_(std::move(sizes)), activation_(activation) {
  require(sizes_.size() >= 2, "MLP: need at least input and output sizes");
  for (auto s : sizes_) require(s >= 1, "MLP: layer sizes must be positive");
  require(init_gain >= 0.0, "MLP: init gain must be nonnegative");
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    const double bound = init_gain / std::sqrt(static_cast<double>(in));
    Matrix W(out, in);
    Vector b(out);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
    weights_.push_back(std::move(W));
    biases_.push_back(std::move(b));
  }
}

std::size_t MLP::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    total += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return total;
}

double MLP::forward(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != sizes_.front())
    throw DimensionMismatch("MLP: expected input of size " + std::to_string(sizes_.front()));
  Vector a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Vector z = weights_[l] * a + biases_[l];
    if (l + 1 < weights_.size()) z = z.unaryExpr([this](double v) { return act(activation_, v); });
    a = std::move(z);
  }
  return a[0];
}

Vector MLP::parameters() const {
  Vector theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    theta.segment(pos, weights_[l].size()) = Eigen::Map<const Vector>(weights_[l].data(), weights_[l].size());
    pos += weights_[l].size();
    theta.segment(pos, biases_[l].size()) = biases_[l];
    pos += biases_[l].size();
  }
  return theta;
}

void MLP::set_parameters(const Vector& theta) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count())
    throw DimensionMismatch("MLP: parameter vector has the wrong length");
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::Map<Vector>(weights_[l].data(), weights_[l].size()) = theta.segment(pos, weights_[l].size());
    pos += weights_[l].size();
    biases_[l] = theta.segment(pos, biases_[l].size());
    pos += biases_[l].size();
  }
}

Vector MLP::output_gradient(const Vector& x, double& output) const {
  if (static_cast<std::size_t>(x.size()) != sizes_.front())
    throw DimensionMismatch("MLP: expected input of size " + std::to_string(sizes_.front()));
  const std::size_t layers = weights_.size();
  std::vector<Vector> inputs(layers), pre(layers);
  Vector a = x;
  for (std::size_t l = 0; l < layers; ++l) {
    inputs[l] = a;
    pre[l] = weights_[l] * a + biases_[l];
    a = l + 1 < layers ? Vector(pre[l].unaryExpr([this](double v) { return act(activation_, v); })) : pre[l];
  }
  output = a[0];

  Vector grad(static_cast<Eigen::Index>(parameter_count()));
  std::vector<Eigen::Index> offsets(layers);
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = pos;
    pos += weights_[l].size() + biases_[l].size();
  }
  Vector delta = Vector::Ones(1);  // d output / d pre-activation of the layer
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix gW = delta * inputs[l].transpose();
    grad.segment(offsets[l], gW.size()) = Eigen::Map<const Vector>(gW.data(), gW.size());
    grad.segment(offsets[l] + gW.size(), delta.size()) = delta;
    if (l == 0) break;
    const Vector back = weights_[l].transpose() * delta;
    delta = back.cwiseProduct(pre[l - 1].unaryExpr([this](double v) { return act_slope(activation_, v); }));
  }
  return grad;
}

double mse(const MLP& m, const Dataset& data) {
  require(!data.x.empty() && data.x.size() == data.y.size(), "mse: malformed dataset");
  const double total = kernels::parallel::chunked_sum(data.x.size(), [&](std::size_t k) {
    const double r = m.forward(data.x[k]) - data.y[k];
    return r * r;
  });
  return total / static_cast<double>(data.x.size());
}

std::vector<EpochRow> train_adagrad(MLP& m, const Dataset& data, const AdaGradOptions& options) {
  require(!data.x.empty() && data.x.size() == data.y.size(), "train_adagrad: dataset must be nonempty");
  require(options.batch >= 1, "train_adagrad: batch must be >= 1");
  require(options.rate >= 0.0, "train_adagrad: rate must be nonnegative");
  const std::size_t count = data.x.size();
  Vector theta = m.parameters();
  Vector accum = Vector::Zero(theta.size());
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochRow> trace;
  Rng rng(options.seed, 7);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    // Fisher-Yates with the project generator.
    for (std::size_t i = count; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < count; start += options.batch) {
      const std::size_t end = std::min(count, start + options.batch);
      Vector grad = Vector::Zero(theta.size());
      for (std::size_t i = start; i < end; ++i) {
        double out;
        const Vector g = m.output_gradient(data.x[order[i]], out);
        grad += 2.0 * (out - data.y[order[i]]) * g;
      }
      grad /= static_cast<double>(end - start);
      accum += grad.cwiseAbs2();
      theta -= options.rate * grad.cwiseQuotient((accum.array() + options.eps).sqrt().matrix());
      m.set_parameters(theta);
    }
    const double loss = mse(m, data);
    trace.push_back({epoch, loss});
    if (!std::isfinite(loss) || loss > options.divergence_threshold)
      throw NumericalFailure("train_adagrad: diverged at epoch " + std::to_string(epoch));
  }
  return trace;
}

void write_checkpoint(std::ostream& out, const MLP& m) {
  out << "polytransfer-mlp\nsizes";
  for (auto s : m.sizes()) out << ' ' << s;
  out << "\nactivation " << to_string(m.activation()) << "\nparameters " << m.parameter_count() << '\n';
  const Vector theta = m.parameters();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(theta[i]);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

MLP read_checkpoint(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "polytransfer-mlp", "read_checkpoint: bad magic line");
  std::vector<std::size_t> sizes;
  Activation activation = Activation::ReLU;
  std::size_t count = 0;
  for (int field = 0; field < 3; ++field) {
    require(static_cast<bool>(std::getline(in, line)), "read_checkpoint: truncated header");
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "sizes") {
      for (std::size_t s; ls >> s;) sizes.push_back(s);
    } else if (key == "activation") {
      std::string name;
      ls >> name;
      activation = parse_activation(name);
    } else if (key == "parameters") {
      ls >> count;
    } else {
      throw InvalidArgument("read_checkpoint: unknown header field '" + key + "'");
    }
  }
  MLP m(sizes, activation, 0);
  require(count == m.parameter_count(), "read_checkpoint: parameter count does not match the sizes");
  Vector theta(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw InvalidArgument("read_checkpoint: truncated parameters");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    theta[i] = std::bit_cast<double>(bits);
  }
  m.set_parameters(theta);
  return m;
}

}  // namespace polytransfer::nets

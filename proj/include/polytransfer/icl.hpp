#pragma once

// In-context learning of linear functions with one linear self-attention
// layer. A prompt is the (n+1) x (N+1) matrix
//
//   E = [ x_1 ... x_N  x_q ]
//       [ y_1 ... y_N   0  ]
//
// with y_i = w^T x_i, and the model maps E to E + W_PV E (E^T W_KQ E) / rho.
// The prediction for the query is the bottom-right entry of the output.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polytransfer/dist.hpp"
#include "polytransfer/error.hpp"
#include "polytransfer/numeric.hpp"
#include "polytransfer/transfer.hpp"

namespace polytransfer::icl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A law on R^n: either a catalog density or a point mass.
struct Law {
  std::optional<dist::Density> density;
  Vector point;

  static Law of(dist::Density d) { return {std::move(d), {}}; }
  static Law point_mass(Vector v) { return {std::nullopt, std::move(v)}; }
  std::size_t dim() const { return density ? density->dim() : static_cast<std::size_t>(point.size()); }
  Vector draw(Rng& rng) const { return density ? density->draw(rng) : point; }
  std::string name() const;
};

struct PromptDistribution {
  Law p_x;
  Law p_query;
  Law p_h;
  std::size_t N = 1;

  std::size_t n() const { return p_x.dim(); }
  void validate() const;
};

// Standard Gaussian covariates, queries and tasks in dimension n.
PromptDistribution gaussian_setup(std::size_t n, std::size_t N);

struct Prompt {
  Matrix E;
  Vector w;
  Vector x_query;
  double target() const { return w.dot(x_query); }
};

struct LSAParams {
  Matrix W_PV;
  Matrix W_KQ;
  double rho = 1.0;

  static LSAParams zeros(std::size_t n, double rho);
  // i.i.d. N(0, scale^2) entries.
  static LSAParams random(std::size_t n, double rho, double scale, std::uint64_t seed);
};

// Covariates, then the query, then the task, all from one stream.
Prompt build_prompt(const PromptDistribution& dist, std::uint64_t seed);
Prompt build_prompt(const PromptDistribution& dist, Rng& rng);
// Prompt from explicit columns.
Prompt make_prompt(const std::vector<Vector>& xs, const Vector& w, const Vector& x_query);

Matrix lsa_forward(const Matrix& E, const LSAParams& params);
double predict_query(const Matrix& E, const LSAParams& params);
// (1/rho) e_{n+1}^T W_PV (E E^T) W_KQ (x_q; 0)
double predict_closed_form(const Matrix& E, const LSAParams& params);

// (X/2) kron (E_data E_data^T / N) with X = [[0, x_q], [x_q^T, 0]] padded to
// (n+1) x (n+1); E_data is the first N columns.
Matrix build_H(const Matrix& E_data, const Vector& x_query, std::size_t N);

// (prediction - w^T x_q)^2 for one prompt.
double prompt_loss(const Prompt& prompt, const LSAParams& params);

// Monte Carlo estimate of E (prediction - w^T x_q)^2 over fresh prompts.
Estimate population_loss(const PromptDistribution& dist, const LSAParams& params, const dist::McSpec& mc);

// Gradient of the mean loss over a batch of prompts.
struct Gradient {
  Matrix W_PV;
  Matrix W_KQ;
  double loss = 0.0;
  double norm() const { return std::sqrt(W_PV.squaredNorm() + W_KQ.squaredNorm()); }
};
Gradient loss_gradient(const std::vector<Prompt>& batch, const LSAParams& params);

struct TrainOptions {
  std::size_t steps = 20000;
  double learning_rate = 1e-2;
  std::size_t batch = 256;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
  double divergence_threshold = 1e6;
};

struct TraceRow {
  std::size_t step;
  double loss;
  double grad_norm;
};

struct TrainResult {
  LSAParams params;
  std::vector<TraceRow> trace;
};

// Thrown when the batch loss exceeds the divergence threshold; carries the
// trace up to that step.
class TrainingDiverged : public NumericalFailure {
 public:
  TrainingDiverged(const std::string& what, std::vector<TraceRow> trace)
      : NumericalFailure(what), trace_(std::move(trace)) {}
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  std::vector<TraceRow> trace_;
};

// Mini-batch gradient descent with exact gradients, rho = N.
TrainResult train_lsa(const PromptDistribution& dist, const TrainOptions& options);
// Same, from given initial parameters.
TrainResult train_lsa(const PromptDistribution& dist, LSAParams init, const TrainOptions& options);

enum class ShiftKind { Task, Query, Covariate, Joint };
std::string to_string(ShiftKind kind);
ShiftKind parse_shift_kind(const std::string& text);

struct ShiftReport {
  ShiftKind kind;
  Estimate source_loss;  // L_P
  Estimate target_loss;  // L_Q
  double ratio = 0.0;
  bool degenerate = false;
  // |dQ/dmu|_inf |dP/dmu|_inf^c on the shifted factor, when available.
  std::optional<transfer::Coefficient> coefficient;
  double exponent_c = 10.0;
  std::string bridge;
  transfer::TransferReport report;
};

// Losses under source and target. The coefficient is attached when the
// shifted factor pair is covered: through `bridge` when given, otherwise by
// using the target factor itself when it is log-concave.
ShiftReport shift_report(const LSAParams& params, const PromptDistribution& source, const PromptDistribution& target,
                         ShiftKind kind, double C, double exponent_c, const std::optional<dist::Density>& bridge,
                         const dist::McSpec& mc);

}  // namespace polytransfer::icl

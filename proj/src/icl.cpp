#include "polytransfer/icl.hpp"

#include <cmath>
#include <sstream>

#include "polytransfer/kernels.hpp"

namespace polytransfer::icl {

std::string Law::name() const {
  if (density) return density->name();
  std::ostringstream out;
  out << "delta(" << point.transpose() << ')';
  return out.str();
}

void PromptDistribution::validate() const {
  require(N >= 1, "PromptDistribution: N must be >= 1");
  require_dim(p_query.dim(), p_x.dim(), "PromptDistribution query law");
  require_dim(p_h.dim(), p_x.dim(), "PromptDistribution task law");
}

PromptDistribution gaussian_setup(std::size_t n, std::size_t N) {
  const auto g = dist::Density::standard_normal(n);
  return {Law::of(g), Law::of(g), Law::of(g), N};
}

LSAParams LSAParams::zeros(std::size_t n, double rho) {
  const auto m = static_cast<Eigen::Index>(n + 1);
  return {Matrix::Zero(m, m), Matrix::Zero(m, m), rho};
}

LSAParams LSAParams::random(std::size_t n, double rho, double scale, std::uint64_t seed) {
  LSAParams p = zeros(n, rho);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < p.W_PV.size(); ++i) p.W_PV.data()[i] = scale * rng.normal();
  for (Eigen::Index i = 0; i < p.W_KQ.size(); ++i) p.W_KQ.data()[i] = scale * rng.normal();
  return p;
}

Prompt make_prompt(const std::vector<Vector>& xs, const Vector& w, const Vector& x_query) {
  require(!xs.empty(), "make_prompt: need at least one example");
  const auto n = w.size();
  const auto N = static_cast<Eigen::Index>(xs.size());
  require_dim(static_cast<std::size_t>(x_query.size()), static_cast<std::size_t>(n), "make_prompt query");
  Prompt p{Matrix::Zero(n + 1, N + 1), w, x_query};
  for (Eigen::Index i = 0; i < N; ++i) {
    const Vector& x = xs[static_cast<std::size_t>(i)];
    require_dim(static_cast<std::size_t>(x.size()), static_cast<std::size_t>(n), "make_prompt example");
    p.E.col(i).head(n) = x;
    p.E(n, i) = w.dot(x);
  }
  p.E.col(N).head(n) = x_query;
  return p;
}

Prompt build_prompt(const PromptDistribution& dist, Rng& rng) {
  std::vector<Vector> xs(dist.N);
  for (auto& x : xs) x = dist.p_x.draw(rng);
  const Vector xq = dist.p_query.draw(rng);
  const Vector w = dist.p_h.draw(rng);
  return make_prompt(xs, w, xq);
}

Prompt build_prompt(const PromptDistribution& dist, std::uint64_t seed) {
  dist.validate();
  Rng rng(seed);
  return build_prompt(dist, rng);
}

namespace {

void check_shapes(const Matrix& E, const LSAParams& params) {
  require(params.rho > 0.0, "LSA: rho must be positive");
  const auto m = E.rows();
  if (params.W_PV.rows() != m || params.W_PV.cols() != m || params.W_KQ.rows() != m || params.W_KQ.cols() != m)
    throw DimensionMismatch("LSA: parameter shapes do not match the prompt");
}

}  // namespace

Matrix lsa_forward(const Matrix& E, const LSAParams& params) {
  check_shapes(E, params);
  return E + params.W_PV * E * (E.transpose() * params.W_KQ * E) / params.rho;
}

double predict_query(const Matrix& E, const LSAParams& params) {
  const Matrix out = lsa_forward(E, params);
  return out(out.rows() - 1, out.cols() - 1);
}

double predict_closed_form(const Matrix& E, const LSAParams& params) {
  check_shapes(E, params);
  const Vector x_tilde = E.col(E.cols() - 1);
  const Vector row = params.W_PV.row(E.rows() - 1).transpose();
  return row.dot((E * E.transpose()) * (params.W_KQ * x_tilde)) / params.rho;
}

Matrix build_H(const Matrix& E_data, const Vector& x_query, std::size_t N) {
  const auto m = E_data.rows();
  const auto n = x_query.size();
  require(m == n + 1, "build_H: E_data needs n + 1 rows");
  require(N >= 1, "build_H: N must be >= 1");
  Matrix X = Matrix::Zero(m, m);
  X.col(n).head(n) = x_query;
  X.row(n).head(n) = x_query.transpose();
  const Matrix A = X / 2.0;
  const Matrix B = E_data * E_data.transpose() / static_cast<double>(N);
  Matrix H(m * m, m * m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) H.block(i * m, j * m, m, m) = A(i, j) * B;
  return H;
}

double prompt_loss(const Prompt& prompt, const LSAParams& params) {
  const double r = predict_closed_form(prompt.E, params) - prompt.target();
  return r * r;
}

Estimate population_loss(const PromptDistribution& dist, const LSAParams& params, const dist::McSpec& mc) {
  dist.validate();
  require(mc.n_samples >= 1, "population_loss: need at least one sample");
  const Rng root(mc.seed);
  return kernels::parallel::sample_moments(mc.n_samples, [&](std::size_t i) {
           Rng rng = root.child(i);
           return prompt_loss(build_prompt(dist, rng), params);
         })
      .estimate();
}

Gradient loss_gradient(const std::vector<Prompt>& batch, const LSAParams& params) {
  require(!batch.empty(), "loss_gradient: empty batch");
  const auto m = params.W_PV.rows();
  Gradient g{Matrix::Zero(m, m), Matrix::Zero(m, m), 0.0};
  const Vector p = params.W_PV.row(m - 1).transpose();
  for (const auto& prompt : batch) {
    check_shapes(prompt.E, params);
    const Matrix G = prompt.E * prompt.E.transpose();
    const Vector x_tilde = prompt.E.col(prompt.E.cols() - 1);
    const Vector kx = params.W_KQ * x_tilde;
    const double pred = p.dot(G * kx) / params.rho;
    const double r = pred - prompt.target();
    g.loss += r * r;
    // d pred / d W_PV touches only the last row; d pred / d W_KQ = G p x~^T / rho.
    g.W_PV.row(m - 1) += (2.0 * r / params.rho) * (G * kx).transpose();
    g.W_KQ += (2.0 * r / params.rho) * (G * p) * x_tilde.transpose();
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  g.W_PV *= inv;
  g.W_KQ *= inv;
  g.loss *= inv;
  return g;
}

TrainResult train_lsa(const PromptDistribution& dist, const TrainOptions& options) {
  return train_lsa(dist, LSAParams::random(dist.n(), static_cast<double>(dist.N), options.init_scale, options.seed),
                   options);
}

TrainResult train_lsa(const PromptDistribution& dist, LSAParams init, const TrainOptions& options) {
  dist.validate();
  require(options.batch >= 1, "train_lsa: batch must be >= 1");
  require(options.learning_rate >= 0.0, "train_lsa: learning rate must be nonnegative");
  TrainResult result{std::move(init), {}};
  result.trace.reserve(options.steps);
  // Batch prompts come from a stream disjoint from the initialization's.
  const Rng root(options.seed, 1);
  std::vector<Prompt> batch(options.batch);
  for (std::size_t step = 0; step < options.steps; ++step) {
    const Rng step_rng = root.child(step);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(options.batch); ++b) {
      Rng rng = step_rng.child(static_cast<std::uint64_t>(b));
      batch[static_cast<std::size_t>(b)] = build_prompt(dist, rng);
    }
    const Gradient g = loss_gradient(batch, result.params);
    result.trace.push_back({step, g.loss, g.norm()});
    if (!std::isfinite(g.loss) || g.loss > options.divergence_threshold) {
      std::ostringstream msg;
      msg << "train_lsa: diverged at step " << step << " (batch loss " << g.loss << ")";
      throw TrainingDiverged(msg.str(), result.trace);
    }
    result.params.W_PV -= options.learning_rate * g.W_PV;
    result.params.W_KQ -= options.learning_rate * g.W_KQ;
  }
  return result;
}

std::string to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::Task: return "task";
    case ShiftKind::Query: return "query";
    case ShiftKind::Covariate: return "covariate";
    case ShiftKind::Joint: return "joint";
  }
  return "unknown";
}

ShiftKind parse_shift_kind(const std::string& text) {
  if (text == "task") return ShiftKind::Task;
  if (text == "query") return ShiftKind::Query;
  if (text == "covariate") return ShiftKind::Covariate;
  if (text == "joint") return ShiftKind::Joint;
  throw InvalidArgument("unknown shift kind '" + text + "' (task, query, covariate, joint)");
}

ShiftReport shift_report(const LSAParams& params, const PromptDistribution& source, const PromptDistribution& target,
                         ShiftKind kind, double C, double exponent_c, const std::optional<dist::Density>& bridge,
                         const dist::McSpec& mc) {
  ShiftReport r;
  r.kind = kind;
  r.exponent_c = exponent_c;
  r.source_loss = population_loss(source, params, mc);
  dist::McSpec mc_q = mc;
  mc_q.seed = mc.seed + 0x51F7;
  r.target_loss = population_loss(target, params, mc_q);
  r.degenerate = r.source_loss.value <= 3.0 * r.source_loss.stderr_;
  r.ratio = r.degenerate ? std::nan("") : r.target_loss.value / r.source_loss.value;

  const Law* p_factor = nullptr;
  const Law* q_factor = nullptr;
  switch (kind) {
    case ShiftKind::Task: p_factor = &source.p_h; q_factor = &target.p_h; break;
    case ShiftKind::Query: p_factor = &source.p_query; q_factor = &target.p_query; break;
    case ShiftKind::Covariate: p_factor = &source.p_x; q_factor = &target.p_x; break;
    case ShiftKind::Joint: break;
  }
  if (p_factor && p_factor->density && q_factor->density) {
    const dist::Density* mu = nullptr;
    if (bridge) {
      mu = &*bridge;
      r.bridge = bridge->name();
    } else if (q_factor->density->is_log_concave()) {
      mu = &*q_factor->density;
      r.bridge = "target-is-log-concave";
    }
    if (mu) {
      const auto sq = dist::density_ratio_sup(*q_factor->density, *mu);
      const auto sp = dist::density_ratio_sup(*p_factor->density, *mu);
      transfer::Coefficient coef;
      if (sq.infinite || sp.infinite) {
        coef = {dist::kInf, true};
      } else {
        const double log_value = std::log(C) + std::log(std::max(1.0, sq.value)) + exponent_c * std::log(std::max(1.0, sp.value));
        coef.value = std::exp(log_value);
        coef.infinite = std::isinf(coef.value);
      }
      r.coefficient = coef;
    }
  }

  auto& t = r.report;
  t.kind = "icl-" + to_string(kind);
  t.bridge = r.bridge.empty() ? "none" : r.bridge;
  t.d = static_cast<std::size_t>(exponent_c);
  t.holder = transfer::HolderPair::sup_norm();
  t.C = C;
  t.lhs = r.target_loss;
  if (r.coefficient) {
    t.coefficient = *r.coefficient;
    t.rhs = {r.coefficient->value * r.source_loss.value, r.coefficient->value * r.source_loss.stderr_};
    t.satisfied = r.coefficient->infinite ||
                  t.lhs.value <= t.rhs.value + 3.0 * std::hypot(t.lhs.stderr_, t.rhs.stderr_);
  } else {
    t.coefficient = {std::nan(""), false};
    t.rhs = {std::nan(""), 0.0};
    t.satisfied = false;
  }
  return r;
}

}  // namespace polytransfer::icl

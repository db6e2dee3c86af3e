#include "polytransfer/gotu.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "polytransfer/error.hpp"
#include "polytransfer/rng.hpp"

namespace polytransfer::gotu {

double DiagonalLinearNet::pi(std::size_t i) const {
  double p = 1.0;
  for (std::size_t l = 0; l < L; ++l) p *= weight(l, i);
  return p;
}

std::vector<double> DiagonalLinearNet::effective() const {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = pi(i);
  return out;
}

double DiagonalLinearNet::eval(const std::vector<int>& x) const {
  require_dim(x.size(), n, "DiagonalLinearNet");
  double v = b;
  for (std::size_t i = 0; i < n; ++i) v += pi(i) * x[i];
  return v;
}

LinearTarget LinearTarget::dictator(std::size_t n, std::size_t k) {
  require(k < n, "dictator: coordinate out of range");
  LinearTarget t{0.0, std::vector<double>(n, 0.0)};
  t.c[k] = 1.0;
  return t;
}

LinearTarget LinearTarget::uniform(std::size_t n, double value) { return {0.0, std::vector<double>(n, value)}; }

double LinearTarget::eval(const std::vector<int>& x) const {
  require_dim(x.size(), c.size(), "LinearTarget");
  double v = b_star;
  for (std::size_t i = 0; i < c.size(); ++i) v += c[i] * x[i];
  return v;
}

DiagonalLinearNet init_weights(std::size_t n, std::size_t L, double alpha, std::uint64_t seed) {
  require(n >= 1, "init_weights: n must be >= 1");
  require(L >= 2, "init_weights: depth must be >= 2");
  require(alpha > 0.0 && alpha <= 0.5, "init_weights: alpha must lie in (0, 1/2]");
  DiagonalLinearNet net{n, L, 0.0, std::vector<double>(n * L)};
  Rng rng(seed);
  for (double& v : net.w) v = rng.uniform(-alpha, alpha);
  return net;
}

AlphaMax alpha_max(std::size_t L, double eps, const LinearTarget& f_star, std::size_t k, double c_T) {
  require(L >= 2, "alpha_max: depth must be >= 2");
  require(eps > 0.0, "alpha_max: eps must be positive");
  require(k < f_star.c.size(), "alpha_max: coordinate out of range");
  if (L == 2) return {0.5, true};
  const double R = 1.0 + std::abs(f_star.b_star + f_star.c[k]);
  const double T = c_T * std::log(R / eps);
  const double l = static_cast<double>(L);
  const double base = (l - 2.0) * R * T + std::pow(8.0 / eps, (l - 2.0) / l);
  return {std::pow(base, 1.0 / (2.0 - l)), false};
}

Losses closed_form_losses(const DiagonalLinearNet& net, const LinearTarget& f_star, std::size_t k) {
  require_dim(f_star.c.size(), net.n, "closed_form_losses");
  require(k < net.n, "closed_form_losses: coordinate out of range");
  double rest = 0.0;
  double delta_k = 0.0;
  for (std::size_t i = 0; i < net.n; ++i) {
    const double d = net.pi(i) - f_star.c[i];
    if (i == k) delta_k = d;
    else rest += d * d;
  }
  const double bias = net.b - f_star.b_star;
  return {(bias + delta_k) * (bias + delta_k) + rest, bias * bias + delta_k * delta_k + rest};
}

std::optional<double> tau(const DiagonalLinearNet& net, const LinearTarget& f_star) {
  require_dim(f_star.c.size(), net.n, "tau");
  double total = 0.0, top = 0.0;
  for (std::size_t i = 0; i < net.n; ++i) {
    const double d = net.pi(i) - f_star.c[i];
    total += d * d;
    top = std::max(top, d * d);
  }
  if (total <= 1e-18) return std::nullopt;
  return top / total;
}

namespace {

// Gradient of L_S into (grad_b, grad_w).
void seen_gradient(const DiagonalLinearNet& net, const LinearTarget& f_star, std::size_t k, double& grad_b,
                   std::vector<double>& grad_w) {
  grad_w.assign(net.w.size(), 0.0);
  const double r_k = net.b - f_star.b_star + net.pi(k) - f_star.c[k];
  grad_b = 2.0 * r_k;
  for (std::size_t i = 0; i < net.n; ++i) {
    const double dpi = i == k ? 2.0 * r_k : 2.0 * (net.pi(i) - f_star.c[i]);
    for (std::size_t l = 0; l < net.L; ++l) {
      double others = 1.0;
      for (std::size_t m = 0; m < net.L; ++m)
        if (m != l) others *= net.weight(m, i);
      grad_w[l * net.n + i] = dpi * others;
    }
  }
}

TraceRow record(double t, const DiagonalLinearNet& net, const LinearTarget& f_star, std::size_t k) {
  const Losses losses = closed_form_losses(net, f_star, k);
  const auto ta = tau(net, f_star);
  return {t, losses.seen, losses.full, ta ? *ta : std::numeric_limits<double>::quiet_NaN(), net.pi(k)};
}

}  // namespace

Trace gradient_flow(DiagonalLinearNet net, const LinearTarget& f_star, std::size_t k, const FlowOptions& options) {
  require(options.step > 0.0 && options.step <= 1e-2, "gradient_flow: step must lie in (0, 1e-2]");
  require(options.T >= 0.0, "gradient_flow: T must be nonnegative");
  require(options.record_every >= 1, "gradient_flow: record_every must be >= 1");
  require(k < net.n, "gradient_flow: coordinate out of range");
  Trace trace;
  trace.c0 = options.c0;
  const auto steps = static_cast<std::size_t>(std::llround(options.T / options.step));
  trace.rows.push_back(record(0.0, net, f_star, k));

  double grad_b;
  std::vector<double> grad_w;
  DiagonalLinearNet next = net;
  double t = 0.0;
  double current = closed_form_losses(net, f_star, k).seen;
  for (std::size_t s = 1; s <= steps; ++s) {
    seen_gradient(net, f_star, k, grad_b, grad_w);
    // Advance one nominal step, in halves if a sub-step raises the loss.
    double remaining = options.step;
    while (remaining > 0.0) {
      double h = remaining;
      double trial = 0.0;
      for (;;) {
        next.b = net.b - h * grad_b;
        for (std::size_t j = 0; j < net.w.size(); ++j) next.w[j] = net.w[j] - h * grad_w[j];
        trial = closed_form_losses(next, f_star, k).seen;
        if (trial <= current + 1e-15 || h < 1e-12) break;
        h *= 0.5;
        ++trace.halvings;
      }
      if (!std::isfinite(trial)) {
        trace.final_net = net;
        throw NumericalFailure("gradient_flow: non-finite parameters at t = " + std::to_string(t));
      }
      std::swap(net, next);
      current = trial;
      t += h;
      remaining -= h;
      if (remaining > 1e-15) seen_gradient(net, f_star, k, grad_b, grad_w);
      else remaining = 0.0;
    }
    if (s % options.record_every == 0 || s == steps) trace.rows.push_back(record(t, net, f_star, k));
  }
  trace.final_net = net;
  trace.t_star = critical_time(trace.rows, options.c0);
  return trace;
}

std::optional<double> critical_time(const std::vector<TraceRow>& rows, double c0) {
  require(!rows.empty(), "critical_time: empty trace");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(rows[i].tau > c0)) continue;
    if (i == 0 || !std::isfinite(rows[i - 1].tau)) return rows[i].t;
    const double t0 = rows[i - 1].t, t1 = rows[i].t;
    const double a = rows[i - 1].tau, b = rows[i].tau;
    return t0 + (c0 - a) / (b - a) * (t1 - t0);
  }
  return std::nullopt;
}

double transfer_ratio(const Losses& losses) {
  if (losses.seen == 0.0) return losses.full == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return losses.full / losses.seen;
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << "t,L_S,L,tau,fhat_k\n";
  out.precision(12);
  for (const auto& r : trace.rows) out << r.t << ',' << r.seen_loss << ',' << r.full_loss << ',' << r.tau << ',' << r.fhat_k << '\n';
}

}  // namespace polytransfer::gotu

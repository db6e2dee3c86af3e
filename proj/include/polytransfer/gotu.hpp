#pragma once

// Diagonal linear networks f(x) = b + sum_i pi_i x_i with
// pi_i = prod_l w_i^(l), trained by gradient flow on the seen half-cube
// S = {x_k = 1} of {-1, 1}^n against a linear target
// f*(x) = b* + sum_i c_i x_i. Every loss here is an exact population value.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace polytransfer::gotu {

struct DiagonalLinearNet {
  std::size_t n = 0;
  std::size_t L = 2;
  double b = 0.0;
  std::vector<double> w;  // L x n, row-major: w[l * n + i]

  double weight(std::size_t l, std::size_t i) const { return w[l * n + i]; }
  double& weight(std::size_t l, std::size_t i) { return w[l * n + i]; }
  double pi(std::size_t i) const;
  std::vector<double> effective() const;
  // Value at a point, x_i in {-1, +1}.
  double eval(const std::vector<int>& x) const;
};

struct LinearTarget {
  double b_star = 0.0;
  std::vector<double> c;

  static LinearTarget dictator(std::size_t n, std::size_t k);
  // All coefficients equal to `value`.
  static LinearTarget uniform(std::size_t n, double value);
  double eval(const std::vector<int>& x) const;
};

// w_i^(l) ~ U(-alpha, alpha) i.i.d., b = 0. Requires 0 < alpha <= 1/2.
DiagonalLinearNet init_weights(std::size_t n, std::size_t L, double alpha, std::uint64_t seed);

struct AlphaMax {
  double value = 0.5;
  bool fallback = false;  // L = 2: the closed form degenerates, 1/2 returned
};

// ((L-2) R T + (8/eps)^{(L-2)/L})^{1/(2-L)} with R = 1 + |b* + c_k| and
// T = c_T log(R / eps).
AlphaMax alpha_max(std::size_t L, double eps, const LinearTarget& f_star, std::size_t k, double c_T = 1.0);

struct Losses {
  double seen = 0.0;  // L_S
  double full = 0.0;  // L
};

// L   = (b - b*)^2 + sum_i (pi_i - c_i)^2
// L_S = (b - b* + pi_k - c_k)^2 + sum_{i != k} (pi_i - c_i)^2
Losses closed_form_losses(const DiagonalLinearNet& net, const LinearTarget& f_star, std::size_t k);

// max_i D_i / sum_i D_i with D_i = (pi_i - c_i)^2; empty when the sum is
// below 1e-18 (converged).
std::optional<double> tau(const DiagonalLinearNet& net, const LinearTarget& f_star);

struct TraceRow {
  double t;
  double seen_loss;
  double full_loss;
  double tau;  // NaN when converged
  double fhat_k;
};

struct Trace {
  std::vector<TraceRow> rows;
  DiagonalLinearNet final_net;
  std::size_t halvings = 0;
  double c0 = 0.25;
  std::optional<double> t_star;
};

struct FlowOptions {
  double step = 1e-3;
  double T = 100.0;
  std::size_t record_every = 100;
  double c0 = 0.25;
};

// Explicit Euler on -grad L_S. A step that increases L_S is retried at half
// the step size (down to 1e-12).
Trace gradient_flow(DiagonalLinearNet net, const LinearTarget& f_star, std::size_t k, const FlowOptions& options);

// First recorded time with tau > c0, linearly interpolated from the previous
// record; empty when tau never exceeds c0.
std::optional<double> critical_time(const std::vector<TraceRow>& rows, double c0);

// Exact E_Q[(f - f*)^2] / E_P[(f - f*)^2] = L / L_S.
double transfer_ratio(const Losses& losses);

void write_trace_csv(std::ostream& out, const Trace& trace);

}  // namespace polytransfer::gotu

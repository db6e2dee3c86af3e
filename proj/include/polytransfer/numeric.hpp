#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace polytransfer {

// A Monte Carlo (or exact, with stderr 0) estimate.
struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

// Standard normal helpers. The survival-function forms stay accurate deep
// in either tail (relative error near machine precision down to ~1e-300).
double normal_pdf(double x);
double normal_cdf(double x);
double normal_sf(double x);
double normal_quantile(double p);
// Inverse survival function: x with normal_sf(x) = q.
double normal_isf(double q);
// Phi(b) - Phi(a) for a <= b, computed on the side of zero that avoids
// cancellation.
double normal_interval_mass(double a, double b);

// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const QuadratureRule& gauss_legendre(std::size_t n);

// Composite Gauss-Legendre on [a, b]: `panels` equal panels, `order` points each.
template <class F>
double integrate_gl(F&& f, double a, double b, std::size_t panels = 1, std::size_t order = 20) {
  const auto& rule = gauss_legendre(order);
  const double width = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = a + (static_cast<double>(p) + 0.5) * width;
    const double half = 0.5 * width;
    double panel = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
      panel += rule.weights[i] * f(mid + half * rule.nodes[i]);
    total += half * panel;
  }
  return total;
}

// Ordinary least-squares slope of y on x.
double fitted_slope(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);

}  // namespace polytransfer

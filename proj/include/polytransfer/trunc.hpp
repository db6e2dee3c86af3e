#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "polytransfer/dist.hpp"
#include "polytransfer/transfer.hpp"

namespace polytransfer::trunc {

using Vector = Eigen::VectorXd;
using Model = std::function<double(const Vector&)>;

// Covariates with label means mu_i = f*(x_i); labels are mu_i + N(0, 1)
// noise, observed only when they land in `set`.
struct Instance {
  std::vector<Vector> x;
  std::vector<double> mu;
  dist::TruncationSet set = dist::TruncationSet::whole_line();
};

Instance make_instance(std::vector<Vector> x, const Model& f_star, dist::TruncationSet set);

// Draws from N(mean, var) restricted to a one-dimensional set.
std::vector<double> sample_truncated_normal(double mean, double var, const dist::TruncationSet& set, std::size_t n,
                                            std::uint64_t seed);

enum class Method { Auto, Quadrature, MonteCarlo };

// Below these masses the quadrature and Monte Carlo paths refuse to run.
inline constexpr double kQuadratureFloor = 1e-6;
inline constexpr double kMonteCarloFloor = 1e-3;

// (1/N) sum_i E_{y ~ N_S(mu_i, 1)} (y - f(x_i))^2. Auto uses quadrature on
// interval unions and Monte Carlo otherwise.
Estimate truncated_mse(const Model& f, const Instance& inst, const dist::McSpec& mc = {}, Method method = Method::Auto);
// Same with S = R; the quadrature path is the closed form 1 + (mu_i - f(x_i))^2.
Estimate full_mse(const Model& f, const Instance& inst, const dist::McSpec& mc = {}, Method method = Method::Auto);

struct AlphaMass {
  double value = 0.0;
  bool usable = false;  // value >= the floor of the path that would be used
};
AlphaMass alpha_mass_min(const Instance& inst);

struct TruncReport {
  double alpha = 0.0;
  transfer::TransferReport forward;  // full_mse <= (C / alpha^2) truncated_mse
  transfer::TransferReport reverse;  // truncated_mse <= (1 / alpha) full_mse
  double ratio = 0.0;                // full_mse / truncated_mse
};

TruncReport truncated_transfer_check(const Model& f, const Instance& inst, double C, const dist::McSpec& mc = {},
                                     Method method = Method::Auto);

// "R" or a union like "[0,inf)" / "[-1,2]u[3,4]".
std::string describe_set(const dist::TruncationSet& set);
dist::TruncationSet parse_set(const std::string& text);

// Instance file: a "set <descriptor>" line, then a CSV header x1,...,xn,mu
// and one row per covariate.
void write_instance(std::ostream& out, const Instance& inst);
Instance read_instance(std::istream& in);

}  // namespace polytransfer::trunc

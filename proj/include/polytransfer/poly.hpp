#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polytransfer/dist.hpp"
#include "polytransfer/numeric.hpp"

namespace polytransfer::poly {

using Vector = Eigen::VectorXd;
using MultiIndex = std::vector<int>;

enum class Basis {
  Monomial,
  // Tensor products of sqrt(2k+1) P_k(t), t the affine map of the box onto
  // [-1, 1]^n; orthonormal under the uniform distribution on the box.
  BoxOrthonormal,
};

std::string to_string(Basis basis);

// All multi-indices in n variables of total degree <= d, graded
// lexicographic: total degree ascending, then exponent tuples descending.
std::vector<MultiIndex> graded_lex(std::size_t n, std::size_t d);

class MultiPoly {
 public:
  MultiPoly() = default;
  // Zero polynomial. The box is required for BoxOrthonormal and ignored
  // otherwise.
  MultiPoly(std::size_t dim, std::size_t degree, Basis basis = Basis::Monomial,
            std::optional<std::pair<Vector, Vector>> box = std::nullopt);

  std::size_t dim() const { return dim_; }
  std::size_t degree() const { return degree_; }
  Basis basis() const { return basis_; }
  const Vector& box_lo() const { return lo_; }
  const Vector& box_hi() const { return hi_; }

  // Coefficients aligned with indices().
  const std::vector<MultiIndex>& indices() const;
  const std::vector<double>& coefficients() const { return coeffs_; }
  std::vector<double>& coefficients() { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }

  double coefficient(const MultiIndex& alpha) const;
  void set_coefficient(const MultiIndex& alpha, double value);
  bool is_zero() const;

  double eval(const Vector& x) const;
  double operator()(const Vector& x) const { return eval(x); }

  // Values of every basis function at x, aligned with indices().
  Vector features(const Vector& x) const;

  MultiPoly to_monomial() const;
  MultiPoly to_orthonormal(const Vector& lo, const Vector& hi) const;

  // Difference in this polynomial's basis; the degree is the larger of the two.
  MultiPoly operator-(const MultiPoly& other) const;

  struct Layout;

 private:
  std::size_t position(const MultiIndex& alpha) const;
  void check_box() const;

  std::size_t dim_ = 0;
  std::size_t degree_ = 0;
  Basis basis_ = Basis::Monomial;
  Vector lo_, hi_;
  std::shared_ptr<const Layout> layout_;
  std::vector<double> coeffs_;
};

struct Sample {
  Vector x;
  double y;
};

struct FitResult {
  MultiPoly poly;
  double residual_ss = 0.0;  // sum of squared residuals, without the penalty
  double mse = 0.0;
  std::size_t rank = 0;
};

// Ridge used when no explicit value is given: 1e-10 from degree 10 up, 0 below.
double default_ridge(std::size_t degree);

// Least squares in the chosen basis, minimizing
//   sum (p(x_i) - y_i)^2 + ridge * |coeffs|^2.
// BoxOrthonormal uses `box` or, when absent, the bounding box of the inputs.
FitResult fit_regression(const std::vector<Sample>& samples, std::size_t degree, Basis basis, double ridge,
                         std::optional<std::pair<Vector, Vector>> box = std::nullopt);

// Sample mean and standard error of g under d; throws NumericalFailure,
// naming the point, if g is not finite somewhere.
Estimate mc_functional(const std::function<double(const Vector&)>& g, const dist::Density& d,
                       const dist::McSpec& mc);

struct DegreeResult {
  std::size_t degree = 0;
  bool exceeded = false;  // the top fitted coefficient was significant
  std::string to_string() const;
};

// Degree of t -> g(x0 + t dir) on t in [-1, 1]: Chebyshev interpolation at
// max_deg + 2 nodes, then the largest index whose coefficient exceeds
// `threshold` times the largest one.
DegreeResult restricted_degree(const std::function<double(const Vector&)>& g, const Vector& x0, const Vector& dir,
                               std::size_t max_deg, double threshold = 1e-8);

// Max of the above over `lines` random lines (x0 and dir standard normal).
DegreeResult restricted_degree_random(const std::function<double(const Vector&)>& g, std::size_t dim,
                                      std::size_t max_deg, std::size_t lines, std::uint64_t seed,
                                      double threshold = 1e-8);

// Text format: "# polytransfer-poly" header lines giving dim, degree, basis
// and box, then one "e1 ... en coefficient" line per nonzero term in
// graded-lex order.
void write_poly(std::ostream& out, const MultiPoly& p);
MultiPoly read_poly(std::istream& in);

}  // namespace polytransfer::poly

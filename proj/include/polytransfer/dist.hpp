#pragma once

// Catalog of probability densities on R^n: evaluation, sampling, density
// ratio sups, Renyi divergences, Gaussian masses of truncation sets, and the
// log-concave "bridge" densities that interpolate between a density and its
// translate.

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "polytransfer/numeric.hpp"
#include "polytransfer/rng.hpp"

namespace polytransfer::dist {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo;
  double hi;
};

// Sets a distribution can be truncated to.
class TruncationSet {
 public:
  enum class Kind { Halfspace, IntervalUnion, Box, FrozenCoordinate };

  // {x : normal . x >= offset}
  static TruncationSet halfspace(Vector normal, double offset);
  // Union of closed intervals on R; must be ordered and pairwise disjoint.
  static TruncationSet intervals(std::vector<Interval> pieces);
  static TruncationSet whole_line() { return intervals({{-kInf, kInf}}); }
  static TruncationSet box(Vector lo, Vector hi);
  // {x : x[index] == value}; a measure-zero slice for continuous densities,
  // used by the Boolean seen sets.
  static TruncationSet frozen_coordinate(std::size_t index, double value);

  Kind kind() const { return kind_; }
  bool contains(const Vector& x) const;
  // Dimension the set constrains, or 0 when it applies to any dimension.
  std::size_t dim() const;

  const std::vector<Interval>& pieces() const { return pieces_; }
  const Vector& normal() const { return normal_; }
  double offset() const { return offset_; }
  const Vector& lo() const { return lo_; }
  const Vector& hi() const { return hi_; }
  std::size_t frozen_index() const { return index_; }
  double frozen_value() const { return offset_; }

  std::string describe() const;

 private:
  Kind kind_ = Kind::IntervalUnion;
  std::vector<Interval> pieces_;
  Vector normal_;
  Vector lo_, hi_;
  std::size_t index_ = 0;
  double offset_ = 0.0;
};

// Monte Carlo budget and seed.
struct McSpec {
  std::size_t n_samples = 100000;
  std::uint64_t seed = 0;
};

struct Gaussian {
  Vector mean;
  Matrix cov;
  Matrix chol;        // lower Cholesky factor of cov
  double log_norm;    // log of the normalizing constant (2 pi)^{-n/2} det^{-1/2}
};

struct UniformBox {
  Vector lo;
  Vector hi;
};

class Density;

struct TruncatedGaussian {
  Gaussian base;
  TruncationSet set;
  Estimate mass;
};

// Which construction a shift bridge came from.
enum class BridgeKind { Gaussian1D, GaussianND, GaussianGeneralCov, TranslatedProduct };

// Log-concave bridge between a base density P and its translate
// Q(x) = P(x - gamma * u) for a unit direction u. In coordinates y = R x
// (R orthogonal, R u = e1) the unnormalized density is
//
//   P(y)                   for y1 <= 0
//   P(0, y2, ..., yn)      for 0 < y1 < gamma
//   P(y - gamma e1)        for y1 >= gamma
//
// and its integral is Z = 1 + gamma * m0 with m0 the marginal density of y1
// under P at 0.
struct ShiftBridge {
  BridgeKind kind;
  std::shared_ptr<const Density> base;  // in rotated coordinates
  Matrix rotation;                      // R; identity when no rotation is needed
  bool rotated = false;
  double gamma = 0.0;
  double marginal_at_zero = 0.0;
  double normalizer = 1.0;  // Z
  double mass_left = 0.5;   // P(y1 < 0) under the base
  // False when the construction is not log-concave (a general covariance
  // whose precision couples y1 with the other coordinates).
  bool log_concave = true;
  // Conditional law of (y2..yn) given y1 = 0 for Gaussian bases.
  Vector cond_mean;
  Matrix cond_chol;
};

struct Product {
  std::vector<Density> factors;  // each one-dimensional
};

class Density {
 public:
  using Kind = std::variant<Gaussian, UniformBox, TruncatedGaussian, ShiftBridge, Product>;

  static Density gaussian(Vector mean, Matrix cov);
  static Density standard_normal(std::size_t dim);
  static Density gaussian1d(double mean, double variance);
  static Density uniform_box(Vector lo, Vector hi);
  static Density uniform1d(double lo, double hi);
  // The mass of `set` is computed on construction (exactly where possible,
  // otherwise by Monte Carlo with `mc`).
  static Density truncated_gaussian(Vector mean, Matrix cov, TruncationSet set, McSpec mc = {});
  static Density product(std::vector<Density> factors);

  std::size_t dim() const { return dim_; }
  const Kind& kind() const { return kind_; }
  std::string name() const;

  double pdf(const Vector& x) const;
  double log_pdf(const Vector& x) const;
  // Log-concave by catalog membership.
  bool is_log_concave() const;

  // Axis-aligned box covering the support, or the mean +/- `width` standard
  // deviations along unbounded directions.
  std::pair<Vector, Vector> bounding_box(double width = 8.0) const;

  // One-dimensional members only (Gaussian, uniform, truncated Gaussian on
  // an interval union, bridges on R).
  double cdf(double x) const;
  double quantile(double p) const;

  // Single draw from the generator.
  Vector draw(Rng& rng) const;

  // Normalizing constant of a bridge density; 1 for everything else.
  double normalizer() const;

 private:
  Density(std::size_t dim, Kind kind) : dim_(dim), kind_(std::move(kind)) {}
  friend Density make_bridge(ShiftBridge bridge, std::size_t dim);

  std::size_t dim_;
  Kind kind_;
};

// pdf(d, x) with the dimension check.
double pdf(const Density& d, const Vector& x);

// n i.i.d. draws; draw i uses stream i of `seed`, so the result does not
// depend on thread count. Truncated Gaussians use rejection sampling, with an
// inverse-CDF path for one-dimensional interval unions once the acceptance
// rate drops below 1e-3; below 1e-6 with no inverse-CDF path this throws.
std::vector<Vector> sample(const Density& d, std::size_t n, std::uint64_t seed);

struct GridSpec {
  // Search box; defaults to the union of both bounding boxes.
  std::optional<std::pair<Vector, Vector>> box;
  // Points per axis on the coarse pass; 0 picks a per-dimension default.
  std::size_t points_per_axis = 0;
  // Bounding-box width (in standard deviations) for unbounded supports.
  double width = 8.0;
};

struct RatioSup {
  double value = 0.0;
  Vector argmax;
  Vector box_lo, box_hi;
  bool infinite = false;
  bool closed_form = false;
};

// sup_x P(x) / Q(x): closed form for two uniform boxes, otherwise a grid
// search followed by one 10x-finer pass around the argmax.
RatioSup density_ratio_sup(const Density& p, const Density& q, const GridSpec& grid = {});

struct Divergence {
  double value = 0.0;
  double stderr_ = 0.0;
  bool infinite = false;
};

// (E_{x~Q}[(P(x)/Q(x))^alpha])^{1/alpha}; alpha = +inf routes to
// density_ratio_sup.
Divergence renyi_divergence(const Density& p, const Density& q, double alpha, const McSpec& mc = {});

struct MassEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  bool exact = false;
};

// Mass of `set` under N(mean, cov). Exact for one-dimensional sets and
// halfspaces, Monte Carlo otherwise.
MassEstimate gaussian_mass(const Vector& mean, const Matrix& cov, const TruncationSet& set,
                           const McSpec& mc = {});

// Bridge catalog.
Density bridge_gaussian1d(double mu);
Density bridge_gaussian_nd(const Vector& mu);
// Base N(0, cov), translate gamma * e1.
Density bridge_gaussian_general_cov(const Matrix& cov, double gamma);
// Base product of one-dimensional log-concave factors (the first with its
// mode at 0), translate gamma * e1.
Density bridge_translated_product(std::vector<Density> factors, double gamma);

enum class BridgeRequest { Gaussian1D, GaussianND, TranslatedProduct, GaussianGeneralCov };

struct BridgeParams {
  double mu = 0.0;                 // Gaussian1D
  Vector mu_vec;                   // GaussianND
  std::vector<Density> factors;    // TranslatedProduct
  Matrix cov;                      // GaussianGeneralCov
  double gamma = 0.0;              // TranslatedProduct, GaussianGeneralCov
};

// Dispatches to the catalog above. A zero shift returns the base density.
Density bridge_construct(BridgeRequest kind, const BridgeParams& params);

}  // namespace polytransfer::dist

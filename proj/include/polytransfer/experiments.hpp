#pragma once

// Named experiments behind the command-line runner, plus the computations
// they are built from (shared with the acceptance suite).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "polytransfer/config.hpp"
#include "polytransfer/dist.hpp"
#include "polytransfer/gotu.hpp"
#include "polytransfer/icl.hpp"
#include "polytransfer/nets.hpp"
#include "polytransfer/numeric.hpp"
#include "polytransfer/poly.hpp"
#include "polytransfer/trunc.hpp"

namespace polytransfer::experiments {

using Vector = Eigen::VectorXd;

// ---- extrapolation figures ----------------------------------------------

struct Rect {
  double x_lo, x_hi, y_lo, y_hi;
  bool contains(double x, double y) const { return x >= x_lo && x <= x_hi && y >= y_lo && y <= y_hi; }
  Rect grown(double by) const { return {x_lo - by, x_hi + by, y_lo - by, y_hi + by}; }
};

struct FigSetup {
  int figure = 1;
  Rect seen;      // support of the training distribution
  Rect band;      // seen grown by 1; the band is band \ seen
  Rect wide;      // heatmap extent; wide \ seen
  double (*target)(double, double);
};

// Figure 1: sin(2 pi x) sin(2 pi y) on [0,1] x [-1,1].
// Figure 2: sin(2 pi x) sin(2 pi y) + x y on [-1/2,1/2]^2.
FigSetup fig_setup(int figure);

struct FigOptions {
  std::size_t samples = 10000;
  std::size_t degree = 20;
  double ridge = -1.0;  // negative: poly::default_ridge(degree)
  std::size_t epochs = 200;
  double rate = 0.01;
  std::size_t batch = 64;
  bool smooth_net = false;  // also train the 3x^2 - 2x^3 network
  // The cubic compounds across layers: at gain 1 most seeds overflow at
  // initialization, so the smooth network starts smaller and steps slower.
  double smooth_init_gain = 0.5;
  double smooth_rate = 1e-3;
  std::size_t eval_samples = 20000;
  std::uint64_t seed = 0;
};

struct RegionMse {
  std::string model;
  Estimate seen, band, wide;
  double train_mse = 0.0;
};

struct FigRun {
  FigSetup setup;
  poly::MultiPoly poly;
  nets::MLP relu;
  std::optional<nets::MLP> smooth;
  std::vector<nets::EpochRow> relu_trace, smooth_trace;
  std::vector<RegionMse> mse;  // "poly", "relu", then "smoothstep" when trained
};

FigRun run_figure(const FigSetup& setup, const FigOptions& options);

// Mean squared error of g against the target under the uniform law on
// `outer` with the `hole` removed (no hole when absent).
Estimate region_mse(const std::function<double(double, double)>& g, double (*target)(double, double), const Rect& outer,
                    const std::optional<Rect>& hole, std::size_t samples, std::uint64_t seed);

// ---- Gaussian shift table ------------------------------------------------

struct Gaussian1dRow {
  double mu = 0.0;
  double direct_ratio_formula = 1.0;   // exp(mu^2 / 2)
  double direct_ratio_numeric = 1.0;   // (E_P (dQ/dP)^2)^{1/2} by quadrature
  double bridge_coefficient_formula = 1.0;  // (1 + mu / sqrt(2 pi))^{d+1}
  double bridge_coefficient_numeric = 1.0;  // sup(Q/B) * sup(P/B)^d on a grid
  double sup_q = 1.0;
  double sup_p = 1.0;
};

// P = N(0, 1), Q = N(mu, 1), bridge B from the catalog.
Gaussian1dRow gaussian1d_row(double mu, std::size_t d = 1);

// (E_{x~Q}[(P(x)/Q(x))^alpha])^{1/alpha} for one-dimensional densities by
// Gauss-Legendre quadrature with the integrand formed in log space.
double renyi_1d_quadrature(const dist::Density& p, const dist::Density& q, double alpha);

// ---- truncated regression --------------------------------------------------

// Covariates on a uniform grid of [-1, 1]; response mean f*(x) with f* = x
// ("linear") or x^5 ("quintic"); truncation [a, inf) with a chosen so the
// smallest retained mass is exactly alpha.
trunc::Instance alpha_instance(const std::string& target, double alpha, std::size_t points);

// ---- GOTU -----------------------------------------------------------------

struct CriticalRun {
  std::optional<double> t_star;
  double max_ratio_before = 0.0;  // max L / L_S over records with t < t_star
  gotu::Trace trace;
};

// f* = sum_i x_i, seen set {x_k = 1}, k = 0.
CriticalRun gotu_critical(std::size_t n, std::size_t L, double alpha, std::uint64_t seed, const gotu::FlowOptions& opts);

// ---- in-context shift ----------------------------------------------------

struct ShiftRow {
  icl::ShiftKind kind;
  double mu;
  icl::ShiftReport report;
};

// Source: standard Gaussian setup. Target: the factor named by `kind` moved
// to mean mu * e1 (all factors for Joint).
ShiftRow icl_shift(const icl::LSAParams& params, std::size_t n, std::size_t N, icl::ShiftKind kind, double mu, double C,
                   double exponent_c, const dist::McSpec& mc);

// ---- transfer ensembles ----------------------------------------------------

// (E_Q|f| / E_P|f|)^{1/d} for `count` random univariate degree-d polynomials,
// P = U([p_lo, p_hi]), Q = U([q_lo, q_hi]), by exact quadrature.
std::vector<double> ensemble_root_ratios(std::size_t d, std::size_t count, std::uint64_t seed, double p_lo = 0.0,
                                         double p_hi = 1.0, double q_lo = 0.0, double q_hi = 3.0);

// ---- runner --------------------------------------------------------------

// One configured run: the experiment reads its parameters, then seals the
// session, which rejects unknown keys, creates the output directory and
// writes the resolved configuration into it.
class Session {
 public:
  Session(config::Config& cfg, std::string name, std::filesystem::path dir, std::ostream& log);

  config::Config& cfg;
  const std::string name;
  std::uint64_t seed = 0;
  std::ostream& log;

  std::string key(const std::string& field) const { return name + "." + field; }
  void seal();
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& file) const;

 private:
  std::filesystem::path dir_;
  bool sealed_ = false;
};

struct Experiment {
  std::string name;
  std::string summary;
  std::function<void(Session&)> run;
};

const std::vector<Experiment>& catalog();

// POLYTRANSFER_OUTPUT_ROOT when set, else "results".
std::filesystem::path output_root();

// Runs the experiment named by the "experiment" key. Returns the output
// directory.
std::filesystem::path run(config::Config& cfg, std::ostream& log, const std::filesystem::path& root);

}  // namespace polytransfer::experiments

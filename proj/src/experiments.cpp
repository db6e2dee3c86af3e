#include "polytransfer/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "polytransfer/boolean.hpp"
#include "polytransfer/error.hpp"
#include "polytransfer/kernels.hpp"
#include "polytransfer/rng.hpp"
#include "polytransfer/svg.hpp"
#include "polytransfer/transfer.hpp"

namespace polytransfer::experiments {

namespace fs = std::filesystem;

namespace {

double fig1_target(double x, double y) {
  return std::sin(2.0 * std::numbers::pi * x) * std::sin(2.0 * std::numbers::pi * y);
}

double fig2_target(double x, double y) { return fig1_target(x, y) + x * y; }

Vector point(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

// CSV with a header row; cells are shortest round-trip doubles, integers,
// booleans as true/false, or strings.
class Csv {
 public:
  Csv(const fs::path& path, const std::string& header) : out_(path, std::ios::binary) {
    if (!out_) throw InvalidArgument("cannot write '" + path.string() + "'");
    out_ << header << '\n';
  }

  template <class... Ts>
  void row(const Ts&... cells) {
    std::string line;
    ((line += cell(cells), line += ','), ...);
    line.pop_back();
    out_ << line << '\n';
  }

  std::ostream& raw() { return out_; }

 private:
  template <class T>
  static std::string cell(const T& v) {
    if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
    else if constexpr (std::is_floating_point_v<T>) return config::format_double(static_cast<double>(v));
    else if constexpr (std::is_integral_v<T>) return std::to_string(v);
    else return std::string(v);
  }

  std::ofstream out_;
};

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

// ---- figures ----------------------------------------------------------------

FigSetup fig_setup(int figure) {
  if (figure == 1) {
    const Rect seen{0.0, 1.0, -1.0, 1.0};
    return {1, seen, seen.grown(1.0), {-5.0, 5.0, -5.0, 5.0}, &fig1_target};
  }
  if (figure == 2) {
    const Rect seen{-0.5, 0.5, -0.5, 0.5};
    return {2, seen, seen.grown(1.0), {-5.0, 5.0, -5.0, 5.0}, &fig2_target};
  }
  throw InvalidArgument("fig_setup: figure must be 1 or 2");
}

Estimate region_mse(const std::function<double(double, double)>& g, double (*target)(double, double), const Rect& outer,
                    const std::optional<Rect>& hole, std::size_t samples, std::uint64_t seed) {
  require(samples >= 2, "region_mse: need at least two samples");
  const Rng root(seed, 3);
  return kernels::parallel::sample_moments(samples, [&](std::size_t i) {
           Rng rng = root.child(i);
           double x, y;
           do {
             x = rng.uniform(outer.x_lo, outer.x_hi);
             y = rng.uniform(outer.y_lo, outer.y_hi);
           } while (hole && hole->contains(x, y));
           const double r = g(x, y) - target(x, y);
           return r * r;
         })
      .estimate();
}

FigRun run_figure(const FigSetup& setup, const FigOptions& options) {
  require(options.samples >= 1, "run_figure: need training samples");
  Rng rng(options.seed, 11);
  std::vector<poly::Sample> samples(options.samples);
  nets::Dataset data;
  for (auto& s : samples) {
    const double x = rng.uniform(setup.seen.x_lo, setup.seen.x_hi);
    const double y = rng.uniform(setup.seen.y_lo, setup.seen.y_hi);
    s = {point(x, y), setup.target(x, y)};
    data.x.push_back(s.x);
    data.y.push_back(s.y);
  }

  const double ridge = options.ridge < 0.0 ? poly::default_ridge(options.degree) : options.ridge;
  const std::pair<Vector, Vector> box{point(setup.seen.x_lo, setup.seen.y_lo), point(setup.seen.x_hi, setup.seen.y_hi)};
  auto fit = poly::fit_regression(samples, options.degree, poly::Basis::BoxOrthonormal, ridge, box);

  nets::AdaGradOptions train;
  train.epochs = options.epochs;
  train.rate = options.rate;
  train.batch = options.batch;
  train.seed = options.seed;

  FigRun run{setup, std::move(fit.poly), nets::MLP(nets::MLP::default_sizes(), nets::Activation::ReLU, mix64(options.seed + 1)),
             std::nullopt, {}, {}, {}};
  run.relu_trace = nets::train_adagrad(run.relu, data, train);
  if (options.smooth_net) {
    run.smooth = nets::MLP(nets::MLP::default_sizes(), nets::Activation::Smoothstep, mix64(options.seed + 2),
                           options.smooth_init_gain);
    auto smooth_train = train;
    smooth_train.rate = options.smooth_rate;
    run.smooth_trace = nets::train_adagrad(*run.smooth, data, smooth_train);
  }

  const auto measure = [&](const std::string& name, const std::function<double(double, double)>& g, double train_mse) {
    const std::uint64_t s = options.seed + 101;
    run.mse.push_back({name, region_mse(g, setup.target, setup.seen, std::nullopt, options.eval_samples, s),
                       region_mse(g, setup.target, setup.band, setup.seen, options.eval_samples, s + 1),
                       region_mse(g, setup.target, setup.wide, setup.seen, options.eval_samples, s + 2), train_mse});
  };
  measure("poly", [&](double x, double y) { return run.poly.eval(point(x, y)); }, fit.mse);
  measure("relu", [&](double x, double y) { return run.relu.forward(point(x, y)); }, run.relu_trace.back().train_mse);
  if (run.smooth)
    measure("smoothstep", [&](double x, double y) { return run.smooth->forward(point(x, y)); },
            run.smooth_trace.back().train_mse);
  return run;
}

// ---- Gaussian shift table ------------------------------------------------

double renyi_1d_quadrature(const dist::Density& p, const dist::Density& q, double alpha) {
  require(p.dim() == 1 && q.dim() == 1, "renyi_1d_quadrature: one-dimensional densities only");
  require(alpha > 1.0 && std::isfinite(alpha), "renyi_1d_quadrature: alpha must be finite and > 1");
  const auto [plo, phi] = p.bounding_box();
  const auto [qlo, qhi] = q.bounding_box();
  const double lo = std::min(plo[0], qlo[0]);
  const double hi = std::max(phi[0], qhi[0]);
  const double span = hi - lo;
  bool infinite = false;
  const double integral = integrate_gl(
      [&](double x) {
        const Vector v = Vector::Constant(1, x);
        const double lp = p.log_pdf(v);
        const double lq = q.log_pdf(v);
        if (std::isinf(lp) && lp < 0) return 0.0;
        if (std::isinf(lq) && lq < 0) {
          infinite = true;
          return 0.0;
        }
        return std::exp(alpha * lp + (1.0 - alpha) * lq);
      },
      lo - span, hi + span, 600, 20);
  if (infinite) return dist::kInf;
  return std::pow(integral, 1.0 / alpha);
}

Gaussian1dRow gaussian1d_row(double mu, std::size_t d) {
  const auto P = dist::Density::gaussian1d(0.0, 1.0);
  const auto Q = dist::Density::gaussian1d(mu, 1.0);
  Gaussian1dRow row;
  row.mu = mu;
  row.direct_ratio_formula = std::exp(mu * mu / 2.0);
  row.direct_ratio_numeric = renyi_1d_quadrature(Q, P, 2.0);
  row.bridge_coefficient_formula =
      std::pow(1.0 + std::abs(mu) / std::sqrt(2.0 * std::numbers::pi), static_cast<double>(d + 1));
  dist::BridgeParams params;
  params.mu = mu;
  const auto bridge = dist::bridge_construct(dist::BridgeRequest::Gaussian1D, params);
  row.sup_q = dist::density_ratio_sup(Q, bridge).value;
  row.sup_p = dist::density_ratio_sup(P, bridge).value;
  row.bridge_coefficient_numeric = row.sup_q * std::pow(row.sup_p, static_cast<double>(d));
  return row;
}

// ---- truncated regression --------------------------------------------------

trunc::Instance alpha_instance(const std::string& target, double alpha, std::size_t points) {
  require(points >= 2, "alpha_instance: need at least two covariates");
  require(alpha > 0.0 && alpha <= 1.0, "alpha_instance: alpha must lie in (0, 1]");
  trunc::Model f_star;
  if (target == "linear") f_star = [](const Vector& x) { return x[0]; };
  else if (target == "quintic") f_star = [](const Vector& x) { return std::pow(x[0], 5); };
  else throw InvalidArgument("alpha_instance: unknown target '" + target + "' (linear, quintic)");
  std::vector<Vector> xs(points);
  double mu_min = dist::kInf;
  for (std::size_t i = 0; i < points; ++i) {
    xs[i] = Vector::Constant(1, -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points - 1));
    mu_min = std::min(mu_min, f_star(xs[i]));
  }
  const double a = alpha == 1.0 ? -dist::kInf : mu_min + normal_isf(alpha);
  return trunc::make_instance(std::move(xs), f_star, dist::TruncationSet::intervals({{a, dist::kInf}}));
}

// ---- GOTU -----------------------------------------------------------------

CriticalRun gotu_critical(std::size_t n, std::size_t L, double alpha, std::uint64_t seed, const gotu::FlowOptions& opts) {
  const auto f_star = gotu::LinearTarget::uniform(n, 1.0);
  CriticalRun run;
  run.trace = gotu::gradient_flow(gotu::init_weights(n, L, alpha, seed), f_star, 0, opts);
  run.t_star = run.trace.t_star;
  for (const auto& r : run.trace.rows) {
    if (run.t_star && r.t >= *run.t_star) break;
    run.max_ratio_before = std::max(run.max_ratio_before, gotu::transfer_ratio({r.seen_loss, r.full_loss}));
  }
  return run;
}

// ---- in-context shift ----------------------------------------------------

ShiftRow icl_shift(const icl::LSAParams& params, std::size_t n, std::size_t N, icl::ShiftKind kind, double mu, double C,
                   double exponent_c, const dist::McSpec& mc) {
  const auto source = icl::gaussian_setup(n, N);
  auto target = source;
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(n));
  mean[0] = mu;
  const auto moved = icl::Law::of(dist::Density::gaussian(mean, dist::Matrix::Identity(n, n)));
  switch (kind) {
    case icl::ShiftKind::Task: target.p_h = moved; break;
    case icl::ShiftKind::Query: target.p_query = moved; break;
    case icl::ShiftKind::Covariate: target.p_x = moved; break;
    case icl::ShiftKind::Joint: target.p_h = target.p_query = target.p_x = moved; break;
  }
  std::optional<dist::Density> bridge;
  if (kind != icl::ShiftKind::Joint && mu != 0.0)
    bridge = n == 1 ? dist::bridge_gaussian1d(mu) : dist::bridge_gaussian_nd(mean);
  return {kind, mu, icl::shift_report(params, source, target, kind, C, exponent_c, bridge, mc)};
}

// ---- ensembles -------------------------------------------------------------

std::vector<double> ensemble_root_ratios(std::size_t d, std::size_t count, std::uint64_t seed, double p_lo, double p_hi,
                                         double q_lo, double q_hi) {
  require(d >= 1, "ensemble_root_ratios: degree must be >= 1");
  const auto P = dist::Density::uniform1d(p_lo, p_hi);
  const auto Q = dist::Density::uniform1d(q_lo, q_hi);
  const Rng root(seed, d);
  std::vector<double> out(count);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
    Rng r = root.child(static_cast<std::uint64_t>(i));
    const auto f = transfer::random_polynomial(1, d, r.next_u64());
    const double eq = transfer::abs_moment_1d(f, Q, 1.0);
    const double ep = transfer::abs_moment_1d(f, P, 1.0);
    out[static_cast<std::size_t>(i)] = std::pow(eq / ep, 1.0 / static_cast<double>(d));
  }
  return out;
}

// ---- runner --------------------------------------------------------------

Session::Session(config::Config& c, std::string n, fs::path dir, std::ostream& l)
    : cfg(c), name(std::move(n)), log(l), dir_(std::move(dir)) {}

void Session::seal() {
  cfg.reject_unknown();
  fs::create_directories(dir_);
  std::ofstream out(dir_ / "resolved.cfg", std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + (dir_ / "resolved.cfg").string() + "'");
  cfg.write_resolved(out);
  sealed_ = true;
}

fs::path Session::path(const std::string& file) const {
  require(sealed_, "Session: outputs requested before the configuration was sealed");
  return dir_ / file;
}

namespace {

void run_fig(Session& s, int figure) {
  auto& c = s.cfg;
  FigOptions o;
  o.samples = c.get_size(s.key("samples"), o.samples);
  o.degree = c.get_size(s.key("degree"), o.degree);
  o.ridge = c.get_double(s.key("ridge"), poly::default_ridge(o.degree));
  o.epochs = c.get_size(s.key("epochs"), o.epochs);
  o.rate = c.get_double(s.key("rate"), o.rate);
  o.batch = c.get_size(s.key("batch"), o.batch);
  o.smooth_net = c.get_bool(s.key("smooth_net"), figure == 2);
  o.smooth_init_gain = c.get_double(s.key("smooth_init_gain"), o.smooth_init_gain);
  o.smooth_rate = c.get_double(s.key("smooth_rate"), o.smooth_rate);
  o.eval_samples = c.get_size(s.key("eval_samples"), o.eval_samples);
  const std::size_t resolution = c.get_size(s.key("resolution"), 200);
  const double range = c.get_double(s.key("color_range"), figure == 1 ? 1.0 : 2.0);
  const std::size_t replicates = c.get_size(s.key("replicates"), 1);
  s.seal();
  require(replicates >= 1, "replicates must be >= 1");

  const auto setup = fig_setup(figure);
  Csv mse(s.path("region_mse.csv"), "seed,model,region,mse,mse_se,train_mse");
  Csv trace(s.path("train_trace.csv"), "seed,model,epoch,train_mse");
  for (std::size_t r = 0; r < replicates; ++r) {
    o.seed = s.seed + r;
    s.log << s.name << ": replicate " << r << " (seed " << o.seed << ")\n";
    const FigRun run = run_figure(setup, o);
    for (const auto& m : run.mse) {
      mse.row(o.seed, m.model, "seen", m.seen.value, m.seen.stderr_, m.train_mse);
      mse.row(o.seed, m.model, "band", m.band.value, m.band.stderr_, m.train_mse);
      mse.row(o.seed, m.model, "wide", m.wide.value, m.wide.stderr_, m.train_mse);
      s.log << "  " << m.model << ": seen " << m.seen.value << ", band " << m.band.value << ", wide " << m.wide.value
            << '\n';
    }
    for (const auto& e : run.relu_trace) trace.row(o.seed, "relu", e.epoch, e.train_mse);
    for (const auto& e : run.smooth_trace) trace.row(o.seed, "smoothstep", e.epoch, e.train_mse);
    if (r != 0) continue;

    const Rect& w = setup.wide;
    const auto grid = [&](const std::function<double(double, double)>& f, const std::string& title) {
      // Overflowed predictions saturate the color scale instead of failing the plot.
      const auto finite = [&f](double x, double y) {
        const double v = f(x, y);
        if (std::isfinite(v)) return v;
        return std::isnan(v) ? 1e300 : std::copysign(1e300, v);
      };
      return svg::sample_grid(finite, w.x_lo, w.x_hi, w.y_lo, w.y_hi, resolution, resolution, range, title);
    };
    svg::emit_svg_heatmap(grid(setup.target, "target"), s.path("target.svg"));
    svg::emit_svg_heatmap(grid([&](double x, double y) { return run.poly.eval(point(x, y)); },
                               "degree-" + std::to_string(o.degree) + " polynomial"),
                          s.path("poly.svg"));
    svg::emit_svg_heatmap(grid([&](double x, double y) { return run.relu.forward(point(x, y)); }, "ReLU network"),
                          s.path("relu.svg"));
    if (run.smooth)
      svg::emit_svg_heatmap(grid([&](double x, double y) { return run.smooth->forward(point(x, y)); },
                                 "3x^2 - 2x^3 network"),
                            s.path("smoothstep.svg"));
    std::ofstream poly_out(s.path("poly.txt"), std::ios::binary);
    poly::write_poly(poly_out, run.poly);
    std::ofstream relu_out(s.path("relu.ckpt"), std::ios::binary);
    nets::write_checkpoint(relu_out, run.relu);
  }
}

void run_gaussian1d(Session& s) {
  const auto mus = s.cfg.get_doubles(s.key("mus"), {0.0, 1.0, 2.0, 4.0});
  const std::size_t d = s.cfg.get_size(s.key("d"), 1);
  s.seal();
  Csv csv(s.path("gaussian1d_coeffs.csv"),
          "mu,direct_ratio_lowerbound,bridge_coefficient,direct_ratio_numeric,bridge_coefficient_numeric,"
          "sup_q_over_bridge,sup_p_over_bridge");
  for (double mu : mus) {
    const auto r = gaussian1d_row(mu, d);
    csv.row(r.mu, r.direct_ratio_formula, r.bridge_coefficient_formula, r.direct_ratio_numeric,
            r.bridge_coefficient_numeric, r.sup_q, r.sup_p);
    s.log << "mu " << mu << ": direct " << r.direct_ratio_numeric << ", bridge " << r.bridge_coefficient_numeric << '\n';
  }
}

void run_truncated(Session& s) {
  auto& c = s.cfg;
  const auto alphas = c.get_doubles(s.key("alphas"), {0.5, 0.25, 0.1, 0.05});
  const auto targets = split_names(c.get_string(s.key("targets"), "linear, quintic"));
  const std::size_t points = c.get_size(s.key("points"), 21);
  const double lo = c.get_double(s.key("grid_lo"), -2.0);
  const double hi = c.get_double(s.key("grid_hi"), 2.0);
  const std::size_t count = c.get_size(s.key("grid_points"), 41);
  const double C = c.get_double(s.key("C"), 1.25);
  dist::McSpec mc{c.get_size(s.key("mc_samples"), 100000), s.seed};
  s.seal();
  require(count >= 2 && hi > lo, "truncated: grid needs two or more points on a nonempty range");

  Csv sweep(s.path("trunc_sweep.csv"),
            "alpha,target,estimate,truncated_mse,full_mse,ratio,forward_coefficient,forward_ok,reverse_ok");
  Csv reports(s.path("transfer_reports.csv"), "alpha,target,estimate,direction," + transfer::TransferReport::csv_header());
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    for (const auto& target : targets) {
      const auto inst = alpha_instance(target, alphas[a], points);
      std::ofstream inst_out(s.path("instance_" + target + "_" + std::to_string(a) + ".csv"), std::ios::binary);
      trunc::write_instance(inst_out, inst);
      double worst = 0.0;
      for (std::size_t g = 0; g < count; ++g) {
        const double est = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(count - 1);
        const auto rep = trunc::truncated_transfer_check([est](const Vector&) { return est; }, inst, C, mc);
        sweep.row(rep.alpha, target, est, rep.reverse.lhs.value, rep.forward.lhs.value,
                  rep.ratio, rep.forward.coefficient.value, rep.forward.satisfied, rep.reverse.satisfied);
        reports.row(rep.alpha, target, est, "forward", rep.forward.csv_row());
        reports.row(rep.alpha, target, est, "reverse", rep.reverse.csv_row());
        worst = std::max(worst, rep.ratio);
      }
      s.log << "alpha " << alphas[a] << ", " << target << ": max full/truncated " << worst << '\n';
    }
  }
}

void run_boolean(Session& s) {
  auto& c = s.cfg;
  const std::size_t n = c.get_size(s.key("n"), 10);
  const auto degrees = c.get_sizes(s.key("degrees"), {1, 2, 3});
  const std::size_t per_degree = c.get_size(s.key("per_degree"), 5);
  const double c_gap = c.get_double(s.key("c_gap"), 1.0);
  s.seal();
  require(n >= 2 && n <= boolean::kMaxDim, "boolean-transfer: n out of range");

  Csv csv(s.path("boolean_transfer.csv"),
          "family,n,d,seed,tau,q_mass,gap,hypothesis_holds,ep,ep2,eq,eq2,bound,bound_observed,status");
  const auto emit = [&](const std::string& family, std::size_t d, std::uint64_t seed, const boolean::BooleanReport& r) {
    csv.row(family, n, d, seed, r.tau, r.q_mass, r.gap, r.hypothesis_holds, r.moments.ep, r.moments.ep2, r.moments.eq,
            r.moments.eq2, r.bound, r.bound_observed, r.status());
    s.log << family << " (d " << d << ", seed " << seed << "): " << r.status() << '\n';
  };

  const auto seen = boolean::SeenSet::frozen(n, 0, -1);
  const auto dictator = boolean::BooleanFn::from_function(n, [](const std::vector<int>& x) { return x[0] + 1.0; });
  emit("dictator", 1, 0, boolean::boolean_transfer_report(dictator, seen, c_gap, boolean::default_k(1)));
  std::ofstream sparse(s.path("dictator.sparse"), std::ios::binary);
  boolean::write_sparse(sparse, boolean::fourier_transform(dictator));

  for (std::size_t d : degrees) {
    require(d >= 1 && d <= n, "boolean-transfer: degrees must lie in [1, n]");
    for (std::size_t j = 0; j < per_degree; ++j) {
      const std::uint64_t seed = s.seed + 1000 * d + j;
      Rng rng(seed);
      boolean::Fourier coeffs;
      for (boolean::Mask m = 0; m < (boolean::Mask{1} << n); ++m)
        if (static_cast<std::size_t>(std::popcount(m)) <= d) coeffs[m] = rng.normal();
      const auto f = boolean::normalize_variance(boolean::BooleanFn::from_fourier(n, std::move(coeffs))).f;
      emit("random", d, seed, boolean::boolean_transfer_report(f, seen, c_gap, boolean::default_k(d)));
    }
  }
}

void run_gotu(Session& s) {
  auto& c = s.cfg;
  const std::size_t n = c.get_size(s.key("n"), 50);
  const std::size_t L = c.get_size(s.key("L"), 2);
  const double alpha = c.get_double(s.key("alpha"), 0.05);
  const std::size_t k = c.get_size(s.key("k"), 0);
  const double eps = c.get_double(s.key("eps"), 0.1);
  gotu::FlowOptions flow;
  flow.step = c.get_double(s.key("step"), 1e-2);
  flow.T = c.get_double(s.key("T"), 200.0);
  flow.record_every = c.get_size(s.key("record_every"), 10);
  flow.c0 = c.get_double(s.key("c0"), 0.25);
  const auto ns = c.get_sizes(s.key("scaling_n"), {25, 50, 100, 200});
  const std::size_t seeds = c.get_size(s.key("scaling_seeds"), 10);
  gotu::FlowOptions scaling = flow;
  scaling.T = c.get_double(s.key("scaling_T"), 50.0);
  scaling.record_every = c.get_size(s.key("scaling_record_every"), 1);
  s.seal();

  const auto dictator = gotu::LinearTarget::dictator(n, k);
  const auto amax = gotu::alpha_max(L, eps, dictator, k);
  s.log << "alpha_max " << amax.value << (amax.fallback ? " (depth 2 fallback)" : "") << '\n';
  if (alpha > amax.value) s.log << "warning: alpha " << alpha << " exceeds alpha_max\n";
  const auto trace = gotu::gradient_flow(gotu::init_weights(n, L, alpha, s.seed), dictator, k, flow);
  {
    std::ofstream out(s.path("trace.csv"), std::ios::binary);
    gotu::write_trace_csv(out, trace);
  }
  s.log << "dictator target: final L_S " << trace.rows.back().seen_loss << ", L " << trace.rows.back().full_loss << '\n';

  Csv summary(s.path("summary.csv"), "n,L,alpha,seed,t_star,max_ratio_before");
  Csv medians(s.path("scaling.csv"), "n,log_n,median_t_star");
  std::vector<double> log_n, med;
  for (std::size_t m : ns) {
    std::vector<double> stars;
    for (std::size_t j = 0; j < seeds; ++j) {
      const auto run = gotu_critical(m, L, alpha, s.seed + j, scaling);
      const double t = run.t_star ? *run.t_star : std::nan("");
      summary.row(m, L, alpha, s.seed + j, t, run.max_ratio_before);
      if (run.t_star) stars.push_back(t);
      if (m == n && j == 0) {
        std::ofstream out(s.path("critical_trace.csv"), std::ios::binary);
        gotu::write_trace_csv(out, run.trace);
      }
    }
    const double md = stars.empty() ? std::nan("") : median(stars);
    medians.row(m, std::log(static_cast<double>(m)), md);
    if (!stars.empty()) {
      log_n.push_back(std::log(static_cast<double>(m)));
      med.push_back(md);
    }
  }
  if (log_n.size() >= 2) s.log << "t_star slope vs log n: " << fitted_slope(log_n, med) << '\n';
}

void run_icl(Session& s) {
  auto& c = s.cfg;
  const std::size_t n = c.get_size(s.key("n"), 1);
  const std::size_t N = c.get_size(s.key("N"), 20);
  icl::TrainOptions t;
  t.steps = c.get_size(s.key("steps"), t.steps);
  t.learning_rate = c.get_double(s.key("learning_rate"), t.learning_rate);
  t.batch = c.get_size(s.key("batch"), t.batch);
  t.init_scale = c.get_double(s.key("init_scale"), t.init_scale);
  t.seed = s.seed;
  const auto mus = c.get_doubles(s.key("mus"), {1.0, 2.0, 4.0, 8.0});
  const auto kinds = split_names(c.get_string(s.key("kinds"), "task, query, covariate"));
  const double C = c.get_double(s.key("C"), 1.0);
  const double exponent = c.get_double(s.key("c"), 10.0);
  const dist::McSpec mc{c.get_size(s.key("mc_samples"), 20000), s.seed + 17};
  s.seal();

  const auto setup = icl::gaussian_setup(n, N);
  const auto trained = icl::train_lsa(setup, t);
  {
    Csv trace(s.path("training_trace.csv"), "step,loss,grad_norm");
    for (const auto& r : trained.trace) trace.row(r.step, r.loss, r.grad_norm);
  }
  const auto loss = icl::population_loss(setup, trained.params, mc);
  const double band = 3.0 * static_cast<double>(n + 1) / static_cast<double>(N) * static_cast<double>(n);
  {
    Csv summary(s.path("summary.csv"), "trained_loss,trained_loss_se,band_upper");
    summary.row(loss.value, loss.stderr_, band);
  }
  s.log << "trained population loss " << loss.value << " (band upper " << band << ")\n";

  Csv shift(s.path("shift.csv"), "kind,mu,source_loss,source_se,target_loss,target_se,ratio,coefficient");
  Csv reports(s.path("transfer_reports.csv"), "shift_kind,mu," + transfer::TransferReport::csv_header());
  for (const auto& name : kinds) {
    const auto kind = icl::parse_shift_kind(name);
    for (double mu : mus) {
      const auto row = icl_shift(trained.params, n, N, kind, mu, C, exponent, mc);
      const auto& r = row.report;
      shift.row(name, mu, r.source_loss.value, r.source_loss.stderr_, r.target_loss.value, r.target_loss.stderr_, r.ratio,
                r.coefficient ? r.coefficient->value : std::nan(""));
      reports.row(name, mu, r.report.csv_row());
    }
  }
}

void run_ensemble(Session& s) {
  auto& c = s.cfg;
  const std::size_t count = c.get_size(s.key("count"), 1000);
  const auto degrees = c.get_sizes(s.key("degrees"), {1, 2, 3});
  const double p_lo = c.get_double(s.key("p_lo"), 0.0), p_hi = c.get_double(s.key("p_hi"), 1.0);
  const double q_lo = c.get_double(s.key("q_lo"), 0.0), q_hi = c.get_double(s.key("q_hi"), 3.0);
  const double C = c.get_double(s.key("C"), 1.0);
  const auto gauss_mus = c.get_doubles(s.key("gaussian_mus"), {0.5, 1.0, 2.0});
  const std::size_t gauss_polys = c.get_size(s.key("gaussian_polys"), 5);
  const dist::McSpec mc{c.get_size(s.key("mc_samples"), 100000), s.seed + 5};
  s.seal();

  const auto P = dist::Density::uniform1d(p_lo, p_hi);
  const auto Q = dist::Density::uniform1d(q_lo, q_hi);
  const double ratio_pq = dist::density_ratio_sup(P, Q).value;
  Csv all(s.path("ensemble_ratios.csv"), "d,index,root_ratio");
  Csv summary(s.path("ensemble.csv"), "d,count,max_root_ratio,median_root_ratio,sup_p_over_q,cor_root_coefficient");
  for (std::size_t d : degrees) {
    const auto roots = ensemble_root_ratios(d, count, s.seed, p_lo, p_hi, q_lo, q_hi);
    for (std::size_t i = 0; i < roots.size(); ++i) all.row(d, i, roots[i]);
    const double worst = *std::max_element(roots.begin(), roots.end());
    const auto coef = transfer::cor_logconcave_coefficient(d, ratio_pq, C);
    summary.row(d, count, worst, median(roots), ratio_pq, std::pow(coef.value, 1.0 / static_cast<double>(d)));
    s.log << "d " << d << ": max (E_Q|f| / E_P|f|)^{1/d} = " << worst << '\n';
  }

  Csv reports(s.path("transfer_reports.csv"), "setting,index," + transfer::TransferReport::csv_header());
  const auto base = dist::Density::gaussian1d(0.0, 1.0);
  for (std::size_t j = 0; j < gauss_polys; ++j) {
    for (std::size_t d : degrees) {
      const auto f = transfer::random_polynomial(1, d, s.seed + 7919 * j + d);
      const auto r = transfer::verify_transfer(f, P, Q, std::nullopt, d, transfer::HolderPair::sup_norm(), C, mc);
      reports.row("uniform", j, r.csv_row());
      for (double mu : gauss_mus) {
        const auto shifted = dist::Density::gaussian1d(mu, 1.0);
        const auto g = transfer::verify_transfer(f, base, shifted, dist::bridge_gaussian1d(mu), d,
                                                 transfer::HolderPair::sup_norm(), C, mc);
        reports.row("gaussian-mu-" + config::format_double(mu), j, g.csv_row());
      }
    }
  }
}

}  // namespace

const std::vector<Experiment>& catalog() {
  static const std::vector<Experiment> experiments = {
      {"fig1", "degree-20 polynomial vs ReLU network extrapolating sin(2 pi x) sin(2 pi y) from [0,1]x[-1,1]",
       [](Session& s) { run_fig(s, 1); }},
      {"fig2", "as fig1 with target + xy on [-1/2,1/2]^2, adding the 3x^2 - 2x^3 network",
       [](Session& s) { run_fig(s, 2); }},
      {"gaussian1d-coeffs", "direct density-ratio vs bridge coefficient for N(0,1) -> N(mu,1)", run_gaussian1d},
      {"truncated", "full vs truncated MSE of constant estimates across retained mass alpha", run_truncated},
      {"boolean-transfer", "hypercube transfer reports: dictator and random low-degree functions", run_boolean},
      {"gotu", "diagonal linear network gradient flow on a half cube; t_star scaling in n", run_gotu},
      {"icl-shift", "trained linear attention under task, query and covariate shift", run_icl},
      {"transfer-ensemble", "random polynomial ensembles against the transfer coefficients", run_ensemble},
  };
  return experiments;
}

fs::path output_root() {
  const char* env = std::getenv("POLYTRANSFER_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("results");
}

fs::path run(config::Config& cfg, std::ostream& log, const fs::path& root) {
  const std::string name = cfg.require_string("experiment");
  const auto& all = catalog();
  const auto it = std::find_if(all.begin(), all.end(), [&](const Experiment& e) { return e.name == name; });
  if (it == all.end()) {
    std::string names;
    for (const auto& e : all) names += (names.empty() ? "" : ", ") + e.name;
    throw InvalidArgument("unknown experiment '" + name + "' (available: " + names + ")");
  }
  const std::uint64_t seed = cfg.get_seed("seed", 0);
  const std::string out = cfg.get_string("output_dir", name);
  Session session(cfg, name, root / out, log);
  session.seed = seed;
  it->run(session);
  return session.dir();
}

}  // namespace polytransfer::experiments

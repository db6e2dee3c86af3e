#include "polytransfer/dist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "polytransfer/error.hpp"
#include "polytransfer/kernels.hpp"

namespace polytransfer::dist {

namespace {

std::string fmt_vec(const Vector& v) {
  std::ostringstream out;
  out << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    out << v[i];
  }
  out << ']';
  return out.str();
}

Gaussian make_gaussian(Vector mean, Matrix cov) {
  const auto n = mean.size();
  require(n >= 1, "Gaussian: dimension must be positive");
  if (cov.rows() != n || cov.cols() != n)
    throw DimensionMismatch("Gaussian: covariance shape does not match the mean");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument("Gaussian: covariance is not symmetric");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw InvalidArgument("Gaussian: covariance is not positive definite");
  Matrix chol = llt.matrixL();
  double log_det_half = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(chol(i, i) > 0.0)) throw InvalidArgument("Gaussian: covariance is not positive definite");
    log_det_half += std::log(chol(i, i));
  }
  const double log_norm = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - log_det_half;
  return Gaussian{std::move(mean), std::move(cov), std::move(chol), log_norm};
}

double gaussian_log_pdf(const Gaussian& g, const Vector& x) {
  const Vector z = g.chol.triangularView<Eigen::Lower>().solve(x - g.mean);
  return g.log_norm - 0.5 * z.squaredNorm();
}

Vector gaussian_draw(const Gaussian& g, Rng& rng) {
  Vector z(g.mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return g.mean + g.chol * z;
}

double uniform_log_pdf(const UniformBox& u, const Vector& x) {
  double log_vol = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < u.lo[i] || x[i] > u.hi[i]) return -kInf;
    log_vol += std::log(u.hi[i] - u.lo[i]);
  }
  return -log_vol;
}

bool is_one_dim_intervals(const TruncationSet& set) {
  return set.kind() == TruncationSet::Kind::IntervalUnion ||
         (set.kind() == TruncationSet::Kind::Box && set.lo().size() == 1);
}

std::vector<Interval> as_intervals(const TruncationSet& set) {
  if (set.kind() == TruncationSet::Kind::Box) return {{set.lo()[0], set.hi()[0]}};
  return set.pieces();
}

// Point in [a, b] (standardized) splitting the piece's normal mass in
// proportion t : 1 - t, accurate in either tail.
double normal_piece_inverse(double a, double b, double t) {
  double x;
  if (a >= 0.0) {
    const double sa = normal_sf(a), sb = normal_sf(b);
    const double target = sa - t * (sa - sb);
    x = target > 0.0 ? normal_isf(std::min(target, 1.0 - 1e-300)) : b;
  } else if (b <= 0.0) {
    const double ca = normal_cdf(a), cb = normal_cdf(b);
    const double target = ca + t * (cb - ca);
    x = target > 0.0 ? normal_quantile(std::min(target, 1.0 - 1e-16)) : a;
  } else {
    const double ca = normal_cdf(a), cb = normal_cdf(b);
    const double target = ca + t * (cb - ca);
    x = normal_quantile(std::clamp(target, 1e-300, 1.0 - 1e-16));
  }
  return std::clamp(x, a, b);
}

double truncated_inverse_cdf(const Gaussian& base, const std::vector<Interval>& pieces, double u) {
  const double m = base.mean[0];
  const double s = std::sqrt(base.cov(0, 0));
  std::vector<double> masses;
  double total = 0.0;
  for (const auto& piece : pieces) {
    masses.push_back(normal_interval_mass((piece.lo - m) / s, (piece.hi - m) / s));
    total += masses.back();
  }
  if (!(total > 0.0)) throw NumericalFailure("truncated Gaussian: set has zero mass");
  double target = u * total;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (target <= masses[k] || k + 1 == pieces.size()) {
      const double t = masses[k] > 0.0 ? std::clamp(target / masses[k], 0.0, 1.0) : 0.5;
      return m + s * normal_piece_inverse((pieces[k].lo - m) / s, (pieces[k].hi - m) / s, t);
    }
    target -= masses[k];
  }
  return m;
}

constexpr std::uint64_t kRejectionBudget = 50'000'000;

Vector truncated_draw(const TruncatedGaussian& t, Rng& rng) {
  const bool inverse_ok = t.base.mean.size() == 1 && is_one_dim_intervals(t.set);
  if (inverse_ok && t.mass.value < 1e-3) {
    Vector x(1);
    x[0] = truncated_inverse_cdf(t.base, as_intervals(t.set), rng.uniform_open());
    return x;
  }
  if (t.mass.value < 1e-6)
    throw NumericalFailure("truncated Gaussian: acceptance rate " + std::to_string(t.mass.value) +
                           " is below 1e-6 and no inverse-CDF path exists for " + t.set.describe());
  for (std::uint64_t attempt = 0; attempt < kRejectionBudget; ++attempt) {
    Vector x = gaussian_draw(t.base, rng);
    if (t.set.contains(x)) return x;
  }
  throw NumericalFailure("truncated Gaussian: rejection budget exhausted");
}

double one_dim_cdf(const Density& d, double x);

Vector bridge_draw(const ShiftBridge& b, std::size_t dim, Rng& rng) {
  const double u = rng.uniform() * b.normalizer;
  const double middle_mass = b.gamma * b.marginal_at_zero;
  Vector y(dim);
  const auto* gauss = std::get_if<Gaussian>(&b.base->kind());
  const auto* prod = std::get_if<Product>(&b.base->kind());
  const bool left = u < b.mass_left;
  const bool middle = !left && u < b.mass_left + middle_mass;
  if (middle) {
    y[0] = b.gamma * rng.uniform();
    if (dim > 1) {
      if (gauss) {
        Vector z(dim - 1);
        for (std::size_t i = 0; i + 1 < dim; ++i) z[static_cast<Eigen::Index>(i)] = rng.normal();
        y.tail(dim - 1) = b.cond_mean + b.cond_chol * z;
      } else {
        for (std::size_t i = 1; i < dim; ++i) y[static_cast<Eigen::Index>(i)] = prod->factors[i].draw(rng)[0];
      }
    }
  } else if (gauss) {
    // Zero-mean Gaussian bases are symmetric under y -> -y.
    y = gaussian_draw(*gauss, rng);
    const bool want_negative = left;
    if ((y[0] < 0.0) != want_negative) y = -y;
    if (!left) y[0] += b.gamma;
  } else {
    const Density& first = prod->factors[0];
    const double f0 = b.mass_left;
    const double p = rng.uniform_open();
    y[0] = left ? first.quantile(p * f0) : first.quantile(f0 + p * (1.0 - f0)) + b.gamma;
    for (std::size_t i = 1; i < dim; ++i) y[static_cast<Eigen::Index>(i)] = prod->factors[i].draw(rng)[0];
  }
  if (b.rotated) return b.rotation.transpose() * y;
  return y;
}

double bridge_log_pdf(const ShiftBridge& b, const Vector& x) {
  Vector y = b.rotated ? Vector(b.rotation * x) : x;
  if (y[0] >= b.gamma) {
    y[0] -= b.gamma;
  } else if (y[0] > 0.0) {
    y[0] = 0.0;
  }
  return b.base->log_pdf(y) - std::log(b.normalizer);
}

double bridge_cdf_unrotated(const ShiftBridge& b, double y) {
  const double left = b.base->cdf(std::min(y, 0.0));
  const double middle = b.marginal_at_zero * std::clamp(y, 0.0, b.gamma);
  const double right = y > b.gamma ? b.base->cdf(y - b.gamma) - b.base->cdf(0.0) : 0.0;
  return (left + middle + right) / b.normalizer;
}

double one_dim_cdf(const Density& d, double x) {
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return normal_cdf((x - k.mean[0]) / std::sqrt(k.cov(0, 0)));
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          return std::clamp((x - k.lo[0]) / (k.hi[0] - k.lo[0]), 0.0, 1.0);
        } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
          require(is_one_dim_intervals(k.set), "cdf: truncation set must be an interval union");
          const double m = k.base.mean[0];
          const double s = std::sqrt(k.base.cov(0, 0));
          double below = 0.0, total = 0.0;
          for (const auto& piece : as_intervals(k.set)) {
            total += normal_interval_mass((piece.lo - m) / s, (piece.hi - m) / s);
            below += normal_interval_mass((piece.lo - m) / s, (std::min(piece.hi, x) - m) / s);
          }
          return below / total;
        } else if constexpr (std::is_same_v<T, ShiftBridge>) {
          const double sign = k.rotated ? k.rotation(0, 0) : 1.0;
          if (sign > 0.0) return bridge_cdf_unrotated(k, x);
          return 1.0 - bridge_cdf_unrotated(k, -x);
        } else {
          return k.factors.at(0).cdf(x);
        }
      },
      d.kind());
}

ShiftBridge base_bridge(BridgeKind kind, std::shared_ptr<const Density> base, double gamma) {
  ShiftBridge b;
  b.kind = kind;
  b.gamma = gamma;
  b.base = std::move(base);
  b.rotation = Matrix::Identity(static_cast<Eigen::Index>(b.base->dim()), static_cast<Eigen::Index>(b.base->dim()));
  return b;
}

void set_gaussian_conditional(ShiftBridge& b, const Matrix& cov) {
  const auto n = cov.rows();
  b.marginal_at_zero = 1.0 / std::sqrt(2.0 * std::numbers::pi * cov(0, 0));
  b.mass_left = 0.5;
  if (n > 1) {
    const Matrix schur =
        cov.bottomRightCorner(n - 1, n - 1) - cov.bottomLeftCorner(n - 1, 1) * cov.topRightCorner(1, n - 1) / cov(0, 0);
    b.cond_mean = Vector::Zero(n - 1);
    b.cond_chol = Eigen::LLT<Matrix>(schur).matrixL();
  }
  b.normalizer = 1.0 + b.gamma * b.marginal_at_zero;
}

}  // namespace

Density make_bridge(ShiftBridge bridge, std::size_t dim) { return Density(dim, std::move(bridge)); }

// ---------------------------------------------------------------- TruncationSet

TruncationSet TruncationSet::halfspace(Vector normal, double offset) {
  require(normal.size() >= 1 && normal.norm() > 0.0, "halfspace: normal must be nonzero");
  TruncationSet s;
  s.kind_ = Kind::Halfspace;
  s.normal_ = std::move(normal);
  s.offset_ = offset;
  return s;
}

TruncationSet TruncationSet::intervals(std::vector<Interval> pieces) {
  require(!pieces.empty(), "interval union: need at least one interval");
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    require(pieces[i].lo < pieces[i].hi, "interval union: each interval needs lo < hi");
    if (i > 0) require(pieces[i - 1].hi < pieces[i].lo, "interval union: intervals must be ordered and disjoint");
  }
  TruncationSet s;
  s.kind_ = Kind::IntervalUnion;
  s.pieces_ = std::move(pieces);
  return s;
}

TruncationSet TruncationSet::box(Vector lo, Vector hi) {
  require_dim(static_cast<std::size_t>(hi.size()), static_cast<std::size_t>(lo.size()), "box");
  for (Eigen::Index i = 0; i < lo.size(); ++i) require(lo[i] < hi[i], "box: need lo < hi componentwise");
  TruncationSet s;
  s.kind_ = Kind::Box;
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

TruncationSet TruncationSet::frozen_coordinate(std::size_t index, double value) {
  TruncationSet s;
  s.kind_ = Kind::FrozenCoordinate;
  s.index_ = index;
  s.offset_ = value;
  return s;
}

std::size_t TruncationSet::dim() const {
  switch (kind_) {
    case Kind::Halfspace: return static_cast<std::size_t>(normal_.size());
    case Kind::IntervalUnion: return 1;
    case Kind::Box: return static_cast<std::size_t>(lo_.size());
    case Kind::FrozenCoordinate: return 0;
  }
  return 0;
}

bool TruncationSet::contains(const Vector& x) const {
  switch (kind_) {
    case Kind::Halfspace:
      require_dim(static_cast<std::size_t>(x.size()), dim(), "halfspace membership");
      return normal_.dot(x) >= offset_;
    case Kind::IntervalUnion:
      require_dim(static_cast<std::size_t>(x.size()), 1, "interval membership");
      for (const auto& piece : pieces_)
        if (x[0] >= piece.lo && x[0] <= piece.hi) return true;
      return false;
    case Kind::Box:
      require_dim(static_cast<std::size_t>(x.size()), dim(), "box membership");
      for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] < lo_[i] || x[i] > hi_[i]) return false;
      return true;
    case Kind::FrozenCoordinate:
      require(index_ < static_cast<std::size_t>(x.size()), "frozen coordinate index out of range");
      return x[static_cast<Eigen::Index>(index_)] == offset_;
  }
  return false;
}

std::string TruncationSet::describe() const {
  std::ostringstream out;
  switch (kind_) {
    case Kind::Halfspace: out << "halfspace(" << fmt_vec(normal_) << ".x>=" << offset_ << ')'; break;
    case Kind::IntervalUnion:
      for (std::size_t i = 0; i < pieces_.size(); ++i)
        out << (i ? "u" : "") << '[' << pieces_[i].lo << ',' << pieces_[i].hi << ']';
      break;
    case Kind::Box: out << "box(" << fmt_vec(lo_) << ',' << fmt_vec(hi_) << ')'; break;
    case Kind::FrozenCoordinate: out << "x" << index_ + 1 << '=' << offset_; break;
  }
  return out.str();
}

// ---------------------------------------------------------------- Density

Density Density::gaussian(Vector mean, Matrix cov) {
  const auto n = static_cast<std::size_t>(mean.size());
  return Density(n, make_gaussian(std::move(mean), std::move(cov)));
}

Density Density::standard_normal(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return gaussian(Vector::Zero(n), Matrix::Identity(n, n));
}

Density Density::gaussian1d(double mean, double variance) {
  return gaussian(Vector::Constant(1, mean), Matrix::Constant(1, 1, variance));
}

Density Density::uniform_box(Vector lo, Vector hi) {
  require(lo.size() >= 1, "uniform box: dimension must be positive");
  require_dim(static_cast<std::size_t>(hi.size()), static_cast<std::size_t>(lo.size()), "uniform box");
  for (Eigen::Index i = 0; i < lo.size(); ++i) require(lo[i] < hi[i], "uniform box: need lo < hi componentwise");
  const auto n = static_cast<std::size_t>(lo.size());
  return Density(n, UniformBox{std::move(lo), std::move(hi)});
}

Density Density::uniform1d(double lo, double hi) {
  return uniform_box(Vector::Constant(1, lo), Vector::Constant(1, hi));
}

Density Density::truncated_gaussian(Vector mean, Matrix cov, TruncationSet set, McSpec mc) {
  Gaussian base = make_gaussian(std::move(mean), std::move(cov));
  const MassEstimate mass = gaussian_mass(base.mean, base.cov, set, mc);
  if (!(mass.value > 0.0)) throw NumericalFailure("truncated Gaussian: set " + set.describe() + " has zero mass");
  const auto n = static_cast<std::size_t>(base.mean.size());
  return Density(n, TruncatedGaussian{std::move(base), std::move(set), {mass.value, mass.stderr_}});
}

Density Density::product(std::vector<Density> factors) {
  require(!factors.empty(), "product: need at least one factor");
  for (const auto& f : factors) require(f.dim() == 1, "product: factors must be one-dimensional");
  const std::size_t n = factors.size();
  return Density(n, Product{std::move(factors)});
}

std::string Density::name() const {
  std::ostringstream out;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          out << "N(" << fmt_vec(k.mean) << ",diag" << fmt_vec(k.cov.diagonal()) << ')';
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          out << "U(" << fmt_vec(k.lo) << ',' << fmt_vec(k.hi) << ')';
        } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
          out << "TN(" << fmt_vec(k.base.mean) << ';' << k.set.describe() << ')';
        } else if constexpr (std::is_same_v<T, ShiftBridge>) {
          switch (k.kind) {
            case BridgeKind::Gaussian1D: out << "Bridge1D(mu=" << k.gamma * (k.rotated ? k.rotation(0, 0) : 1.0) << ')'; break;
            case BridgeKind::GaussianND: out << "BridgeND(|mu|=" << k.gamma << ')'; break;
            case BridgeKind::GaussianGeneralCov: out << "BridgeCov(gamma=" << k.gamma << ')'; break;
            case BridgeKind::TranslatedProduct: out << "BridgeProduct(gamma=" << k.gamma << ')'; break;
          }
        } else {
          out << "Product(";
          for (std::size_t i = 0; i < k.factors.size(); ++i) out << (i ? "," : "") << k.factors[i].name();
          out << ')';
        }
      },
      kind_);
  return out.str();
}

double Density::log_pdf(const Vector& x) const {
  require_dim(static_cast<std::size_t>(x.size()), dim_, "pdf");
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return gaussian_log_pdf(k, x);
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          return uniform_log_pdf(k, x);
        } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
          if (!k.set.contains(x)) return -kInf;
          return gaussian_log_pdf(k.base, x) - std::log(k.mass.value);
        } else if constexpr (std::is_same_v<T, ShiftBridge>) {
          return bridge_log_pdf(k, x);
        } else {
          double total = 0.0;
          for (std::size_t i = 0; i < k.factors.size(); ++i)
            total += k.factors[i].log_pdf(Vector::Constant(1, x[static_cast<Eigen::Index>(i)]));
          return total;
        }
      },
      kind_);
}

double Density::pdf(const Vector& x) const {
  const double lp = log_pdf(x);
  return lp == -kInf ? 0.0 : std::exp(lp);
}

bool Density::is_log_concave() const {
  return std::visit(
      [](const auto& k) -> bool {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Gaussian> || std::is_same_v<T, UniformBox>) {
          return true;
        } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
          switch (k.set.kind()) {
            case TruncationSet::Kind::Halfspace:
            case TruncationSet::Kind::Box: return true;
            case TruncationSet::Kind::IntervalUnion: return k.set.pieces().size() == 1;
            case TruncationSet::Kind::FrozenCoordinate: return false;
          }
          return false;
        } else if constexpr (std::is_same_v<T, ShiftBridge>) {
          return k.log_concave && k.base->is_log_concave();
        } else {
          return std::all_of(k.factors.begin(), k.factors.end(), [](const Density& f) { return f.is_log_concave(); });
        }
      },
      kind_);
}

std::pair<Vector, Vector> Density::bounding_box(double width) const {
  return std::visit(
      [&](const auto& k) -> std::pair<Vector, Vector> {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          const Vector sd = k.cov.diagonal().cwiseSqrt();
          return {k.mean - width * sd, k.mean + width * sd};
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          return {k.lo, k.hi};
        } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
          const Vector sd = k.base.cov.diagonal().cwiseSqrt();
          Vector lo = k.base.mean - width * sd, hi = k.base.mean + width * sd;
          if (is_one_dim_intervals(k.set)) {
            const auto pieces = as_intervals(k.set);
            const double a = pieces.front().lo, b = pieces.back().hi;
            if (a > hi[0]) {
              lo[0] = a;
              hi[0] = a + width * sd[0];
            } else if (b < lo[0]) {
              hi[0] = b;
              lo[0] = b - width * sd[0];
            } else {
              lo[0] = std::max(lo[0], a);
              hi[0] = std::min(hi[0], b);
            }
          } else if (k.set.kind() == TruncationSet::Kind::Box) {
            for (Eigen::Index i = 0; i < lo.size(); ++i) {
              const double l = std::max(lo[i], k.set.lo()[i]), h = std::min(hi[i], k.set.hi()[i]);
              if (l < h) {
                lo[i] = l;
                hi[i] = h;
              } else {
                lo[i] = k.set.lo()[i];
                hi[i] = k.set.hi()[i];
              }
            }
          }
          return {lo, hi};
        } else if constexpr (std::is_same_v<T, ShiftBridge>) {
          auto [blo, bhi] = k.base->bounding_box(width);
          bhi[0] += k.gamma;
          if (!k.rotated) return {blo, bhi};
          const Vector center = k.rotation.transpose() * (0.5 * (blo + bhi));
          const Vector half = k.rotation.transpose().cwiseAbs() * (0.5 * (bhi - blo));
          return {center - half, center + half};
        } else {
          Vector lo(static_cast<Eigen::Index>(k.factors.size())), hi(lo.size());
          for (std::size_t i = 0; i < k.factors.size(); ++i) {
            const auto [l, h] = k.factors[i].bounding_box(width);
            lo[static_cast<Eigen::Index>(i)] = l[0];
            hi[static_cast<Eigen::Index>(i)] = h[0];
          }
          return {lo, hi};
        }
      },
      kind_);
}

double Density::cdf(double x) const {
  require(dim_ == 1, "cdf: density must be one-dimensional");
  return one_dim_cdf(*this, x);
}

double Density::quantile(double p) const {
  require(dim_ == 1, "quantile: density must be one-dimensional");
  require(p > 0.0 && p < 1.0, "quantile: p must lie in (0, 1)");
  if (const auto* g = std::get_if<Gaussian>(&kind_)) return g->mean[0] + std::sqrt(g->cov(0, 0)) * normal_quantile(p);
  if (const auto* u = std::get_if<UniformBox>(&kind_)) return u->lo[0] + p * (u->hi[0] - u->lo[0]);
  if (const auto* t = std::get_if<TruncatedGaussian>(&kind_)) {
    require(is_one_dim_intervals(t->set), "quantile: truncation set must be an interval union");
    return truncated_inverse_cdf(t->base, as_intervals(t->set), p);
  }
  // Bisection on the bounding box for the remaining kinds.
  auto [lo_v, hi_v] = bounding_box(40.0);
  double lo = lo_v[0], hi = hi_v[0];
  for (int iter = 0; iter < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Vector Density::draw(Rng& rng) const {
  return std::visit(
      [&](const auto& k) -> Vector {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return gaussian_draw(k, rng);
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          Vector x(k.lo.size());
          for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(k.lo[i], k.hi[i]);
          return x;
        } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
          return truncated_draw(k, rng);
        } else if constexpr (std::is_same_v<T, ShiftBridge>) {
          return bridge_draw(k, dim_, rng);
        } else {
          Vector x(static_cast<Eigen::Index>(k.factors.size()));
          for (std::size_t i = 0; i < k.factors.size(); ++i) x[static_cast<Eigen::Index>(i)] = k.factors[i].draw(rng)[0];
          return x;
        }
      },
      kind_);
}

double Density::normalizer() const {
  if (const auto* b = std::get_if<ShiftBridge>(&kind_)) return b->normalizer;
  return 1.0;
}

double pdf(const Density& d, const Vector& x) { return d.pdf(x); }

std::vector<Vector> sample(const Density& d, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "sample: need n >= 1");
  if (const auto* t = std::get_if<TruncatedGaussian>(&d.kind())) {
    const bool inverse_ok = d.dim() == 1 && is_one_dim_intervals(t->set);
    if (!inverse_ok && t->mass.value < 1e-6)
      throw NumericalFailure("sample: acceptance rate below 1e-6 for truncation set " + t->set.describe());
  }
  const Rng root(seed);
  std::vector<Vector> out(n);
  std::string failure;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      Rng rng = root.child(static_cast<std::uint64_t>(i));
      out[static_cast<std::size_t>(i)] = d.draw(rng);
    } catch (const std::exception& e) {
#pragma omp critical
      failure = e.what();
    }
  }
  if (!failure.empty()) throw NumericalFailure(failure);
  return out;
}

// ---------------------------------------------------------------- ratio sups

namespace {

struct GridBest {
  double log_ratio = -kInf;
  std::size_t index = 0;
  bool infinite = false;
};

GridBest scan_grid(const Density& p, const Density& q, const Vector& lo, const Vector& hi, std::size_t per_axis) {
  const auto dim = static_cast<std::size_t>(lo.size());
  std::size_t total = 1;
  for (std::size_t i = 0; i < dim; ++i) total *= per_axis;
  const std::size_t chunks = kernels::chunk_count(total);
  std::vector<GridBest> parts(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    GridBest best;
    Vector x(static_cast<Eigen::Index>(dim));
    const std::size_t begin = static_cast<std::size_t>(c) * kernels::kChunk;
    const std::size_t end = std::min(total, begin + kernels::kChunk);
    for (std::size_t idx = begin; idx < end && !best.infinite; ++idx) {
      std::size_t rem = idx;
      for (std::size_t a = 0; a < dim; ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        const double t = static_cast<double>(rem % per_axis) / static_cast<double>(per_axis - 1);
        x[ai] = lo[ai] + t * (hi[ai] - lo[ai]);
        rem /= per_axis;
      }
      const double lp = p.log_pdf(x);
      if (lp == -kInf) continue;
      const double lq = q.log_pdf(x);
      if (lq == -kInf) {
        best = {kInf, idx, true};
        break;
      }
      if (lp - lq > best.log_ratio) best = {lp - lq, idx, false};
    }
    parts[static_cast<std::size_t>(c)] = best;
  }
  GridBest best;
  for (const auto& part : parts) {
    if (part.infinite) return part;
    if (part.log_ratio > best.log_ratio) best = part;
  }
  return best;
}

Vector grid_point(const Vector& lo, const Vector& hi, std::size_t per_axis, std::size_t idx) {
  Vector x(lo.size());
  for (Eigen::Index a = 0; a < lo.size(); ++a) {
    const double t = static_cast<double>(idx % per_axis) / static_cast<double>(per_axis - 1);
    x[a] = lo[a] + t * (hi[a] - lo[a]);
    idx /= per_axis;
  }
  return x;
}

std::size_t default_points(std::size_t dim) {
  switch (dim) {
    case 1: return 4001;
    case 2: return 401;
    case 3: return 81;
    default: return std::max<std::size_t>(5, static_cast<std::size_t>(std::pow(2e6, 1.0 / static_cast<double>(dim))));
  }
}

}  // namespace

RatioSup density_ratio_sup(const Density& p, const Density& q, const GridSpec& grid) {
  require_dim(q.dim(), p.dim(), "density_ratio_sup");
  RatioSup out;
  const auto* up = std::get_if<UniformBox>(&p.kind());
  const auto* uq = std::get_if<UniformBox>(&q.kind());
  if (up && uq) {
    out.closed_form = true;
    out.box_lo = up->lo.cwiseMin(uq->lo);
    out.box_hi = up->hi.cwiseMax(uq->hi);
    const bool inside = (up->lo.array() >= uq->lo.array()).all() && (up->hi.array() <= uq->hi.array()).all();
    out.argmax = 0.5 * (up->lo + up->hi);
    if (!inside) {
      out.infinite = true;
      out.value = kInf;
      for (Eigen::Index i = 0; i < up->lo.size(); ++i) {
        if (up->lo[i] < uq->lo[i]) out.argmax[i] = up->lo[i];
        else if (up->hi[i] > uq->hi[i]) out.argmax[i] = up->hi[i];
      }
      return out;
    }
    out.value = (uq->hi - uq->lo).prod() / (up->hi - up->lo).prod();
    return out;
  }

  Vector lo, hi;
  if (grid.box) {
    lo = grid.box->first;
    hi = grid.box->second;
    require_dim(static_cast<std::size_t>(lo.size()), p.dim(), "density_ratio_sup box");
  } else {
    const auto [plo, phi] = p.bounding_box(grid.width);
    const auto [qlo, qhi] = q.bounding_box(grid.width);
    lo = plo.cwiseMin(qlo);
    hi = phi.cwiseMax(qhi);
  }
  require((hi.array() > lo.array()).all(), "density_ratio_sup: empty grid");
  out.box_lo = lo;
  out.box_hi = hi;
  const std::size_t per_axis = grid.points_per_axis ? grid.points_per_axis : default_points(p.dim());
  require(per_axis >= 2, "density_ratio_sup: need at least two grid points per axis");

  GridBest best = scan_grid(p, q, lo, hi, per_axis);
  if (best.log_ratio == -kInf && !best.infinite) throw InvalidArgument("density_ratio_sup: P vanishes on the whole grid");
  out.argmax = grid_point(lo, hi, per_axis, best.index);
  if (best.infinite) {
    out.infinite = true;
    out.value = kInf;
    return out;
  }
  // One refinement pass: +/- one coarse cell around the argmax at 10x resolution.
  const Vector cell = (hi - lo) / static_cast<double>(per_axis - 1);
  const Vector rlo = (out.argmax - cell).cwiseMax(lo);
  const Vector rhi = (out.argmax + cell).cwiseMin(hi);
  if ((rhi.array() > rlo.array()).all()) {
    const GridBest fine = scan_grid(p, q, rlo, rhi, 21);
    if (fine.infinite) {
      out.infinite = true;
      out.value = kInf;
      out.argmax = grid_point(rlo, rhi, 21, fine.index);
      return out;
    }
    if (fine.log_ratio > best.log_ratio) {
      best = fine;
      out.argmax = grid_point(rlo, rhi, 21, fine.index);
    }
  }
  out.value = std::exp(best.log_ratio);
  return out;
}

Divergence renyi_divergence(const Density& p, const Density& q, double alpha, const McSpec& mc) {
  require_dim(q.dim(), p.dim(), "renyi_divergence");
  require(alpha >= 1.0, "renyi_divergence: alpha must be >= 1");
  Divergence out;
  if (std::isinf(alpha)) {
    const RatioSup sup = density_ratio_sup(p, q);
    out.value = sup.value;
    out.infinite = sup.infinite;
    return out;
  }
  require(mc.n_samples >= 1, "renyi_divergence: need at least one sample");
  const Rng root(mc.seed);
  const auto moments = kernels::parallel::sample_moments(mc.n_samples, [&](std::size_t i) {
    Rng rng = root.child(i);
    const Vector x = q.draw(rng);
    const double lp = p.log_pdf(x);
    if (lp == -kInf) return 0.0;
    return std::exp(alpha * (lp - q.log_pdf(x)));
  });
  const double mean = moments.mean();
  if (!std::isfinite(mean)) {
    out.value = kInf;
    out.infinite = true;
    return out;
  }
  out.value = std::pow(mean, 1.0 / alpha);
  out.stderr_ = mean > 0.0 ? moments.stderr_() * std::pow(mean, 1.0 / alpha - 1.0) / alpha : 0.0;
  return out;
}

MassEstimate gaussian_mass(const Vector& mean, const Matrix& cov, const TruncationSet& set, const McSpec& mc) {
  const Gaussian g = make_gaussian(mean, cov);
  const auto n = static_cast<std::size_t>(mean.size());
  if (set.dim() != 0) require_dim(set.dim(), n, "gaussian_mass");
  switch (set.kind()) {
    case TruncationSet::Kind::IntervalUnion: {
      const double m = mean[0], s = std::sqrt(cov(0, 0));
      double total = 0.0;
      for (const auto& piece : set.pieces()) total += normal_interval_mass((piece.lo - m) / s, (piece.hi - m) / s);
      return {total, 0.0, true};
    }
    case TruncationSet::Kind::Halfspace: {
      const double loc = set.normal().dot(mean);
      const double scale = std::sqrt(set.normal().dot(cov * set.normal()));
      return {normal_sf((set.offset() - loc) / scale), 0.0, true};
    }
    case TruncationSet::Kind::FrozenCoordinate:
      require(set.frozen_index() < n, "gaussian_mass: frozen coordinate out of range");
      return {0.0, 0.0, true};
    case TruncationSet::Kind::Box: {
      if (n == 1) {
        const double m = mean[0], s = std::sqrt(cov(0, 0));
        return {normal_interval_mass((set.lo()[0] - m) / s, (set.hi()[0] - m) / s), 0.0, true};
      }
      require(mc.n_samples >= 1, "gaussian_mass: need at least one sample");
      const Rng root(mc.seed);
      const auto moments = kernels::parallel::sample_moments(mc.n_samples, [&](std::size_t i) {
        Rng rng = root.child(i);
        return set.contains(gaussian_draw(g, rng)) ? 1.0 : 0.0;
      });
      return {moments.mean(), moments.stderr_(), false};
    }
  }
  return {};
}

// ---------------------------------------------------------------- bridges

Density bridge_gaussian1d(double mu) {
  if (mu == 0.0) return Density::standard_normal(1);
  ShiftBridge b = base_bridge(BridgeKind::Gaussian1D, std::make_shared<const Density>(Density::standard_normal(1)), std::abs(mu));
  if (mu < 0.0) {
    b.rotated = true;
    b.rotation(0, 0) = -1.0;
  }
  set_gaussian_conditional(b, Matrix::Identity(1, 1));
  return make_bridge(std::move(b), 1);
}

Density bridge_gaussian_nd(const Vector& mu) {
  require(mu.size() >= 1, "bridge_gaussian_nd: empty shift");
  const auto n = mu.size();
  const double gamma = mu.norm();
  if (gamma == 0.0) return Density::standard_normal(static_cast<std::size_t>(n));
  ShiftBridge b = base_bridge(BridgeKind::GaussianND,
                              std::make_shared<const Density>(Density::standard_normal(static_cast<std::size_t>(n))), gamma);
  // Householder reflection taking mu / |mu| to e1.
  Vector v = mu / gamma;
  v[0] -= 1.0;
  if (v.norm() > 1e-14) {
    b.rotation = Matrix::Identity(n, n) - 2.0 * v * v.transpose() / v.squaredNorm();
    b.rotated = true;
  }
  set_gaussian_conditional(b, Matrix::Identity(n, n));
  return make_bridge(std::move(b), static_cast<std::size_t>(n));
}

Density bridge_gaussian_general_cov(const Matrix& cov, double gamma) {
  require(gamma >= 0.0, "bridge_gaussian_general_cov: gamma must be nonnegative");
  const auto n = cov.rows();
  Density base = Density::gaussian(Vector::Zero(n), cov);
  if (gamma == 0.0) return base;
  ShiftBridge b = base_bridge(BridgeKind::GaussianGeneralCov, std::make_shared<const Density>(base), gamma);
  set_gaussian_conditional(b, cov);
  if (n > 1) {
    const Matrix precision = cov.inverse();
    const double coupling = precision.row(0).tail(n - 1).cwiseAbs().maxCoeff();
    b.log_concave = coupling <= 1e-12 * std::abs(precision(0, 0));
  }
  return make_bridge(std::move(b), static_cast<std::size_t>(n));
}

Density bridge_translated_product(std::vector<Density> factors, double gamma) {
  require(gamma >= 0.0, "bridge_translated_product: gamma must be nonnegative");
  Density base = Density::product(factors);
  for (const auto& f : factors) require(f.is_log_concave(), "bridge_translated_product: factors must be log-concave");
  const Density& first = factors.front();
  if (const auto* g = std::get_if<Gaussian>(&first.kind())) {
    require(g->mean[0] == 0.0, "bridge_translated_product: first factor must have its mode at 0");
  } else if (const auto* u = std::get_if<UniformBox>(&first.kind())) {
    require(u->lo[0] <= 0.0 && u->hi[0] >= 0.0, "bridge_translated_product: first factor must have its mode at 0");
  } else {
    throw InvalidArgument("bridge_translated_product: factors must be Gaussian or uniform");
  }
  if (gamma == 0.0) return base;
  const std::size_t n = factors.size();
  ShiftBridge b = base_bridge(BridgeKind::TranslatedProduct, std::make_shared<const Density>(std::move(base)), gamma);
  b.marginal_at_zero = first.pdf(Vector::Zero(1));
  b.mass_left = first.cdf(0.0);
  b.normalizer = 1.0 + gamma * b.marginal_at_zero;
  return make_bridge(std::move(b), n);
}

Density bridge_construct(BridgeRequest kind, const BridgeParams& params) {
  switch (kind) {
    case BridgeRequest::Gaussian1D: return bridge_gaussian1d(params.mu);
    case BridgeRequest::GaussianND: return bridge_gaussian_nd(params.mu_vec);
    case BridgeRequest::TranslatedProduct: return bridge_translated_product(params.factors, params.gamma);
    case BridgeRequest::GaussianGeneralCov: return bridge_gaussian_general_cov(params.cov, params.gamma);
  }
  throw InvalidArgument("bridge_construct: unsupported kind");
}

}  // namespace polytransfer::dist

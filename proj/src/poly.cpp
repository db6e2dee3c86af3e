#include "polytransfer/poly.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

#include "polytransfer/error.hpp"
#include "polytransfer/kernels.hpp"

namespace polytransfer::poly {

struct MultiPoly::Layout {
  std::vector<MultiIndex> indices;
  std::map<MultiIndex, std::size_t> position;
};

namespace {

void append_degree(std::size_t n, int remaining, MultiIndex& current, std::size_t var,
                   std::vector<MultiIndex>& out) {
  if (var + 1 == n) {
    current[var] = remaining;
    out.push_back(current);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    current[var] = e;
    append_degree(n, remaining - e, current, var + 1, out);
  }
}

std::shared_ptr<const MultiPoly::Layout> layout_for(std::size_t n, std::size_t d) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const MultiPoly::Layout>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{n, d}];
  if (!slot) {
    auto layout = std::make_shared<MultiPoly::Layout>();
    layout->indices = graded_lex(n, d);
    for (std::size_t i = 0; i < layout->indices.size(); ++i) layout->position[layout->indices[i]] = i;
    slot = std::move(layout);
  }
  return slot;
}

// Values of the orthonormal Legendre functions phi_0..phi_d at t.
void legendre_values(double t, std::size_t d, std::vector<double>& out) {
  out.assign(d + 1, 0.0);
  double p_prev = 1.0, p = t;
  out[0] = 1.0;
  if (d >= 1) out[1] = std::sqrt(3.0) * t;
  for (std::size_t k = 1; k < d; ++k) {
    const double kk = static_cast<double>(k);
    const double next = ((2.0 * kk + 1.0) * t * p - kk * p_prev) / (kk + 1.0);
    p_prev = p;
    p = next;
    out[k + 1] = std::sqrt(2.0 * kk + 3.0) * next;
  }
}

// Per-variable change of basis. Row k of the result expresses source basis
// function k in the target basis.
using Square = Eigen::MatrixXd;

// phi_j(t(x)) expanded in powers of x, t = (2x - lo - hi) / (hi - lo).
Square orthonormal_to_monomial(std::size_t d, double lo, double hi) {
  const double a = 2.0 / (hi - lo), b = -(hi + lo) / (hi - lo);
  Square legendre = Square::Zero(static_cast<Eigen::Index>(d + 1), static_cast<Eigen::Index>(d + 1));
  legendre(0, 0) = 1.0;
  if (d >= 1) {
    legendre(1, 0) = b;
    legendre(1, 1) = a;
  }
  for (std::size_t k = 1; k < d; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    const double kk = static_cast<double>(k);
    for (Eigen::Index m = 0; m <= ki + 1; ++m) {
      double t_times_pk = b * legendre(ki, m);
      if (m > 0) t_times_pk += a * legendre(ki, m - 1);
      legendre(ki + 1, m) = ((2.0 * kk + 1.0) * t_times_pk - kk * legendre(ki - 1, m)) / (kk + 1.0);
    }
  }
  for (std::size_t k = 0; k <= d; ++k)
    legendre.row(static_cast<Eigen::Index>(k)) *= std::sqrt(2.0 * static_cast<double>(k) + 1.0);
  return legendre;
}

// x^k projected on phi_j by exact Gauss-Legendre quadrature.
Square monomial_to_orthonormal(std::size_t d, double lo, double hi) {
  const auto& rule = gauss_legendre(d + 1);
  Square out = Square::Zero(static_cast<Eigen::Index>(d + 1), static_cast<Eigen::Index>(d + 1));
  std::vector<double> phi;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const double t = rule.nodes[q];
    const double x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
    legendre_values(t, d, phi);
    double xk = 1.0;
    for (std::size_t k = 0; k <= d; ++k) {
      for (std::size_t j = 0; j <= k; ++j)
        out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) += 0.5 * rule.weights[q] * xk * phi[j];
      xk *= x;
    }
  }
  return out;
}

std::vector<double> convert(const MultiPoly& src, const MultiPoly& dst, const std::vector<Square>& per_var) {
  const auto& from = src.indices();
  const auto& to = dst.indices();
  std::vector<double> out(to.size(), 0.0);
  for (std::size_t a = 0; a < from.size(); ++a) {
    const double c = src.coefficients()[a];
    if (c == 0.0) continue;
    for (std::size_t b = 0; b < to.size(); ++b) {
      double w = c;
      for (std::size_t v = 0; v < src.dim() && w != 0.0; ++v) {
        if (to[b][v] > from[a][v]) {
          w = 0.0;
          break;
        }
        w *= per_var[v](from[a][v], to[b][v]);
      }
      out[b] += w;
    }
  }
  return out;
}

}  // namespace

std::string to_string(Basis basis) { return basis == Basis::Monomial ? "monomial" : "box-orthonormal"; }

std::vector<MultiIndex> graded_lex(std::size_t n, std::size_t d) {
  require(n >= 1, "graded_lex: need at least one variable");
  std::vector<MultiIndex> out;
  MultiIndex current(n, 0);
  for (std::size_t total = 0; total <= d; ++total) append_degree(n, static_cast<int>(total), current, 0, out);
  return out;
}

MultiPoly::MultiPoly(std::size_t dim, std::size_t degree, Basis basis, std::optional<std::pair<Vector, Vector>> box)
    : dim_(dim), degree_(degree), basis_(basis), layout_(layout_for(dim, degree)) {
  coeffs_.assign(layout_->indices.size(), 0.0);
  if (basis == Basis::BoxOrthonormal) {
    require(box.has_value(), "MultiPoly: the box-orthonormal basis needs a box");
    lo_ = box->first;
    hi_ = box->second;
    check_box();
  }
}

const std::vector<MultiIndex>& MultiPoly::indices() const {
  static const std::vector<MultiIndex> empty;
  return layout_ ? layout_->indices : empty;
}

void MultiPoly::check_box() const {
  require_dim(static_cast<std::size_t>(lo_.size()), dim_, "MultiPoly box");
  require_dim(static_cast<std::size_t>(hi_.size()), dim_, "MultiPoly box");
  require((hi_.array() > lo_.array()).all(), "MultiPoly: box needs lo < hi componentwise");
}

std::size_t MultiPoly::position(const MultiIndex& alpha) const {
  require_dim(alpha.size(), dim_, "multi-index");
  const auto it = layout_->position.find(alpha);
  if (it == layout_->position.end()) throw InvalidArgument("multi-index exceeds the polynomial's degree");
  return it->second;
}

double MultiPoly::coefficient(const MultiIndex& alpha) const { return coeffs_[position(alpha)]; }

void MultiPoly::set_coefficient(const MultiIndex& alpha, double value) { coeffs_[position(alpha)] = value; }

bool MultiPoly::is_zero() const {
  return std::all_of(coeffs_.begin(), coeffs_.end(), [](double c) { return c == 0.0; });
}

Vector MultiPoly::features(const Vector& x) const {
  require_dim(static_cast<std::size_t>(x.size()), dim_, "polynomial evaluation");
  // table[v][k]: k-th basis function of variable v at x_v
  std::vector<std::vector<double>> table(dim_);
  for (std::size_t v = 0; v < dim_; ++v) {
    const auto vi = static_cast<Eigen::Index>(v);
    if (basis_ == Basis::Monomial) {
      table[v].assign(degree_ + 1, 1.0);
      for (std::size_t k = 1; k <= degree_; ++k) table[v][k] = table[v][k - 1] * x[vi];
    } else {
      const double t = (2.0 * x[vi] - lo_[vi] - hi_[vi]) / (hi_[vi] - lo_[vi]);
      legendre_values(t, degree_, table[v]);
    }
  }
  const auto& idx = indices();
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    double term = 1.0;
    for (std::size_t v = 0; v < dim_; ++v) term *= table[v][static_cast<std::size_t>(idx[i][v])];
    out[static_cast<Eigen::Index>(i)] = term;
  }
  return out;
}

double MultiPoly::eval(const Vector& x) const {
  if (!layout_) throw InvalidArgument("MultiPoly: evaluating an uninitialized polynomial");
  const Vector phi = features(x);
  double total = 0.0;
  for (std::size_t i = 0; i < coeffs_.size(); ++i) total += coeffs_[i] * phi[static_cast<Eigen::Index>(i)];
  return total;
}

MultiPoly MultiPoly::to_monomial() const {
  if (basis_ == Basis::Monomial) return *this;
  MultiPoly out(dim_, degree_);
  std::vector<Square> per_var;
  for (std::size_t v = 0; v < dim_; ++v)
    per_var.push_back(orthonormal_to_monomial(degree_, lo_[static_cast<Eigen::Index>(v)], hi_[static_cast<Eigen::Index>(v)]));
  out.coeffs_ = convert(*this, out, per_var);
  return out;
}

MultiPoly MultiPoly::to_orthonormal(const Vector& lo, const Vector& hi) const {
  MultiPoly out(dim_, degree_, Basis::BoxOrthonormal, std::make_pair(lo, hi));
  if (basis_ == Basis::BoxOrthonormal && lo == lo_ && hi == hi_) return *this;
  const MultiPoly mono = to_monomial();
  std::vector<Square> per_var;
  for (std::size_t v = 0; v < dim_; ++v)
    per_var.push_back(monomial_to_orthonormal(degree_, lo[static_cast<Eigen::Index>(v)], hi[static_cast<Eigen::Index>(v)]));
  out.coeffs_ = convert(mono, out, per_var);
  return out;
}

MultiPoly MultiPoly::operator-(const MultiPoly& other) const {
  require_dim(other.dim(), dim_, "polynomial subtraction");
  const std::size_t d = std::max(degree_, other.degree_);
  auto lift = [&](const MultiPoly& p) {
    MultiPoly q = basis_ == Basis::Monomial ? p.to_monomial() : p.to_orthonormal(lo_, hi_);
    if (q.degree_ == d) return q;
    MultiPoly wide(dim_, d, q.basis_,
                   q.basis_ == Basis::Monomial ? std::nullopt : std::optional(std::make_pair(q.lo_, q.hi_)));
    for (std::size_t i = 0; i < q.size(); ++i) wide.set_coefficient(q.indices()[i], q.coeffs_[i]);
    return wide;
  };
  MultiPoly a = lift(*this);
  const MultiPoly b = lift(other);
  for (std::size_t i = 0; i < a.size(); ++i) a.coeffs_[i] -= b.coeffs_[i];
  return a;
}

double default_ridge(std::size_t degree) { return degree >= 10 ? 1e-10 : 0.0; }

FitResult fit_regression(const std::vector<Sample>& samples, std::size_t degree, Basis basis, double ridge,
                         std::optional<std::pair<Vector, Vector>> box) {
  require(!samples.empty(), "fit_regression: no samples");
  require(ridge >= 0.0, "fit_regression: ridge must be nonnegative");
  const std::size_t n = static_cast<std::size_t>(samples.front().x.size());
  if (basis == Basis::BoxOrthonormal && !box) {
    Vector lo = samples.front().x, hi = samples.front().x;
    for (const auto& s : samples) {
      lo = lo.cwiseMin(s.x);
      hi = hi.cwiseMax(s.x);
    }
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(hi[i] > lo[i])) hi[i] = lo[i] + 1.0;
    box = std::make_pair(lo, hi);
  }
  for (const auto& s : samples) require_dim(static_cast<std::size_t>(s.x.size()), n, "fit_regression sample");
  MultiPoly poly(n, degree, basis, box);
  const auto m = static_cast<Eigen::Index>(samples.size());
  const auto k = static_cast<Eigen::Index>(poly.size());
  if (ridge == 0.0 && m < k)
    throw NumericalFailure("fit_regression: " + std::to_string(m) + " samples for " + std::to_string(k) +
                           " basis functions; add samples or use ridge > 0");

  const Eigen::Index rows = ridge > 0.0 ? m + k : m;
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(rows, k);
  Vector rhs = Vector::Zero(rows);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    design.row(i) = poly.features(s.x).transpose();
    rhs[i] = s.y;
  }
  if (ridge > 0.0) design.bottomRows(k).diagonal().setConstant(std::sqrt(ridge));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  const auto rank = static_cast<std::size_t>(qr.rank());
  if (ridge == 0.0 && qr.rank() < k)
    throw NumericalFailure("fit_regression: rank-deficient design (rank " + std::to_string(rank) + " of " +
                           std::to_string(k) + "); use ridge > 0");
  const Vector coef = qr.solve(rhs);
  for (Eigen::Index i = 0; i < k; ++i) poly.coefficients()[static_cast<std::size_t>(i)] = coef[i];

  FitResult out{std::move(poly), 0.0, 0.0, rank};
  out.residual_ss = (design.topRows(m) * coef - rhs.head(m)).squaredNorm();
  out.mse = out.residual_ss / static_cast<double>(m);
  return out;
}

Estimate mc_functional(const std::function<double(const Vector&)>& g, const dist::Density& d, const dist::McSpec& mc) {
  require(mc.n_samples >= 1, "mc_functional: need at least one sample");
  const Rng root(mc.seed);
  bool bad = false;
  std::string where;
  const auto moments = kernels::parallel::sample_moments(mc.n_samples, [&](std::size_t i) {
    Rng rng = root.child(i);
    const Vector x = d.draw(rng);
    const double v = g(x);
    if (!std::isfinite(v)) {
#pragma omp critical
      if (!bad) {
        bad = true;
        std::ostringstream msg;
        msg << "mc_functional: non-finite value " << v << " at x = [" << x.transpose() << "]";
        where = msg.str();
      }
      return 0.0;
    }
    return v;
  });
  if (bad) throw NumericalFailure(where);
  return moments.estimate();
}

std::string DegreeResult::to_string() const {
  return exceeded ? "> " + std::to_string(degree - 1) : std::to_string(degree);
}

DegreeResult restricted_degree(const std::function<double(const Vector&)>& g, const Vector& x0, const Vector& dir,
                               std::size_t max_deg, double threshold) {
  require(dir.norm() > 0.0, "restricted_degree: direction must be nonzero");
  require_dim(static_cast<std::size_t>(dir.size()), static_cast<std::size_t>(x0.size()), "restricted_degree");
  const std::size_t nodes = max_deg + 2;
  const double pi = std::numbers::pi;
  std::vector<double> values(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    const double t = std::cos(pi * (static_cast<double>(j) + 0.5) / static_cast<double>(nodes));
    values[j] = g(x0 + t * dir);
    if (!std::isfinite(values[j])) throw NumericalFailure("restricted_degree: non-finite value on the line");
  }
  std::vector<double> cheb(nodes);
  double largest = 0.0;
  for (std::size_t k = 0; k < nodes; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < nodes; ++j)
      s += values[j] * std::cos(pi * static_cast<double>(k) * (static_cast<double>(j) + 0.5) / static_cast<double>(nodes));
    cheb[k] = (k == 0 ? 1.0 : 2.0) * s / static_cast<double>(nodes);
    largest = std::max(largest, std::abs(cheb[k]));
  }
  DegreeResult out;
  for (std::size_t k = 0; k < nodes; ++k)
    if (std::abs(cheb[k]) > threshold * largest) out.degree = k;
  out.exceeded = out.degree > max_deg;
  return out;
}

DegreeResult restricted_degree_random(const std::function<double(const Vector&)>& g, std::size_t dim,
                                      std::size_t max_deg, std::size_t lines, std::uint64_t seed, double threshold) {
  require(lines >= 1, "restricted_degree_random: need at least one line");
  const Rng root(seed);
  DegreeResult best;
  for (std::size_t l = 0; l < lines; ++l) {
    Rng rng = root.child(l);
    Vector x0(static_cast<Eigen::Index>(dim)), dir(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] = rng.normal();
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
    const DegreeResult r = restricted_degree(g, x0, dir, max_deg, threshold);
    if (r.degree > best.degree) best = r;
  }
  return best;
}

void write_poly(std::ostream& out, const MultiPoly& p) {
  out << "# polytransfer-poly\n";
  out << "# dim " << p.dim() << "\n# degree " << p.degree() << "\n# basis " << to_string(p.basis()) << '\n';
  out.precision(17);
  if (p.basis() == Basis::BoxOrthonormal) {
    out << "# box_lo";
    for (Eigen::Index i = 0; i < p.box_lo().size(); ++i) out << ' ' << p.box_lo()[i];
    out << "\n# box_hi";
    for (Eigen::Index i = 0; i < p.box_hi().size(); ++i) out << ' ' << p.box_hi()[i];
    out << '\n';
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.coefficients()[i] == 0.0) continue;
    for (int e : p.indices()[i]) out << e << ' ';
    out << p.coefficients()[i] << '\n';
  }
}

MultiPoly read_poly(std::istream& in) {
  std::size_t dim = 0, degree = 0;
  Basis basis = Basis::Monomial;
  std::vector<double> lo, hi;
  std::vector<std::pair<MultiIndex, double>> terms;
  std::string line;
  bool magic = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "polytransfer-poly") magic = true;
      else if (key == "dim") ls >> dim;
      else if (key == "degree") ls >> degree;
      else if (key == "basis") {
        std::string name;
        ls >> name;
        if (name == "monomial") basis = Basis::Monomial;
        else if (name == "box-orthonormal") basis = Basis::BoxOrthonormal;
        else throw InvalidArgument("read_poly: unknown basis '" + name + "'");
      } else if (key == "box_lo" || key == "box_hi") {
        auto& target = key == "box_lo" ? lo : hi;
        for (double v; ls >> v;) target.push_back(v);
      }
      continue;
    }
    require(dim >= 1, "read_poly: missing '# dim' header");
    MultiIndex alpha(dim);
    for (auto& e : alpha)
      if (!(ls >> e) || e < 0) throw InvalidArgument("read_poly: bad exponent in line '" + line + "'");
    double c;
    if (!(ls >> c)) throw InvalidArgument("read_poly: missing coefficient in line '" + line + "'");
    terms.emplace_back(std::move(alpha), c);
  }
  require(magic, "read_poly: not a polytransfer polynomial file");
  std::optional<std::pair<Vector, Vector>> box;
  if (basis == Basis::BoxOrthonormal) {
    require(lo.size() == dim && hi.size() == dim, "read_poly: box-orthonormal file needs box_lo and box_hi");
    box = std::make_pair(Eigen::Map<Vector>(lo.data(), static_cast<Eigen::Index>(dim)),
                         Eigen::Map<Vector>(hi.data(), static_cast<Eigen::Index>(dim)));
  }
  MultiPoly p(dim, degree, basis, box);
  for (const auto& [alpha, c] : terms) p.set_coefficient(alpha, c);
  return p;
}

}  // namespace polytransfer::poly

#include "polytransfer/boolean.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "polytransfer/error.hpp"
#include "polytransfer/kernels.hpp"

namespace polytransfer::boolean {

namespace {

void check_n(std::size_t n) {
  require(n >= 1, "BooleanFn: n must be >= 1");
  if (n > kMaxDim) throw InvalidArgument("BooleanFn: n = " + std::to_string(n) + " exceeds the enumeration cap of 24");
}

std::size_t points(std::size_t n) { return std::size_t{1} << n; }

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw InvalidArgument("read_dense: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

BooleanFn BooleanFn::from_table(std::size_t n, std::vector<double> table) {
  check_n(n);
  require(table.size() == points(n), "BooleanFn: table needs 2^n entries");
  BooleanFn f;
  f.n_ = n;
  f.table_ = std::move(table);
  return f;
}

BooleanFn BooleanFn::from_fourier(std::size_t n, Fourier coefficients) {
  check_n(n);
  for (const auto& [s, c] : coefficients) {
    require(s < points(n), "BooleanFn: subset mask out of range");
    (void)c;
  }
  BooleanFn f;
  f.n_ = n;
  f.fourier_ = std::move(coefficients);
  return f;
}

BooleanFn BooleanFn::from_function(std::size_t n, const std::function<double(const std::vector<int>&)>& fn) {
  check_n(n);
  std::vector<double> table(points(n));
  std::vector<int> x(n);
  for (std::size_t idx = 0; idx < table.size(); ++idx) {
    for (std::size_t i = 0; i < n; ++i) x[i] = (idx >> i) & 1U ? -1 : 1;
    table[idx] = fn(x);
  }
  return from_table(n, std::move(table));
}

const std::vector<double>& BooleanFn::table() const {
  if (!table_) throw InvalidArgument("BooleanFn: no value table; call fourier_transform first");
  return *table_;
}

const Fourier& BooleanFn::fourier() const {
  if (!fourier_) throw InvalidArgument("BooleanFn: no Fourier coefficients; call fourier_transform first");
  return *fourier_;
}

double BooleanFn::coefficient(Mask s) const {
  const auto it = fourier().find(s);
  return it == fourier().end() ? 0.0 : it->second;
}

std::size_t BooleanFn::degree() const {
  std::size_t d = 0;
  for (const auto& [s, c] : fourier())
    if (c != 0.0) d = std::max<std::size_t>(d, static_cast<std::size_t>(std::popcount(s)));
  return d;
}

double BooleanFn::value(Mask point) const {
  if (table_) return table_->at(point);
  double v = 0.0;
  for (const auto& [s, c] : fourier()) v += std::popcount(s & point) % 2 ? -c : c;
  return v;
}

BooleanFn fourier_transform(const BooleanFn& f) {
  BooleanFn out = f;
  const std::size_t size = points(f.n_);
  if (f.table_ && !f.fourier_) {
    std::vector<double> work = *f.table_;
    kernels::parallel::fwht(work);
    const double inv = 1.0 / static_cast<double>(size);
    double largest = 0.0;
    for (double& w : work) {
      w *= inv;
      largest = std::max(largest, std::abs(w));
    }
    Fourier coeffs;
    for (std::size_t s = 0; s < size; ++s)
      if (std::abs(work[s]) > 1e-14 * largest) coeffs.emplace(static_cast<Mask>(s), work[s]);
    out.fourier_ = std::move(coeffs);
  } else if (f.fourier_ && !f.table_) {
    std::vector<double> work(size, 0.0);
    for (const auto& [s, c] : *f.fourier_) work[s] = c;
    kernels::parallel::fwht(work);
    out.table_ = std::move(work);
  }
  return out;
}

Influences influences(const BooleanFn& f) {
  Influences out;
  out.inf.assign(f.n(), 0.0);
  for (const auto& [s, c] : f.fourier())
    for (std::size_t i = 0; i < f.n(); ++i)
      if ((s >> i) & 1U) out.inf[i] += c * c;
  for (double v : out.inf) out.tau = std::max(out.tau, v);
  return out;
}

Normalized normalize_variance(const BooleanFn& f) {
  double var = 0.0;
  for (const auto& [s, c] : f.fourier())
    if (s != 0) var += c * c;
  if (!(var > 0.0)) throw InvalidArgument("normalize_variance: f is constant");
  const double scale = 1.0 / std::sqrt(var);
  Fourier scaled;
  for (const auto& [s, c] : f.fourier()) scaled.emplace(s, s == 0 ? c : c * scale);
  BooleanFn g = BooleanFn::from_fourier(f.n(), std::move(scaled));
  if (f.has_table()) g = fourier_transform(g);
  return {std::move(g), scale};
}

double invariance_gap(std::size_t d, double beta, double tau, double c) {
  require(d >= 1, "invariance_gap: degree must be >= 1");
  require(beta >= 1.0, "invariance_gap: beta must be >= 1");
  require(tau >= 0.0 && tau <= 1.0, "invariance_gap: tau must lie in [0, 1]");
  return c * static_cast<double>(d) * std::cbrt(beta) * std::pow(tau, 1.0 / (8.0 * static_cast<double>(d)));
}

SeenSet SeenSet::frozen(std::size_t n, std::size_t k, int value) {
  check_n(n);
  require(k < n, "SeenSet: frozen coordinate out of range");
  require(value == 1 || value == -1, "SeenSet: frozen value must be +1 or -1");
  SeenSet s;
  s.n_ = n;
  s.frozen_ = std::make_pair(k, value);
  s.count_ = points(n) / 2;
  return s;
}

SeenSet SeenSet::bitmask(std::size_t n, std::vector<bool> members) {
  check_n(n);
  require(members.size() == points(n), "SeenSet: membership needs 2^n entries");
  SeenSet s;
  s.n_ = n;
  s.count_ = static_cast<std::size_t>(std::count(members.begin(), members.end(), true));
  require(s.count_ > 0, "SeenSet: empty seen set");
  s.members_ = std::move(members);
  return s;
}

bool SeenSet::contains(Mask point) const {
  if (frozen_) {
    const bool negative = (point >> frozen_->first) & 1U;
    return negative == (frozen_->second == -1);
  }
  return members_.at(point);
}

double SeenSet::mass() const { return static_cast<double>(count_) / static_cast<double>(points(n_)); }

std::string SeenSet::describe() const {
  if (frozen_) return "x" + std::to_string(frozen_->first + 1) + "=" + std::to_string(frozen_->second);
  return "bitmask(" + std::to_string(count_) + " of " + std::to_string(points(n_)) + ")";
}

Moments conditional_moments(const BooleanFn& f, const SeenSet& s) {
  require_dim(s.n(), f.n(), "conditional_moments");
  const BooleanFn g = f.has_table() ? f : fourier_transform(f);
  const auto& t = g.table();
  const std::size_t size = t.size();
  using kernels::parallel::chunked_sum;
  const double q1 = chunked_sum(size, [&](std::size_t i) { return t[i]; });
  const double q2 = chunked_sum(size, [&](std::size_t i) { return t[i] * t[i]; });
  const double p1 = chunked_sum(size, [&](std::size_t i) { return s.contains(static_cast<Mask>(i)) ? t[i] : 0.0; });
  const double p2 = chunked_sum(size, [&](std::size_t i) { return s.contains(static_cast<Mask>(i)) ? t[i] * t[i] : 0.0; });
  const double count = s.mass() * static_cast<double>(size);
  return {p1 / count, p2 / count, q1 / static_cast<double>(size), q2 / static_cast<double>(size)};
}

double default_k(std::size_t d) {
  if (d <= 1) return 1.0;
  const double dd = static_cast<double>(d);
  return std::pow(dd, 2.0 * dd);
}

std::string BooleanReport::status() const {
  if (!hypothesis_holds) return "condition violated";
  return bound_observed ? "satisfied" : "violated";
}

BooleanReport boolean_transfer_report(const BooleanFn& f, const SeenSet& s, double c_gap, double k_d,
                                      std::optional<double> tau_override) {
  const BooleanFn g = f.has_fourier() ? f : fourier_transform(f);
  BooleanReport r;
  r.d = std::max<std::size_t>(1, g.degree());
  r.tau = tau_override ? *tau_override : influences(g).tau;
  r.q_mass = s.mass();
  r.c_gap = c_gap;
  r.k_d = k_d;
  // Uniform +-1 coordinates have E|x_i|^3 = 1.
  r.gap = invariance_gap(r.d, 1.0, r.tau, c_gap);
  r.hypothesis_holds = r.q_mass >= r.gap;
  r.moments = conditional_moments(g, s);
  r.bound = k_d * std::pow(r.q_mass, -2.0 * static_cast<double>(r.d)) * r.moments.ep2;
  r.bound_observed = r.moments.eq2 <= r.bound * (1.0 + 1e-12);
  return r;
}

void write_sparse(std::ostream& out, const BooleanFn& f) {
  out << "# n " << f.n() << '\n';
  out.precision(17);
  for (const auto& [s, c] : f.fourier()) out << s << ' ' << c << '\n';
}

BooleanFn read_sparse(std::istream& in) {
  std::size_t n = 0;
  Fourier coeffs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "n") ls >> n;
      continue;
    }
    Mask s;
    double c;
    if (!(ls >> s >> c)) throw InvalidArgument("read_sparse: bad line '" + line + "'");
    coeffs[s] += c;
  }
  require(n >= 1, "read_sparse: missing '# n' header");
  return BooleanFn::from_fourier(n, std::move(coeffs));
}

void write_dense(std::ostream& out, const BooleanFn& f) {
  const auto& t = f.table();
  put_u64(out, f.n());
  for (double v : t) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

BooleanFn read_dense(std::istream& in) {
  const std::uint64_t n = get_u64(in);
  check_n(static_cast<std::size_t>(n));
  std::vector<double> t(points(static_cast<std::size_t>(n)));
  for (double& v : t) v = std::bit_cast<double>(get_u64(in));
  return BooleanFn::from_table(static_cast<std::size_t>(n), std::move(t));
}

}  // namespace polytransfer::boolean

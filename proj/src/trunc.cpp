#include "polytransfer/trunc.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "polytransfer/error.hpp"
#include "polytransfer/kernels.hpp"

namespace polytransfer::trunc {

namespace {

std::vector<dist::Interval> label_pieces(const dist::TruncationSet& set) {
  if (set.kind() == dist::TruncationSet::Kind::IntervalUnion) return set.pieces();
  if (set.kind() == dist::TruncationSet::Kind::Box && set.lo().size() == 1) return {{set.lo()[0], set.hi()[0]}};
  return {};
}

double label_mass(double mu, const dist::TruncationSet& set, const dist::McSpec& mc) {
  return dist::gaussian_mass(Vector::Constant(1, mu), Eigen::MatrixXd::Identity(1, 1), set, mc).value;
}

// E[(y - c)^2] for y ~ N(mu, 1) restricted to the pieces. Numerator and mass
// share one quadrature and one scale factor, so deep-tail sets stay finite.
double quadrature_moment(double mu, double c, const std::vector<dist::Interval>& pieces) {
  double nearest = dist::kInf;
  double ref = mu;
  for (const auto& p : pieces) {
    const double r = std::clamp(mu, p.lo, p.hi);
    if (std::abs(r - mu) < nearest) {
      nearest = std::abs(r - mu);
      ref = r;
    }
  }
  const double shift = 0.5 * (ref - mu) * (ref - mu);
  const double reach = std::abs(ref - mu) + 40.0;
  double num = 0.0, den = 0.0;
  for (const auto& p : pieces) {
    const double a = std::max(p.lo, mu - reach), b = std::min(p.hi, mu + reach);
    if (!(b > a)) continue;
    const auto panels = static_cast<std::size_t>(std::clamp(std::ceil((b - a) / 0.5), 1.0, 4000.0));
    auto density = [&](double y) { return std::exp(shift - 0.5 * (y - mu) * (y - mu)); };
    num += integrate_gl([&](double y) { return (y - c) * (y - c) * density(y); }, a, b, panels, 20);
    den += integrate_gl(density, a, b, panels, 20);
  }
  if (!(den > 0.0)) throw NumericalFailure("truncated_mse: set has no mass near the label mean");
  return num / den;
}

}  // namespace

Instance make_instance(std::vector<Vector> x, const Model& f_star, dist::TruncationSet set) {
  require(!x.empty(), "make_instance: need at least one covariate");
  Instance inst{std::move(x), {}, std::move(set)};
  for (const auto& xi : inst.x) {
    const double m = f_star(xi);
    if (!std::isfinite(m)) throw NumericalFailure("make_instance: f* is not finite at a covariate");
    inst.mu.push_back(m);
  }
  return inst;
}

std::vector<double> sample_truncated_normal(double mean, double var, const dist::TruncationSet& set, std::size_t n,
                                            std::uint64_t seed) {
  const auto d = dist::Density::truncated_gaussian(Vector::Constant(1, mean), Eigen::MatrixXd::Constant(1, 1, var), set);
  const auto& tg = std::get<dist::TruncatedGaussian>(d.kind());
  if (tg.mass.value < kQuadratureFloor)
    throw NumericalFailure("sample_truncated_normal: mass " + std::to_string(tg.mass.value) + " is below 1e-6");
  std::vector<double> out;
  out.reserve(n);
  for (const auto& v : dist::sample(d, n, seed)) out.push_back(v[0]);
  return out;
}

Estimate truncated_mse(const Model& f, const Instance& inst, const dist::McSpec& mc, Method method) {
  require(!inst.x.empty() && inst.x.size() == inst.mu.size(), "truncated_mse: malformed instance");
  const auto pieces = label_pieces(inst.set);
  if (method == Method::Auto) method = pieces.empty() ? Method::MonteCarlo : Method::Quadrature;
  const std::size_t n = inst.x.size();
  std::vector<double> preds(n);
  for (std::size_t i = 0; i < n; ++i) preds[i] = f(inst.x[i]);

  if (method == Method::Quadrature) {
    require(!pieces.empty(), "truncated_mse: quadrature needs an interval-union set");
    for (std::size_t i = 0; i < n; ++i)
      if (label_mass(inst.mu[i], inst.set, mc) < kQuadratureFloor)
        throw NumericalFailure("truncated_mse: label mass below 1e-6 at covariate " + std::to_string(i));
    std::vector<double> terms(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const auto k = static_cast<std::size_t>(i);
      terms[k] = quadrature_moment(inst.mu[k], preds[k], pieces);
    }
    double total = 0.0;
    for (double t : terms) total += t;
    return {total / static_cast<double>(n), 0.0};
  }

  // Monte Carlo: per-covariate sample of truncated labels, combined as the
  // mean of per-covariate means with the matching standard error.
  double total = 0.0, var = 0.0;
  const std::size_t per = std::max<std::size_t>(2, mc.n_samples / n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mass = label_mass(inst.mu[i], inst.set, mc);
    if (mass < kMonteCarloFloor)
      throw NumericalFailure("truncated_mse: label mass below 1e-3 at covariate " + std::to_string(i));
    const auto ys = sample_truncated_normal(inst.mu[i], 1.0, inst.set, per, mc.seed + i);
    kernels::Moments m;
    for (double y : ys) m.add((y - preds[i]) * (y - preds[i]));
    total += m.mean();
    var += m.stderr_() * m.stderr_();
  }
  const double nn = static_cast<double>(n);
  return {total / nn, std::sqrt(var) / nn};
}

Estimate full_mse(const Model& f, const Instance& inst, const dist::McSpec& mc, Method method) {
  Instance whole = inst;
  whole.set = dist::TruncationSet::whole_line();
  if (method == Method::MonteCarlo) return truncated_mse(f, whole, mc, method);
  double total = 0.0;
  for (std::size_t i = 0; i < inst.x.size(); ++i) {
    const double bias = inst.mu[i] - f(inst.x[i]);
    total += 1.0 + bias * bias;
  }
  return {total / static_cast<double>(inst.x.size()), 0.0};
}

AlphaMass alpha_mass_min(const Instance& inst) {
  double lowest = 1.0;
  for (double m : inst.mu) lowest = std::min(lowest, label_mass(m, inst.set, {}));
  const double floor = label_pieces(inst.set).empty() ? kMonteCarloFloor : kQuadratureFloor;
  return {lowest, lowest >= floor};
}

TruncReport truncated_transfer_check(const Model& f, const Instance& inst, double C, const dist::McSpec& mc,
                                     Method method) {
  TruncReport r;
  r.alpha = alpha_mass_min(inst).value;
  if (r.alpha < kMonteCarloFloor)
    throw NumericalFailure("truncated_transfer_check: alpha = " + std::to_string(r.alpha) + " is below 1e-3");
  const Estimate trunc = truncated_mse(f, inst, mc, method);
  dist::McSpec mc_full = mc;
  mc_full.seed = mc.seed + 0x9E37;
  const Estimate full = full_mse(f, inst, mc_full, method);
  r.ratio = full.value / trunc.value;

  auto fill = [&](transfer::TransferReport& t, const char* kind, double coef, const Estimate& lhs, const Estimate& base) {
    t.kind = kind;
    t.bridge = describe_set(inst.set);
    t.d = 2;
    t.holder = transfer::HolderPair::sup_norm();
    t.C = C;
    t.coefficient = {coef, std::isinf(coef)};
    t.lhs = lhs;
    t.rhs = {coef * base.value, coef * base.stderr_};
    const double se = std::hypot(lhs.stderr_, t.rhs.stderr_);
    t.satisfied = lhs.value <= t.rhs.value + 3.0 * se + 1e-12 * std::abs(t.rhs.value);
  };
  fill(r.forward, "truncated-forward", C / (r.alpha * r.alpha), full, trunc);
  fill(r.reverse, "truncated-reverse", 1.0 / r.alpha, trunc, full);
  return r;
}

std::string describe_set(const dist::TruncationSet& set) {
  const auto pieces = label_pieces(set);
  if (pieces.empty()) return set.describe();
  if (pieces.size() == 1 && std::isinf(pieces[0].lo) && std::isinf(pieces[0].hi)) return "R";
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i) out << 'u';
    if (std::isinf(pieces[i].lo)) out << "(-inf";
    else out << '[' << pieces[i].lo;
    out << ',';
    if (std::isinf(pieces[i].hi)) out << "inf)";
    else out << pieces[i].hi << ']';
  }
  return out.str();
}

dist::TruncationSet parse_set(const std::string& text) {
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
  if (s == "R") return dist::TruncationSet::whole_line();
  std::vector<dist::Interval> pieces;
  std::size_t pos = 0;
  auto number = [](const std::string& t) {
    if (t == "inf" || t == "+inf") return dist::kInf;
    if (t == "-inf") return -dist::kInf;
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw InvalidArgument("parse_set: bad number '" + t + "'");
    return v;
  };
  while (pos < s.size()) {
    if (s[pos] != '[' && s[pos] != '(') throw InvalidArgument("parse_set: expected '[' or '(' in '" + text + "'");
    const auto comma = s.find(',', pos);
    const auto close = s.find_first_of("])", pos);
    if (comma == std::string::npos || close == std::string::npos || comma > close)
      throw InvalidArgument("parse_set: malformed interval in '" + text + "'");
    pieces.push_back({number(s.substr(pos + 1, comma - pos - 1)), number(s.substr(comma + 1, close - comma - 1))});
    pos = close + 1;
    if (pos < s.size()) {
      if (s[pos] != 'u' && s[pos] != 'U') throw InvalidArgument("parse_set: expected 'u' between intervals");
      ++pos;
    }
  }
  return dist::TruncationSet::intervals(std::move(pieces));
}

void write_instance(std::ostream& out, const Instance& inst) {
  out << "set " << describe_set(inst.set) << '\n';
  const auto n = inst.x.empty() ? 0 : inst.x.front().size();
  for (Eigen::Index j = 0; j < n; ++j) out << 'x' << j + 1 << ',';
  out << "mu\n";
  out.precision(17);
  for (std::size_t i = 0; i < inst.x.size(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out << inst.x[i][j] << ',';
    out << inst.mu[i] << '\n';
  }
}

Instance read_instance(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("set ", 0) == 0,
          "read_instance: first line must be 'set <descriptor>'");
  Instance inst;
  inst.set = parse_set(line.substr(4));
  require(static_cast<bool>(std::getline(in, line)), "read_instance: missing CSV header");
  const auto cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  require(cols >= 2, "read_instance: need at least one covariate column and mu");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(std::stod(cell));
    if (row.size() != cols) throw InvalidArgument("read_instance: row has the wrong number of columns");
    inst.mu.push_back(row.back());
    row.pop_back();
    inst.x.push_back(Eigen::Map<Vector>(row.data(), static_cast<Eigen::Index>(row.size())));
  }
  require(!inst.x.empty(), "read_instance: no rows");
  return inst;
}

}  // namespace polytransfer::trunc

#pragma once

// Real functions on the hypercube {-1, 1}^n for n <= 24.
//
// Points are indexed by n-bit integers: bit i set means x_{i+1} = -1. With
// that convention chi_S(x) = (-1)^{popcount(S & index)}, so the Fourier
// coefficients are the Walsh-Hadamard transform of the value table divided
// by 2^n. Subsets S are bitmasks with the same bit order.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polytransfer::boolean {

inline constexpr std::size_t kMaxDim = 24;

using Mask = std::uint32_t;
using Fourier = std::map<Mask, double>;

class BooleanFn {
 public:
  static BooleanFn from_table(std::size_t n, std::vector<double> table);
  static BooleanFn from_fourier(std::size_t n, Fourier coefficients);
  // f evaluated at every point; x[i] is +1 or -1.
  static BooleanFn from_function(std::size_t n, const std::function<double(const std::vector<int>&)>& f);

  std::size_t n() const { return n_; }
  bool has_table() const { return table_.has_value(); }
  bool has_fourier() const { return fourier_.has_value(); }
  const std::vector<double>& table() const;
  const Fourier& fourier() const;

  // Coefficient of chi_S (0 when absent).
  double coefficient(Mask s) const;
  std::size_t degree() const;
  double value(Mask point) const;

 private:
  friend BooleanFn fourier_transform(const BooleanFn& f);
  BooleanFn() = default;

  std::size_t n_ = 0;
  std::optional<std::vector<double>> table_;
  std::optional<Fourier> fourier_;
};

// Fills in whichever representation is missing. Coefficients below 1e-14
// times the largest one are dropped from the sparse map.
BooleanFn fourier_transform(const BooleanFn& f);

struct Influences {
  std::vector<double> inf;  // Inf_i = sum over S containing i of c_S^2
  double tau = 0.0;         // max_i Inf_i
};
Influences influences(const BooleanFn& f);

struct Normalized {
  BooleanFn f;
  double scale;  // factor applied to every c_S with |S| > 0
};
// Rescales the nonconstant part to unit variance.
Normalized normalize_variance(const BooleanFn& f);

// c d beta^{1/3} tau^{1/(8d)}
double invariance_gap(std::size_t d, double beta, double tau, double c = 1.0);

class SeenSet {
 public:
  // {x : x_{k+1} = value}, value in {-1, +1}; k is zero-based.
  static SeenSet frozen(std::size_t n, std::size_t k, int value);
  // Explicit membership over all 2^n points.
  static SeenSet bitmask(std::size_t n, std::vector<bool> members);

  std::size_t n() const { return n_; }
  bool contains(Mask point) const;
  // |S| / 2^n
  double mass() const;
  std::string describe() const;

 private:
  SeenSet() = default;
  std::size_t n_ = 0;
  std::optional<std::pair<std::size_t, int>> frozen_;
  std::vector<bool> members_;
  std::size_t count_ = 0;
};

struct Moments {
  double ep = 0.0;   // E_P f, P = uniform conditioned on S
  double ep2 = 0.0;  // E_P f^2
  double eq = 0.0;   // E_Q f, Q uniform
  double eq2 = 0.0;  // E_Q f^2
};
Moments conditional_moments(const BooleanFn& f, const SeenSet& s);

// Default degree constant: d^{2d}, with K_1 = 1.
double default_k(std::size_t d);

struct BooleanReport {
  std::size_t d = 0;
  double tau = 0.0;
  double q_mass = 0.0;
  double gap = 0.0;
  double c_gap = 1.0;
  double k_d = 1.0;
  bool hypothesis_holds = false;
  Moments moments;
  double bound = 0.0;        // K_d Q(S)^{-2d} E_P f^2
  bool bound_observed = false;  // E_Q f^2 <= bound, computed either way
  std::string status() const;   // "satisfied", "violated" or "condition violated"
};

// Checks Q(S) >= invariance_gap(d, 1, tau, c_gap) and, exactly by
// enumeration, E_Q f^2 <= K_d Q(S)^{-2d} E_P f^2. The bound is only asserted
// (status "satisfied"/"violated") when the hypothesis holds. `tau_override`
// replaces the measured max influence.
BooleanReport boolean_transfer_report(const BooleanFn& f, const SeenSet& s, double c_gap, double k_d,
                                      std::optional<double> tau_override = std::nullopt);

// Sparse Fourier text: "# n <n>" then "bitmask coefficient" lines.
void write_sparse(std::ostream& out, const BooleanFn& f);
BooleanFn read_sparse(std::istream& in);
// Dense table: uint64 n, then 2^n doubles, all little-endian.
void write_dense(std::ostream& out, const BooleanFn& f);
BooleanFn read_dense(std::istream& in);

}  // namespace polytransfer::boolean

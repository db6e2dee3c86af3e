#pragma once

// Data-parallel inner loops shared by the modules. Every kernel has a serial
// reference in kernels::serial and an OpenMP version in kernels::parallel.
// Both partition work into the same fixed-size chunks and combine chunk
// partials in chunk order, so the two agree bit for bit regardless of the
// thread count. Tests and bench/ compare them directly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "polytransfer/error.hpp"
#include "polytransfer/numeric.hpp"

namespace polytransfer::kernels {

inline constexpr std::size_t kChunk = 1024;

// Running first and second moments of a sample.
struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  void merge(const Moments& other) {
    sum += other.sum;
    sum_sq += other.sum_sq;
    count += other.count;
  }
  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
  double stderr_() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double m = sum / n;
    const double var = std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
    return std::sqrt(var / n);
  }
  Estimate estimate() const { return {mean(), stderr_()}; }
};

inline std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

namespace serial {

// Moments of term(0), ..., term(n - 1).
template <class Term>
Moments sample_moments(std::size_t n, Term&& term) {
  Moments total;
  for (std::size_t c = 0; c < chunk_count(n); ++c) {
    Moments part;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) part.add(term(i));
    total.merge(part);
  }
  return total;
}

// In-place unnormalized Walsh-Hadamard transform; size must be a power of two.
inline void fwht(std::span<double> data) {
  const std::size_t size = data.size();
  for (std::size_t half = 1; half < size; half <<= 1) {
    for (std::size_t block = 0; block < size; block += 2 * half) {
      for (std::size_t j = block; j < block + half; ++j) {
        const double a = data[j];
        const double b = data[j + half];
        data[j] = a + b;
        data[j + half] = a - b;
      }
    }
  }
}

// Sum of term(0), ..., term(n - 1), chunked like sample_moments.
template <class Term>
double chunked_sum(std::size_t n, Term&& term) {
  double total = 0.0;
  for (std::size_t c = 0; c < chunk_count(n); ++c) {
    double part = 0.0;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) part += term(i);
    total += part;
  }
  return total;
}

}  // namespace serial

namespace parallel {

template <class Term>
Moments sample_moments(std::size_t n, Term&& term) {
  const std::size_t chunks = chunk_count(n);
  std::vector<Moments> parts(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    Moments part;
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(n, begin + kChunk);
    for (std::size_t i = begin; i < end; ++i) part.add(term(i));
    parts[static_cast<std::size_t>(c)] = part;
  }
  Moments total;
  for (const auto& part : parts) total.merge(part);
  return total;
}

inline void fwht(std::span<double> data) {
  const std::size_t size = data.size();
  double* d = data.data();
  for (std::size_t half = 1; half < size; half <<= 1) {
    // Each butterfly pair within a stage is independent.
#pragma omp parallel for schedule(static) if (size >= 4096)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(size / 2); ++p) {
      const std::size_t pair = static_cast<std::size_t>(p);
      const std::size_t j = (pair / half) * 2 * half + pair % half;
      const double a = d[j];
      const double b = d[j + half];
      d[j] = a + b;
      d[j + half] = a - b;
    }
  }
}

template <class Term>
double chunked_sum(std::size_t n, Term&& term) {
  const std::size_t chunks = chunk_count(n);
  std::vector<double> parts(chunks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    double part = 0.0;
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(n, begin + kChunk);
    for (std::size_t i = begin; i < end; ++i) part += term(i);
    parts[static_cast<std::size_t>(c)] = part;
  }
  double total = 0.0;
  for (double part : parts) total += part;
  return total;
}

}  // namespace parallel

}  // namespace polytransfer::kernels

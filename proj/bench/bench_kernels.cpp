// Serial vs OpenMP versions of the shared kernels. Both produce identical
// bits, so the comparison is purely about wall time.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "polytransfer/kernels.hpp"
#include "polytransfer/rng.hpp"

using namespace polytransfer;

namespace {

// A Monte Carlo style term: one counter-based normal draw per index.
double draw_term(std::size_t i) {
  Rng rng(42, i);
  const double z = rng.normal();
  return std::exp(-0.5 * z * z) * z * z;
}

template <bool Parallel>
void BM_SampleMoments(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    const auto m = Parallel ? kernels::parallel::sample_moments(n, draw_term) : kernels::serial::sample_moments(n, draw_term);
    benchmark::DoNotOptimize(m.sum);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}

template <bool Parallel>
void BM_ChunkedSum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    const double s = Parallel ? kernels::parallel::chunked_sum(n, draw_term) : kernels::serial::chunked_sum(n, draw_term);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}

template <bool Parallel>
void BM_Fwht(benchmark::State& state) {
  const auto n = std::size_t{1} << state.range(0);
  std::vector<double> data(n);
  Rng rng(1);
  for (auto& v : data) v = rng.normal();
  for (auto _ : state) {
    if (Parallel)
      kernels::parallel::fwht(data);
    else
      kernels::serial::fwht(data);
    benchmark::DoNotOptimize(data.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_SampleMoments<false>)->Name("sample_moments/serial")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_SampleMoments<true>)->Name("sample_moments/parallel")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_ChunkedSum<false>)->Name("chunked_sum/serial")->Arg(1 << 20);
BENCHMARK(BM_ChunkedSum<true>)->Name("chunked_sum/parallel")->Arg(1 << 20);
BENCHMARK(BM_Fwht<false>)->Name("fwht/serial")->Arg(16)->Arg(22);
BENCHMARK(BM_Fwht<true>)->Name("fwht/parallel")->Arg(16)->Arg(22);

BENCHMARK_MAIN();

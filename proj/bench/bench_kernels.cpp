#include <benchmark/benchmark.h>

#include <vector>

#include "seqtag/kernels.hpp"
#include "seqtag/metrics.hpp"
#include "seqtag/rng.hpp"

namespace {

using namespace seqtag;

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return random_normal({n}, 1.0, rng).values();
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(n * n, 1), b = random_buffer(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::omp::gemm(false, false, n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
    else
      kernels::serial::gemm(false, false, n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <bool Parallel>
void BM_Conv1d(benchmark::State& state) {
  kernels::ConvShape s;
  s.sequences = 16;
  s.length = 300;
  s.in_channels = static_cast<std::size_t>(state.range(0));
  s.out_channels = s.in_channels;
  s.kernel = 3;
  s.pad = 1;
  const auto in = random_buffer(s.sequences * s.length * s.in_channels, 3);
  const auto w = random_buffer(s.kernel * s.in_channels * s.out_channels, 4);
  std::vector<double> out(s.sequences * s.out_length() * s.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::omp::conv1d_forward(s, in.data(), w.data(), out.data());
    else
      kernels::serial::conv1d_forward(s, in.data(), w.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_MeanAp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t v = 500;
  Rng rng(5);
  const Array scores = random_uniform({n, v}, 0.0, 1.0, rng);
  Array labels = random_uniform({n, v}, 0.0, 1.0, rng);
  for (auto& x : labels.values()) x = x < 0.02 ? 1.0 : 0.0;
  for (auto _ : state) {
    auto result = Parallel ? metrics::omp::mean_ap(scores, labels)
                           : metrics::serial::mean_ap(scores, labels);
    benchmark::DoNotOptimize(result.mean);
  }
}

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_Conv1d<false>)->Name("conv1d/serial")->Arg(16)->Arg(64);
BENCHMARK(BM_Conv1d<true>)->Name("conv1d/omp")->Arg(16)->Arg(64);
BENCHMARK(BM_MeanAp<false>)->Name("mean_ap/serial")->Arg(1000)->Arg(10000);
BENCHMARK(BM_MeanAp<true>)->Name("mean_ap/omp")->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();

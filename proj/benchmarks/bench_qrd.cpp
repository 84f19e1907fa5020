#include <benchmark/benchmark.h>

#include <cstddef>
#include <random>

#include "stridx/iqrd.hpp"
#include "stridx/linalg.hpp"
#include "stridx/matrix.hpp"

namespace {

// Rows shaped like encoded keys: byte-valued features plus an intercept one.
stridx::DenseMatrix random_rows(std::size_t rows, std::size_t cols,
                                std::uint64_t seed) {
  stridx::DenseMatrix m(rows, cols);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> byte(0.0, 256.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double* r = m.row_ptr(i);
    for (std::size_t j = 0; j + 1 < cols; ++j) r[j] = byte(rng);
    r[cols - 1] = 1.0;
  }
  return m;
}

stridx::MemoizedFactor factor_of_history(std::size_t rows, std::size_t cols) {
  stridx::StreamingQrd fold(cols);
  std::size_t left = rows;
  std::uint64_t seed = 1;
  while (left > 0) {
    const std::size_t chunk = std::min<std::size_t>(left, 65536);
    fold.push_rows(random_rows(chunk, cols, seed++));
    left -= chunk;
  }
  return {fold.finish(), rows, 1};
}

constexpr std::size_t kKeyCols = 17;  // 16-byte keys plus the intercept

void BM_ColdFactorization(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto x = random_rows(rows, kKeyCols, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stridx::householder_qrd(x));
  }
  state.SetComplexityN(state.range(0));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(BM_ColdFactorization)
    ->RangeMultiplier(4)
    ->Range(1 << 12, 1 << 18)
    ->Complexity(benchmark::oN)
    ->Unit(benchmark::kMillisecond);

// The headline contrast: absorbing a fixed 1024-row delta costs the same
// whether the factor summarizes 4k rows or 4M — history never gets touched.
void BM_AbsorbDelta(benchmark::State& state) {
  const auto history = static_cast<std::size_t>(state.range(0));
  const auto memo = factor_of_history(history, kKeyCols);
  const auto delta = random_rows(1024, kKeyCols, 99);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stridx::absorb(memo, delta));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 1024);
}
BENCHMARK(BM_AbsorbDelta)
    ->RangeMultiplier(32)
    ->Range(1 << 12, 1 << 22)
    ->Unit(benchmark::kMicrosecond);

void BM_MergeFactors(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto a = factor_of_history(4 * dim, dim);
  const auto b = factor_of_history(4 * dim, dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stridx::merge_factors(a, b));
  }
}
BENCHMARK(BM_MergeFactors)->Arg(9)->Arg(17)->Arg(33)->Arg(65)->Arg(97);

void BM_StreamingFold(benchmark::State& state) {
  const auto block = random_rows(4096, kKeyCols, 11);
  stridx::StreamingQrd fold(kKeyCols);
  for (auto _ : state) {
    fold.push_rows(block);
  }
  benchmark::DoNotOptimize(fold.finish());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 4096);
}
BENCHMARK(BM_StreamingFold)->Unit(benchmark::kMicrosecond);

void BM_ParallelQrdChunks(benchmark::State& state) {
  const auto chunk_rows = static_cast<std::size_t>(state.range(0));
  const auto x = random_rows(1 << 16, kKeyCols, 13);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stridx::parallel_qrd(x, chunk_rows));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          (1 << 16));
}
BENCHMARK(BM_ParallelQrdChunks)
    ->Arg(0)  // library default of 4 * cols
    ->Arg(1 << 10)
    ->Arg(1 << 13)
    ->Unit(benchmark::kMillisecond);

void BM_SolveBeta(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto memo = factor_of_history(8 * dim, dim);
  std::mt19937_64 rng(17);
  stridx::Vector xty(dim);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < dim; ++i) xty[i] = u(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stridx::solve_beta(memo.r, xty));
  }
}
BENCHMARK(BM_SolveBeta)->Arg(9)->Arg(17)->Arg(33)->Arg(65)->Arg(97);

}  // namespace

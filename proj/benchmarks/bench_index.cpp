#include <benchmark/benchmark.h>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "stridx/baseline.hpp"
#include "stridx/index.hpp"
#include "stridx/keycodec.hpp"
#include "stridx/workload.hpp"

namespace {

constexpr std::size_t kKeyLen = 16;

// Even slots, matching the workload generator's corpus layout, so fresh
// inserts can later land in the odd gaps between them.
std::vector<std::string> corpus_keys(std::size_t n) {
  std::vector<std::string> keys;
  keys.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    keys.push_back(stridx::QueryStream::slot_key(2 * i, kKeyLen));
  }
  return keys;
}

std::vector<std::uint64_t> values_for(std::size_t n) {
  std::vector<std::uint64_t> values(n);
  std::mt19937_64 rng(5);
  for (auto& v : values) v = rng();
  return values;
}

std::unique_ptr<stridx::StringIndex> built_index(std::size_t n,
                                                 bool inline_retrain) {
  stridx::IndexConfig cfg;
  cfg.key_len = kKeyLen;
  cfg.target_leaf_size = 65536;
  cfg.max_buffer = inline_retrain ? 1024 : (1u << 31);
  auto index = std::make_unique<stridx::StringIndex>(cfg);
  if (inline_retrain) {
    auto* raw = index.get();
    index->set_retrain_sink([raw](std::uint64_t id, stridx::RetrainReason) {
      raw->retrain_leaf(id);
    });
  }
  index->bulk_load(corpus_keys(n), values_for(n));
  return index;
}

void BM_LearnedLookup(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto index = built_index(n, false);
  std::mt19937_64 rng(23);
  for (auto _ : state) {
    const auto key = stridx::QueryStream::slot_key(2 * (rng() % n), kKeyLen);
    benchmark::DoNotOptimize(index->lookup(key));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_LearnedLookup)->RangeMultiplier(8)->Range(1 << 14, 1 << 20);

void BM_OrderedMapLookup(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  stridx::OrderedMapIndex index;
  index.bulk_load(corpus_keys(n), values_for(n));
  std::mt19937_64 rng(23);
  for (auto _ : state) {
    const auto key = stridx::QueryStream::slot_key(2 * (rng() % n), kKeyLen);
    benchmark::DoNotOptimize(index.lookup(key));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_OrderedMapLookup)->RangeMultiplier(8)->Range(1 << 14, 1 << 20);

// Pure buffer-append cost: the buffer is sized so no retrain ever fires.
void BM_LearnedInsertBuffered(benchmark::State& state) {
  const auto index = built_index(1 << 17, false);
  std::uint64_t next = 0;
  for (auto _ : state) {
    const auto key =
        stridx::QueryStream::slot_key(2 * (next++ % (1 << 17)) + 1, kKeyLen);
    benchmark::DoNotOptimize(index->insert(key, next));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_LearnedInsertBuffered);

// Amortized insert cost including the incremental retrains that drain the
// buffer every 1024 inserts on the inserting thread.
void BM_LearnedInsertInlineRetrain(benchmark::State& state) {
  const auto index = built_index(1 << 17, true);
  std::uint64_t next = 0;
  for (auto _ : state) {
    const auto key =
        stridx::QueryStream::slot_key(2 * (next++ % (1 << 17)) + 1, kKeyLen);
    benchmark::DoNotOptimize(index->insert(key, next));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_LearnedInsertInlineRetrain);

void BM_LearnedRangeScan(benchmark::State& state) {
  const auto limit = static_cast<std::size_t>(state.range(0));
  const auto n = std::size_t{1} << 17;
  const auto index = built_index(n, false);
  std::mt19937_64 rng(29);
  for (auto _ : state) {
    const auto start = stridx::QueryStream::slot_key(2 * (rng() % n), kKeyLen);
    benchmark::DoNotOptimize(index->range_scan(start, limit));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(limit));
}
BENCHMARK(BM_LearnedRangeScan)->Arg(10)->Arg(100)->Arg(1000);

void BM_EncodeKey(benchmark::State& state) {
  const auto key_len = static_cast<std::size_t>(state.range(0));
  const std::string key(key_len, 'k');
  std::vector<double> row(key_len + 1);
  for (auto _ : state) {
    stridx::encode_into(key, key_len, row.data());
    benchmark::DoNotOptimize(row.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_EncodeKey)->Arg(16)->Arg(64)->Arg(96);

}  // namespace

BENCHMARK_MAIN();

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "stridx/error.hpp"
#include "stridx/workload.hpp"

using stridx::ConfigError;
using stridx::DatasetError;
using stridx::Distribution;
using stridx::InsertOrder;
using stridx::Op;
using stridx::OpType;
using stridx::QueryStream;
using stridx::WorkloadConfig;

namespace {

WorkloadConfig read_only_config(std::size_t keys, Distribution dist,
                                std::uint64_t seed = 7) {
  WorkloadConfig cfg;
  cfg.initial_keys = keys;
  cfg.key_len = 12;
  cfg.mix = {1.0, 0.0, 0.0, 0.0, 0.0};
  cfg.dist = dist;
  cfg.seed = seed;
  return cfg;
}

std::uint64_t slot_of(const std::string& key) {
  return std::stoull(key, nullptr, 36);
}

bool ops_equal(const Op& a, const Op& b) {
  return a.type == b.type && a.key == b.key && a.value == b.value &&
         a.scan_limit == b.scan_limit;
}

std::filesystem::path temp_file(const std::string& stem) {
  return std::filesystem::temp_directory_path() / (stem + ".txt");
}

}  // namespace

TEST_CASE("slot keys are fixed width, ordered, and capacity checked") {
  CHECK(QueryStream::slot_key(0, 4) == "0000");
  CHECK(QueryStream::slot_key(35, 4) == "000z");
  CHECK(QueryStream::slot_key(36, 4) == "0010");
  CHECK(QueryStream::slot_key(36ull * 36 * 36 * 36 - 1, 4) == "zzzz");
  CHECK_THROWS_AS(QueryStream::slot_key(36ull * 36 * 36 * 36, 4), ConfigError);
  CHECK_THROWS_AS(QueryStream::slot_key(0, 0), ConfigError);
  for (std::uint64_t s = 0; s + 1 < 2000; ++s) {
    REQUIRE(QueryStream::slot_key(s, 8) < QueryStream::slot_key(s + 1, 8));
  }
}

TEST_CASE("corpus is sorted, unique, and sits on even slots") {
  auto cfg = read_only_config(1000, Distribution::uniform);
  const auto keys = QueryStream::corpus(cfg);
  REQUIRE(keys.size() == 1000);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    REQUIRE(keys[i].size() == cfg.key_len);
    REQUIRE(slot_of(keys[i]) == 2 * i);
    if (i > 0) REQUIRE(keys[i - 1] < keys[i]);
  }
}

TEST_CASE("config validation rejects bad mixes and sizes") {
  auto cfg = read_only_config(100, Distribution::uniform);
  cfg.mix.read = 0.9;  // sums to 0.9
  CHECK_THROWS_AS(QueryStream s(cfg), ConfigError);
  cfg.mix = {1.2, -0.2, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(QueryStream s(cfg), ConfigError);
  cfg.mix = {0.5, 0.0, 0.0, 0.5, 0.0};
  cfg.scan_limit = 0;
  CHECK_THROWS_AS(QueryStream s(cfg), ConfigError);
  cfg = read_only_config(100, Distribution::uniform);
  cfg.initial_keys = 0;
  CHECK_THROWS_AS(QueryStream s(cfg), ConfigError);
  cfg = read_only_config(100, Distribution::uniform);
  cfg.key_len = 3;
  cfg.initial_keys = 1u << 20;  // 36^3 / 2 slots cannot hold 2^20 keys
  CHECK_THROWS_AS(QueryStream s(cfg), ConfigError);
  cfg = read_only_config(100, Distribution::uniform);
  CHECK_THROWS_AS(QueryStream s(cfg, 2, 2), ConfigError);
  CHECK_THROWS_AS(QueryStream s(cfg, 0, 0), ConfigError);
}

TEST_CASE("identical configs replay identical operation streams") {
  WorkloadConfig cfg;
  cfg.initial_keys = 500;
  cfg.key_len = 10;
  cfg.mix = {0.4, 0.3, 0.1, 0.1, 0.1};
  cfg.dist = Distribution::zipfian;
  cfg.scan_limit = 25;
  cfg.seed = 99;
  QueryStream a(cfg);
  QueryStream b(cfg);
  for (int i = 0; i < 10000; ++i) {
    REQUIRE(ops_equal(a.next(), b.next()));
  }
  // A different seed must diverge quickly.
  cfg.seed = 100;
  QueryStream c(cfg);
  QueryStream d(read_only_config(500, Distribution::zipfian, 99));
  int same = 0;
  QueryStream e(cfg);
  for (int i = 0; i < 1000; ++i) {
    if (ops_equal(c.next(), e.next())) ++same;
  }
  CHECK(same == 1000);  // same config again, sanity
}

TEST_CASE("thread streams partition the single-threaded stream round-robin") {
  WorkloadConfig cfg;
  cfg.initial_keys = 300;
  cfg.key_len = 10;
  cfg.mix = {0.5, 0.3, 0.0, 0.1, 0.1};
  cfg.dist = Distribution::latest;
  cfg.insert_order = InsertOrder::append;
  cfg.seed = 5;

  QueryStream whole(cfg, 0, 1);
  std::vector<Op> reference;
  const unsigned kThreads = 4;
  const std::size_t kPerThread = 500;
  for (std::size_t i = 0; i < kThreads * kPerThread; ++i) {
    reference.push_back(whole.next());
  }
  for (unsigned t = 0; t < kThreads; ++t) {
    QueryStream part(cfg, t, kThreads);
    for (std::size_t i = 0; i < kPerThread; ++i) {
      REQUIRE(ops_equal(part.next(), reference[i * kThreads + t]));
    }
  }
}

TEST_CASE("operation mix matches the configured fractions") {
  WorkloadConfig cfg;
  cfg.initial_keys = 2000;
  cfg.key_len = 10;
  cfg.mix = {0.5, 0.2, 0.1, 0.1, 0.1};
  cfg.dist = Distribution::uniform;
  cfg.seed = 11;
  QueryStream s(cfg);
  std::map<OpType, std::size_t> counts;
  const int kOps = 100000;
  for (int i = 0; i < kOps; ++i) ++counts[s.next().type];
  CHECK(std::abs(counts[OpType::read] / double(kOps) - 0.5) < 0.015);
  CHECK(std::abs(counts[OpType::insert] / double(kOps) - 0.2) < 0.015);
  CHECK(std::abs(counts[OpType::update] / double(kOps) - 0.1) < 0.015);
  CHECK(std::abs(counts[OpType::scan] / double(kOps) - 0.1) < 0.015);
  CHECK(std::abs(counts[OpType::erase] / double(kOps) - 0.1) < 0.015);
}

TEST_CASE("uniform reads cover the key space evenly") {
  const std::size_t n = 10000;
  QueryStream s(read_only_config(n, Distribution::uniform));
  std::vector<std::size_t> buckets(10, 0);
  const int kOps = 100000;
  for (int i = 0; i < kOps; ++i) {
    const auto idx = slot_of(s.next().key) / 2;
    ++buckets[idx * 10 / n];
  }
  for (auto b : buckets) {
    CHECK(b > 8000);
    CHECK(b < 12000);
  }
}

TEST_CASE("zipfian reads are skewed and hashed across the key space") {
  const std::size_t n = 10000;
  QueryStream s(read_only_config(n, Distribution::zipfian));
  std::map<std::string, std::size_t> hits;
  const int kOps = 100000;
  for (int i = 0; i < kOps; ++i) ++hits[s.next().key];
  std::size_t top = 0;
  std::uint64_t weighted_slots = 0;
  for (const auto& [key, c] : hits) {
    top = std::max(top, c);
    weighted_slots += slot_of(key) / 2 * c;
  }
  // Rank 0 of a theta-0.99 zipfian over 10^4 items carries ~10% of the mass.
  CHECK(top > kOps / 20);
  CHECK(hits.size() > 100);
  // Hashing should leave the *positions* of hot keys roughly centered.
  const double mean_pos = double(weighted_slots) / kOps / double(n);
  CHECK(mean_pos > 0.2);
  CHECK(mean_pos < 0.8);
}

TEST_CASE("hotspot sends ninety percent of reads to the low tenth") {
  const std::size_t n = 10000;
  QueryStream s(read_only_config(n, Distribution::hotspot));
  const int kOps = 50000;
  int hot = 0;
  for (int i = 0; i < kOps; ++i) {
    if (slot_of(s.next().key) / 2 < n / 10) ++hot;
  }
  const double frac = double(hot) / kOps;
  CHECK(frac > 0.85);
  CHECK(frac < 0.95);
}

TEST_CASE("exponential reads decay with mean near a tenth of the range") {
  const std::size_t n = 10000;
  QueryStream s(read_only_config(n, Distribution::exponential));
  const int kOps = 50000;
  double sum = 0;
  for (int i = 0; i < kOps; ++i) sum += double(slot_of(s.next().key) / 2);
  const double mean = sum / kOps / double(n);
  CHECK(mean > 0.07);
  CHECK(mean < 0.13);
}

TEST_CASE("sequential reads sweep every key in order") {
  const std::size_t n = 500;
  QueryStream s(read_only_config(n, Distribution::sequential));
  for (std::size_t round = 0; round < 3; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(slot_of(s.next().key) == 2 * i);
    }
  }
}

TEST_CASE("latest reads favor recently inserted keys") {
  auto cfg = stridx::make_preset("ycsb-d", 1000, 12, 3);
  QueryStream s(cfg);
  std::uint64_t inserts_seen = 0;
  double rank_sum = 0;
  std::size_t reads = 0;
  for (int i = 0; i < 50000; ++i) {
    const Op op = s.next();
    if (op.type == OpType::insert) {
      ++inserts_seen;
      REQUIRE(slot_of(op.key) >= 2 * cfg.initial_keys);  // appended
      continue;
    }
    REQUIRE(op.type == OpType::read);
    const std::uint64_t slot = slot_of(op.key);
    const std::uint64_t index = slot < 2 * cfg.initial_keys
                                    ? slot / 2
                                    : slot - cfg.initial_keys;
    const std::uint64_t population = cfg.initial_keys + inserts_seen;
    REQUIRE(index < population);
    rank_sum += double(population - 1 - index) / double(population);
    ++reads;
  }
  CHECK(inserts_seen > 2000);
  // Mean normalized recency rank sits near 0.11 for theta 0.99; a uniform
  // picker would give 0.5.
  CHECK(rank_sum / double(reads) < 0.25);
}

TEST_CASE("gap inserts land on odd slots and never shadow the corpus") {
  WorkloadConfig cfg;
  cfg.initial_keys = 1000;
  cfg.key_len = 10;
  cfg.mix = {0.0, 1.0, 0.0, 0.0, 0.0};
  cfg.dist = Distribution::uniform;
  cfg.insert_order = InsertOrder::gaps;
  cfg.seed = 21;
  QueryStream s(cfg);
  for (int i = 0; i < 5000; ++i) {
    const Op op = s.next();
    REQUIRE(op.type == OpType::insert);
    REQUIRE(slot_of(op.key) % 2 == 1);
    REQUIRE(slot_of(op.key) < 2 * cfg.initial_keys);
  }
}

TEST_CASE("append inserts grow strictly past the corpus maximum") {
  WorkloadConfig cfg;
  cfg.initial_keys = 1000;
  cfg.key_len = 10;
  cfg.mix = {0.0, 1.0, 0.0, 0.0, 0.0};
  cfg.dist = Distribution::uniform;
  cfg.insert_order = InsertOrder::append;
  cfg.seed = 21;
  QueryStream s(cfg);
  std::string prev = QueryStream::slot_key(2 * (cfg.initial_keys - 1), 10);
  for (int i = 0; i < 5000; ++i) {
    const Op op = s.next();
    REQUIRE(op.key > prev);
    prev = op.key;
  }
}

TEST_CASE("presets configure the documented mixes") {
  auto d = stridx::make_preset("ycsb-d", 1000, 12, 1);
  CHECK(d.mix.read == doctest::Approx(0.95));
  CHECK(d.mix.insert == doctest::Approx(0.05));
  CHECK(d.dist == Distribution::latest);
  CHECK(d.insert_order == InsertOrder::append);

  auto e = stridx::make_preset("ycsb-e", 1000, 12, 1);
  CHECK(e.mix.scan == doctest::Approx(0.95));
  CHECK(e.mix.insert == doctest::Approx(0.05));
  CHECK(e.dist == Distribution::zipfian);
  QueryStream es(e);
  int scans = 0;
  for (int i = 0; i < 2000; ++i) {
    const Op op = es.next();
    if (op.type == OpType::scan) {
      ++scans;
      REQUIRE(op.scan_limit == e.scan_limit);
    }
  }
  CHECK(scans > 1800);

  CHECK(stridx::make_preset("read-only", 10, 8, 1).mix.read ==
        doctest::Approx(1.0));
  CHECK(stridx::make_preset("write-heavy", 10, 8, 1).mix.insert ==
        doctest::Approx(0.5));
  CHECK(stridx::make_preset("churn", 10, 8, 1).mix.erase ==
        doctest::Approx(0.3));
  CHECK(stridx::make_preset("read-heavy", 10, 8, 1).insert_order ==
        InsertOrder::gaps);
  CHECK_THROWS_AS(stridx::make_preset("nope", 10, 8, 1), ConfigError);
}

TEST_CASE("updates carry fresh values and reads carry none") {
  WorkloadConfig cfg;
  cfg.initial_keys = 100;
  cfg.key_len = 8;
  cfg.mix = {0.5, 0.0, 0.5, 0.0, 0.0};
  cfg.dist = Distribution::uniform;
  cfg.seed = 2;
  QueryStream s(cfg);
  std::set<std::uint64_t> values;
  for (int i = 0; i < 2000; ++i) {
    const Op op = s.next();
    if (op.type == OpType::read) {
      REQUIRE(op.value == 0);
      REQUIRE(op.scan_limit == 0);
    } else {
      REQUIRE(op.type == OpType::update);
      values.insert(op.value);
    }
  }
  CHECK(values.size() > 900);  // values are effectively unique
}

TEST_CASE("dataset loading sorts, deduplicates, and strips line endings") {
  const auto path = temp_file("stridx_ws_small");
  {
    std::ofstream out(path);
    out << "b\na\na\n";
  }
  auto loaded = stridx::load_dataset(path.string());
  REQUIRE(loaded.keys.size() == 2);
  CHECK(loaded.keys == std::vector<std::string>{"a", "b"});
  CHECK(loaded.truncated == 0);

  {
    std::ofstream out(path);
    out << "zed\r\n\nalpha\r\nzed\n\n";
  }
  loaded = stridx::load_dataset(path.string());
  CHECK(loaded.keys == std::vector<std::string>{"alpha", "zed"});
  std::filesystem::remove(path);
}

TEST_CASE("dataset loading fails on missing or empty files") {
  CHECK_THROWS_AS(stridx::load_dataset("/nonexistent/keys.txt"), DatasetError);
  const auto path = temp_file("stridx_ws_empty");
  {
    std::ofstream out(path);
    out << "\n\n";
  }
  CHECK_THROWS_AS(stridx::load_dataset(path.string()), DatasetError);
  std::filesystem::remove(path);
}

TEST_CASE("large dataset round-trips through a file") {
  const auto path = temp_file("stridx_ws_large");
  std::mt19937_64 rng(77);
  std::vector<std::string> raw;
  raw.reserve(100000);
  for (int i = 0; i < 100000; ++i) {
    raw.push_back(QueryStream::slot_key(rng() % 1000000, 6));
  }
  {
    std::ofstream out(path);
    for (const auto& k : raw) out << k << '\n';
  }
  auto expect = raw;
  std::sort(expect.begin(), expect.end());
  expect.erase(std::unique(expect.begin(), expect.end()), expect.end());
  const auto keys = stridx::load_dataset(path.string()).keys;
  CHECK(keys == expect);
  std::filesystem::remove(path);
}

TEST_CASE("dataset loading truncates oversized keys and counts them") {
  const auto path = temp_file("stridx_ws_trunc");
  {
    std::ofstream out(path);
    out << "alphabet\nalpha\nbeta\nzip\n";
  }
  const auto loaded = stridx::load_dataset(path.string(), 4);
  // "alphabet" and "alpha" both clip to "alph" and collapse after dedup.
  CHECK(loaded.keys == std::vector<std::string>{"alph", "beta", "zip"});
  CHECK(loaded.truncated == 2);
  CHECK_THROWS_AS(stridx::load_dataset(path.string(), 0), ConfigError);
  std::filesystem::remove(path);
}

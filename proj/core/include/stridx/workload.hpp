#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace stridx {

enum class OpType { read, insert, update, scan, erase };

// How read/update/scan/erase targets are chosen from the live key population.
enum class Distribution {
  uniform,      // every key equally likely
  zipfian,      // YCSB-style skew (theta 0.99) over a hashed permutation
  hotspot,      // 90% of picks land in the lowest 10% of the key range
  exponential,  // decaying preference toward the low end, mean n/10
  sequential,   // strict round-robin over the population
  latest,       // zipfian over recency: newest keys dominate
};

// Where freshly inserted keys land in the key space.
enum class InsertOrder {
  gaps,    // pseudo-random unoccupied slots between existing keys
  append,  // strictly beyond the current maximum key
};

struct WorkloadMix {
  double read = 1.0;
  double insert = 0.0;
  double update = 0.0;
  double scan = 0.0;
  double erase = 0.0;
};

struct WorkloadConfig {
  std::size_t initial_keys = 100000;
  std::size_t key_len = 16;
  WorkloadMix mix;
  Distribution dist = Distribution::zipfian;
  InsertOrder insert_order = InsertOrder::gaps;
  std::size_t scan_limit = 100;
  std::uint64_t seed = 42;
};

// Named presets; throws ConfigError for an unknown name. Recognized:
//   read-only    reads only, zipfian
//   read-heavy   95% reads / 5% inserts, zipfian, gap inserts
//   ycsb-d       95% reads / 5% inserts, latest, appended inserts
//   ycsb-e       95% scans / 5% inserts, zipfian, gap inserts
//   write-heavy  50% inserts / 50% reads, uniform, gap inserts
//   churn        40% inserts / 30% erases / 30% reads, uniform, gap inserts
WorkloadConfig make_preset(const std::string& name, std::size_t initial_keys,
                           std::size_t key_len, std::uint64_t seed);

struct Op {
  OpType type = OpType::read;
  std::string key;
  std::uint64_t value = 0;
  std::size_t scan_limit = 0;
};

// Deterministic operation stream over a synthetic ordered corpus.
//
// The key universe is fixed-width base-36: corpus key i occupies slot 2*i,
// leaving odd slots as insert gaps; appended inserts take slots beyond the
// corpus. The stream for a given config is one deterministic sequence;
// thread t of k consumes ops t, t+k, t+2k, ... of that sequence, so the
// union of all per-thread streams is exactly the single-threaded stream.
class QueryStream {
 public:
  explicit QueryStream(const WorkloadConfig& cfg, unsigned thread_id = 0,
                       unsigned thread_count = 1);

  Op next();

  // The sorted initial corpus for bulk loading.
  static std::vector<std::string> corpus(const WorkloadConfig& cfg);
  static std::string slot_key(std::uint64_t slot, std::size_t key_len);

 private:
  Op generate();
  double next_unit();
  std::uint64_t pick_index(std::uint64_t population);
  std::uint64_t zipf_rank(std::uint64_t population);
  void ensure_zeta(std::uint64_t population);
  std::string key_for_index(std::uint64_t index) const;
  std::string next_insert_key();

  WorkloadConfig cfg_;
  unsigned thread_id_;
  unsigned thread_count_;
  std::uint64_t op_counter_ = 0;
  std::mt19937_64 rng_;
  std::uint64_t inserted_ = 0;
  std::uint64_t sequential_at_ = 0;

  // Incremental zeta state for the zipfian/latest pick.
  double theta_ = 0.99;
  double zeta_n_ = 0.0;
  std::uint64_t zeta_count_ = 0;
  double zeta2_ = 0.0;
};

struct Dataset {
  std::vector<std::string> keys;   // sorted, unique
  std::size_t truncated = 0;       // lines cut down to key_len
};

// Reads one key per line, ignoring blank lines; keys longer than key_len are
// truncated (and counted); the result is sorted and deduplicated. Throws
// DatasetError when the file is unreadable or holds no keys.
Dataset load_dataset(const std::string& path,
                     std::size_t key_len = std::string::npos);

}  // namespace stridx

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stridx/matrix.hpp"
#include "stridx/model.hpp"

namespace stridx {

namespace detail {
struct Leaf;
struct RouterVersion;
}  // namespace detail

struct IndexConfig {
  std::size_t key_len = 16;            // feature width; longer keys truncate
  std::size_t target_leaf_size = 65536;  // bulk-load partition size
  std::size_t max_buffer = 1024;         // buffered inserts before a retrain
  double split_mae_threshold = 64.0;     // split a leaf whose MAE exceeds this
  double merge_mae_threshold = 8.0;      // merge neighbors when both sit below
  std::size_t min_split_size = 16;       // never split below this many live keys
  std::size_t chunk_rows = 0;            // QR chunk height; 0 selects 4 * features
  // When true, a full buffer is handled by a synchronous, non-memoized full
  // retrain on the inserting thread instead of being handed to a trainer.
  bool blocking_full_retrain = false;
};

enum class UpsertResult { inserted, updated };

enum class RetrainReason { buffer_full, accuracy_drop, cold_sweep, forced };

// Why/how a training pass concluded.
struct RetrainOutcome {
  bool performed = false;  // false when the leaf was retired/busy/missing
  std::uint64_t model_id = 0;
  std::uint64_t total_rows = 0;  // physical rows after the pass
  std::uint64_t delta_rows = 0;  // rows newly absorbed by this pass
  double mae = 0.0;
  double duration_ms = 0.0;
};

struct StructuralOutcome {
  enum class Action { none, split, merge } action = Action::none;
  std::uint64_t left_id = 0;   // split/merge product
  std::uint64_t right_id = 0;  // split product (second half)
};

// One published model refresh, in wall-clock order.
struct RetrainEvent {
  double start_ms = 0.0;  // relative to index construction
  double duration_ms = 0.0;
  std::uint64_t total_keys = 0;
  std::uint64_t delta_keys = 0;
  std::uint64_t model_id = 0;
};

// Per-operation phase timings in nanoseconds; pass to an operation to have
// the phases it exercises filled in.
struct PhaseProbe {
  std::uint64_t traverse_ns = 0;
  std::uint64_t ml_inference_ns = 0;
  std::uint64_t local_search_ns = 0;
  std::uint64_t buffer_search_ns = 0;
  std::uint64_t range_scan_ns = 0;
  std::uint64_t buffer_insert_ns = 0;
};

struct LeafStats {
  std::uint64_t model_id = 0;
  std::uint64_t entry_count = 0;  // physical rows, including flagged ones
  std::uint64_t live_keys = 0;    // reachable keys: live rows plus buffered upserts
  std::uint64_t buffered = 0;
  std::uint64_t flagged = 0;
  double mae = 0.0;
  std::int64_t err_min = 0;
  std::int64_t err_max = 0;
  std::uint64_t epoch = 0;
  std::size_t memo_bytes = 0;
  Vector beta;
  std::string first_key;
};

struct MemoryBreakdown {
  // Analytical accounting of index structures. Key characters and value
  // payloads are deliberately excluded; per-entry object headers, flags,
  // models, and factors are counted.
  std::uint64_t model_bytes = 0;
  std::uint64_t memo_bytes = 0;
  std::uint64_t buffer_bytes = 0;
  std::uint64_t structure_bytes = 0;
  std::uint64_t total() const {
    return model_bytes + memo_bytes + buffer_bytes + structure_bytes;
  }
};

struct IndexStats {
  std::uint64_t leaf_count = 0;
  std::uint64_t live_keys = 0;
  std::uint64_t entry_count = 0;
  std::uint64_t buffered = 0;
  std::uint64_t flagged = 0;
  MemoryBreakdown memory;
  std::vector<LeafStats> leaves;
};

// Ordered map from byte strings to 64-bit values, served by a two-level
// learned structure: a binary-searched router over leaves, and per-leaf
// linear models that predict a key's slot within an error window.
//
// Serving operations never factorize anything. Fresh inserts land in a
// per-leaf buffer; a training pass drains the buffer, extends the leaf's
// triangular factor with just the drained rows, re-solves the model, and
// publishes a new immutable leaf snapshot. Deletes flag the trained entry in
// place and erase the payload without touching the factor; flagged entries
// are purged by the next full (cold) pass over the leaf.
//
// Thread safety: any number of reader/writer threads may call lookup,
// insert, erase, and range_scan concurrently. The training surface
// (retrain_leaf, cold_train_leaf, split_leaf, merge_leaves, cold_sweep)
// expects one caller per leaf at a time — the trainer guarantees this.
class StringIndex {
 public:
  explicit StringIndex(IndexConfig cfg);
  ~StringIndex();
  StringIndex(const StringIndex&) = delete;
  StringIndex& operator=(const StringIndex&) = delete;

  // Initial build from sorted unique keys. Replaces the empty index; throws
  // UnsortedInputError / DuplicateKeyError on bad input.
  void bulk_load(const std::vector<std::string>& keys, const std::vector<std::uint64_t>& values);

  std::optional<std::uint64_t> lookup(std::string_view key, PhaseProbe* probe = nullptr) const;
  UpsertResult insert(std::string_view key, std::uint64_t value, PhaseProbe* probe = nullptr);
  bool erase(std::string_view key, PhaseProbe* probe = nullptr);
  // Up to `limit` live pairs in ascending order starting at the smallest key
  // >= start.
  std::vector<std::pair<std::string, std::uint64_t>> range_scan(std::string_view start,
                                                                std::size_t limit,
                                                                PhaseProbe* probe = nullptr) const;

  // --- training surface -----------------------------------------------
  // Incremental pass: drains the buffer and extends the memoized factor with
  // the drained rows only.
  RetrainOutcome retrain_leaf(std::uint64_t model_id, unsigned compute_threads = 1);
  // Full pass: purges flagged entries and rebuilds factor, model, and bounds
  // from scratch.
  RetrainOutcome cold_train_leaf(std::uint64_t model_id, unsigned compute_threads = 1);
  bool split_leaf(std::uint64_t model_id);
  bool merge_leaves(std::uint64_t left_id, std::uint64_t right_id);
  // Applies the split/merge policy to a leaf after a training pass.
  StructuralOutcome maybe_restructure(std::uint64_t model_id);
  // Cold-trains every leaf whose flagged fraction reaches the threshold;
  // returns how many leaves were rebuilt.
  std::size_t cold_sweep(double flagged_fraction_threshold);

  // Invoked (outside all index locks) when a leaf wants a training pass.
  void set_retrain_sink(std::function<void(std::uint64_t, RetrainReason)> sink);

  IndexStats stats() const;
  std::vector<RetrainEvent> retrain_log() const;
  const IndexConfig& config() const noexcept { return cfg_; }
  std::vector<std::uint64_t> leaf_ids() const;
  std::uint64_t leaf_for_key(std::string_view key) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  IndexConfig cfg_;
};

}  // namespace stridx

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stridx/index.hpp"
#include "stridx/trainer.hpp"
#include "stridx/workload.hpp"

namespace stridx {

enum class Backend {
  learned,       // learned index, incremental retrains on a background trainer
  learned_cold,  // learned index, synchronous full rebuild whenever a buffer fills
  ordered_map,   // red-black tree under one reader/writer lock
};

// Accepts "learned", "learned-no-memo", and "btree"; throws ConfigError
// otherwise.
Backend parse_backend(const std::string& name);
std::string backend_name(Backend backend);

struct RunnerConfig {
  WorkloadConfig workload;
  Backend backend = Backend::learned;
  IndexConfig index;      // key_len is overridden from the workload
  EngineBackend engine;   // training engine for Backend::learned
  TrainerConfig trainer;
  unsigned serve_threads = 1;
  // Exactly one of the two budgets must be positive.
  std::uint64_t total_ops = 0;
  std::uint64_t duration_ms = 0;
  // Every Nth operation per thread runs with a phase probe attached.
  std::size_t sample_every = 16;
  // When non-empty, replaces the synthetic corpus; op keys are remapped onto
  // these (requires workload.key_len <= 12).
  std::vector<std::string> dataset_keys;
};

struct PhaseSummary {
  double mean_ns = 0.0;
  double p99_ns = 0.0;
  std::uint64_t samples = 0;
};

struct RunReport {
  Backend backend = Backend::learned;
  std::uint64_t ops = 0;
  double elapsed_s = 0.0;
  double throughput_ops_per_s = 0.0;
  std::uint64_t reads = 0;
  std::uint64_t hits = 0;
  std::uint64_t inserts = 0;
  std::uint64_t updates = 0;
  std::uint64_t scans = 0;
  std::uint64_t scanned_rows = 0;
  std::uint64_t erases = 0;
  PhaseSummary traverse;
  PhaseSummary ml_inference;
  PhaseSummary local_search;
  PhaseSummary buffer_search;
  PhaseSummary range_scan;
  PhaseSummary buffer_insert;
  MemoryBreakdown memory;
  std::uint64_t final_keys = 0;
  std::uint64_t leaf_count = 0;
  std::vector<RetrainEvent> retrains;
  Trainer::Counters trainer_counters;
};

RunReport run_benchmark(const RunnerConfig& cfg);

// One fixed header line; see summary_csv_row for the matching fields.
std::string summary_csv_header();
std::string summary_csv_row(const RunReport& report);
// Header plus one line per training pass observed during the run.
std::string retrain_csv(const RunReport& report);
// Writes <prefix>_summary.csv (header + one row) and <prefix>_retrains.csv
// (header + one row per training pass).
void report_csv(const RunReport& report, const std::string& prefix);
// Throws IoError when the file cannot be written.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace stridx

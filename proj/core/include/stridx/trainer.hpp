#pragma once

#include <cstdint>
#include <memory>

#include "stridx/index.hpp"

namespace stridx {

// How training jobs execute.
enum class EngineKind {
  inline_software,    // one engine thread, single-threaded factorization
  parallel_software,  // several engine threads, chunked factorization
  fixed_delay,        // one engine whose jobs take a fixed wall-clock time
};

struct EngineBackend {
  EngineKind kind = EngineKind::inline_software;
  unsigned engines = 1;           // concurrent engine threads
  unsigned units_per_engine = 1;  // compute threads inside one job
  double delay_ms = 0.0;          // total job latency for fixed_delay

  static EngineBackend make_inline() { return {}; }
  static EngineBackend make_parallel(unsigned engine_threads, unsigned units) {
    return {EngineKind::parallel_software, engine_threads, units, 0.0};
  }
  // Models an offload device with deterministic job latency; 0 behaves like
  // the inline engine.
  static EngineBackend make_fixed_delay(double ms) {
    return {EngineKind::fixed_delay, 1, 1, ms};
  }
};

struct TrainerConfig {
  double cold_sweep_interval_ms = 0.0;   // 0 disables the periodic sweeper
  double sweep_flagged_fraction = 0.25;  // leaf rebuild threshold for sweeps
  bool restructure_after_retrain = true;
};

// Runs the index's training surface off the serving threads: a queue of
// leaf ids fed by the index's retrain sink (and by manual submissions),
// drained by one or more engine threads. Per-leaf requests coalesce while
// queued or in flight; the index re-requests after a pass if its buffer
// refilled meanwhile, so dropped duplicates are never lost work.
class Trainer {
 public:
  struct Counters {
    std::uint64_t submitted = 0;   // accepted into the queue
    std::uint64_t coalesced = 0;   // dropped as duplicates of queued/running work
    std::uint64_t executed = 0;    // jobs run to completion
    std::uint64_t fallbacks = 0;   // jobs that degraded to a full rebuild
    std::uint64_t sweep_passes = 0;
  };

  Trainer(StringIndex& index, EngineBackend backend = {}, TrainerConfig cfg = {});
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // Enqueues a training pass; throws ShutdownError once stopped.
  void submit(std::uint64_t model_id, RetrainReason reason);
  // Blocks until the queue is empty and no job is in flight.
  void flush();
  // Runs one cold sweep on the calling thread; returns leaves rebuilt.
  std::size_t sweep_now();
  // Detaches from the index, drains nothing further, joins all threads.
  void stop();

  Counters counters() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stridx

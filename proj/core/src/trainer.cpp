#include "stridx/trainer.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_set>
#include <vector>

#include "stridx/error.hpp"

namespace stridx {

namespace {
using Clock = std::chrono::steady_clock;
}

struct Trainer::Impl {
  Impl(StringIndex& index, EngineBackend backend, TrainerConfig cfg)
      : index_(index), backend_(backend), cfg_(cfg) {
    if (backend_.engines == 0) throw ConfigError("EngineBackend: engines must be positive");
    if (backend_.units_per_engine == 0) {
      throw ConfigError("EngineBackend: units_per_engine must be positive");
    }
    if (backend_.delay_ms < 0.0) throw ConfigError("EngineBackend: negative delay");
    const unsigned engine_threads =
        backend_.kind == EngineKind::parallel_software ? backend_.engines : 1;
    index_.set_retrain_sink([this](std::uint64_t id, RetrainReason reason) {
      enqueue(id, reason, /*nothrow=*/true);
    });
    engines_.reserve(engine_threads);
    for (unsigned i = 0; i < engine_threads; ++i) {
      engines_.emplace_back([this] { engine_loop(); });
    }
    if (cfg_.cold_sweep_interval_ms > 0.0) {
      sweeper_ = std::thread([this] { sweeper_loop(); });
    }
  }

  ~Impl() { stop(); }

  struct Job {
    std::uint64_t id;
    RetrainReason reason;
  };

  void enqueue(std::uint64_t id, RetrainReason reason, bool nothrow) {
    {
      std::unique_lock<std::mutex> g(mu_);
      if (stopped_) {
        if (nothrow) return;
        throw ShutdownError("trainer is stopped");
      }
      if (queued_.count(id) != 0 || in_flight_.count(id) != 0) {
        counters_.coalesced++;
        return;
      }
      queue_.push_back({id, reason});
      queued_.insert(id);
      counters_.submitted++;
    }
    cv_.notify_one();
  }

  void engine_loop() {
    for (;;) {
      Job job;
      {
        std::unique_lock<std::mutex> g(mu_);
        cv_.wait(g, [this] { return stopped_ || !queue_.empty(); });
        if (stopped_) return;
        job = queue_.front();
        queue_.pop_front();
        queued_.erase(job.id);
        in_flight_.insert(job.id);
      }
      run_job(job);
      {
        std::unique_lock<std::mutex> g(mu_);
        in_flight_.erase(job.id);
        counters_.executed++;
      }
      idle_cv_.notify_all();
    }
  }

  void run_job(const Job& job) {
    const auto t0 = Clock::now();
    RetrainOutcome outcome;
    try {
      if (job.reason == RetrainReason::cold_sweep) {
        outcome = index_.cold_train_leaf(job.id, backend_.units_per_engine);
      } else {
        outcome = index_.retrain_leaf(job.id, backend_.units_per_engine);
      }
    } catch (const std::exception&) {
      // Degraded path: anything wrong with the incremental state is cured by
      // rebuilding the leaf from its physical rows.
      try {
        outcome = index_.cold_train_leaf(job.id, backend_.units_per_engine);
        std::unique_lock<std::mutex> g(mu_);
        counters_.fallbacks++;
      } catch (const std::exception&) {
        outcome = RetrainOutcome{};
      }
    }
    if (backend_.kind == EngineKind::fixed_delay && backend_.delay_ms > 0.0) {
      std::this_thread::sleep_until(
          t0 + std::chrono::duration_cast<Clock::duration>(
                   std::chrono::duration<double, std::milli>(backend_.delay_ms)));
    }
    if (outcome.performed && cfg_.restructure_after_retrain) {
      index_.maybe_restructure(job.id);
    }
  }

  void sweeper_loop() {
    // wait_until on system_clock rather than wait_for: the steady-clock wait
    // lowers to pthread_cond_clockwait, which this toolchain's sanitizer
    // runtime cannot observe.
    const auto interval = std::chrono::duration_cast<std::chrono::system_clock::duration>(
        std::chrono::duration<double, std::milli>(cfg_.cold_sweep_interval_ms));
    std::unique_lock<std::mutex> g(mu_);
    while (!stopped_) {
      const auto deadline = std::chrono::system_clock::now() + interval;
      if (cv_sweep_.wait_until(g, deadline, [this] { return stopped_; })) return;
      g.unlock();
      index_.cold_sweep(cfg_.sweep_flagged_fraction);
      g.lock();
      counters_.sweep_passes++;
    }
  }

  std::size_t sweep_now() {
    const std::size_t swept = index_.cold_sweep(cfg_.sweep_flagged_fraction);
    std::unique_lock<std::mutex> g(mu_);
    counters_.sweep_passes++;
    return swept;
  }

  void flush() {
    std::unique_lock<std::mutex> g(mu_);
    idle_cv_.wait(g, [this] { return stopped_ || (queue_.empty() && in_flight_.empty()); });
  }

  void stop() {
    {
      std::unique_lock<std::mutex> g(mu_);
      if (stopped_) return;
      stopped_ = true;
    }
    // Detach from the index first so in-flight publishes stop re-requesting.
    index_.set_retrain_sink({});
    cv_.notify_all();
    cv_sweep_.notify_all();
    for (auto& t : engines_) t.join();
    if (sweeper_.joinable()) sweeper_.join();
    idle_cv_.notify_all();
  }

  StringIndex& index_;
  EngineBackend backend_;
  TrainerConfig cfg_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable cv_sweep_;
  std::condition_variable idle_cv_;
  std::deque<Job> queue_;
  std::unordered_set<std::uint64_t> queued_;
  std::unordered_set<std::uint64_t> in_flight_;
  bool stopped_ = false;
  Counters counters_;

  std::vector<std::thread> engines_;
  std::thread sweeper_;
};

Trainer::Trainer(StringIndex& index, EngineBackend backend, TrainerConfig cfg)
    : impl_(std::make_unique<Impl>(index, backend, cfg)) {}

Trainer::~Trainer() = default;

void Trainer::submit(std::uint64_t model_id, RetrainReason reason) {
  impl_->enqueue(model_id, reason, /*nothrow=*/false);
}

void Trainer::flush() { impl_->flush(); }

std::size_t Trainer::sweep_now() { return impl_->sweep_now(); }

void Trainer::stop() { impl_->stop(); }

Trainer::Counters Trainer::counters() const {
  std::unique_lock<std::mutex> g(impl_->mu_);
  return impl_->counters_;
}

}  // namespace stridx

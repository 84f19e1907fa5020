#include "stridx/runner.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#include "stridx/baseline.hpp"
#include "stridx/error.hpp"

namespace stridx {

namespace {

using Clock = std::chrono::steady_clock;

struct Target {
  virtual ~Target() = default;
  virtual void load(const std::vector<std::string>& keys,
                    const std::vector<std::uint64_t>& values) = 0;
  virtual bool read(std::string_view key, PhaseProbe* probe) = 0;
  virtual void upsert(std::string_view key, std::uint64_t value,
                      PhaseProbe* probe) = 0;
  virtual std::size_t scan(std::string_view start, std::size_t limit,
                           PhaseProbe* probe) = 0;
  virtual void erase(std::string_view key, PhaseProbe* probe) = 0;
  virtual void quiesce() {}
  virtual void fill(RunReport& report) = 0;
};

struct LearnedTarget : Target {
  explicit LearnedTarget(const RunnerConfig& cfg) : index(cfg.index) {
    if (cfg.backend == Backend::learned) {
      trainer = std::make_unique<Trainer>(index, cfg.engine, cfg.trainer);
    }
  }
  void load(const std::vector<std::string>& keys,
            const std::vector<std::uint64_t>& values) override {
    index.bulk_load(keys, values);
  }
  bool read(std::string_view key, PhaseProbe* probe) override {
    return index.lookup(key, probe).has_value();
  }
  void upsert(std::string_view key, std::uint64_t value,
              PhaseProbe* probe) override {
    index.insert(key, value, probe);
  }
  std::size_t scan(std::string_view start, std::size_t limit,
                   PhaseProbe* probe) override {
    return index.range_scan(start, limit, probe).size();
  }
  void erase(std::string_view key, PhaseProbe* probe) override {
    index.erase(key, probe);
  }
  void quiesce() override {
    if (trainer) {
      trainer->flush();
      trainer->stop();
    }
  }
  void fill(RunReport& report) override {
    const auto stats = index.stats();
    report.memory = stats.memory;
    report.final_keys = stats.live_keys;
    report.leaf_count = stats.leaf_count;
    report.retrains = index.retrain_log();
    if (trainer) report.trainer_counters = trainer->counters();
  }
  StringIndex index;
  std::unique_ptr<Trainer> trainer;
};

struct MapTarget : Target {
  void load(const std::vector<std::string>& keys,
            const std::vector<std::uint64_t>& values) override {
    map.bulk_load(keys, values);
  }
  bool read(std::string_view key, PhaseProbe*) override {
    return map.lookup(key).has_value();
  }
  void upsert(std::string_view key, std::uint64_t value,
              PhaseProbe*) override {
    map.insert(key, value);
  }
  std::size_t scan(std::string_view start, std::size_t limit,
                   PhaseProbe*) override {
    return map.range_scan(start, limit).size();
  }
  void erase(std::string_view key, PhaseProbe*) override { map.erase(key); }
  void fill(RunReport& report) override {
    report.memory = map.memory();
    report.final_keys = map.size();
  }
  OrderedMapIndex map;
};

struct ThreadTally {
  std::uint64_t ops = 0;
  std::uint64_t reads = 0;
  std::uint64_t hits = 0;
  std::uint64_t inserts = 0;
  std::uint64_t updates = 0;
  std::uint64_t scans = 0;
  std::uint64_t scanned_rows = 0;
  std::uint64_t erases = 0;
  std::vector<std::uint64_t> traverse;
  std::vector<std::uint64_t> ml_inference;
  std::vector<std::uint64_t> local_search;
  std::vector<std::uint64_t> buffer_search;
  std::vector<std::uint64_t> range_scan;
  std::vector<std::uint64_t> buffer_insert;
};

void record_probe(const PhaseProbe& probe, ThreadTally& tally) {
  // A zero field means the phase did not run for this operation; summaries
  // cover only operations that exercised the phase.
  if (probe.traverse_ns) tally.traverse.push_back(probe.traverse_ns);
  if (probe.ml_inference_ns) {
    tally.ml_inference.push_back(probe.ml_inference_ns);
  }
  if (probe.local_search_ns) {
    tally.local_search.push_back(probe.local_search_ns);
  }
  if (probe.buffer_search_ns) {
    tally.buffer_search.push_back(probe.buffer_search_ns);
  }
  if (probe.range_scan_ns) tally.range_scan.push_back(probe.range_scan_ns);
  if (probe.buffer_insert_ns) {
    tally.buffer_insert.push_back(probe.buffer_insert_ns);
  }
}

PhaseSummary summarize(std::vector<std::uint64_t>& samples) {
  PhaseSummary out;
  out.samples = samples.size();
  if (samples.empty()) return out;
  double sum = 0;
  for (auto s : samples) sum += static_cast<double>(s);
  out.mean_ns = sum / static_cast<double>(samples.size());
  // Nearest-rank p99: ceil(0.99 * n) - 1, clamped to a valid position.
  const std::size_t rank = (samples.size() * 99 + 99) / 100;
  const std::size_t at = std::min(samples.size() - 1, rank > 0 ? rank - 1 : 0);
  std::nth_element(samples.begin(), samples.begin() + static_cast<long>(at),
                   samples.end());
  out.p99_ns = static_cast<double>(samples[at]);
  return out;
}

// Maps a synthetic base-36 op key onto the loaded dataset: even slots are
// corpus keys, odd slots become successor keys of their corpus neighbor, and
// slots past the corpus extend beyond the largest dataset key.
std::string remap_key(const std::string& synthetic,
                      const std::vector<std::string>& dataset) {
  const std::uint64_t slot = std::stoull(synthetic, nullptr, 36);
  const std::uint64_t n = dataset.size();
  if (slot < 2 * n) {
    if (slot % 2 == 0) return dataset[slot / 2];
    return dataset[slot / 2] + "!";
  }
  return dataset.back() + "~" + QueryStream::slot_key(slot - 2 * n, 10);
}

void validate(const RunnerConfig& cfg) {
  if ((cfg.total_ops == 0) == (cfg.duration_ms == 0)) {
    throw ConfigError("set exactly one of total_ops and duration_ms");
  }
  if (cfg.serve_threads == 0) {
    throw ConfigError("serve_threads must be positive");
  }
  if (cfg.sample_every == 0) {
    throw ConfigError("sample_every must be positive");
  }
  if (!cfg.dataset_keys.empty() && cfg.workload.key_len > 12) {
    throw ConfigError("dataset runs need workload key_len <= 12");
  }
}

std::uint64_t thread_share(std::uint64_t total, unsigned thread_id,
                           unsigned threads) {
  // Ops are dealt round-robin; thread t owns ops t, t+k, t+2k, ...
  if (total <= thread_id) return 0;
  return (total - 1 - thread_id) / threads + 1;
}

void append_phase(std::ostringstream& out, const PhaseSummary& phase) {
  out << ',' << phase.mean_ns << ',' << phase.p99_ns;
}

}  // namespace

Backend parse_backend(const std::string& name) {
  if (name == "learned") return Backend::learned;
  if (name == "learned-no-memo") return Backend::learned_cold;
  if (name == "btree") return Backend::ordered_map;
  throw ConfigError("unknown target: " + name);
}

std::string backend_name(Backend backend) {
  switch (backend) {
    case Backend::learned: return "learned";
    case Backend::learned_cold: return "learned-no-memo";
    case Backend::ordered_map: return "btree";
  }
  return "unknown";
}

RunReport run_benchmark(const RunnerConfig& cfg) {
  validate(cfg);

  RunnerConfig run = cfg;
  run.index.key_len = run.workload.key_len;
  if (run.backend == Backend::learned_cold) {
    run.index.blocking_full_retrain = true;
  }
  const bool use_dataset = !run.dataset_keys.empty();
  if (use_dataset) {
    run.workload.initial_keys = run.dataset_keys.size();
  }

  std::unique_ptr<Target> target;
  if (run.backend == Backend::ordered_map) {
    target = std::make_unique<MapTarget>();
  } else {
    target = std::make_unique<LearnedTarget>(run);
  }

  const auto corpus =
      use_dataset ? run.dataset_keys : QueryStream::corpus(run.workload);
  std::vector<std::uint64_t> values(corpus.size());
  std::mt19937_64 value_rng(run.workload.seed ^ 0x9e3779b97f4a7c15ull);
  for (auto& v : values) v = value_rng();
  target->load(corpus, values);

  std::vector<ThreadTally> tallies(run.serve_threads);
  const auto start = Clock::now();
  const auto deadline =
      start + std::chrono::milliseconds(run.duration_ms);

  auto serve = [&](unsigned t) {
    QueryStream stream(run.workload, t, run.serve_threads);
    ThreadTally& tally = tallies[t];
    const std::uint64_t budget =
        run.total_ops > 0
            ? thread_share(run.total_ops, t, run.serve_threads)
            : std::numeric_limits<std::uint64_t>::max();
    for (std::uint64_t i = 0; i < budget; ++i) {
      if (run.duration_ms > 0 && (i & 31) == 0 && Clock::now() >= deadline) {
        break;
      }
      Op op = stream.next();
      const std::string key =
          use_dataset ? remap_key(op.key, run.dataset_keys) : op.key;
      PhaseProbe probe;
      PhaseProbe* p = i % run.sample_every == 0 ? &probe : nullptr;
      switch (op.type) {
        case OpType::read:
          ++tally.reads;
          tally.hits += target->read(key, p) ? 1 : 0;
          break;
        case OpType::insert:
          ++tally.inserts;
          target->upsert(key, op.value, p);
          break;
        case OpType::update:
          ++tally.updates;
          target->upsert(key, op.value, p);
          break;
        case OpType::scan:
          ++tally.scans;
          tally.scanned_rows += target->scan(key, op.scan_limit, p);
          break;
        case OpType::erase:
          ++tally.erases;
          target->erase(key, p);
          break;
      }
      ++tally.ops;
      if (p) record_probe(probe, tally);
    }
  };

  if (run.serve_threads == 1) {
    serve(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(run.serve_threads);
    for (unsigned t = 0; t < run.serve_threads; ++t) {
      threads.emplace_back(serve, t);
    }
    for (auto& th : threads) th.join();
  }
  const auto stop = Clock::now();

  target->quiesce();

  RunReport report;
  report.backend = run.backend;
  report.elapsed_s =
      std::chrono::duration<double>(stop - start).count();
  ThreadTally merged;
  for (auto& tally : tallies) {
    merged.ops += tally.ops;
    merged.reads += tally.reads;
    merged.hits += tally.hits;
    merged.inserts += tally.inserts;
    merged.updates += tally.updates;
    merged.scans += tally.scans;
    merged.scanned_rows += tally.scanned_rows;
    merged.erases += tally.erases;
    auto take = [](std::vector<std::uint64_t>& into,
                   std::vector<std::uint64_t>& from) {
      into.insert(into.end(), from.begin(), from.end());
    };
    take(merged.traverse, tally.traverse);
    take(merged.ml_inference, tally.ml_inference);
    take(merged.local_search, tally.local_search);
    take(merged.buffer_search, tally.buffer_search);
    take(merged.range_scan, tally.range_scan);
    take(merged.buffer_insert, tally.buffer_insert);
  }
  report.ops = merged.ops;
  report.reads = merged.reads;
  report.hits = merged.hits;
  report.inserts = merged.inserts;
  report.updates = merged.updates;
  report.scans = merged.scans;
  report.scanned_rows = merged.scanned_rows;
  report.erases = merged.erases;
  report.throughput_ops_per_s =
      report.elapsed_s > 0 ? static_cast<double>(report.ops) / report.elapsed_s
                           : 0.0;
  report.traverse = summarize(merged.traverse);
  report.ml_inference = summarize(merged.ml_inference);
  report.local_search = summarize(merged.local_search);
  report.buffer_search = summarize(merged.buffer_search);
  report.range_scan = summarize(merged.range_scan);
  report.buffer_insert = summarize(merged.buffer_insert);
  target->fill(report);
  return report;
}

std::string summary_csv_header() {
  return "throughput_ops_per_s,"
         "traverse_mean_ns,traverse_p99_ns,"
         "ml_inference_mean_ns,ml_inference_p99_ns,"
         "local_search_mean_ns,local_search_p99_ns,"
         "buffer_search_mean_ns,buffer_search_p99_ns,"
         "range_scan_mean_ns,range_scan_p99_ns,"
         "buffer_insert_mean_ns,buffer_insert_p99_ns,"
         "model_bytes,memo_bytes,buffer_bytes,structure_bytes";
}

std::string summary_csv_row(const RunReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << report.throughput_ops_per_s;
  append_phase(out, report.traverse);
  append_phase(out, report.ml_inference);
  append_phase(out, report.local_search);
  append_phase(out, report.buffer_search);
  append_phase(out, report.range_scan);
  append_phase(out, report.buffer_insert);
  out << ',' << report.memory.model_bytes << ',' << report.memory.memo_bytes
      << ',' << report.memory.buffer_bytes << ','
      << report.memory.structure_bytes;
  return out.str();
}

std::string retrain_csv(const RunReport& report) {
  std::ostringstream out;
  out << "start_ms,duration_ms,total_keys,delta_keys,model_id\n";
  out << std::fixed << std::setprecision(3);
  for (const auto& event : report.retrains) {
    out << event.start_ms << ',' << event.duration_ms << ','
        << event.total_keys << ',' << event.delta_keys << ','
        << event.model_id << '\n';
  }
  return out.str();
}

void report_csv(const RunReport& report, const std::string& prefix) {
  write_text_file(prefix + "_summary.csv",
                  summary_csv_header() + "\n" + summary_csv_row(report) + "\n");
  write_text_file(prefix + "_retrains.csv", retrain_csv(report));
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out.flush()) throw IoError("failed writing: " + path);
}

}  // namespace stridx

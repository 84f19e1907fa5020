#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "stridx/error.hpp"
#include "stridx/runner.hpp"
#include "stridx/workload.hpp"

namespace {

stridx::Distribution parse_dist(const std::string& name) {
  if (name == "uniform") return stridx::Distribution::uniform;
  if (name == "zipfian") return stridx::Distribution::zipfian;
  if (name == "hotspot") return stridx::Distribution::hotspot;
  if (name == "exponent" || name == "exponential") {
    return stridx::Distribution::exponential;
  }
  if (name == "sequential") return stridx::Distribution::sequential;
  if (name == "latest") return stridx::Distribution::latest;
  throw stridx::ConfigError("unknown distribution: " + name);
}

// Engine spec grammar: "inline", "parallel:K", or "delay:MS".
stridx::EngineBackend parse_engine(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  unsigned arg = 0;
  if (colon != std::string::npos) {
    try {
      arg = static_cast<unsigned>(std::stoul(spec.substr(colon + 1)));
    } catch (const std::exception&) {
      throw stridx::ConfigError("bad engine argument in: " + spec);
    }
  }
  if (head == "inline") return stridx::EngineBackend::make_inline();
  if (head == "parallel") {
    if (arg == 0) throw stridx::ConfigError("parallel engine needs a count, e.g. parallel:4");
    return stridx::EngineBackend::make_parallel(arg, 1);
  }
  if (head == "delay") return stridx::EngineBackend::make_fixed_delay(arg);
  throw stridx::ConfigError("unknown engine backend: " + spec);
}

void print_report(const stridx::RunReport& report) {
  std::printf("target            %s\n",
              stridx::backend_name(report.backend).c_str());
  std::printf("ops               %llu\n",
              static_cast<unsigned long long>(report.ops));
  std::printf("elapsed_s         %.3f\n", report.elapsed_s);
  std::printf("throughput_ops_s  %.0f\n", report.throughput_ops_per_s);
  std::printf("reads/hits        %llu/%llu\n",
              static_cast<unsigned long long>(report.reads),
              static_cast<unsigned long long>(report.hits));
  std::printf("inserts           %llu\n",
              static_cast<unsigned long long>(report.inserts));
  std::printf("updates           %llu\n",
              static_cast<unsigned long long>(report.updates));
  std::printf("scans/rows        %llu/%llu\n",
              static_cast<unsigned long long>(report.scans),
              static_cast<unsigned long long>(report.scanned_rows));
  std::printf("deletes           %llu\n",
              static_cast<unsigned long long>(report.erases));
  std::printf("final_keys        %llu\n",
              static_cast<unsigned long long>(report.final_keys));
  std::printf("leaves            %llu\n",
              static_cast<unsigned long long>(report.leaf_count));
  std::printf("retrain_passes    %zu\n", report.retrains.size());
  std::printf("trainer           submitted=%llu coalesced=%llu executed=%llu "
              "fallbacks=%llu\n",
              static_cast<unsigned long long>(report.trainer_counters.submitted),
              static_cast<unsigned long long>(report.trainer_counters.coalesced),
              static_cast<unsigned long long>(report.trainer_counters.executed),
              static_cast<unsigned long long>(report.trainer_counters.fallbacks));
  auto phase = [](const char* name, const stridx::PhaseSummary& p) {
    std::printf("%-17s mean=%.0fns p99=%.0fns samples=%llu\n", name, p.mean_ns,
                p.p99_ns, static_cast<unsigned long long>(p.samples));
  };
  phase("traverse", report.traverse);
  phase("ml_inference", report.ml_inference);
  phase("local_search", report.local_search);
  phase("buffer_search", report.buffer_search);
  phase("range_scan", report.range_scan);
  phase("buffer_insert", report.buffer_insert);
  std::printf("memory_bytes      model=%llu memo=%llu buffer=%llu "
              "structure=%llu\n",
              static_cast<unsigned long long>(report.memory.model_bytes),
              static_cast<unsigned long long>(report.memory.memo_bytes),
              static_cast<unsigned long long>(report.memory.buffer_bytes),
              static_cast<unsigned long long>(report.memory.structure_bytes));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark driver for the learned string index"};

  std::string workload = "custom";
  double read = 1.0, insert = 0.0, update = 0.0, scan = 0.0, del = 0.0;
  std::string dist = "zipfian";
  std::string insert_order = "gaps";
  std::size_t keys = 100000;
  std::size_t key_len = 16;
  unsigned threads = 1;
  std::uint64_t ops = 0;
  double duration_s = 0.0;
  std::size_t scan_limit = 100;
  std::size_t leaf_size = 65536;
  std::size_t max_buffer = 1024;
  double split_mae = 64.0;
  double merge_mae = 8.0;
  std::string target = "learned";
  std::string engine = "inline";
  std::string dataset;
  std::uint64_t seed = 42;
  std::size_t sample_every = 16;
  std::string out;
  bool quiet = false;

  app.add_option("--workload", workload,
                 "Preset name (ycsb-d, ycsb-e, read-only, read-heavy, "
                 "write-heavy, churn) or 'custom'");
  app.add_option("--read", read, "Read fraction for --workload custom");
  app.add_option("--insert", insert, "Insert fraction for --workload custom");
  app.add_option("--update", update, "Update fraction for --workload custom");
  app.add_option("--delete", del, "Delete fraction for --workload custom");
  app.add_option("--scan", scan, "Scan fraction for --workload custom");
  app.add_option("--dist", dist,
                 "Key pick distribution: sequential, zipfian, hotspot, "
                 "exponent, uniform, latest");
  app.add_option("--insert-order", insert_order,
                 "Where inserts land: gaps or append");
  app.add_option("--keys", keys, "Initial corpus size");
  app.add_option("--key-len", key_len, "Synthetic key width / encoding width");
  app.add_option("--threads", threads, "Serving threads");
  app.add_option("--ops", ops, "Operation budget (exclusive with --duration)");
  app.add_option("--duration", duration_s,
                 "Run duration in seconds (exclusive with --ops)");
  app.add_option("--scan-limit", scan_limit, "Rows per range scan");
  app.add_option("--leaf-size", leaf_size, "Target leaf size");
  app.add_option("--max-buffer", max_buffer, "Per-leaf insert buffer capacity");
  app.add_option("--split-mae", split_mae, "Split threshold on leaf MAE");
  app.add_option("--merge-mae", merge_mae, "Merge threshold on leaf MAE");
  app.add_option("--target", target, "learned, learned-no-memo, or btree");
  app.add_option("--backend", engine,
                 "Training engine: inline, parallel:K, or delay:MS");
  app.add_option("--dataset", dataset, "Key file replacing the synthetic corpus");
  app.add_option("--seed", seed, "Workload seed");
  app.add_option("--sample-every", sample_every,
                 "Attach a phase probe to every Nth op");
  app.add_option("--out", out,
                 "CSV prefix: writes <out>_summary.csv and <out>_retrains.csv");
  app.add_flag("--quiet", quiet, "Suppress the human-readable report");

  CLI11_PARSE(app, argc, argv);

  try {
    stridx::RunnerConfig cfg;
    if (workload == "custom") {
      cfg.workload.mix = {read, insert, update, scan, del};
      cfg.workload.dist = parse_dist(dist);
      cfg.workload.insert_order = insert_order == "append"
                                      ? stridx::InsertOrder::append
                                      : stridx::InsertOrder::gaps;
      cfg.workload.initial_keys = keys;
      cfg.workload.key_len = key_len;
      cfg.workload.seed = seed;
    } else {
      cfg.workload = stridx::make_preset(workload, keys, key_len, seed);
      if (app.count("--dist") > 0) cfg.workload.dist = parse_dist(dist);
    }
    cfg.workload.scan_limit = scan_limit;
    cfg.backend = stridx::parse_backend(target);
    cfg.index.target_leaf_size = leaf_size;
    cfg.index.max_buffer = max_buffer;
    cfg.index.split_mae_threshold = split_mae;
    cfg.index.merge_mae_threshold = merge_mae;
    cfg.engine = parse_engine(engine);
    cfg.serve_threads = threads;
    cfg.total_ops = ops;
    cfg.duration_ms = static_cast<std::uint64_t>(duration_s * 1000.0);
    cfg.sample_every = sample_every;
    if (!dataset.empty()) {
      auto loaded = stridx::load_dataset(dataset, key_len);
      if (loaded.truncated > 0) {
        std::fprintf(stderr, "warning: truncated %zu oversized keys to %zu bytes\n",
                     loaded.truncated, key_len);
      }
      cfg.dataset_keys = std::move(loaded.keys);
    }

    const auto report = stridx::run_benchmark(cfg);

    if (!quiet) print_report(report);
    if (!out.empty()) stridx::report_csv(report, out);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}

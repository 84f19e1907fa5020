#include "stridx/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "stridx/error.hpp"

namespace stridx {

namespace {

constexpr char kBase36Digits[] = "0123456789abcdefghijklmnopqrstuvwxyz";
constexpr double kZipfTheta = 0.99;
constexpr double kHotOpFraction = 0.90;
constexpr double kHotKeyFraction = 0.10;

// Largest slot representable in key_len base-36 digits, saturating.
std::uint64_t slot_capacity(std::size_t key_len) {
  std::uint64_t cap = 1;
  for (std::size_t i = 0; i < key_len; ++i) {
    if (cap > std::numeric_limits<std::uint64_t>::max() / 36) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    cap *= 36;
  }
  return cap;
}

std::uint64_t mix_hash(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

void validate(const WorkloadConfig& cfg, unsigned thread_id,
              unsigned thread_count) {
  if (cfg.initial_keys == 0) {
    throw ConfigError("workload needs at least one initial key");
  }
  if (cfg.key_len == 0) throw ConfigError("key_len must be positive");
  const double parts[] = {cfg.mix.read, cfg.mix.insert, cfg.mix.update,
                          cfg.mix.scan, cfg.mix.erase};
  double sum = 0.0;
  for (double p : parts) {
    if (p < 0.0) throw ConfigError("mix fractions must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("mix fractions must sum to 1");
  }
  if (cfg.mix.scan > 0.0 && cfg.scan_limit == 0) {
    throw ConfigError("scan workloads need a positive scan_limit");
  }
  if (thread_count == 0 || thread_id >= thread_count) {
    throw ConfigError("thread_id must be below thread_count");
  }
  const std::uint64_t cap = slot_capacity(cfg.key_len);
  if (cfg.initial_keys > cap / 2) {
    throw ConfigError("key_len too short for the requested corpus size");
  }
}

}  // namespace

WorkloadConfig make_preset(const std::string& name, std::size_t initial_keys,
                           std::size_t key_len, std::uint64_t seed) {
  WorkloadConfig cfg;
  cfg.initial_keys = initial_keys;
  cfg.key_len = key_len;
  cfg.seed = seed;
  if (name == "read-only") {
    cfg.mix = {1.0, 0.0, 0.0, 0.0, 0.0};
    cfg.dist = Distribution::zipfian;
  } else if (name == "read-heavy") {
    cfg.mix = {0.95, 0.05, 0.0, 0.0, 0.0};
    cfg.dist = Distribution::zipfian;
    cfg.insert_order = InsertOrder::gaps;
  } else if (name == "ycsb-d") {
    cfg.mix = {0.95, 0.05, 0.0, 0.0, 0.0};
    cfg.dist = Distribution::latest;
    cfg.insert_order = InsertOrder::append;
  } else if (name == "ycsb-e") {
    cfg.mix = {0.0, 0.05, 0.0, 0.95, 0.0};
    cfg.dist = Distribution::zipfian;
    cfg.insert_order = InsertOrder::gaps;
  } else if (name == "write-heavy") {
    cfg.mix = {0.5, 0.5, 0.0, 0.0, 0.0};
    cfg.dist = Distribution::uniform;
    cfg.insert_order = InsertOrder::gaps;
  } else if (name == "churn") {
    cfg.mix = {0.3, 0.4, 0.0, 0.0, 0.3};
    cfg.dist = Distribution::uniform;
    cfg.insert_order = InsertOrder::gaps;
  } else {
    throw ConfigError("unknown workload preset: " + name);
  }
  return cfg;
}

QueryStream::QueryStream(const WorkloadConfig& cfg, unsigned thread_id,
                         unsigned thread_count)
    : cfg_(cfg),
      thread_id_(thread_id),
      thread_count_(thread_count),
      rng_(cfg.seed),
      theta_(kZipfTheta) {
  validate(cfg, thread_id, thread_count);
  zeta2_ = 1.0 + std::pow(0.5, theta_);
}

std::string QueryStream::slot_key(std::uint64_t slot, std::size_t key_len) {
  if (key_len == 0) throw ConfigError("key_len must be positive");
  if (slot >= slot_capacity(key_len)) {
    throw ConfigError("key slot exceeds base-36 capacity of key_len");
  }
  std::string key(key_len, kBase36Digits[0]);
  for (std::size_t i = key_len; slot != 0 && i-- > 0;) {
    key[i] = kBase36Digits[slot % 36];
    slot /= 36;
  }
  return key;
}

std::vector<std::string> QueryStream::corpus(const WorkloadConfig& cfg) {
  validate(cfg, 0, 1);
  std::vector<std::string> keys;
  keys.reserve(cfg.initial_keys);
  for (std::uint64_t i = 0; i < cfg.initial_keys; ++i) {
    keys.push_back(slot_key(2 * i, cfg.key_len));
  }
  return keys;
}

Op QueryStream::next() {
  for (;;) {
    const bool mine = op_counter_ % thread_count_ == thread_id_;
    ++op_counter_;
    Op op = generate();
    if (mine) return op;
  }
}

double QueryStream::next_unit() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

Op QueryStream::generate() {
  Op op;
  const double pick = next_unit();
  double edge = cfg_.mix.read;
  if (pick < edge) {
    op.type = OpType::read;
  } else if (pick < (edge += cfg_.mix.insert)) {
    op.type = OpType::insert;
  } else if (pick < (edge += cfg_.mix.update)) {
    op.type = OpType::update;
  } else if (pick < (edge += cfg_.mix.scan)) {
    op.type = OpType::scan;
  } else {
    op.type = OpType::erase;
  }

  if (op.type == OpType::insert) {
    op.key = next_insert_key();
    op.value = rng_();
    return op;
  }
  const std::uint64_t population = cfg_.initial_keys + inserted_;
  op.key = key_for_index(pick_index(population));
  if (op.type == OpType::update) op.value = rng_();
  if (op.type == OpType::scan) op.scan_limit = cfg_.scan_limit;
  return op;
}

void QueryStream::ensure_zeta(std::uint64_t population) {
  for (std::uint64_t i = zeta_count_ + 1; i <= population; ++i) {
    zeta_n_ += 1.0 / std::pow(static_cast<double>(i), theta_);
  }
  zeta_count_ = std::max(zeta_count_, population);
}

std::uint64_t QueryStream::zipf_rank(std::uint64_t population) {
  ensure_zeta(population);
  const double n = static_cast<double>(population);
  const double alpha = 1.0 / (1.0 - theta_);
  const double eta =
      (1.0 - std::pow(2.0 / n, 1.0 - theta_)) / (1.0 - zeta2_ / zeta_n_);
  const double u = next_unit();
  const double uz = u * zeta_n_;
  if (uz < 1.0) return 0;
  if (uz < 1.0 + std::pow(0.5, theta_)) return 1;
  const auto rank =
      static_cast<std::uint64_t>(n * std::pow(eta * u - eta + 1.0, alpha));
  return std::min(rank, population - 1);
}

std::uint64_t QueryStream::pick_index(std::uint64_t population) {
  switch (cfg_.dist) {
    case Distribution::uniform:
      return rng_() % population;
    case Distribution::zipfian:
      // Hash the rank so the hot set is spread across the key space.
      return mix_hash(zipf_rank(population)) % population;
    case Distribution::hotspot: {
      const std::uint64_t hot =
          std::max<std::uint64_t>(1, static_cast<std::uint64_t>(
                                         static_cast<double>(population) *
                                         kHotKeyFraction));
      if (next_unit() < kHotOpFraction || hot >= population) {
        return rng_() % hot;
      }
      return hot + rng_() % (population - hot);
    }
    case Distribution::exponential: {
      const double lambda = 10.0 / static_cast<double>(population);
      const double draw = -std::log(1.0 - next_unit()) / lambda;
      return std::min(static_cast<std::uint64_t>(draw), population - 1);
    }
    case Distribution::sequential:
      return sequential_at_++ % population;
    case Distribution::latest:
      return population - 1 - zipf_rank(population);
  }
  throw ConfigError("unhandled distribution");
}

std::string QueryStream::key_for_index(std::uint64_t index) const {
  if (index < cfg_.initial_keys) {
    return slot_key(2 * index, cfg_.key_len);
  }
  const std::uint64_t nth = index - cfg_.initial_keys;
  if (cfg_.insert_order == InsertOrder::append) {
    return slot_key(2 * cfg_.initial_keys + nth, cfg_.key_len);
  }
  return slot_key(2 * (mix_hash(nth) % cfg_.initial_keys) + 1, cfg_.key_len);
}

std::string QueryStream::next_insert_key() {
  return key_for_index(cfg_.initial_keys + inserted_++);
}

Dataset load_dataset(const std::string& path, std::size_t key_len) {
  if (key_len == 0) throw ConfigError("key_len must be positive");
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset file: " + path);
  Dataset out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.size() > key_len) {
      line.resize(key_len);
      ++out.truncated;
    }
    out.keys.push_back(line);
  }
  if (out.keys.empty()) throw DatasetError("dataset holds no keys: " + path);
  std::sort(out.keys.begin(), out.keys.end());
  out.keys.erase(std::unique(out.keys.begin(), out.keys.end()),
                 out.keys.end());
  return out;
}

}  // namespace stridx

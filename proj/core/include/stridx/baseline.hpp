#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stridx/index.hpp"

namespace stridx {

// Reference target: a red-black tree under one reader/writer lock. Used by
// the benchmark runner as the non-learned baseline and by tests as the
// correctness oracle.
class OrderedMapIndex {
 public:
  void bulk_load(const std::vector<std::string>& keys,
                 const std::vector<std::uint64_t>& values) {
    std::unique_lock lock(mu_);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      map_.emplace(keys[i], values[i]);
    }
  }

  UpsertResult insert(std::string_view key, std::uint64_t value) {
    std::unique_lock lock(mu_);
    auto [it, inserted] = map_.insert_or_assign(std::string(key), value);
    (void)it;
    return inserted ? UpsertResult::inserted : UpsertResult::updated;
  }

  std::optional<std::uint64_t> lookup(std::string_view key) const {
    std::shared_lock lock(mu_);
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

  bool erase(std::string_view key) {
    std::unique_lock lock(mu_);
    auto it = map_.find(key);
    if (it == map_.end()) return false;
    map_.erase(it);
    return true;
  }

  std::vector<std::pair<std::string, std::uint64_t>> range_scan(
      std::string_view start, std::size_t limit) const {
    std::shared_lock lock(mu_);
    std::vector<std::pair<std::string, std::uint64_t>> out;
    for (auto it = map_.lower_bound(start);
         it != map_.end() && out.size() < limit; ++it) {
      out.emplace_back(it->first, it->second);
    }
    return out;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return map_.size();
  }

  MemoryBreakdown memory() const {
    std::shared_lock lock(mu_);
    MemoryBreakdown m;
    // Node overhead approximation: three child/parent pointers plus color
    // word, the string object, and the payload. Key characters are excluded
    // to match the learned index's accounting.
    m.structure_bytes =
        map_.size() *
        (4 * sizeof(void*) + sizeof(std::string) + sizeof(std::uint64_t));
    return m;
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::uint64_t, std::less<>> map_;
};

}  // namespace stridx

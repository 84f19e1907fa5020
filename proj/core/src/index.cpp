#include "stridx/index.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <shared_mutex>
#include <thread>
#include <unordered_set>

#include "stridx/error.hpp"
#include "stridx/iqrd.hpp"
#include "stridx/keycodec.hpp"
#include "stridx/linalg.hpp"

namespace stridx {

namespace detail {

namespace {

using Clock = std::chrono::steady_clock;

bool key_less(const std::string& a, std::string_view b) { return std::string_view(a) < b; }
bool key_greater(std::string_view a, const std::string& b) { return a < std::string_view(b); }

// Stamps successive phase durations into a probe; free when no probe given.
class PhaseTimer {
 public:
  explicit PhaseTimer(PhaseProbe* probe) : probe_(probe) {
    if (probe_ != nullptr) last_ = Clock::now();
  }
  void lap(std::uint64_t PhaseProbe::* field) {
    if (probe_ == nullptr) return;
    auto t = Clock::now();
    probe_->*field +=
        std::chrono::duration_cast<std::chrono::nanoseconds>(t - last_).count();
    last_ = t;
  }

 private:
  PhaseProbe* probe_;
  Clock::time_point last_;
};

}  // namespace

// Immutable leaf snapshot. The arrays of values and delete flags are the one
// mutable exception: they are updated in place atomically so deletes and
// value updates need no republish.
struct TrainedCore {
  std::vector<std::string> keys;  // sorted; may hold a flagged twin of a live key
  std::unique_ptr<std::atomic<std::uint64_t>[]> values;
  std::unique_ptr<std::atomic<std::uint8_t>[]> flags;  // 1 = deleted
  MemoizedFactor memo{RFactor(1), 0, 0};
  Vector xty;
  LinearModel model;
  mutable std::atomic<std::int64_t> live_count{0};

  std::size_t size() const noexcept { return keys.size(); }
};

struct PendingOp {
  enum class Kind { update, erase } kind;
  std::string key;
  std::uint64_t value;
};

struct Leaf {
  Leaf(std::uint64_t leaf_id, std::size_t klen) : id(leaf_id), key_len(klen) {}

  const std::uint64_t id;
  const std::size_t key_len;

  // Accessed only through std::atomic_load / std::atomic_store.
  std::shared_ptr<const TrainedCore> core;

  // Guards everything below.
  mutable std::shared_mutex mu;
  std::vector<std::pair<std::string, std::uint64_t>> buffer;  // unsorted, unique keys
  std::shared_ptr<const std::vector<std::pair<std::string, std::uint64_t>>> draining;
  std::unordered_set<std::string> draining_deleted;
  std::vector<PendingOp> pending;  // ops applied to the snapshot mid-training
  bool in_progress = false;
  // Atomic so lookup's lock-free fast path may check it; set once, under the
  // structural mutex plus this leaf's exclusive lock.
  std::atomic<bool> retired{false};
  std::atomic<bool> retrain_queued{false};
};

struct RouterVersion {
  // leaves[i] owns keys in [pivots[i-1], pivots[i]); pivots has size()-1 entries.
  std::vector<std::string> pivots;
  std::vector<std::shared_ptr<Leaf>> leaves;

  std::size_t route(std::string_view key) const {
    auto it = std::upper_bound(pivots.begin(), pivots.end(), key, key_greater);
    return static_cast<std::size_t>(it - pivots.begin());
  }
  std::shared_ptr<Leaf> find(std::uint64_t id) const {
    for (const auto& l : leaves) {
      if (l->id == id) return l;
    }
    return nullptr;
  }
  std::ptrdiff_t position(std::uint64_t id) const {
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (leaves[i]->id == id) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
  }
};

}  // namespace detail

using detail::Clock;
using detail::Leaf;
using detail::PendingOp;
using detail::PhaseTimer;
using detail::RouterVersion;
using detail::TrainedCore;

struct StringIndex::Impl {
  explicit Impl(const IndexConfig& cfg) : cfg_(cfg), epoch0_(Clock::now()) {
    auto first = std::make_shared<Leaf>(next_leaf_id_++, cfg_.key_len);
    std::atomic_store(&first->core, empty_core(0));
    auto router = std::make_shared<RouterVersion>();
    router->leaves.push_back(std::move(first));
    std::atomic_store(&router_, std::shared_ptr<const RouterVersion>(std::move(router)));
  }

  //--- small helpers -------------------------------------------------------

  std::size_t features() const noexcept { return cfg_.key_len + 1; }

  std::shared_ptr<const TrainedCore> empty_core(std::uint64_t epoch) const {
    auto core = std::make_shared<TrainedCore>();
    core->memo = MemoizedFactor{RFactor(features()), 0, epoch};
    core->xty = Vector(features());
    core->model.beta = Vector(features());
    core->model.epoch = epoch;
    return core;
  }

  std::shared_ptr<const RouterVersion> router() const {
    return std::atomic_load(&router_);
  }

  std::shared_ptr<Leaf> leaf_by_id(std::uint64_t id) const { return router()->find(id); }

  void fire_retrain_request(std::uint64_t id, RetrainReason reason) {
    auto sink = std::atomic_load(&sink_);
    if (sink && *sink) (*sink)(id, reason);
  }

  double ms_since_epoch(Clock::time_point t) const {
    return std::chrono::duration<double, std::milli>(t - epoch0_).count();
  }

  void log_event(Clock::time_point start, Clock::time_point end, std::uint64_t total,
                 std::uint64_t delta, std::uint64_t id) {
    std::lock_guard<std::mutex> g(log_mu_);
    log_.push_back(RetrainEvent{ms_since_epoch(start),
                                std::chrono::duration<double, std::milli>(end - start).count(),
                                total, delta, id});
  }

  // Bounded model-guided search. The window [slot+err_min, slot+err_max] is
  // complete for every trained key by the bounds-fitting contract.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  struct Window {
    std::size_t lo = 0;
    std::size_t hi = 0;  // inclusive
    bool empty = true;
  };

  static Window predict_window(const TrainedCore& core, std::string_view key) {
    Window w;
    const std::size_t n = core.size();
    if (n == 0) return w;
    const auto slot = round_half_away(predict(core.model, key));
    const auto last = static_cast<std::int64_t>(n) - 1;
    w.lo = static_cast<std::size_t>(std::clamp<std::int64_t>(slot + core.model.err_min, 0, last));
    w.hi = static_cast<std::size_t>(std::clamp<std::int64_t>(slot + core.model.err_max, 0, last));
    w.empty = false;
    return w;
  }

  // Index of the live entry holding `key` within the window, or npos.
  static std::size_t scan_window(const TrainedCore& core, std::string_view key, Window w) {
    if (w.empty) return npos;
    auto begin = core.keys.begin() + static_cast<std::ptrdiff_t>(w.lo);
    auto end = core.keys.begin() + static_cast<std::ptrdiff_t>(w.hi) + 1;
    auto it = std::lower_bound(begin, end, key, detail::key_less);
    for (; it != end && std::string_view(*it) == key; ++it) {
      const auto i = static_cast<std::size_t>(it - core.keys.begin());
      if (core.flags[i].load() == 0) return i;
    }
    return npos;
  }

  static std::size_t core_find_live(const TrainedCore& core, std::string_view key) {
    return scan_window(core, key, predict_window(core, key));
  }

  //--- serving operations --------------------------------------------------

  std::optional<std::uint64_t> lookup(std::string_view key, PhaseProbe* probe) const {
    PhaseTimer timer(probe);
    for (;;) {
      auto r = router();
      auto leaf = r->leaves[r->route(key)];
      timer.lap(&PhaseProbe::traverse_ns);

      auto core = std::atomic_load(&leaf->core);
      const Window w = predict_window(*core, key);
      timer.lap(&PhaseProbe::ml_inference_ns);
      const std::size_t i = scan_window(*core, key, w);
      if (i != npos) {
        const std::uint64_t v = core->values[i].load();
        if (core->flags[i].load() == 0 && !leaf->retired.load() &&
            std::atomic_load(&leaf->core) == core) {
          // The flag re-check proves the value read was live; the leaf and
          // core pointer being unchanged prove the probed row was still the
          // serving row when the value was read.
          timer.lap(&PhaseProbe::local_search_ns);
          return v;
        }
        // Deleted, republished, or restructured mid-probe: slow path.
      }
      timer.lap(&PhaseProbe::local_search_ns);

      std::shared_lock<std::shared_mutex> g(leaf->mu);
      if (leaf->retired.load()) {
        timer.lap(&PhaseProbe::buffer_search_ns);
        g.unlock();
        std::this_thread::yield();
        continue;  // routed via a stale router; reload
      }
      // A publish between the lock-free probe and this lock swaps in a core
      // holding freshly drained rows; probe the current core under the lock,
      // where no publish can interleave.
      if (auto fresh = std::atomic_load(&leaf->core); fresh != core) {
        const std::size_t j = core_find_live(*fresh, key);
        if (j != npos) {
          timer.lap(&PhaseProbe::buffer_search_ns);
          return fresh->values[j].load();
        }
      }
      for (const auto& [k, v] : leaf->buffer) {
        if (k == key) {
          timer.lap(&PhaseProbe::buffer_search_ns);
          return v;
        }
      }
      if (leaf->draining != nullptr && !leaf->draining_deleted.count(std::string(key))) {
        for (const auto& [k, v] : *leaf->draining) {
          if (k == key) {
            timer.lap(&PhaseProbe::buffer_search_ns);
            return v;
          }
        }
      }
      timer.lap(&PhaseProbe::buffer_search_ns);
      return std::nullopt;
    }
  }

  UpsertResult insert(std::string_view key, std::uint64_t value, PhaseProbe* probe) {
    if (key.empty()) throw EmptyKeyError("insert: empty key");
    PhaseTimer timer(probe);
    for (;;) {
      auto r = router();
      auto leaf = r->leaves[r->route(key)];
      timer.lap(&PhaseProbe::traverse_ns);

      bool request_retrain = false;
      bool run_blocking = false;
      UpsertResult result = UpsertResult::inserted;
      {
        std::unique_lock<std::shared_mutex> g(leaf->mu);
        if (leaf->retired) {
          timer.lap(&PhaseProbe::buffer_insert_ns);
          std::this_thread::yield();
          continue;  // routed via a stale router; reload
        }
        bool done = false;
        for (auto& [k, v] : leaf->buffer) {
          if (k == key) {
            v = value;
            result = UpsertResult::updated;
            done = true;
            break;
          }
        }
        if (!done) {
          auto core = std::atomic_load(&leaf->core);
          const std::size_t i = core_find_live(*core, key);
          if (i != npos) {
            core->values[i].store(value);
            if (leaf->in_progress) {
              leaf->pending.push_back({PendingOp::Kind::update, std::string(key), value});
            }
            result = UpsertResult::updated;
            done = true;
          }
        }
        if (!done && leaf->draining != nullptr &&
            !leaf->draining_deleted.count(std::string(key))) {
          for (const auto& [k, v] : *leaf->draining) {
            if (k == key) {
              // The newer value rides in the buffer; buffer-before-core
              // search order keeps it authoritative until the publish
              // reconciles the duplicate.
              leaf->buffer.emplace_back(std::string(key), value);
              result = UpsertResult::updated;
              done = true;
              break;
            }
          }
        }
        if (!done) {
          leaf->buffer.emplace_back(std::string(key), value);
          result = UpsertResult::inserted;
        }
        if (leaf->buffer.size() >= cfg_.max_buffer && !leaf->in_progress) {
          if (cfg_.blocking_full_retrain) {
            run_blocking = true;
          } else if (!leaf->retrain_queued.exchange(true)) {
            request_retrain = true;
          }
        }
      }
      timer.lap(&PhaseProbe::buffer_insert_ns);
      if (run_blocking) {
        // Non-memoized mode: the serving thread pays for a full rebuild.
        cold_train(leaf->id, 1, /*purge=*/true);
        maybe_restructure(leaf->id);
      } else if (request_retrain) {
        fire_retrain_request(leaf->id, RetrainReason::buffer_full);
      }
      return result;
    }
  }

  bool erase(std::string_view key, PhaseProbe* probe) {
    if (key.empty()) throw EmptyKeyError("erase: empty key");
    PhaseTimer timer(probe);
    for (;;) {
      auto r = router();
      auto leaf = r->leaves[r->route(key)];
      timer.lap(&PhaseProbe::traverse_ns);

      std::unique_lock<std::shared_mutex> g(leaf->mu);
      if (leaf->retired) {
        timer.lap(&PhaseProbe::local_search_ns);
        std::this_thread::yield();
        continue;
      }
      // Core first, like lookup: a live core hit rules out the buffer, since
      // upserts of trained keys update the core row in place.
      auto core = std::atomic_load(&leaf->core);
      const std::size_t i = core_find_live(*core, key);
      timer.lap(&PhaseProbe::local_search_ns);
      if (i != npos) {
        // Lazy delete: flag first, then clear the payload. The factor and
        // the model are untouched; a later cold pass purges the row.
        core->flags[i].store(1);
        core->values[i].store(0);
        core->live_count.fetch_sub(1);
        if (leaf->in_progress) {
          leaf->pending.push_back({PendingOp::Kind::erase, std::string(key), 0});
        }
        return true;
      }
      for (auto it = leaf->buffer.begin(); it != leaf->buffer.end(); ++it) {
        if (it->first == key) {
          leaf->buffer.erase(it);
          // The key may also sit in the draining snapshot (re-inserted while
          // a training pass was in flight). Mask that copy too, or the
          // publish would resurrect it with the stale value.
          if (leaf->draining != nullptr &&
              !leaf->draining_deleted.count(std::string(key))) {
            for (const auto& [k, v] : *leaf->draining) {
              if (k == key) {
                leaf->draining_deleted.insert(std::string(key));
                leaf->pending.push_back({PendingOp::Kind::erase, std::string(key), 0});
                break;
              }
            }
          }
          timer.lap(&PhaseProbe::buffer_search_ns);
          return true;
        }
      }
      if (leaf->draining != nullptr && !leaf->draining_deleted.count(std::string(key))) {
        for (const auto& [k, v] : *leaf->draining) {
          if (k == key) {
            leaf->draining_deleted.insert(std::string(key));
            leaf->pending.push_back({PendingOp::Kind::erase, std::string(key), 0});
            timer.lap(&PhaseProbe::buffer_search_ns);
            return true;
          }
        }
      }
      timer.lap(&PhaseProbe::buffer_search_ns);
      return false;
    }
  }

  std::vector<std::pair<std::string, std::uint64_t>> range_scan(std::string_view start,
                                                                std::size_t limit,
                                                                PhaseProbe* probe) const {
    PhaseTimer timer(probe);
    std::vector<std::pair<std::string, std::uint64_t>> out;
    if (limit == 0) return out;
    std::string cursor(start);
    bool cursor_inclusive = true;

    auto r = router();
    std::size_t li = r->route(cursor);
    timer.lap(&PhaseProbe::traverse_ns);

    while (out.size() < limit) {
      if (li >= r->leaves.size()) break;
      auto leaf = r->leaves[li];

      // Overlay = buffered + draining rows in range, newest copy winning.
      std::vector<std::pair<std::string, std::uint64_t>> overlay;
      std::shared_ptr<const TrainedCore> core;
      {
        std::shared_lock<std::shared_mutex> g(leaf->mu);
        if (leaf->retired) {
          // Stale router: re-resolve the cursor position on the live tree.
          r = router();
          li = r->route(cursor);
          continue;
        }
        core = std::atomic_load(&leaf->core);
        auto in_range = [&](const std::string& k) {
          return cursor_inclusive ? !detail::key_less(k, cursor) : std::string_view(cursor) < k;
        };
        for (const auto& e : leaf->buffer) {
          if (in_range(e.first)) overlay.push_back(e);
        }
        if (leaf->draining != nullptr) {
          for (const auto& e : *leaf->draining) {
            if (!in_range(e.first) || leaf->draining_deleted.count(e.first)) continue;
            bool shadowed = false;
            for (const auto& b : leaf->buffer) {
              if (b.first == e.first) {
                shadowed = true;
                break;
              }
            }
            if (!shadowed) overlay.push_back(e);
          }
        }
      }
      std::sort(overlay.begin(), overlay.end());

      auto ob = overlay.begin();
      auto it = std::lower_bound(core->keys.begin(), core->keys.end(), std::string_view(cursor),
                                 detail::key_less);
      if (!cursor_inclusive) {
        while (it != core->keys.end() && std::string_view(*it) == cursor) ++it;
      }
      auto emit = [&](const std::string& k, std::uint64_t v) {
        out.emplace_back(k, v);
        cursor = k;
        cursor_inclusive = false;
      };
      while (out.size() < limit && (it != core->keys.end() || ob != overlay.end())) {
        bool take_core;
        if (it == core->keys.end()) {
          take_core = false;
        } else if (ob == overlay.end()) {
          take_core = true;
        } else if (*it == ob->first) {
          // The overlay copy is newer than the trained one.
          ++it;
          continue;
        } else {
          take_core = *it < ob->first;
        }
        if (take_core) {
          const auto i = static_cast<std::size_t>(it - core->keys.begin());
          if (core->flags[i].load() == 0) {
            const std::uint64_t v = core->values[i].load();
            if (core->flags[i].load() == 0) emit(*it, v);
          }
          ++it;
        } else {
          emit(ob->first, ob->second);
          ++ob;
        }
      }
      ++li;
    }
    timer.lap(&PhaseProbe::range_scan_ns);
    return out;
  }

  //--- training-surface helpers --------------------------------------------

  struct TrainingSnapshot {
    bool ok = false;
    std::shared_ptr<Leaf> leaf;
    std::shared_ptr<const TrainedCore> core;
    std::vector<std::pair<std::string, std::uint64_t>> drained;  // sorted by key
    std::vector<std::uint8_t> flags;
    Clock::time_point start;
  };

  // Freezes a leaf for one training pass: moves the buffer aside, snapshots
  // the delete flags, and marks the leaf in_progress so concurrent writers
  // start logging pending ops.
  TrainingSnapshot begin_training(std::uint64_t id) {
    TrainingSnapshot snap;
    snap.start = Clock::now();
    auto leaf = leaf_by_id(id);
    if (leaf == nullptr) return snap;
    std::unique_lock<std::shared_mutex> g(leaf->mu);
    if (leaf->retired || leaf->in_progress) return snap;
    leaf->in_progress = true;
    leaf->retrain_queued.store(false);
    auto drained_shared =
        std::make_shared<std::vector<std::pair<std::string, std::uint64_t>>>(
            std::move(leaf->buffer));
    leaf->buffer.clear();
    leaf->draining = drained_shared;
    leaf->draining_deleted.clear();
    leaf->pending.clear();
    snap.core = std::atomic_load(&leaf->core);
    snap.flags.resize(snap.core->size());
    for (std::size_t i = 0; i < snap.flags.size(); ++i) {
      snap.flags[i] = snap.core->flags[i].load();
    }
    g.unlock();
    snap.leaf = std::move(leaf);
    snap.drained = *drained_shared;
    std::sort(snap.drained.begin(), snap.drained.end());
    snap.ok = true;
    return snap;
  }

  struct MergedRows {
    std::vector<std::string> keys;
    std::vector<std::uint64_t> values;
    std::vector<std::uint8_t> flags;
    std::vector<std::uint64_t> new_positions;  // slots filled by drained rows
    std::uint64_t live = 0;
  };

  // Interleaves the frozen core with the drained buffer in key order.
  // With purge set, flagged rows vanish; otherwise they keep their slots so
  // the factor still matches the physical rows. A drained key equal to a
  // live trained key updates that row in place instead of adding a new one.
  static MergedRows merge_rows(const TrainedCore& core, const std::vector<std::uint8_t>& flags,
                               const std::vector<std::pair<std::string, std::uint64_t>>& drained,
                               bool purge) {
    MergedRows out;
    const std::size_t n0 = core.size();
    out.keys.reserve(n0 + drained.size());
    out.values.reserve(n0 + drained.size());
    out.flags.reserve(n0 + drained.size());
    std::size_t i = 0;
    std::size_t j = 0;
    auto emit_core = [&](std::size_t idx) {
      if (purge && flags[idx] != 0) return;
      out.keys.push_back(core.keys[idx]);
      out.values.push_back(core.values[idx].load());
      out.flags.push_back(purge ? 0 : flags[idx]);
      if (flags[idx] == 0) ++out.live;
    };
    auto emit_new = [&](const std::pair<std::string, std::uint64_t>& e) {
      out.new_positions.push_back(out.keys.size());
      out.keys.push_back(e.first);
      out.values.push_back(e.second);
      out.flags.push_back(0);
      ++out.live;
    };
    while (i < n0 || j < drained.size()) {
      if (j == drained.size() || (i < n0 && core.keys[i] < drained[j].first)) {
        emit_core(i++);
      } else if (i == n0 || drained[j].first < core.keys[i]) {
        emit_new(drained[j++]);
      } else {
        // Equal keys: emit the trained copies first (stable old-first
        // order), updating the live one in place if present.
        bool healed = false;
        const std::string& k = core.keys[i];
        while (i < n0 && core.keys[i] == k) {
          if (flags[i] == 0 && !healed) {
            if (purge) {
              out.keys.push_back(core.keys[i]);
              out.values.push_back(drained[j].second);
              out.flags.push_back(0);
              ++out.live;
            } else {
              emit_core(i);
              out.values.back() = drained[j].second;
            }
            healed = true;
          } else {
            emit_core(i);
          }
          ++i;
        }
        if (!healed) emit_new(drained[j]);
        ++j;
      }
    }
    return out;
  }

  // Assembles an immutable core around merged rows plus trained state.
  static std::shared_ptr<TrainedCore> build_core(MergedRows rows, MemoizedFactor memo,
                                                 Vector xty, LinearModel model) {
    auto core = std::make_shared<TrainedCore>();
    const std::size_t n = rows.keys.size();
    core->keys = std::move(rows.keys);
    core->values = std::make_unique<std::atomic<std::uint64_t>[]>(n);
    core->flags = std::make_unique<std::atomic<std::uint8_t>[]>(n);
    for (std::size_t i = 0; i < n; ++i) {
      core->values[i].store(rows.values[i], std::memory_order_relaxed);
      core->flags[i].store(rows.flags[i], std::memory_order_relaxed);
    }
    core->memo = std::move(memo);
    core->xty = std::move(xty);
    core->model = std::move(model);
    core->live_count.store(static_cast<std::int64_t>(rows.live));
    return core;
  }

  // Applies writer ops that raced with the training pass, in arrival order,
  // directly onto the not-yet-published core.
  static void replay_pending(TrainedCore& core, const std::vector<PendingOp>& ops) {
    for (const auto& op : ops) {
      auto [lo, hi] = std::equal_range(core.keys.begin(), core.keys.end(), op.key);
      for (auto it = lo; it != hi; ++it) {
        const auto i = static_cast<std::size_t>(it - core.keys.begin());
        if (core.flags[i].load(std::memory_order_relaxed) != 0) continue;
        if (op.kind == PendingOp::Kind::update) {
          core.values[i].store(op.value, std::memory_order_relaxed);
        } else {
          core.flags[i].store(1, std::memory_order_relaxed);
          core.values[i].store(0, std::memory_order_relaxed);
          core.live_count.fetch_sub(1, std::memory_order_relaxed);
        }
        break;
      }
    }
  }

  // Swaps the new core in and reconciles racing buffer entries: a buffered
  // key that is now live in the core becomes an in-place update, keeping the
  // no-duplicate invariant between buffer and core.
  void publish_core(Leaf& leaf, std::shared_ptr<TrainedCore> core, bool* requeue) {
    std::unique_lock<std::shared_mutex> g(leaf.mu);
    replay_pending(*core, leaf.pending);
    auto keep = leaf.buffer.begin();
    for (auto it = leaf.buffer.begin(); it != leaf.buffer.end(); ++it) {
      auto [lo, hi] = std::equal_range(core->keys.begin(), core->keys.end(), it->first);
      bool applied = false;
      for (auto kit = lo; kit != hi && !applied; ++kit) {
        const auto i = static_cast<std::size_t>(kit - core->keys.begin());
        if (core->flags[i].load(std::memory_order_relaxed) == 0) {
          core->values[i].store(it->second, std::memory_order_relaxed);
          applied = true;
        }
      }
      if (!applied) {
        if (keep != it) *keep = std::move(*it);
        ++keep;
      }
    }
    leaf.buffer.erase(keep, leaf.buffer.end());
    std::atomic_store(&leaf.core, std::shared_ptr<const TrainedCore>(std::move(core)));
    leaf.draining = nullptr;
    leaf.draining_deleted.clear();
    leaf.pending.clear();
    leaf.in_progress = false;
    if (requeue != nullptr) {
      *requeue = !cfg_.blocking_full_retrain && leaf.buffer.size() >= cfg_.max_buffer;
    }
  }

  // Full model computation over explicit rows: factor from scratch via a
  // bounded-memory streaming fold (or chunked in parallel when the design
  // matrix is small enough to materialize), exact bounds.
  void cold_compute(const MergedRows& rows, std::uint64_t epoch_base, unsigned threads,
                    MemoizedFactor* memo_out, Vector* xty_out, LinearModel* model_out) const {
    const std::size_t p = features();
    const std::size_t n = rows.keys.size();
    MemoizedFactor memo{RFactor(p), n, epoch_base + 1};
    Vector xty(p);
    LinearModel model;
    model.epoch = memo.epoch;
    if (n == 0) {
      model.beta = Vector(p);
      *memo_out = std::move(memo);
      *xty_out = std::move(xty);
      *model_out = std::move(model);
      return;
    }
    const bool materialize = threads > 1 && n * p * sizeof(double) <= (64u << 20);
    std::vector<double> row(p);
    if (materialize) {
      DenseMatrix x(n, p);
      for (std::size_t i = 0; i < n; ++i) {
        encode_into(rows.keys[i], cfg_.key_len, x.row_ptr(i));
        const double y = static_cast<double>(i);
        const double* rp = x.row_ptr(i);
        for (std::size_t jj = 0; jj < p; ++jj) xty[jj] += rp[jj] * y;
      }
      memo.r = parallel_qrd(x, cfg_.chunk_rows, threads);
    } else {
      StreamingQrd stream(p, std::max<std::size_t>(cfg_.chunk_rows, 16 * p));
      for (std::size_t i = 0; i < n; ++i) {
        encode_into(rows.keys[i], cfg_.key_len, row.data());
        stream.push_row(row.data());
        const double y = static_cast<double>(i);
        for (std::size_t jj = 0; jj < p; ++jj) xty[jj] += row[jj] * y;
      }
      memo.r = stream.finish();
    }
    model.beta = solve_or_fallback(memo.r, xty, n);
    fit_bounds(model, rows.keys);
    *memo_out = std::move(memo);
    *xty_out = std::move(xty);
    *model_out = std::move(model);
  }

  // Rank-deficient designs (singleton leaves, shared prefixes) fall back to
  // an intercept-only model at the middle slot; bounds absorb the rest.
  static Vector solve_or_fallback(const RFactor& r, const Vector& xty, std::size_t n) {
    try {
      return solve_beta(r, xty);
    } catch (const SingularError&) {
      Vector beta(r.dim());
      beta[r.dim() - 1] = n == 0 ? 0.0 : (static_cast<double>(n) - 1.0) / 2.0;
      return beta;
    }
  }

  //--- training surface ----------------------------------------------------

  RetrainOutcome retrain(std::uint64_t id, unsigned threads) {
    auto snap = begin_training(id);
    RetrainOutcome outcome;
    outcome.model_id = id;
    if (!snap.ok) return outcome;
    Leaf& leaf = *snap.leaf;
    const TrainedCore& core0 = *snap.core;

    MergedRows rows = merge_rows(core0, snap.flags, snap.drained, /*purge=*/false);
    const std::size_t p = features();
    const std::uint64_t delta_n = rows.new_positions.size();
    const std::size_t n = rows.keys.size();

    MemoizedFactor memo{RFactor(p), 0, 0};
    Vector xty(p);
    LinearModel model;
    bool fell_back_cold = false;

    DenseMatrix x_delta;
    Vector y_delta;
    if (delta_n > 0) {
      x_delta = DenseMatrix(delta_n, p);
      y_delta = Vector(delta_n);
      for (std::size_t k = 0; k < delta_n; ++k) {
        const auto pos = rows.new_positions[k];
        encode_into(rows.keys[pos], cfg_.key_len, x_delta.row_ptr(k));
        y_delta[k] = static_cast<double>(pos);
      }
    }
    memo = absorb(core0.memo, x_delta, cfg_.chunk_rows, threads);
    xty = xty_accumulate(core0.xty, x_delta, y_delta);
    try {
      model.beta = solve_beta(memo.r, xty);
      model.epoch = memo.epoch;
    } catch (const SingularError&) {
      // Numerically degenerate factor: rebuild everything from the physical
      // rows (no purge, so positions stay aligned with the factor).
      cold_compute(rows, core0.memo.epoch, threads, &memo, &xty, &model);
      fell_back_cold = true;
    }

    if (!fell_back_cold) {
      if (n == 0) {
        model.err_min = model.err_max = 0;
        model.mean_abs_err = 0.0;
      } else if (n <= 64 * static_cast<std::size_t>(delta_n)) {
        fit_bounds(model, rows.keys);
      } else {
        widen_bounds(core0.model, model, rows, delta_n);
      }
    }

    auto core = build_core(std::move(rows), std::move(memo), std::move(xty), std::move(model));
    outcome.mae = core->model.mean_abs_err;
    outcome.total_rows = n;
    outcome.delta_rows = delta_n;
    outcome.performed = true;
    bool requeue = false;
    publish_core(leaf, std::move(core), &requeue);
    auto end = Clock::now();
    outcome.duration_ms = std::chrono::duration<double, std::milli>(end - snap.start).count();
    log_event(snap.start, end, outcome.total_rows, outcome.delta_rows, id);
    if (requeue && !leaf.retrain_queued.exchange(true)) {
      fire_retrain_request(id, RetrainReason::buffer_full);
    }
    return outcome;
  }

  // Conservative bound update that avoids touching historical rows: old rows
  // may have shifted right by at most the number of inserted rows, and their
  // predictions drift by at most the coefficient delta times the maximal
  // byte value. New rows contribute their exact offsets.
  void widen_bounds(const LinearModel& old_model, LinearModel& model, const MergedRows& rows,
                    std::uint64_t delta_n) const {
    double drift = 0.0;
    for (std::size_t jj = 0; jj < cfg_.key_len; ++jj) {
      drift += 255.0 * std::fabs(model.beta[jj] - old_model.beta[jj]);
    }
    drift += std::fabs(model.beta[cfg_.key_len] - old_model.beta[cfg_.key_len]);
    const auto drift_slots = static_cast<std::int64_t>(std::ceil(drift));
    std::int64_t lo = old_model.err_min - drift_slots;
    std::int64_t hi = old_model.err_max + drift_slots + static_cast<std::int64_t>(delta_n);
    double abs_sum_new = 0.0;
    for (const auto pos : rows.new_positions) {
      const double pred = predict(model, rows.keys[pos]);
      const auto off = static_cast<std::int64_t>(pos) - round_half_away(pred);
      lo = std::min(lo, off);
      hi = std::max(hi, off);
      abs_sum_new += std::fabs(static_cast<double>(pos) - pred);
    }
    model.err_min = std::min<std::int64_t>(lo, 0);
    model.err_max = std::max<std::int64_t>(hi, 0);
    const auto n_old = static_cast<double>(rows.keys.size() - delta_n);
    const auto n_new = static_cast<double>(rows.keys.size());
    model.mean_abs_err =
        n_new == 0.0 ? 0.0 : (old_model.mean_abs_err * n_old + abs_sum_new) / n_new;
  }

  RetrainOutcome cold_train(std::uint64_t id, unsigned threads, bool purge) {
    auto snap = begin_training(id);
    RetrainOutcome outcome;
    outcome.model_id = id;
    if (!snap.ok) return outcome;
    Leaf& leaf = *snap.leaf;

    MergedRows rows = merge_rows(*snap.core, snap.flags, snap.drained, purge);
    MemoizedFactor memo{RFactor(features()), 0, 0};
    Vector xty(features());
    LinearModel model;
    cold_compute(rows, snap.core->memo.epoch, threads, &memo, &xty, &model);

    const std::size_t n = rows.keys.size();
    auto core = build_core(std::move(rows), std::move(memo), std::move(xty), std::move(model));
    outcome.mae = core->model.mean_abs_err;
    outcome.total_rows = n;
    outcome.delta_rows = n;
    outcome.performed = true;
    bool requeue = false;
    publish_core(leaf, std::move(core), &requeue);
    auto end = Clock::now();
    outcome.duration_ms = std::chrono::duration<double, std::milli>(end - snap.start).count();
    log_event(snap.start, end, outcome.total_rows, outcome.delta_rows, id);
    if (requeue && !leaf.retrain_queued.exchange(true)) {
      fire_retrain_request(id, RetrainReason::buffer_full);
    }
    return outcome;
  }

  struct SplitResult {
    bool done = false;
    std::uint64_t left_id = 0;
    std::uint64_t right_id = 0;
  };

  SplitResult split(std::uint64_t id) {
    std::lock_guard<std::mutex> structural(structural_mu_);
    SplitResult result;
    auto r0 = router();
    auto pos = r0->position(id);
    if (pos < 0) return result;
    auto leaf = r0->leaves[static_cast<std::size_t>(pos)];

    auto snap = begin_training(id);
    if (!snap.ok) return result;

    MergedRows rows = merge_rows(*snap.core, snap.flags, snap.drained, /*purge=*/true);
    const std::size_t n = rows.keys.size();
    if (n < 2 || n < cfg_.min_split_size) {
      // Too small after all: publish the cold result as a plain retrain.
      MemoizedFactor memo{RFactor(features()), 0, 0};
      Vector xty(features());
      LinearModel model;
      cold_compute(rows, snap.core->memo.epoch, 1, &memo, &xty, &model);
      auto core = build_core(std::move(rows), std::move(memo), std::move(xty), std::move(model));
      publish_core(*leaf, std::move(core), nullptr);
      return result;
    }
    const std::size_t mid = n / 2;
    MergedRows left_rows, right_rows;
    left_rows.keys.assign(rows.keys.begin(), rows.keys.begin() + mid);
    left_rows.values.assign(rows.values.begin(), rows.values.begin() + mid);
    left_rows.flags.assign(mid, 0);
    left_rows.live = mid;
    right_rows.keys.assign(rows.keys.begin() + mid, rows.keys.end());
    right_rows.values.assign(rows.values.begin() + mid, rows.values.end());
    right_rows.flags.assign(n - mid, 0);
    right_rows.live = n - mid;
    std::string pivot = right_rows.keys.front();

    auto make_half = [&](MergedRows&& half) {
      MemoizedFactor memo{RFactor(features()), 0, 0};
      Vector xty(features());
      LinearModel model;
      cold_compute(half, snap.core->memo.epoch, 1, &memo, &xty, &model);
      auto nl = std::make_shared<Leaf>(next_leaf_id_++, cfg_.key_len);
      const std::uint64_t rows_n = half.keys.size();
      auto core = build_core(std::move(half), std::move(memo), std::move(xty), std::move(model));
      std::atomic_store(&nl->core, std::shared_ptr<const TrainedCore>(std::move(core)));
      return std::pair<std::shared_ptr<Leaf>, std::uint64_t>(std::move(nl), rows_n);
    };
    auto t0 = snap.start;
    auto [left, left_n] = make_half(std::move(left_rows));
    auto [right, right_n] = make_half(std::move(right_rows));

    {
      std::unique_lock<std::shared_mutex> g(leaf->mu);
      // Ops that raced with the rebuild move to whichever half owns them.
      auto route_half = [&](const std::string& k) -> Leaf& {
        return k < pivot ? *left : *right;
      };
      for (const auto& op : leaf->pending) {
        auto& target = route_half(op.key);
        auto tc = std::const_pointer_cast<TrainedCore>(std::atomic_load(&target.core));
        replay_pending(*tc, {op});
      }
      for (auto& e : leaf->buffer) {
        route_half(e.first).buffer.push_back(std::move(e));
      }
      leaf->buffer.clear();
      leaf->draining = nullptr;
      leaf->draining_deleted.clear();
      leaf->pending.clear();
      leaf->in_progress = false;
      leaf->retired = true;

      auto r1 = std::make_shared<RouterVersion>(*router());
      auto p1 = r1->position(id);
      assert(p1 >= 0);
      const auto up = static_cast<std::size_t>(p1);
      r1->leaves[up] = left;
      r1->leaves.insert(r1->leaves.begin() + static_cast<std::ptrdiff_t>(up) + 1, right);
      r1->pivots.insert(r1->pivots.begin() + static_cast<std::ptrdiff_t>(up), pivot);
      std::atomic_store(&router_, std::shared_ptr<const RouterVersion>(std::move(r1)));
    }
    auto end = Clock::now();
    log_event(t0, end, left_n, left_n, left->id);
    log_event(t0, end, right_n, right_n, right->id);
    result.done = true;
    result.left_id = left->id;
    result.right_id = right->id;
    return result;
  }

  struct MergeResult {
    bool done = false;
    std::uint64_t merged_id = 0;
  };

  MergeResult merge(std::uint64_t left_id, std::uint64_t right_id) {
    std::lock_guard<std::mutex> structural(structural_mu_);
    MergeResult result;
    auto r0 = router();
    auto pa = r0->position(left_id);
    auto pb = r0->position(right_id);
    if (pa < 0 || pb != pa + 1) return result;
    auto a = r0->leaves[static_cast<std::size_t>(pa)];
    auto b = r0->leaves[static_cast<std::size_t>(pb)];

    auto snap_a = begin_training(left_id);
    if (!snap_a.ok) return result;
    auto snap_b = begin_training(right_id);
    if (!snap_b.ok) {
      // Release the left leaf untouched.
      bool requeue = false;
      publish_core(*a, clone_core(*snap_a.core, snap_a.flags, snap_a.drained), &requeue);
      return result;
    }

    const std::size_t p = features();
    const TrainedCore& ca = *snap_a.core;
    const TrainedCore& cb = *snap_b.core;
    const std::size_t na = ca.size();

    // Physical concatenation: all of a's rows precede all of b's because the
    // leaves partition the key space at the pivot.
    MergedRows base;
    base.keys.reserve(na + cb.size());
    base.values.reserve(na + cb.size());
    base.flags.reserve(na + cb.size());
    for (std::size_t i = 0; i < na; ++i) {
      base.keys.push_back(ca.keys[i]);
      base.values.push_back(ca.values[i].load());
      base.flags.push_back(snap_a.flags[i]);
      if (snap_a.flags[i] == 0) ++base.live;
    }
    for (std::size_t i = 0; i < cb.size(); ++i) {
      base.keys.push_back(cb.keys[i]);
      base.values.push_back(cb.values[i].load());
      base.flags.push_back(snap_b.flags[i]);
      if (snap_b.flags[i] == 0) ++base.live;
    }

    // Factor merge, then shift b's moment vector: its targets move up by na
    // slots, and X_b^T * 1 is exactly the intercept column of b's Gram
    // product, so no row of b is ever revisited.
    MemoizedFactor memo = merge_factors(ca.memo, cb.memo);
    Vector xty(p);
    for (std::size_t jj = 0; jj < p; ++jj) {
      double shift = 0.0;
      for (std::size_t kk = 0; kk < p; ++kk) {
        shift += cb.memo.r.at(kk, jj) * cb.memo.r.at(kk, p - 1);
      }
      xty[jj] = ca.xty[jj] + cb.xty[jj] + static_cast<double>(na) * shift;
    }

    // Drained buffers are fresh rows for the merged leaf.
    std::vector<std::pair<std::string, std::uint64_t>> drained;
    drained.reserve(snap_a.drained.size() + snap_b.drained.size());
    drained.insert(drained.end(), snap_a.drained.begin(), snap_a.drained.end());
    drained.insert(drained.end(), snap_b.drained.begin(), snap_b.drained.end());
    std::sort(drained.begin(), drained.end());

    TrainedCore pseudo;  // view over base rows for the merge walk
    pseudo.keys = base.keys;
    pseudo.values = std::make_unique<std::atomic<std::uint64_t>[]>(base.keys.size());
    pseudo.flags = std::make_unique<std::atomic<std::uint8_t>[]>(base.keys.size());
    for (std::size_t i = 0; i < base.keys.size(); ++i) {
      pseudo.values[i].store(base.values[i], std::memory_order_relaxed);
      pseudo.flags[i].store(base.flags[i], std::memory_order_relaxed);
    }
    MergedRows rows = merge_rows(pseudo, base.flags, drained, /*purge=*/false);

    const std::uint64_t delta_n = rows.new_positions.size();
    DenseMatrix x_delta;
    Vector y_delta;
    if (delta_n > 0) {
      x_delta = DenseMatrix(delta_n, p);
      y_delta = Vector(delta_n);
      for (std::size_t k = 0; k < delta_n; ++k) {
        const auto posn = rows.new_positions[k];
        encode_into(rows.keys[posn], cfg_.key_len, x_delta.row_ptr(k));
        y_delta[k] = static_cast<double>(posn);
      }
    }
    memo = absorb(memo, x_delta, cfg_.chunk_rows, 1);
    xty = xty_accumulate(xty, x_delta, y_delta);
    LinearModel model;
    model.beta = solve_or_fallback(memo.r, xty, rows.keys.size());
    model.epoch = memo.epoch;
    if (!rows.keys.empty()) {
      fit_bounds(model, rows.keys);
    }

    memo.trained_rows = rows.keys.size();
    auto merged_leaf = std::make_shared<Leaf>(next_leaf_id_++, cfg_.key_len);
    const std::uint64_t total_n = rows.keys.size();
    auto core = build_core(std::move(rows), std::move(memo), std::move(xty), std::move(model));

    {
      // Lock order follows router order; writers hold one leaf at a time.
      std::unique_lock<std::shared_mutex> ga(a->mu);
      std::unique_lock<std::shared_mutex> gb(b->mu);
      replay_pending(*core, a->pending);
      replay_pending(*core, b->pending);
      auto adopt_buffer = [&](Leaf& src) {
        for (auto& e : src.buffer) {
          auto [lo, hi] = std::equal_range(core->keys.begin(), core->keys.end(), e.first);
          bool applied = false;
          for (auto kit = lo; kit != hi && !applied; ++kit) {
            const auto i = static_cast<std::size_t>(kit - core->keys.begin());
            if (core->flags[i].load(std::memory_order_relaxed) == 0) {
              core->values[i].store(e.second, std::memory_order_relaxed);
              applied = true;
            }
          }
          if (!applied) merged_leaf->buffer.push_back(std::move(e));
        }
        src.buffer.clear();
        src.draining = nullptr;
        src.draining_deleted.clear();
        src.pending.clear();
        src.in_progress = false;
        src.retired = true;
      };
      adopt_buffer(*a);
      adopt_buffer(*b);
      std::atomic_store(&merged_leaf->core,
                        std::shared_ptr<const TrainedCore>(std::move(core)));

      auto r1 = std::make_shared<RouterVersion>(*router());
      auto p1 = r1->position(left_id);
      assert(p1 >= 0 && r1->position(right_id) == p1 + 1);
      const auto up = static_cast<std::size_t>(p1);
      r1->leaves[up] = merged_leaf;
      r1->leaves.erase(r1->leaves.begin() + static_cast<std::ptrdiff_t>(up) + 1);
      r1->pivots.erase(r1->pivots.begin() + static_cast<std::ptrdiff_t>(up));
      std::atomic_store(&router_, std::shared_ptr<const RouterVersion>(std::move(r1)));
    }
    auto end = Clock::now();
    log_event(snap_a.start, end, total_n, delta_n, merged_leaf->id);
    result.done = true;
    result.merged_id = merged_leaf->id;
    return result;
  }

  // Rebuilds an identical core (used to back out of a half-started merge).
  std::shared_ptr<TrainedCore> clone_core(
      const TrainedCore& core, const std::vector<std::uint8_t>& flags,
      const std::vector<std::pair<std::string, std::uint64_t>>& drained) {
    MergedRows rows = merge_rows(core, flags, drained, /*purge=*/false);
    // Reuse the factor if nothing was drained; otherwise fold the drained
    // rows in like a regular incremental pass.
    const std::size_t p = features();
    const std::uint64_t delta_n = rows.new_positions.size();
    DenseMatrix x_delta;
    Vector y_delta;
    if (delta_n > 0) {
      x_delta = DenseMatrix(delta_n, p);
      y_delta = Vector(delta_n);
      for (std::size_t k = 0; k < delta_n; ++k) {
        const auto posn = rows.new_positions[k];
        encode_into(rows.keys[posn], cfg_.key_len, x_delta.row_ptr(k));
        y_delta[k] = static_cast<double>(posn);
      }
    }
    MemoizedFactor memo = absorb(core.memo, x_delta, cfg_.chunk_rows, 1);
    Vector xty = xty_accumulate(core.xty, x_delta, y_delta);
    LinearModel model;
    model.beta = solve_or_fallback(memo.r, xty, rows.keys.size());
    model.epoch = memo.epoch;
    if (!rows.keys.empty()) fit_bounds(model, rows.keys);
    return build_core(std::move(rows), std::move(memo), std::move(xty), std::move(model));
  }

  StructuralOutcome maybe_restructure(std::uint64_t id) {
    StructuralOutcome out;
    auto leaf = leaf_by_id(id);
    if (leaf == nullptr) return out;
    auto core = std::atomic_load(&leaf->core);
    const auto live = core->live_count.load();
    const double mae = core->model.mean_abs_err;
    if (mae > cfg_.split_mae_threshold &&
        live >= static_cast<std::int64_t>(2 * cfg_.min_split_size)) {
      auto sr = split(id);
      if (sr.done) {
        out.action = StructuralOutcome::Action::split;
        out.left_id = sr.left_id;
        out.right_id = sr.right_id;
      }
      return out;
    }
    if (mae < cfg_.merge_mae_threshold) {
      auto r = router();
      auto pos = r->position(id);
      if (pos < 0) return out;
      const auto up = static_cast<std::size_t>(pos);
      // Prefer the right neighbor; fall back to being someone's right leaf.
      for (int dir = 0; dir < 2; ++dir) {
        std::size_t li = dir == 0 ? up : up - 1;
        if (dir == 1 && up == 0) continue;
        if (li + 1 >= r->leaves.size()) continue;
        auto left = r->leaves[li];
        auto right = r->leaves[li + 1];
        auto cl = std::atomic_load(&left->core);
        auto cr = std::atomic_load(&right->core);
        if (cl->model.mean_abs_err >= cfg_.merge_mae_threshold ||
            cr->model.mean_abs_err >= cfg_.merge_mae_threshold) {
          continue;
        }
        const auto combined = cl->live_count.load() + cr->live_count.load();
        if (combined > static_cast<std::int64_t>(cfg_.target_leaf_size)) continue;
        auto mr = merge(left->id, right->id);
        if (mr.done) {
          out.action = StructuralOutcome::Action::merge;
          out.left_id = mr.merged_id;
          return out;
        }
      }
    }
    return out;
  }

  std::size_t cold_sweep(double threshold) {
    std::size_t swept = 0;
    auto r = router();
    for (const auto& leaf : r->leaves) {
      auto core = std::atomic_load(&leaf->core);
      const auto n = static_cast<double>(core->size());
      if (n == 0.0) continue;
      const auto live = static_cast<double>(core->live_count.load());
      const double flagged_fraction = (n - live) / n;
      if (flagged_fraction >= threshold) {
        if (cold_train(leaf->id, 1, /*purge=*/true).performed) ++swept;
      }
    }
    return swept;
  }

  //--- bulk load and stats --------------------------------------------------

  void bulk_load(const std::vector<std::string>& keys,
                 const std::vector<std::uint64_t>& values) {
    if (keys.size() != values.size()) {
      throw ShapeError("bulk_load: " + std::to_string(keys.size()) + " keys vs " +
                       std::to_string(values.size()) + " values");
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (keys[i].empty()) throw EmptyKeyError("bulk_load: empty key");
      if (i > 0) {
        if (keys[i] == keys[i - 1]) throw DuplicateKeyError("bulk_load: duplicate key");
        if (keys[i] < keys[i - 1]) throw UnsortedInputError("bulk_load: keys out of order");
      }
    }
    std::lock_guard<std::mutex> structural(structural_mu_);
    {
      auto r = router();
      for (const auto& leaf : r->leaves) {
        std::shared_lock<std::shared_mutex> g(leaf->mu);
        auto core = std::atomic_load(&leaf->core);
        if (core->size() != 0 || !leaf->buffer.empty()) {
          throw ConfigError("bulk_load: index is not empty");
        }
      }
    }
    if (keys.empty()) return;
    const std::size_t n = keys.size();
    const std::size_t leaf_count = (n + cfg_.target_leaf_size - 1) / cfg_.target_leaf_size;
    const std::size_t base = n / leaf_count;
    const std::size_t rem = n % leaf_count;
    auto r1 = std::make_shared<RouterVersion>();
    std::size_t begin = 0;
    for (std::size_t li = 0; li < leaf_count; ++li) {
      const std::size_t len = base + (li < rem ? 1 : 0);
      MergedRows rows;
      rows.keys.assign(keys.begin() + static_cast<std::ptrdiff_t>(begin),
                       keys.begin() + static_cast<std::ptrdiff_t>(begin + len));
      rows.values.assign(values.begin() + static_cast<std::ptrdiff_t>(begin),
                         values.begin() + static_cast<std::ptrdiff_t>(begin + len));
      rows.flags.assign(len, 0);
      rows.live = len;
      MemoizedFactor memo{RFactor(features()), 0, 0};
      Vector xty(features());
      LinearModel model;
      cold_compute(rows, 0, 1, &memo, &xty, &model);
      auto leaf = std::make_shared<Leaf>(next_leaf_id_++, cfg_.key_len);
      auto core = build_core(std::move(rows), std::move(memo), std::move(xty), std::move(model));
      std::atomic_store(&leaf->core, std::shared_ptr<const TrainedCore>(std::move(core)));
      if (li > 0) r1->pivots.push_back(keys[begin]);
      r1->leaves.push_back(std::move(leaf));
      begin += len;
    }
    auto r0 = router();
    for (const auto& old : r0->leaves) {
      std::unique_lock<std::shared_mutex> g(old->mu);
      old->retired = true;
    }
    std::atomic_store(&router_, std::shared_ptr<const RouterVersion>(std::move(r1)));
  }

  IndexStats stats() const {
    IndexStats s;
    auto r = router();
    s.leaf_count = r->leaves.size();
    for (const auto& leaf : r->leaves) {
      LeafStats ls;
      ls.model_id = leaf->id;
      std::uint64_t overlay_live = 0;
      {
        std::shared_lock<std::shared_mutex> g(leaf->mu);
        ls.buffered = leaf->buffer.size();
        overlay_live = leaf->buffer.size();
        if (leaf->draining != nullptr) {
          ls.buffered += leaf->draining->size();
          // Draining rows count as live unless erased mid-train or shadowed
          // by a newer buffered copy of the same key.
          std::unordered_set<std::string_view> draining_live;
          for (const auto& [k, v] : *leaf->draining) {
            if (leaf->draining_deleted.count(k) == 0) draining_live.insert(k);
          }
          std::size_t shadowed = 0;
          for (const auto& [k, v] : leaf->buffer) {
            if (draining_live.count(k) != 0) ++shadowed;
          }
          overlay_live += draining_live.size() - shadowed;
        }
      }
      auto core = std::atomic_load(&leaf->core);
      ls.entry_count = core->size();
      const auto live = core->live_count.load();
      const auto core_live = static_cast<std::uint64_t>(live < 0 ? 0 : live);
      ls.live_keys = core_live + overlay_live;
      ls.flagged = ls.entry_count - core_live;
      ls.mae = core->model.mean_abs_err;
      ls.err_min = core->model.err_min;
      ls.err_max = core->model.err_max;
      ls.epoch = core->model.epoch;
      ls.memo_bytes = core->memo.footprint_bytes();
      ls.beta = core->model.beta;
      if (!core->keys.empty()) ls.first_key = core->keys.front();

      s.live_keys += ls.live_keys;
      s.entry_count += ls.entry_count;
      s.buffered += ls.buffered;
      s.flagged += ls.flagged;
      s.memory.model_bytes += ls.beta.size() * sizeof(double) + 32;
      s.memory.memo_bytes += ls.memo_bytes;
      s.memory.buffer_bytes += ls.buffered * (sizeof(std::string) + sizeof(std::uint64_t));
      s.memory.structure_bytes +=
          sizeof(detail::Leaf) + ls.entry_count * (sizeof(std::string) + 1);
      s.leaves.push_back(std::move(ls));
    }
    s.memory.structure_bytes += sizeof(RouterVersion) +
                                r->pivots.size() * sizeof(std::string) +
                                r->leaves.size() * sizeof(std::shared_ptr<Leaf>);
    return s;
  }

  std::vector<RetrainEvent> retrain_log() const {
    std::lock_guard<std::mutex> g(log_mu_);
    return log_;
  }

  //--- members ---------------------------------------------------------------

  IndexConfig cfg_;
  std::shared_ptr<const RouterVersion> router_;
  std::shared_ptr<const std::function<void(std::uint64_t, RetrainReason)>> sink_;
  mutable std::mutex structural_mu_;
  mutable std::mutex log_mu_;
  std::vector<RetrainEvent> log_;
  std::atomic<std::uint64_t> next_leaf_id_{1};
  Clock::time_point epoch0_;
};

StringIndex::StringIndex(IndexConfig cfg) : cfg_(cfg) {
  if (cfg.key_len == 0) throw ConfigError("IndexConfig: key_len must be positive");
  if (cfg.target_leaf_size == 0) throw ConfigError("IndexConfig: target_leaf_size must be positive");
  if (cfg.max_buffer == 0) throw ConfigError("IndexConfig: max_buffer must be positive");
  if (cfg.chunk_rows != 0 && cfg.chunk_rows < cfg.key_len + 1) {
    throw ConfigError("IndexConfig: chunk_rows must be at least key_len + 1");
  }
  impl_ = std::make_unique<Impl>(cfg_);
}

StringIndex::~StringIndex() = default;

void StringIndex::bulk_load(const std::vector<std::string>& keys,
                            const std::vector<std::uint64_t>& values) {
  impl_->bulk_load(keys, values);
}

std::optional<std::uint64_t> StringIndex::lookup(std::string_view key, PhaseProbe* probe) const {
  return impl_->lookup(key, probe);
}

UpsertResult StringIndex::insert(std::string_view key, std::uint64_t value, PhaseProbe* probe) {
  return impl_->insert(key, value, probe);
}

bool StringIndex::erase(std::string_view key, PhaseProbe* probe) {
  return impl_->erase(key, probe);
}

std::vector<std::pair<std::string, std::uint64_t>> StringIndex::range_scan(
    std::string_view start, std::size_t limit, PhaseProbe* probe) const {
  return impl_->range_scan(start, limit, probe);
}

RetrainOutcome StringIndex::retrain_leaf(std::uint64_t model_id, unsigned compute_threads) {
  return impl_->retrain(model_id, compute_threads);
}

RetrainOutcome StringIndex::cold_train_leaf(std::uint64_t model_id, unsigned compute_threads) {
  return impl_->cold_train(model_id, compute_threads, /*purge=*/true);
}

bool StringIndex::split_leaf(std::uint64_t model_id) { return impl_->split(model_id).done; }

bool StringIndex::merge_leaves(std::uint64_t left_id, std::uint64_t right_id) {
  return impl_->merge(left_id, right_id).done;
}

StructuralOutcome StringIndex::maybe_restructure(std::uint64_t model_id) {
  return impl_->maybe_restructure(model_id);
}

std::size_t StringIndex::cold_sweep(double flagged_fraction_threshold) {
  return impl_->cold_sweep(flagged_fraction_threshold);
}

void StringIndex::set_retrain_sink(std::function<void(std::uint64_t, RetrainReason)> sink) {
  auto sp = std::make_shared<const std::function<void(std::uint64_t, RetrainReason)>>(
      std::move(sink));
  std::atomic_store(&impl_->sink_, sp);
}

IndexStats StringIndex::stats() const { return impl_->stats(); }

std::vector<RetrainEvent> StringIndex::retrain_log() const { return impl_->retrain_log(); }

std::vector<std::uint64_t> StringIndex::leaf_ids() const {
  std::vector<std::uint64_t> ids;
  auto r = impl_->router();
  ids.reserve(r->leaves.size());
  for (const auto& l : r->leaves) ids.push_back(l->id);
  return ids;
}

std::uint64_t StringIndex::leaf_for_key(std::string_view key) const {
  auto r = impl_->router();
  return r->leaves[r->route(key)]->id;
}

}  // namespace stridx

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "honeycomb/arena.hpp"
#include "honeycomb/backend.hpp"
#include "honeycomb/memsim.hpp"
#include "honeycomb/metrics.hpp"
#include "honeycomb/mvcc.hpp"
#include "honeycomb/page_table.hpp"
#include "honeycomb/read_engine.hpp"
#include "honeycomb/types.hpp"
#include "honeycomb/write_engine.hpp"

namespace honeycomb {

struct StoreConfig {
  bool mvcc = true;
  std::size_t log_block_threshold = 512;
  std::size_t arena_bytes = 64ull << 20;
  std::size_t lid_capacity = std::size_t{1} << 28;
  std::size_t inflight_slots = 64;
  std::size_t max_writers = 64;
  bool background_sweep = true;
  std::chrono::milliseconds sweep_interval{10};
  std::size_t scan_max_items = 4096;
  std::size_t scan_max_bytes = 1ull << 20;
  double bulk_load_fill = 0.85;
  unsigned backoff_after_restarts = 8;
  bool poison_on_free = true;
  bool sim_backend = false;
  memsim::SimConfig sim;
};

class Store {
 public:
  explicit Store(StoreConfig cfg = {});
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  // Offline population at version 0; the store must be empty.
  Status bulk_load(std::vector<Item> items);

  // A registered writer thread handle. One thread per handle; each executes
  // operations one at a time and exposes its sequence number to reclamation.
  class Writer {
   public:
    Writer() = default;
    Writer(Writer&& o) noexcept : store_(o.store_), slot_(o.slot_) { o.store_ = nullptr; }
    Writer& operator=(Writer&& o) noexcept;
    ~Writer();

    Result<PutOutcome> put(std::string_view key, std::string_view value);
    Result<DeleteOutcome> del(std::string_view key);
    bool valid() const { return store_ != nullptr && slot_ >= 0; }

   private:
    friend class Store;
    Writer(Store* store, int slot) : store_(store), slot_(slot) {}
    Store* store_ = nullptr;
    int slot_ = -1;
  };
  Writer writer();

  GetResult get(std::string_view key, const ReadOptions& opts = {});
  ScanResult scan(std::string_view lower, std::string_view upper, const ReadOptions& opts = {});

  std::uint64_t released_version() const { return versions_.read_version(); }
  std::uint64_t acked_read_version() const { return tables_.acked_read_version(); }

  StoreMetrics& metrics() { return metrics_; }
  const PageTablePair::Counters& command_counters() const { return tables_.counters(); }
  std::size_t footprint_bytes() const { return arena_.live_bytes(); }
  std::size_t sweep_now() { return reclaim_.sweep(); }
  std::size_t reclaim_pending() const { return reclaim_.pending(); }
  memsim::Stats sim_stats() const;
  void sim_reset_stats();

  RootInfo root_info() const { return tables_.read_root(); }
  ReadEngine& read_engine() { return *read_engine_; }
  WriteEngine& write_engine() { return *write_engine_; }
  PageTablePair& tables() { return tables_; }
  BufferArena& arena() { return arena_; }
  EpochRegistry& epochs() { return epochs_; }
  ReclaimList& reclaim() { return reclaim_; }
  GlobalVersions& versions() { return versions_; }
  const StoreConfig& config() const { return cfg_; }

  // debug / test support
  Result<WriteEngine::LeafLockGuard> debug_lock_leaf(std::string_view key) {
    return write_engine_->debug_lock_leaf(key);
  }
  void set_fetch_observer(ReadEngine::FetchObserver fn) {
    read_engine_->set_fetch_observer(std::move(fn));
  }
  void start_trace_capture() { read_engine_->start_capture(); }
  std::vector<memsim::TraceRecord> stop_trace_capture() { return read_engine_->stop_capture(); }
  Result<std::vector<std::uint8_t>> dump_node_image(Lid lid) const;
  // (lid, level) pairs reachable from the current root; level 1 = leaf.
  std::vector<std::pair<Lid, std::uint16_t>> collect_tree_nodes() const;

 private:
  StoreConfig cfg_;
  StoreMetrics metrics_;
  BufferArena arena_;
  PageTablePair tables_;
  GlobalVersions versions_;
  ReleaseGate gate_;
  EpochRegistry epochs_;
  ReclaimList reclaim_;
  std::unique_ptr<memsim::Simulator> sim_;
  std::unique_ptr<FetchBackend> backend_;
  std::unique_ptr<ReadEngine> read_engine_;
  std::unique_ptr<WriteEngine> write_engine_;

  std::thread sweeper_;
  std::mutex sweep_mu_;
  std::condition_variable sweep_cv_;
  bool stopping_ = false;

  void init_root();
};

}  // namespace honeycomb

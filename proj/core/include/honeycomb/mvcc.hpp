#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <vector>

#include "honeycomb/arena.hpp"
#include "honeycomb/page_table.hpp"
#include "honeycomb/types.hpp"

namespace honeycomb {

// Global MVCC counters. The reader-side copy of the read version lives with
// the command channel (CommandChannel::acked_read_version), which models the
// copy maintained by the accelerator.
class GlobalVersions {
 public:
  std::uint64_t acquire_write_version() {
    return write_version_.fetch_add(1, std::memory_order_relaxed) + 1;
  }
  std::uint64_t write_version() const { return write_version_.load(std::memory_order_relaxed); }
  std::uint64_t read_version() const { return read_version_.load(std::memory_order_acquire); }
  void set_read_version(std::uint64_t v) { read_version_.store(v, std::memory_order_release); }

 private:
  std::atomic<std::uint64_t> write_version_{0};
  std::atomic<std::uint64_t> read_version_{0};
};

// Orders release of write versions: a writer publishes its version to the
// global read version only once every smaller version has been published,
// then propagates the new read version to the read engine and waits for the
// ack before returning (the response-delay contract).
class ReleaseGate {
 public:
  ReleaseGate(GlobalVersions& versions, PageTablePair& tables, bool mvcc_on)
      : versions_(versions), tables_(tables), mvcc_on_(mvcc_on) {}

  void release(std::uint64_t version);

  std::uint64_t releases() const { return releases_.load(std::memory_order_relaxed); }
  std::uint64_t total_wait_ns() const { return wait_ns_.load(std::memory_order_relaxed); }

 private:
  GlobalVersions& versions_;
  PageTablePair& tables_;
  bool mvcc_on_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::atomic<std::uint64_t> releases_{0};
  std::atomic<std::uint64_t> wait_ns_{0};
};

// Per-writer-thread operation sequence numbers. Slot words pack
// (op_count << 1) | active so a stamped word identifies one inflight
// operation; words only move forward.
class EpochRegistry {
 public:
  explicit EpochRegistry(std::size_t max_writers = 64);

  int register_writer();
  void unregister_writer(int slot);

  std::uint64_t begin_op(int slot);
  void end_op(int slot);

  std::vector<std::uint64_t> snapshot() const;
  bool dominated(const std::vector<std::uint64_t>& stamp) const;
  std::size_t capacity() const { return slots_.size(); }

 private:
  struct Slot {
    std::atomic<std::uint64_t> word{0};
    std::atomic<bool> used{false};
  };
  std::vector<Slot> slots_;
};

struct ReclaimItem {
  std::vector<std::uint8_t*> buffers;
  std::vector<Lid> lids;
  std::vector<std::uint64_t> writer_stamp;
  std::uint64_t reader_newest = 0;
};

// Epoch-based deferred reclamation of superseded buffers and retired lids.
class ReclaimList {
 public:
  ReclaimList(EpochRegistry& epochs, BufferArena& arena, PageTablePair& tables)
      : epochs_(epochs), arena_(arena), tables_(tables) {}

  // Returns (S_old, S_new) from the read engine.
  using ReaderWindowFn = std::function<std::pair<std::uint64_t, std::uint64_t>()>;
  void set_reader_window(ReaderWindowFn fn);

  // Stamps the item with all writer-thread sequence numbers and the read
  // engine's newest inflight sequence number, then enqueues it.
  void retire(std::vector<std::uint8_t*> buffers, std::vector<Lid> lids);

  // Reclaims all dominated items; returns the number of buffers freed.
  std::size_t sweep();

  std::size_t pending() const;
  std::uint64_t reclaimed_buffers() const {
    return reclaimed_.load(std::memory_order_relaxed);
  }

 private:
  EpochRegistry& epochs_;
  BufferArena& arena_;
  PageTablePair& tables_;
  mutable std::mutex mu_;
  std::deque<ReclaimItem> items_;
  ReaderWindowFn reader_window_;
  std::mutex sweep_mu_;
  std::atomic<std::uint64_t> reclaimed_{0};
};

}  // namespace honeycomb

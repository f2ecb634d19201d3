#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "honeycomb/types.hpp"

namespace honeycomb {

struct RootInfo {
  Lid lid = kNullLid;
  std::uint16_t height = 0;

  std::uint64_t pack() const { return (lid & kLidLimit) | (std::uint64_t{height} << 48); }
  static RootInfo unpack(std::uint64_t w) {
    return RootInfo{w & kLidLimit, static_cast<std::uint16_t>(w >> 48)};
  }
};

// One side of the lid -> physical address mapping. Lids are allocated
// monotonically and never reused, so the map is a lazily grown two-level
// array with lock-free resolution.
class PageTableSide {
 public:
  explicit PageTableSide(std::size_t lid_capacity);
  ~PageTableSide();

  PageTableSide(const PageTableSide&) = delete;
  PageTableSide& operator=(const PageTableSide&) = delete;

  Result<std::uint64_t> resolve(Lid lid) const;
  bool contains(Lid lid) const;
  Status set(Lid lid, std::uint64_t addr);  // addr 0 removes the mapping
  RootInfo root() const { return RootInfo::unpack(root_.load(std::memory_order_acquire)); }
  void set_root(RootInfo info) { root_.store(info.pack(), std::memory_order_release); }
  std::size_t lid_capacity() const { return chunk_count_ * kChunkEntries; }

  static constexpr std::size_t kChunkEntries = 1 << 16;

 private:
  using Chunk = std::atomic<std::uint64_t>;
  std::size_t chunk_count_;
  std::unique_ptr<std::atomic<Chunk*>[]> dir_;
  mutable std::mutex grow_mu_;
  std::atomic<std::uint64_t> root_{0};

  Chunk* chunk_for(Lid lid, bool create) const;
};

enum class CommandKind : std::uint8_t { kSetMapping, kSetReadVersion, kSetRoot, kShutdown };

struct Command {
  CommandKind kind = CommandKind::kSetMapping;
  Lid lid = kNullLid;
  std::uint64_t addr = 0;
  std::uint64_t version = 0;
  RootInfo root;
  bool remap = false;  // SetMapping of an already-mapped lid (atomic swap)
};

struct CommandTraceRecord {
  CommandKind kind;
  Lid lid;
  std::uint64_t latency_ns;
};

// Bounded multi-producer command queue with a single consumer task, modelling
// the PCIe control channel between the write side and the read side.
class CommandChannel {
 public:
  explicit CommandChannel(std::size_t capacity = 4096);
  ~CommandChannel();

  using Applier = std::function<void(const Command&)>;
  void start(Applier applier);
  void stop();

  // Blocks until the command has been applied on the read side.
  void submit_sync(const Command& cmd);

  std::uint64_t acked_read_version() const {
    return acked_read_version_.load(std::memory_order_acquire);
  }
  void wait_read_version_acked(std::uint64_t version);

  void enable_trace(bool on);
  std::vector<CommandTraceRecord> drain_trace();

  std::uint64_t submitted() const { return submitted_.load(std::memory_order_relaxed); }

 private:
  struct Pending {
    Command cmd;
    std::chrono::steady_clock::time_point enqueued;
    std::shared_ptr<std::atomic<bool>> done;
  };

  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<Pending> queue_;
  std::thread consumer_;
  bool running_ = false;
  Applier applier_;

  std::atomic<std::uint64_t> acked_read_version_{0};
  std::mutex ack_mu_;
  std::condition_variable ack_cv_;

  std::atomic<std::uint64_t> submitted_{0};
  std::mutex trace_mu_;
  bool trace_enabled_ = false;
  std::vector<CommandTraceRecord> trace_;

  void consume_loop();
};

// Write-side and read-side page tables plus the command channel between
// them. Writers mutate the write side directly and propagate to the read
// side through commands; readers resolve against the read side only.
class PageTablePair {
 public:
  explicit PageTablePair(std::size_t lid_capacity = std::size_t{1} << 28);
  ~PageTablePair();

  using InvalidateHook = std::function<void(Lid)>;
  void set_invalidate_hook(InvalidateHook hook);

  Result<Lid> allocate_lid();
  // Test support for the 48-bit boundary.
  void set_next_lid_for_test(Lid next) { next_lid_.store(next, std::memory_order_relaxed); }

  // Creates a mapping for a freshly allocated lid on both sides.
  Status bind(Lid lid, std::uint64_t addr);
  // Atomically swaps the mapping of an existing lid on both sides; the read
  // side cache entry for the lid is invalidated before the ack.
  Status update_mapping(Lid lid, std::uint64_t new_addr);
  // Removes a reclaimed lid from both sides (reclamation path).
  void remove(Lid lid);

  enum class Side { kWrite, kRead };
  Result<std::uint64_t> resolve(Lid lid, Side side) const;

  void set_root(RootInfo info);
  RootInfo write_root() const { return write_.root(); }
  RootInfo read_root() const { return read_.root(); }

  void propagate_read_version(std::uint64_t version);
  std::uint64_t acked_read_version() const { return channel_.acked_read_version(); }
  void wait_read_version_acked(std::uint64_t version) {
    channel_.wait_read_version_acked(version);
  }

  CommandChannel& channel() { return channel_; }

  struct Counters {
    std::atomic<std::uint64_t> binds{0};
    std::atomic<std::uint64_t> remaps{0};
    std::atomic<std::uint64_t> set_roots{0};
    std::atomic<std::uint64_t> read_version_updates{0};
  };
  const Counters& counters() const { return counters_; }

 private:
  PageTableSide write_;
  PageTableSide read_;
  CommandChannel channel_;
  std::atomic<Lid> next_lid_{1};
  InvalidateHook invalidate_;
  std::mutex hook_mu_;
  Counters counters_;

  void apply(const Command& cmd);
};

}  // namespace honeycomb

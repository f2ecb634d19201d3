#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "honeycomb/arena.hpp"
#include "honeycomb/leaf_iter.hpp"
#include "honeycomb/metrics.hpp"
#include "honeycomb/mvcc.hpp"
#include "honeycomb/node_format.hpp"
#include "honeycomb/page_table.hpp"
#include "honeycomb/types.hpp"

namespace honeycomb {

enum class PutOutcome : std::uint8_t { kInserted, kUpdated };
enum class DeleteOutcome : std::uint8_t { kDeleted, kNotFound };

// Executes put/update/delete: optimistic traversal with sequence-validated
// node locks, fast-path log appends, sorted/log merges, splits and node
// merges published through single page-table swaps.
class WriteEngine {
 public:
  struct Config {
    bool mvcc = true;
    std::size_t log_block_threshold = 512;
    unsigned backoff_after_restarts = 8;
    unsigned max_alloc_retries = 32;
    double bulk_load_fill = 0.85;
    std::size_t underflow_bytes = kNodeSize / 4;
  };

  WriteEngine(Config cfg, BufferArena& arena, PageTablePair& tables, GlobalVersions& versions,
              ReleaseGate& gate, EpochRegistry& epochs, ReclaimList& reclaim,
              StoreMetrics& metrics);

  Result<PutOutcome> put(int epoch_slot, std::string_view key, std::string_view value);
  Result<DeleteOutcome> del(int epoch_slot, std::string_view key);

  // Offline load of an empty store at version 0.
  Status bulk_load(std::vector<Item> items);

  // Test hook: holds the lock of the leaf covering `key` until released.
  class LeafLockGuard {
   public:
    LeafLockGuard() = default;
    LeafLockGuard(std::uint8_t* buf, std::uint64_t restore_word)
        : buf_(buf), restore_(restore_word) {}
    LeafLockGuard(LeafLockGuard&& o) noexcept : buf_(o.buf_), restore_(o.restore_) {
      o.buf_ = nullptr;
    }
    LeafLockGuard& operator=(LeafLockGuard&& o) noexcept;
    ~LeafLockGuard() { release(); }
    void release();

   private:
    std::uint8_t* buf_ = nullptr;
    std::uint64_t restore_ = 0;
  };
  Result<LeafLockGuard> debug_lock_leaf(std::string_view key);

 private:
  struct PathEntry {
    Lid lid = kNullLid;
    std::uint8_t* buf = nullptr;
    std::uint64_t word = 0;  // observed size/lock word
  };

  struct LeafView {
    node::HeaderView hdr;
    std::vector<node::ShortcutEntry> shortcuts;
    std::vector<node::LogEntryView> log;
  };

  struct WriteTarget {
    bool exists = false;
    std::uint16_t target_offset = 0;     // live item (update/delete back ref)
    std::uint16_t successor_offset = 0;  // first sorted item with a greater key
  };

  struct InteriorItem {
    std::string key;
    Lid child = kNullLid;
  };

  Config cfg_;
  BufferArena& arena_;
  PageTablePair& tables_;
  GlobalVersions& versions_;
  ReleaseGate& gate_;
  EpochRegistry& epochs_;
  ReclaimList& reclaim_;
  StoreMetrics& metrics_;

  Status traverse(std::string_view key, std::vector<PathEntry>& path);
  Status read_leaf_view(const PathEntry& leaf, LeafView& view);
  Status find_target(const PathEntry& leaf, const LeafView& view, std::string_view key,
                     WriteTarget& out);
  std::uint8_t* alloc_with_retry();
  void backoff(unsigned attempt);

  Result<PutOutcome> write_op(int epoch_slot, std::string_view key, std::string_view value,
                              bool is_delete, DeleteOutcome& del_outcome);

  Status merge_blocks(const PathEntry& leaf, const node::HeaderView& hdr,
                      std::vector<Item> merged_items, std::uint64_t version,
                      std::size_t& live_bytes_out);
  Status split(const std::vector<PathEntry>& path, const node::HeaderView& leaf_hdr,
               const std::vector<Item>& leaf_items, std::uint64_t version);
  Status try_shrink(std::string_view key);
  Status shrink_once(std::string_view key, bool& progressed);

  Status decode_interior(const PathEntry& node, Lid& leftmost, std::vector<InteriorItem>& items);
};

}  // namespace honeycomb

#pragma once

// In-memory layout of 8 KB B-Tree nodes and the encode/decode/search
// primitives over a single node buffer. Byte offsets are documented in
// docs/node_format.md; all multi-byte integers are little-endian.
//
//   [0, 48)              header
//   [48, 512)            shortcut entries (count lives in the header)
//   [512, log_boundary)  sorted block, partitioned into segments
//   [log_boundary, bytes_used)  log block (leaf nodes only)

#include <atomic>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "honeycomb/types.hpp"

namespace honeycomb::node {

enum class NodeType : std::uint8_t { kInterior = 0, kLeaf = 1 };
enum class LogKind : std::uint8_t { kInsert = 1, kUpdate = 2, kDelete = 3 };

// Header field offsets. bytes_used, the write sequence number, the lock bit
// and the retired bit share one aligned 64-bit word so a writer can publish
// (size, seq, unlocked) with a single atomic store.
inline constexpr std::size_t kOffSizeLock = 0;
inline constexpr std::size_t kOffNodeVersion = 8;
inline constexpr std::size_t kOffOldLink = 16;
inline constexpr std::size_t kOffLink0 = 24;  // interior: leftmost child; leaf: left sibling
inline constexpr std::size_t kOffLink1 = 32;  // leaf: right sibling
inline constexpr std::size_t kOffLogBoundary = 40;
inline constexpr std::size_t kOffNodeType = 42;
inline constexpr std::size_t kOffShortcutCount = 44;
inline constexpr std::size_t kOffShortcutBytes = 46;
inline constexpr std::size_t kOffShortcuts = kHeaderSize;

struct SizeLock {
  std::uint16_t bytes_used = 0;
  std::uint32_t seq = 0;  // 31-bit write sequence number
  bool locked = false;
  bool retired = false;

  static SizeLock unpack(std::uint64_t word) {
    SizeLock s;
    s.bytes_used = static_cast<std::uint16_t>(word & 0xffff);
    s.seq = static_cast<std::uint32_t>((word >> 16) & 0x7fffffff);
    s.locked = (word >> 47) & 1;
    s.retired = (word >> 48) & 1;
    return s;
  }
  std::uint64_t pack() const {
    return std::uint64_t{bytes_used} | (std::uint64_t{seq & 0x7fffffff} << 16) |
           (std::uint64_t{locked} << 47) | (std::uint64_t{retired} << 48);
  }
};

struct HeaderView {
  NodeType type = NodeType::kLeaf;
  SizeLock size_lock;
  std::uint16_t log_boundary = kBlockStart;
  std::uint64_t node_version = 0;
  std::uint64_t old_version_link = 0;
  Lid link0 = kNullLid;
  Lid link1 = kNullLid;
  std::uint16_t shortcut_count = 0;
  std::uint16_t shortcut_bytes = 0;

  bool is_leaf() const { return type == NodeType::kLeaf; }
  Lid leftmost_child() const { return link0; }
  Lid left_sibling() const { return link0; }
  Lid right_sibling() const { return link1; }
};

struct ShortcutEntry {
  std::string_view key;
  std::uint16_t segment_offset = 0;  // node-relative, points at the payload
};

// Segment of the sorted block. covering == -1 means the first segment, whose
// items all carry inline keys.
struct SegmentDesc {
  std::uint16_t begin = 0;
  std::uint16_t end = 0;
  int covering = -1;
};

struct SortedItemView {
  std::uint16_t offset = 0;  // node-relative item offset (payload offset for shortcut-led items)
  std::string_view key;
  std::string_view payload;  // leaf: value bytes; interior: 6 raw lid bytes
};

struct LogEntryView {
  std::uint16_t offset = 0;  // node-relative offset of this entry
  LogKind kind = LogKind::kInsert;
  std::uint16_t back_ref = 0;
  std::uint8_t order_hint = 0;
  std::uint64_t version_delta = 0;
  std::string_view key;
  std::string_view value;  // empty and absent for deletes
  std::size_t encoded_size = 0;
};

// Sorted-block anchor of a log entry, for ordering across blocks without key
// comparisons. `replaces == true` targets the sorted item at `anchor`;
// otherwise the entry sorts immediately before the item at `anchor`
// (anchor == log_boundary sorts after all sorted items).
struct AnchorInfo {
  std::uint16_t anchor = 0;
  bool replaces = false;
};

// --- little-endian primitives -------------------------------------------

inline std::uint16_t load_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void store_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}
inline std::uint64_t load_u48(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 5; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
inline void store_u48(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 6; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
inline std::uint64_t load_u64(const std::uint8_t* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  return v;
}
inline void store_u64(std::uint8_t* p, std::uint64_t v) { std::memcpy(p, &v, 8); }

// --- atomic access to live buffers ---------------------------------------

inline std::atomic_ref<std::uint64_t> word_ref(std::uint8_t* node, std::size_t off) {
  return std::atomic_ref<std::uint64_t>(*reinterpret_cast<std::uint64_t*>(node + off));
}
inline std::uint64_t load_word_acquire(const std::uint8_t* node, std::size_t off) {
  return std::atomic_ref<const std::uint64_t>(
             *reinterpret_cast<const std::uint64_t*>(node + off))
      .load(std::memory_order_acquire);
}

inline SizeLock load_size_lock(const std::uint8_t* node) {
  return SizeLock::unpack(load_word_acquire(node, kOffSizeLock));
}

// CAS from the exact observed word to its locked form. Fails if the node was
// modified, is already locked, or was retired.
bool try_lock(std::uint8_t* node, std::uint64_t observed_word);
// Single-store publication: new bytes_used, seq+1, unlocked, optionally
// retired (a retired buffer can never be locked again).
void publish_unlock(std::uint8_t* node, std::uint16_t bytes_used, bool retired);

void set_link(std::uint8_t* node, std::size_t off, Lid lid);  // release store
Lid load_link(const std::uint8_t* node, std::size_t off);     // acquire load

// Copies node bytes for a reader. Ranges touching the size/lock word or the
// link words read those through atomics so concurrent in-place writers can
// never tear them.
void copy_node_bytes(const std::uint8_t* node, std::size_t offset, std::size_t len,
                     std::uint8_t* dst);

// --- parsing --------------------------------------------------------------

Status parse_header(std::span<const std::uint8_t> head, HeaderView& out);
Status parse_shortcuts(std::span<const std::uint8_t> head, const HeaderView& hdr,
                       std::vector<ShortcutEntry>& out);

// Segment whose covering shortcut key is the largest shortcut key <= key.
Status locate_segment(const HeaderView& hdr, std::span<const ShortcutEntry> shortcuts,
                      std::string_view key, SegmentDesc& out);
// Segment containing a given sorted-block offset.
Status segment_of_offset(const HeaderView& hdr, std::span<const ShortcutEntry> shortcuts,
                         std::uint16_t offset, SegmentDesc& out);

struct SegmentHit {
  bool found = false;            // some key <= target exists in this segment
  SortedItemView item;           // valid when found
  std::uint16_t insert_pos = 0;  // offset of the first item with key > target
};

// Streaming search of one segment for the largest key <= target.
// `covering_key` participates as the key of the segment's first payload.
Status search_segment(std::span<const std::uint8_t> seg, std::uint16_t seg_base,
                      std::string_view covering_key, NodeType type,
                      std::string_view target, SegmentHit& out);

// Iterates sorted items across segments, reconstructing shortcut-led keys.
class SortedWalker {
 public:
  // `block` spans [block_base, block_end) node-relative bytes of the sorted
  // block. Iteration starts at `start` (must be an item offset or block_end).
  SortedWalker(NodeType type, std::span<const ShortcutEntry> shortcuts,
               std::span<const std::uint8_t> block, std::uint16_t block_base,
               std::uint16_t block_end, std::uint16_t start);

  bool next(SortedItemView& out);
  Status status() const { return status_; }

 private:
  NodeType type_;
  std::span<const ShortcutEntry> shortcuts_;
  std::span<const std::uint8_t> block_;
  std::uint16_t base_;
  std::uint16_t end_;
  std::uint16_t pos_;
  std::size_t next_shortcut_ = 0;
  Status status_;
};

Status parse_log(std::span<const std::uint8_t> log_bytes, std::uint16_t base,
                 std::vector<LogEntryView>& out);

// Order-hint sort: replays insertion-time hints into an indirection array of
// indices into `entries`, in ascending key order (insertion order breaks
// ties). Entries with version > read_version are filtered out afterwards
// when `filter` is set.
Status sort_log(std::span<const LogEntryView> entries, std::uint64_t node_version,
                std::uint64_t read_version, bool filter, std::vector<std::uint32_t>& out);

// Follows back_ref chains through earlier log entries to the sorted-block
// anchor. `index_of_offset` maps a log offset to its index in `entries`.
Status resolve_anchor(std::span<const LogEntryView> entries, std::uint32_t idx,
                      std::uint16_t log_boundary, AnchorInfo& out);

// --- building -------------------------------------------------------------

struct BuildItem {
  std::string_view key;
  std::string_view value;  // leaf payload
  Lid child = kNullLid;    // interior payload
};

struct BuildSpec {
  NodeType type = NodeType::kLeaf;
  std::uint64_t node_version = 0;
  std::uint64_t old_version_link = 0;
  Lid link0 = kNullLid;
  Lid link1 = kNullLid;
};

std::size_t encoded_item_bytes(NodeType type, std::string_view key, std::string_view value);
// Conservative content size: ignores bytes saved by moving shortcut keys out
// of the sorted block, so fits_in_node(...) implies encode_node succeeds.
std::size_t content_bytes(NodeType type, std::span<const BuildItem> items);
bool fits_in_node(NodeType type, std::span<const BuildItem> items);

// Greedy boundary-key selection: maximizes shortcut count subject to a
// minimum segment size, similarly sized segments and the 464-byte budget.
std::vector<std::size_t> select_shortcuts(NodeType type, std::span<const BuildItem> items);

Status encode_node(const BuildSpec& spec, std::span<const BuildItem> items,
                   std::uint8_t* out /* kNodeSize bytes */);

// Decodes the full sorted block (test and merge support).
Status decode_sorted(const std::uint8_t* node, std::vector<SortedItemView>& out);

// --- in-place log append ---------------------------------------------------

struct LogAppend {
  LogKind kind = LogKind::kInsert;
  std::uint16_t back_ref = 0;
  std::uint64_t version = 0;  // absolute; delta computed against node_version
  std::string_view key;
  std::string_view value;
};

std::size_t log_entry_bytes(LogKind kind, std::size_t key_len, std::size_t value_len);

// Caller must hold the node lock. Writes the entry bytes, then publishes
// (bytes_used', seq+1, unlocked) with one atomic store. On error the node is
// left locked and unchanged.
Status append_and_publish(std::uint8_t* node, const LogAppend& entry);

// Rank the entry key would take among current log entries (equal keys count,
// so later entries sort after earlier ones).
Result<std::uint8_t> compute_order_hint(std::span<const LogEntryView> entries,
                                        std::string_view key);

std::string dump_node(std::span<const std::uint8_t> node);

}  // namespace honeycomb::node

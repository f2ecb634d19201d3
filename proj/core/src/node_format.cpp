#include "honeycomb/node_format.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace honeycomb {

const char* to_string(StatusCode code) {
  switch (code) {
    case StatusCode::kOk: return "ok";
    case StatusCode::kNotFound: return "not found";
    case StatusCode::kKeyTooLong: return "key too long";
    case StatusCode::kValueTooLong: return "value too long";
    case StatusCode::kCapacityExceeded: return "capacity exceeded";
    case StatusCode::kForceMerge: return "force merge";
    case StatusCode::kCorruptNode: return "corrupt node";
    case StatusCode::kUnknownLid: return "unknown lid";
    case StatusCode::kLidSpaceExhausted: return "lid space exhausted";
    case StatusCode::kOutOfMemory: return "out of memory";
    case StatusCode::kOverloaded: return "overloaded";
    case StatusCode::kResultTooLarge: return "result too large";
    case StatusCode::kInvalidArgument: return "invalid argument";
    case StatusCode::kIoError: return "io error";
    case StatusCode::kTimeout: return "timeout";
    case StatusCode::kConnectionReset: return "connection reset";
  }
  return "unknown";
}

Status validate_key(std::string_view key) {
  if (key.empty() || key.size() > kMaxKeyLen) return StatusCode::kKeyTooLong;
  return StatusCode::kOk;
}

Status validate_value(std::string_view value) {
  if (value.size() > kMaxValueLen) return StatusCode::kValueTooLong;
  return StatusCode::kOk;
}

}  // namespace honeycomb

namespace honeycomb::node {

namespace {

constexpr std::size_t kLidBytes = 6;

std::string_view as_view(const std::uint8_t* p, std::size_t len) {
  return {reinterpret_cast<const char*>(p), len};
}

std::size_t payload_bytes(NodeType type, const BuildItem& item) {
  return type == NodeType::kLeaf ? 2 + item.value.size() : kLidBytes;
}

}  // namespace

bool try_lock(std::uint8_t* node, std::uint64_t observed_word) {
  SizeLock s = SizeLock::unpack(observed_word);
  if (s.locked || s.retired) return false;
  SizeLock locked = s;
  locked.locked = true;
  std::uint64_t expected = observed_word;
  return word_ref(node, kOffSizeLock)
      .compare_exchange_strong(expected, locked.pack(), std::memory_order_acquire,
                               std::memory_order_relaxed);
}

void publish_unlock(std::uint8_t* node, std::uint16_t bytes_used, bool retired) {
  SizeLock cur = SizeLock::unpack(word_ref(node, kOffSizeLock).load(std::memory_order_relaxed));
  assert(cur.locked);
  SizeLock next;
  next.bytes_used = bytes_used;
  next.seq = (cur.seq + 1) & 0x7fffffff;
  next.locked = false;
  next.retired = retired;
  word_ref(node, kOffSizeLock).store(next.pack(), std::memory_order_release);
}

void set_link(std::uint8_t* node, std::size_t off, Lid lid) {
  word_ref(node, off).store(lid & kLidLimit, std::memory_order_release);
}

Lid load_link(const std::uint8_t* node, std::size_t off) {
  return load_word_acquire(node, off) & kLidLimit;
}

void copy_node_bytes(const std::uint8_t* node, std::size_t offset, std::size_t len,
                     std::uint8_t* dst) {
  assert(offset + len <= kNodeSize);
  const std::size_t atomic_offs[] = {kOffSizeLock, kOffLink0, kOffLink1};
  std::memcpy(dst, node + offset, len);
  for (std::size_t off : atomic_offs) {
    if (off >= offset && off + 8 <= offset + len) {
      std::uint64_t w = load_word_acquire(node, off);
      std::memcpy(dst + (off - offset), &w, 8);
    }
  }
}

Status parse_header(std::span<const std::uint8_t> head, HeaderView& out) {
  if (head.size() < kHeaderSize) return StatusCode::kCorruptNode;
  const std::uint8_t* p = head.data();
  out.size_lock = SizeLock::unpack(load_u64(p + kOffSizeLock));
  out.node_version = load_u64(p + kOffNodeVersion);
  out.old_version_link = load_u64(p + kOffOldLink);
  out.link0 = load_u64(p + kOffLink0) & kLidLimit;
  out.link1 = load_u64(p + kOffLink1) & kLidLimit;
  out.log_boundary = load_u16(p + kOffLogBoundary);
  std::uint8_t type = p[kOffNodeType];
  if (type > 1) return StatusCode::kCorruptNode;
  out.type = static_cast<NodeType>(type);
  out.shortcut_count = load_u16(p + kOffShortcutCount);
  out.shortcut_bytes = load_u16(p + kOffShortcutBytes);
  if (out.log_boundary < kBlockStart || out.log_boundary > out.size_lock.bytes_used ||
      out.size_lock.bytes_used > kNodeSize || out.shortcut_bytes > kShortcutBudget) {
    return StatusCode::kCorruptNode;
  }
  if (!out.is_leaf() && out.log_boundary != out.size_lock.bytes_used) {
    return StatusCode::kCorruptNode;  // interior nodes carry no log block
  }
  return StatusCode::kOk;
}

Status parse_shortcuts(std::span<const std::uint8_t> head, const HeaderView& hdr,
                       std::vector<ShortcutEntry>& out) {
  out.clear();
  if (head.size() < kBlockStart) return StatusCode::kCorruptNode;
  const std::uint8_t* p = head.data();
  std::size_t pos = kOffShortcuts;
  const std::size_t end = kOffShortcuts + hdr.shortcut_bytes;
  out.reserve(hdr.shortcut_count);
  for (std::uint16_t i = 0; i < hdr.shortcut_count; ++i) {
    if (pos + 2 > end) return StatusCode::kCorruptNode;
    std::uint16_t klen = load_u16(p + pos);
    pos += 2;
    if (klen == 0 || klen > kMaxKeyLen || pos + klen + 2 > end) return StatusCode::kCorruptNode;
    ShortcutEntry e;
    e.key = as_view(p + pos, klen);
    pos += klen;
    e.segment_offset = load_u16(p + pos);
    pos += 2;
    if (e.segment_offset < kBlockStart || e.segment_offset >= hdr.log_boundary) {
      return StatusCode::kCorruptNode;
    }
    if (!out.empty()) {
      if (compare_keys(out.back().key, e.key) >= 0 ||
          out.back().segment_offset >= e.segment_offset) {
        return StatusCode::kCorruptNode;
      }
    }
    out.push_back(e);
  }
  if (pos != end) return StatusCode::kCorruptNode;
  return StatusCode::kOk;
}

Status locate_segment(const HeaderView& hdr, std::span<const ShortcutEntry> shortcuts,
                      std::string_view key, SegmentDesc& out) {
  out.begin = kBlockStart;
  out.end = hdr.log_boundary;
  out.covering = -1;
  // Largest shortcut key <= key; entries are strictly ascending.
  int lo = 0, hi = static_cast<int>(shortcuts.size()) - 1, best = -1;
  while (lo <= hi) {
    int mid = (lo + hi) / 2;
    if (compare_keys(shortcuts[mid].key, key) <= 0) {
      best = mid;
      lo = mid + 1;
    } else {
      hi = mid - 1;
    }
  }
  if (best >= 0) {
    out.covering = best;
    out.begin = shortcuts[best].segment_offset;
    out.end = static_cast<std::size_t>(best + 1) < shortcuts.size()
                  ? shortcuts[best + 1].segment_offset
                  : hdr.log_boundary;
  } else if (!shortcuts.empty()) {
    out.end = shortcuts[0].segment_offset;
  }
  return StatusCode::kOk;
}

Status segment_of_offset(const HeaderView& hdr, std::span<const ShortcutEntry> shortcuts,
                         std::uint16_t offset, SegmentDesc& out) {
  out.begin = kBlockStart;
  out.end = hdr.log_boundary;
  out.covering = -1;
  for (std::size_t i = 0; i < shortcuts.size(); ++i) {
    if (shortcuts[i].segment_offset <= offset) {
      out.covering = static_cast<int>(i);
      out.begin = shortcuts[i].segment_offset;
      out.end = i + 1 < shortcuts.size() ? shortcuts[i + 1].segment_offset : hdr.log_boundary;
    } else {
      if (out.covering < 0) out.end = shortcuts[i].segment_offset;
      break;
    }
  }
  return StatusCode::kOk;
}

namespace {

// Parses one sorted item at `pos` within a segment span. `leading` marks the
// segment-start payload owned by the covering shortcut key.
Status parse_sorted_payload(std::span<const std::uint8_t> seg, std::size_t pos, NodeType type,
                            std::string_view& payload, std::size_t& next) {
  if (type == NodeType::kLeaf) {
    if (pos + 2 > seg.size()) return StatusCode::kCorruptNode;
    std::uint16_t vlen = load_u16(seg.data() + pos);
    if (vlen > kMaxValueLen || pos + 2 + vlen > seg.size()) return StatusCode::kCorruptNode;
    payload = as_view(seg.data() + pos + 2, vlen);
    next = pos + 2 + vlen;
  } else {
    if (pos + kLidBytes > seg.size()) return StatusCode::kCorruptNode;
    payload = as_view(seg.data() + pos, kLidBytes);
    next = pos + kLidBytes;
  }
  return StatusCode::kOk;
}

Status parse_sorted_key(std::span<const std::uint8_t> seg, std::size_t pos,
                        std::string_view& key, std::size_t& next) {
  if (pos + 2 > seg.size()) return StatusCode::kCorruptNode;
  std::uint16_t klen = load_u16(seg.data() + pos);
  if (klen == 0 || klen > kMaxKeyLen || pos + 2 + klen > seg.size()) {
    return StatusCode::kCorruptNode;
  }
  key = as_view(seg.data() + pos + 2, klen);
  next = pos + 2 + klen;
  return StatusCode::kOk;
}

}  // namespace

Status search_segment(std::span<const std::uint8_t> seg, std::uint16_t seg_base,
                      std::string_view covering_key, NodeType type,
                      std::string_view target, SegmentHit& out) {
  out = SegmentHit{};
  std::size_t pos = 0;
  if (!covering_key.empty()) {
    std::string_view payload;
    std::size_t next;
    Status st = parse_sorted_payload(seg, pos, type, payload, next);
    if (!st.ok()) return st;
    if (compare_keys(covering_key, target) <= 0) {
      out.found = true;
      out.item = {seg_base, covering_key, payload};
    }
    pos = next;
  }
  while (pos < seg.size()) {
    std::string_view key, payload;
    std::size_t next;
    Status st = parse_sorted_key(seg, pos, key, next);
    if (!st.ok()) return st;
    std::size_t item_off = pos;
    st = parse_sorted_payload(seg, next, type, payload, next);
    if (!st.ok()) return st;
    if (compare_keys(key, target) > 0) {
      out.insert_pos = static_cast<std::uint16_t>(seg_base + item_off);
      return StatusCode::kOk;
    }
    out.found = true;
    out.item = {static_cast<std::uint16_t>(seg_base + item_off), key, payload};
    pos = next;
  }
  out.insert_pos = static_cast<std::uint16_t>(seg_base + seg.size());
  return StatusCode::kOk;
}

SortedWalker::SortedWalker(NodeType type, std::span<const ShortcutEntry> shortcuts,
                           std::span<const std::uint8_t> block, std::uint16_t block_base,
                           std::uint16_t block_end, std::uint16_t start)
    : type_(type), shortcuts_(shortcuts), block_(block), base_(block_base),
      end_(block_end), pos_(start) {
  assert(start >= block_base && start <= block_end);
  while (next_shortcut_ < shortcuts_.size() &&
         shortcuts_[next_shortcut_].segment_offset < pos_) {
    ++next_shortcut_;
  }
}

bool SortedWalker::next(SortedItemView& out) {
  if (!status_.ok() || pos_ >= end_) return false;
  std::size_t rel = pos_ - base_;
  std::string_view key;
  std::size_t next = rel;
  if (next_shortcut_ < shortcuts_.size() &&
      shortcuts_[next_shortcut_].segment_offset == pos_) {
    key = shortcuts_[next_shortcut_].key;
    ++next_shortcut_;
  } else {
    status_ = parse_sorted_key(block_, rel, key, next);
    if (!status_.ok()) return false;
  }
  std::string_view payload;
  std::size_t after;
  status_ = parse_sorted_payload(block_.subspan(0, end_ - base_), next, type_, payload, after);
  if (!status_.ok()) return false;
  out = {pos_, key, payload};
  pos_ = static_cast<std::uint16_t>(base_ + after);
  return true;
}

std::size_t log_entry_bytes(LogKind kind, std::size_t key_len, std::size_t value_len) {
  // kind(1) back_ref(2) order_hint(1) version_delta(5) key blob value blob
  std::size_t n = 1 + 2 + 1 + 5 + 2 + key_len;
  if (kind != LogKind::kDelete) n += 2 + value_len;
  return n;
}

Status parse_log(std::span<const std::uint8_t> log_bytes, std::uint16_t base,
                 std::vector<LogEntryView>& out) {
  out.clear();
  const std::uint8_t* p = log_bytes.data();
  std::size_t pos = 0;
  while (pos < log_bytes.size()) {
    if (out.size() >= kMaxLogEntries) return StatusCode::kCorruptNode;
    if (pos + 11 > log_bytes.size()) return StatusCode::kCorruptNode;
    LogEntryView e;
    e.offset = static_cast<std::uint16_t>(base + pos);
    std::uint8_t kind = p[pos];
    if (kind < 1 || kind > 3) return StatusCode::kCorruptNode;
    e.kind = static_cast<LogKind>(kind);
    e.back_ref = load_u16(p + pos + 1);
    e.order_hint = p[pos + 3];
    std::uint64_t delta = 0;
    for (int i = 4; i >= 0; --i) delta = (delta << 8) | p[pos + 4 + i];
    e.version_delta = delta;
    std::size_t cur = pos + 9;
    std::uint16_t klen = load_u16(p + cur);
    cur += 2;
    if (klen == 0 || klen > kMaxKeyLen || cur + klen > log_bytes.size()) {
      return StatusCode::kCorruptNode;
    }
    e.key = as_view(p + cur, klen);
    cur += klen;
    if (e.kind != LogKind::kDelete) {
      if (cur + 2 > log_bytes.size()) return StatusCode::kCorruptNode;
      std::uint16_t vlen = load_u16(p + cur);
      cur += 2;
      if (vlen > kMaxValueLen || cur + vlen > log_bytes.size()) return StatusCode::kCorruptNode;
      e.value = as_view(p + cur, vlen);
      cur += vlen;
    }
    e.encoded_size = cur - pos;
    out.push_back(e);
    pos = cur;
  }
  return StatusCode::kOk;
}

Status sort_log(std::span<const LogEntryView> entries, std::uint64_t node_version,
                std::uint64_t read_version, bool filter, std::vector<std::uint32_t>& out) {
  out.clear();
  std::vector<std::uint32_t> order;
  order.reserve(entries.size());
  for (std::uint32_t i = 0; i < entries.size(); ++i) {
    std::uint8_t hint = entries[i].order_hint;
    if (hint > order.size()) return StatusCode::kCorruptNode;
    order.insert(order.begin() + hint, i);
  }
  out.reserve(order.size());
  for (std::uint32_t idx : order) {
    if (filter && node_version + entries[idx].version_delta > read_version) continue;
    out.push_back(idx);
  }
  return StatusCode::kOk;
}

Status resolve_anchor(std::span<const LogEntryView> entries, std::uint32_t idx,
                      std::uint16_t log_boundary, AnchorInfo& out) {
  std::uint32_t cur = idx;
  for (std::size_t hops = 0; hops <= entries.size(); ++hops) {
    const LogEntryView& e = entries[cur];
    // Inserts anchor at a sorted position (log_boundary = past the last
    // item); updates and deletes at or past log_boundary target an earlier
    // log entry.
    if (e.kind == LogKind::kInsert) {
      if (e.back_ref > log_boundary) return StatusCode::kCorruptNode;
      out.anchor = e.back_ref;
      out.replaces = false;
      return StatusCode::kOk;
    }
    if (e.back_ref < log_boundary) {
      out.anchor = e.back_ref;
      out.replaces = true;
      return StatusCode::kOk;
    }
    // chains through the log strictly decrease
    if (e.back_ref >= e.offset) return StatusCode::kCorruptNode;
    bool found = false;
    for (std::uint32_t j = 0; j < cur; ++j) {
      if (entries[j].offset == e.back_ref) {
        cur = j;
        found = true;
        break;
      }
    }
    if (!found) return StatusCode::kCorruptNode;
  }
  return StatusCode::kCorruptNode;
}

std::size_t encoded_item_bytes(NodeType type, std::string_view key, std::string_view value) {
  return 2 + key.size() + (type == NodeType::kLeaf ? 2 + value.size() : kLidBytes);
}

std::size_t content_bytes(NodeType type, std::span<const BuildItem> items) {
  std::size_t total = 0;
  for (const BuildItem& it : items) total += encoded_item_bytes(type, it.key, it.value);
  return total;
}

bool fits_in_node(NodeType type, std::span<const BuildItem> items) {
  return kBlockStart + content_bytes(type, items) <= kNodeSize;
}

std::vector<std::size_t> select_shortcuts(NodeType type, std::span<const BuildItem> items) {
  std::vector<std::size_t> selected;
  if (items.size() < 2) return selected;
  std::size_t total = 0;
  std::size_t key_cost_sum = 0;
  for (const BuildItem& it : items) {
    total += encoded_item_bytes(type, it.key, it.value);
    key_cost_sum += 4 + it.key.size();  // len prefix + key + segment offset
  }
  if (total < 2 * kMinSegmentBytes) return selected;
  std::size_t avg_key_cost = key_cost_sum / items.size();
  std::size_t max_keys_by_budget = kShortcutBudget / std::max<std::size_t>(avg_key_cost, 1);
  std::size_t max_segments =
      std::min(total / kMinSegmentBytes, max_keys_by_budget + 1);
  if (max_segments < 2) return selected;
  std::size_t target = std::max(kMinSegmentBytes, (total + max_segments - 1) / max_segments);

  std::size_t budget = kShortcutBudget;
  std::size_t cur = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::size_t full = encoded_item_bytes(type, items[i].key, items[i].value);
    std::size_t key_cost = 4 + items[i].key.size();
    if (i > 0 && cur >= target && budget >= key_cost) {
      selected.push_back(i);
      budget -= key_cost;
      cur = payload_bytes(type, items[i]);
    } else {
      cur += full;
    }
  }
  return selected;
}

Status encode_node(const BuildSpec& spec, std::span<const BuildItem> items, std::uint8_t* out) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    Status st = validate_key(items[i].key);
    if (!st.ok()) return st;
    if (spec.type == NodeType::kLeaf) {
      st = validate_value(items[i].value);
      if (!st.ok()) return st;
    }
    if (i > 0 && compare_keys(items[i - 1].key, items[i].key) >= 0) {
      return StatusCode::kInvalidArgument;
    }
  }
  if (!fits_in_node(spec.type, items)) return StatusCode::kCapacityExceeded;

  std::vector<std::size_t> shortcut_idx = select_shortcuts(spec.type, items);
  std::memset(out, 0, kNodeSize);

  std::size_t sc_pos = kOffShortcuts;
  std::size_t block_pos = kBlockStart;
  std::size_t next_sc = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const BuildItem& it = items[i];
    bool is_shortcut = next_sc < shortcut_idx.size() && shortcut_idx[next_sc] == i;
    if (is_shortcut) {
      store_u16(out + sc_pos, static_cast<std::uint16_t>(it.key.size()));
      sc_pos += 2;
      std::memcpy(out + sc_pos, it.key.data(), it.key.size());
      sc_pos += it.key.size();
      store_u16(out + sc_pos, static_cast<std::uint16_t>(block_pos));
      sc_pos += 2;
      ++next_sc;
    } else {
      store_u16(out + block_pos, static_cast<std::uint16_t>(it.key.size()));
      block_pos += 2;
      std::memcpy(out + block_pos, it.key.data(), it.key.size());
      block_pos += it.key.size();
    }
    if (spec.type == NodeType::kLeaf) {
      store_u16(out + block_pos, static_cast<std::uint16_t>(it.value.size()));
      block_pos += 2;
      std::memcpy(out + block_pos, it.value.data(), it.value.size());
      block_pos += it.value.size();
    } else {
      store_u48(out + block_pos, it.child);
      block_pos += kLidBytes;
    }
  }
  assert(block_pos <= kNodeSize);
  assert(sc_pos <= kOffShortcuts + kShortcutBudget);

  SizeLock sl;
  sl.bytes_used = static_cast<std::uint16_t>(block_pos);
  store_u64(out + kOffSizeLock, sl.pack());
  store_u64(out + kOffNodeVersion, spec.node_version);
  store_u64(out + kOffOldLink, spec.old_version_link);
  store_u64(out + kOffLink0, spec.link0 & kLidLimit);
  store_u64(out + kOffLink1, spec.link1 & kLidLimit);
  store_u16(out + kOffLogBoundary, static_cast<std::uint16_t>(block_pos));
  out[kOffNodeType] = static_cast<std::uint8_t>(spec.type);
  store_u16(out + kOffShortcutCount, static_cast<std::uint16_t>(shortcut_idx.size()));
  store_u16(out + kOffShortcutBytes, static_cast<std::uint16_t>(sc_pos - kOffShortcuts));
  return StatusCode::kOk;
}

Status decode_sorted(const std::uint8_t* node, std::vector<SortedItemView>& out) {
  out.clear();
  HeaderView hdr;
  Status st = parse_header({node, kHeaderSize}, hdr);
  if (!st.ok()) return st;
  std::vector<ShortcutEntry> shortcuts;
  st = parse_shortcuts({node, kBlockStart}, hdr, shortcuts);
  if (!st.ok()) return st;
  SortedWalker walker(hdr.type, shortcuts,
                      {node + kBlockStart, static_cast<std::size_t>(hdr.log_boundary - kBlockStart)},
                      kBlockStart, hdr.log_boundary, kBlockStart);
  SortedItemView item;
  while (walker.next(item)) out.push_back(item);
  return walker.status();
}

Result<std::uint8_t> compute_order_hint(std::span<const LogEntryView> entries,
                                        std::string_view key) {
  std::size_t rank = 0;
  for (const LogEntryView& e : entries) {
    if (compare_keys(e.key, key) <= 0) ++rank;
  }
  if (rank > 0xff) return Result<std::uint8_t>::error(StatusCode::kForceMerge);
  return Result<std::uint8_t>::of(static_cast<std::uint8_t>(rank));
}

Status append_and_publish(std::uint8_t* node, const LogAppend& entry) {
  Status st = validate_key(entry.key);
  if (!st.ok()) return st;
  if (entry.kind != LogKind::kDelete) {
    st = validate_value(entry.value);
    if (!st.ok()) return st;
  }
  SizeLock cur = SizeLock::unpack(word_ref(node, kOffSizeLock).load(std::memory_order_relaxed));
  assert(cur.locked);
  HeaderView hdr;
  st = parse_header({node, kHeaderSize}, hdr);
  if (!st.ok()) return st;
  if (!hdr.is_leaf()) return StatusCode::kInvalidArgument;

  std::uint64_t node_version = hdr.node_version;
  if (entry.version < node_version) return StatusCode::kInvalidArgument;
  std::uint64_t delta = entry.version - node_version;
  if (delta > kMaxVersionDelta) return StatusCode::kForceMerge;

  std::vector<LogEntryView> log;
  st = parse_log({node + hdr.log_boundary,
                  static_cast<std::size_t>(cur.bytes_used - hdr.log_boundary)},
                 hdr.log_boundary, log);
  if (!st.ok()) return st;
  if (log.size() >= kMaxLogEntries) return StatusCode::kForceMerge;

  std::size_t sz = log_entry_bytes(entry.kind, entry.key.size(), entry.value.size());
  if (cur.bytes_used + sz > kNodeSize) return StatusCode::kCapacityExceeded;

  Result<std::uint8_t> hint = compute_order_hint(log, entry.key);
  if (!hint.ok()) return hint.status;

  std::uint8_t* p = node + cur.bytes_used;
  p[0] = static_cast<std::uint8_t>(entry.kind);
  store_u16(p + 1, entry.back_ref);
  p[3] = hint.value;
  for (int i = 0; i < 5; ++i) p[4 + i] = static_cast<std::uint8_t>(delta >> (8 * i));
  std::size_t pos = 9;
  store_u16(p + pos, static_cast<std::uint16_t>(entry.key.size()));
  pos += 2;
  std::memcpy(p + pos, entry.key.data(), entry.key.size());
  pos += entry.key.size();
  if (entry.kind != LogKind::kDelete) {
    store_u16(p + pos, static_cast<std::uint16_t>(entry.value.size()));
    pos += 2;
    std::memcpy(p + pos, entry.value.data(), entry.value.size());
    pos += entry.value.size();
  }
  assert(pos == sz);

  publish_unlock(node, static_cast<std::uint16_t>(cur.bytes_used + sz), false);
  return StatusCode::kOk;
}

std::string dump_node(std::span<const std::uint8_t> node) {
  std::ostringstream os;
  if (node.size() < kNodeSize) {
    os << "short buffer (" << node.size() << " bytes)\n";
    return os.str();
  }
  HeaderView hdr;
  Status st = parse_header(node.subspan(0, kHeaderSize), hdr);
  if (!st.ok()) {
    os << "corrupt header: " << st.message() << "\n";
    return os.str();
  }
  auto print_bytes = [&os](std::string_view s) {
    os << '"';
    for (char c : s) {
      if (c >= 0x20 && c < 0x7f) {
        os << c;
      } else {
        static const char* hex = "0123456789abcdef";
        os << "\\x" << hex[(c >> 4) & 0xf] << hex[c & 0xf];
      }
    }
    os << '"';
  };
  os << "node_type:        " << (hdr.is_leaf() ? "leaf" : "interior") << "\n"
     << "bytes_used:       " << hdr.size_lock.bytes_used << "\n"
     << "seq:              " << hdr.size_lock.seq << (hdr.size_lock.locked ? " (locked)" : "")
     << (hdr.size_lock.retired ? " (retired)" : "") << "\n"
     << "node_version:     " << hdr.node_version << "\n"
     << "old_version_link: 0x" << std::hex << hdr.old_version_link << std::dec << "\n";
  if (hdr.is_leaf()) {
    os << "left_sibling:     " << hdr.link0 << "\n"
       << "right_sibling:    " << hdr.link1 << "\n";
  } else {
    os << "leftmost_child:   " << hdr.link0 << "\n";
  }
  os << "log_boundary:     " << hdr.log_boundary << "\n"
     << "shortcut_count:   " << hdr.shortcut_count << "\n";

  std::vector<ShortcutEntry> shortcuts;
  st = parse_shortcuts(node.subspan(0, kBlockStart), hdr, shortcuts);
  if (!st.ok()) {
    os << "corrupt shortcut block: " << st.message() << "\n";
    return os.str();
  }
  for (std::size_t i = 0; i < shortcuts.size(); ++i) {
    os << "  shortcut[" << i << "] @" << shortcuts[i].segment_offset << " key=";
    print_bytes(shortcuts[i].key);
    os << "\n";
  }

  os << "sorted block [" << kBlockStart << ", " << hdr.log_boundary << "):\n";
  SortedWalker walker(hdr.type, shortcuts,
                      node.subspan(kBlockStart, hdr.log_boundary - kBlockStart), kBlockStart,
                      hdr.log_boundary, kBlockStart);
  SortedItemView item;
  while (walker.next(item)) {
    os << "  item @" << item.offset << " key=";
    print_bytes(item.key);
    if (hdr.is_leaf()) {
      os << " value=";
      print_bytes(item.payload);
    } else {
      os << " child=" << load_u48(reinterpret_cast<const std::uint8_t*>(item.payload.data()));
    }
    os << "\n";
  }
  if (!walker.status().ok()) {
    os << "corrupt sorted block: " << walker.status().message() << "\n";
    return os.str();
  }

  if (hdr.is_leaf()) {
    os << "log block [" << hdr.log_boundary << ", " << hdr.size_lock.bytes_used << "):\n";
    std::vector<LogEntryView> log;
    st = parse_log(node.subspan(hdr.log_boundary, hdr.size_lock.bytes_used - hdr.log_boundary),
                   hdr.log_boundary, log);
    if (!st.ok()) {
      os << "corrupt log block: " << st.message() << "\n";
      return os.str();
    }
    for (const LogEntryView& e : log) {
      os << "  entry @" << e.offset << " ";
      switch (e.kind) {
        case LogKind::kInsert: os << "insert"; break;
        case LogKind::kUpdate: os << "update"; break;
        case LogKind::kDelete: os << "delete"; break;
      }
      os << " back_ref=" << e.back_ref << " hint=" << static_cast<int>(e.order_hint)
         << " delta=" << e.version_delta << " key=";
      print_bytes(e.key);
      if (e.kind != LogKind::kDelete) {
        os << " value=";
        print_bytes(e.value);
      }
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace honeycomb::node

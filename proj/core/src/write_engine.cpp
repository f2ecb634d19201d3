#include "honeycomb/write_engine.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <thread>

namespace honeycomb {

namespace {

using node::HeaderView;
using node::LogKind;
using node::NodeType;
using node::SizeLock;

// Placeholder child lids resolved after allocation (outside the 48-bit space).
constexpr Lid kLeftChildPlaceholder = ~std::uint64_t{0};
constexpr Lid kRightChildPlaceholder = ~std::uint64_t{0} - 1;

// Internal retry sentinel; never escapes the engine.
constexpr StatusCode kRetry = StatusCode::kForceMerge;

struct EpochOp {
  EpochRegistry& epochs;
  int slot;
  EpochOp(EpochRegistry& e, int s) : epochs(e), slot(s) { epochs.begin_op(slot); }
  ~EpochOp() { epochs.end_op(slot); }
};

void unlock_restore(std::uint8_t* buf, std::uint64_t observed_word) {
  // Nothing changed while the lock was held; restore the exact pre-lock word.
  node::word_ref(buf, node::kOffSizeLock).store(observed_word, std::memory_order_release);
}

void retire_unlock(std::uint8_t* buf) {
  SizeLock cur = node::SizeLock::unpack(
      node::word_ref(buf, node::kOffSizeLock).load(std::memory_order_relaxed));
  node::publish_unlock(buf, cur.bytes_used, /*retired=*/true);
}

void bump_unlock(std::uint8_t* buf) {
  SizeLock cur = node::SizeLock::unpack(
      node::word_ref(buf, node::kOffSizeLock).load(std::memory_order_relaxed));
  node::publish_unlock(buf, cur.bytes_used, /*retired=*/false);
}

std::size_t leaf_split_index(std::span<const Item> items) {
  std::size_t total = 0;
  for (const Item& it : items) total += node::encoded_item_bytes(NodeType::kLeaf, it.key, it.value);
  std::size_t half = total / 2;
  std::size_t prefix = 0;
  for (std::size_t i = 0; i + 1 < items.size(); ++i) {
    prefix += node::encoded_item_bytes(NodeType::kLeaf, items[i].key, items[i].value);
    if (prefix >= half) return i + 1;
  }
  return items.size() - 1;
}

}  // namespace

WriteEngine::WriteEngine(Config cfg, BufferArena& arena, PageTablePair& tables,
                         GlobalVersions& versions, ReleaseGate& gate, EpochRegistry& epochs,
                         ReclaimList& reclaim, StoreMetrics& metrics)
    : cfg_(cfg), arena_(arena), tables_(tables), versions_(versions), gate_(gate),
      epochs_(epochs), reclaim_(reclaim), metrics_(metrics) {}

void WriteEngine::backoff(unsigned attempt) {
  if (attempt <= cfg_.backoff_after_restarts) return;
  unsigned shift = std::min(attempt - cfg_.backoff_after_restarts, 10u);
  std::this_thread::sleep_for(std::chrono::microseconds(1u << shift));
}

std::uint8_t* WriteEngine::alloc_with_retry() {
  for (unsigned i = 0; i < cfg_.max_alloc_retries; ++i) {
    std::uint8_t* buf = arena_.allocate();
    if (buf) return buf;
    metrics_.oom_retries.fetch_add(1, std::memory_order_relaxed);
    if (reclaim_.sweep() == 0 && reclaim_.pending() == 0) break;
    std::this_thread::sleep_for(std::chrono::microseconds(50 << std::min(i, 8u)));
  }
  return arena_.allocate();
}

Status WriteEngine::traverse(std::string_view key, std::vector<PathEntry>& path) {
  for (unsigned attempt = 0;; ++attempt) {
    if (attempt > 64) return StatusCode::kCorruptNode;
    path.clear();
    RootInfo root = tables_.write_root();
    Lid lid = root.lid;
    bool restart = false;
    for (std::uint16_t level = root.height; level >= 1; --level) {
      auto addr = tables_.resolve(lid, PageTablePair::Side::kWrite);
      if (!addr.ok()) {
        restart = true;  // raced a structural change
        break;
      }
      std::uint8_t* buf = reinterpret_cast<std::uint8_t*>(addr.value);
      std::array<std::uint8_t, kBlockStart> head;
      node::copy_node_bytes(buf, 0, kBlockStart, head.data());
      HeaderView hdr;
      Status st = node::parse_header({head.data(), kHeaderSize}, hdr);
      if (!st.ok()) return st;
      if (hdr.size_lock.retired) {
        restart = true;
        break;
      }
      PathEntry entry{lid, buf, hdr.size_lock.pack()};
      path.push_back(entry);
      if (level == 1) {
        if (!hdr.is_leaf()) return StatusCode::kCorruptNode;
        return StatusCode::kOk;
      }
      if (hdr.is_leaf()) return StatusCode::kCorruptNode;
      std::vector<node::ShortcutEntry> shortcuts;
      st = node::parse_shortcuts({head.data(), kBlockStart}, hdr, shortcuts);
      if (!st.ok()) return st;
      node::SegmentDesc seg;
      st = node::locate_segment(hdr, shortcuts, key, seg);
      if (!st.ok()) return st;
      std::string_view covering =
          seg.covering >= 0 ? shortcuts[seg.covering].key : std::string_view{};
      node::SegmentHit hit;
      st = node::search_segment({buf + seg.begin, static_cast<std::size_t>(seg.end - seg.begin)},
                                seg.begin, covering, NodeType::kInterior, key, hit);
      if (!st.ok()) return st;
      Lid child = hit.found
                      ? node::load_u48(reinterpret_cast<const std::uint8_t*>(hit.item.payload.data()))
                      : hdr.leftmost_child();
      if (child == kNullLid) return StatusCode::kCorruptNode;
      lid = child;
    }
    if (!restart) return StatusCode::kCorruptNode;
    metrics_.restarts.fetch_add(1, std::memory_order_relaxed);
  }
}

Status WriteEngine::read_leaf_view(const PathEntry& leaf, LeafView& view) {
  std::array<std::uint8_t, kBlockStart> head;
  node::copy_node_bytes(leaf.buf, 0, kBlockStart, head.data());
  Status st = node::parse_header({head.data(), kHeaderSize}, view.hdr);
  if (!st.ok()) return st;
  view.hdr.size_lock = SizeLock::unpack(leaf.word);
  if (!view.hdr.is_leaf()) return StatusCode::kCorruptNode;
  st = node::parse_shortcuts({head.data(), kBlockStart}, view.hdr, view.shortcuts);
  if (!st.ok()) return st;
  std::uint16_t bytes_used = view.hdr.size_lock.bytes_used;
  return node::parse_log(
      {leaf.buf + view.hdr.log_boundary,
       static_cast<std::size_t>(bytes_used - view.hdr.log_boundary)},
      view.hdr.log_boundary, view.log);
}

Status WriteEngine::find_target(const PathEntry& leaf, const LeafView& view,
                                std::string_view key, WriteTarget& out) {
  node::SegmentDesc seg;
  Status st = node::locate_segment(view.hdr, view.shortcuts, key, seg);
  if (!st.ok()) return st;
  std::string_view covering =
      seg.covering >= 0 ? view.shortcuts[seg.covering].key : std::string_view{};
  node::SegmentHit hit;
  st = node::search_segment(
      {leaf.buf + seg.begin, static_cast<std::size_t>(seg.end - seg.begin)}, seg.begin,
      covering, NodeType::kLeaf, key, hit);
  if (!st.ok()) return st;

  bool sorted_exact = hit.found && compare_keys(hit.item.key, key) == 0;
  out.successor_offset = sorted_exact || !hit.found
                             ? hit.insert_pos
                             : hit.insert_pos;  // first sorted item with a greater key

  // Latest log entry for the key wins over the sorted block.
  const node::LogEntryView* last = nullptr;
  for (const node::LogEntryView& e : view.log) {
    if (compare_keys(e.key, key) == 0) last = &e;
  }
  if (last) {
    out.exists = last->kind != LogKind::kDelete;
    out.target_offset = last->offset;
  } else if (sorted_exact) {
    out.exists = true;
    out.target_offset = hit.item.offset;
  } else {
    out.exists = false;
    out.target_offset = 0;
  }
  return StatusCode::kOk;
}

Status WriteEngine::decode_interior(const PathEntry& nodep, Lid& leftmost,
                                    std::vector<InteriorItem>& items) {
  items.clear();
  std::array<std::uint8_t, kBlockStart> head;
  node::copy_node_bytes(nodep.buf, 0, kBlockStart, head.data());
  HeaderView hdr;
  Status st = node::parse_header({head.data(), kHeaderSize}, hdr);
  if (!st.ok()) return st;
  if (hdr.is_leaf()) return StatusCode::kCorruptNode;
  leftmost = hdr.leftmost_child();
  std::vector<node::ShortcutEntry> shortcuts;
  st = node::parse_shortcuts({head.data(), kBlockStart}, hdr, shortcuts);
  if (!st.ok()) return st;
  node::SortedWalker walker(
      NodeType::kInterior, shortcuts,
      {nodep.buf + kBlockStart, static_cast<std::size_t>(hdr.log_boundary - kBlockStart)},
      kBlockStart, hdr.log_boundary, kBlockStart);
  node::SortedItemView item;
  while (walker.next(item)) {
    items.push_back({std::string(item.key),
                     node::load_u48(reinterpret_cast<const std::uint8_t*>(item.payload.data()))});
  }
  return walker.status();
}

Status WriteEngine::merge_blocks(const PathEntry& leaf, const HeaderView&,
                                 std::vector<Item> merged_items, std::uint64_t version,
                                 std::size_t& live_bytes_out) {
  std::vector<node::BuildItem> build;
  build.reserve(merged_items.size());
  for (const Item& it : merged_items) build.push_back({it.key, it.value, kNullLid});
  live_bytes_out = node::content_bytes(NodeType::kLeaf, build);

  std::uint8_t* newbuf = alloc_with_retry();
  if (!newbuf) return StatusCode::kOutOfMemory;

  node::BuildSpec spec;
  spec.type = NodeType::kLeaf;
  spec.node_version = version;
  spec.old_version_link = cfg_.mvcc ? reinterpret_cast<std::uint64_t>(leaf.buf) : 0;
  spec.link0 = node::load_link(leaf.buf, node::kOffLink0);
  spec.link1 = node::load_link(leaf.buf, node::kOffLink1);
  Status st = node::encode_node(spec, build, newbuf);
  if (!st.ok()) {
    arena_.free(newbuf);
    return st;
  }
  st = tables_.update_mapping(leaf.lid, reinterpret_cast<std::uint64_t>(newbuf));
  assert(st.ok());
  retire_unlock(leaf.buf);
  gate_.release(version);
  reclaim_.retire({leaf.buf}, {});
  metrics_.merges.fetch_add(1, std::memory_order_relaxed);
  return StatusCode::kOk;
}

Status WriteEngine::split(const std::vector<PathEntry>& path, const HeaderView& leaf_hdr,
                          const std::vector<Item>& leaf_items, std::uint64_t version) {
  (void)leaf_hdr;
  const PathEntry& leaf = path.back();
  if (leaf_items.size() < 2) return StatusCode::kCapacityExceeded;

  // Plan interior updates bottom-up; placeholders stand in for the new lids.
  struct InteriorPlan {
    const PathEntry* node = nullptr;
    Lid leftmost = kNullLid;
    std::vector<InteriorItem> items;  // with child replaced and separator inserted
    std::size_t promote = 0;          // split point; valid when this node splits
  };
  std::vector<InteriorPlan> split_plans;  // nodes that split, bottom-up
  std::optional<InteriorPlan> root_of_split;

  std::size_t leaf_cut = leaf_split_index(leaf_items);
  std::string pending_sep = leaf_items[leaf_cut].key;
  Lid replaced_child = leaf.lid;

  for (std::size_t i = path.size() - 1; i-- > 0;) {
    InteriorPlan plan;
    plan.node = &path[i];
    Status st = decode_interior(path[i], plan.leftmost, plan.items);
    if (!st.ok()) return st;
    std::size_t insert_at = 0;
    if (plan.leftmost == replaced_child) {
      plan.leftmost = kLeftChildPlaceholder;
      insert_at = 0;
    } else {
      bool found = false;
      for (std::size_t j = 0; j < plan.items.size(); ++j) {
        if (plan.items[j].child == replaced_child) {
          plan.items[j].child = kLeftChildPlaceholder;
          insert_at = j + 1;
          found = true;
          break;
        }
      }
      if (!found) return kRetry;  // structure changed underneath us
    }
    plan.items.insert(plan.items.begin() + insert_at,
                      {pending_sep, kRightChildPlaceholder});

    std::size_t content = 0;
    for (const InteriorItem& it : plan.items) content += 2 + it.key.size() + 6;
    if (kBlockStart + content <= kNodeSize) {
      root_of_split = std::move(plan);
      break;
    }
    // this node splits as well
    std::size_t total = content;
    std::size_t half = total / 2;
    std::size_t prefix = 0;
    std::size_t promote = plan.items.size() - 1;
    for (std::size_t j = 0; j < plan.items.size(); ++j) {
      prefix += 2 + plan.items[j].key.size() + 6;
      if (prefix >= half) {
        promote = j;
        break;
      }
    }
    plan.promote = promote;
    pending_sep = plan.items[promote].key;
    replaced_child = path[i].lid;
    split_plans.push_back(std::move(plan));
  }

  // Lock the interior nodes to split plus the root of the split.
  std::vector<std::pair<std::uint8_t*, std::uint64_t>> locked;
  auto unlock_all = [&] {
    for (auto it = locked.rbegin(); it != locked.rend(); ++it) {
      unlock_restore(it->first, it->second);
    }
    locked.clear();
  };
  for (const InteriorPlan& plan : split_plans) {
    if (!node::try_lock(plan.node->buf, plan.node->word)) {
      unlock_all();
      metrics_.lock_failures.fetch_add(1, std::memory_order_relaxed);
      return kRetry;
    }
    locked.push_back({plan.node->buf, plan.node->word});
  }
  if (root_of_split) {
    if (!node::try_lock(root_of_split->node->buf, root_of_split->node->word)) {
      unlock_all();
      metrics_.lock_failures.fetch_add(1, std::memory_order_relaxed);
      return kRetry;
    }
    locked.push_back({root_of_split->node->buf, root_of_split->node->word});
  }

  // Lock the sibling leaves for the link repair.
  Lid left_lid = node::load_link(leaf.buf, node::kOffLink0);
  Lid right_lid = node::load_link(leaf.buf, node::kOffLink1);
  std::uint8_t* left_buf = nullptr;
  std::uint8_t* right_buf = nullptr;
  auto lock_sibling = [&](Lid lid, std::uint8_t*& out) -> bool {
    if (lid == kNullLid) return true;
    auto addr = tables_.resolve(lid, PageTablePair::Side::kWrite);
    if (!addr.ok()) return false;
    std::uint8_t* buf = reinterpret_cast<std::uint8_t*>(addr.value);
    for (unsigned i = 0; i < 64; ++i) {
      std::uint64_t w = node::load_word_acquire(buf, node::kOffSizeLock);
      SizeLock sl = SizeLock::unpack(w);
      if (sl.retired) return false;
      if (!sl.locked && node::try_lock(buf, w)) {
        out = buf;
        locked.push_back({buf, w});
        return true;
      }
      std::this_thread::yield();
    }
    return false;
  };
  if (!lock_sibling(left_lid, left_buf) || !lock_sibling(right_lid, right_buf)) {
    unlock_all();
    metrics_.lock_failures.fetch_add(1, std::memory_order_relaxed);
    return kRetry;
  }

  // Allocate all new lids and buffers before touching anything.
  std::size_t pair_count = 1 + split_plans.size();
  std::vector<Lid> new_left_lid(pair_count), new_right_lid(pair_count);
  std::vector<std::uint8_t*> new_left_buf(pair_count, nullptr),
      new_right_buf(pair_count, nullptr);
  std::uint8_t* root_swap_buf = nullptr;
  Lid new_root_lid = kNullLid;
  std::uint8_t* new_root_buf = nullptr;
  std::vector<std::uint8_t*> allocated;
  auto fail_alloc = [&](Status st) {
    for (std::uint8_t* b : allocated) arena_.free(b);
    unlock_all();
    return st;
  };
  for (std::size_t k = 0; k < pair_count; ++k) {
    auto l = tables_.allocate_lid();
    auto r = tables_.allocate_lid();
    if (!l.ok() || !r.ok()) return fail_alloc(StatusCode::kLidSpaceExhausted);
    new_left_lid[k] = l.value;
    new_right_lid[k] = r.value;
    new_left_buf[k] = alloc_with_retry();
    new_right_buf[k] = alloc_with_retry();
    if (!new_left_buf[k] || !new_right_buf[k]) return fail_alloc(StatusCode::kOutOfMemory);
    allocated.push_back(new_left_buf[k]);
    allocated.push_back(new_right_buf[k]);
  }
  if (root_of_split) {
    root_swap_buf = alloc_with_retry();
    if (!root_swap_buf) return fail_alloc(StatusCode::kOutOfMemory);
    allocated.push_back(root_swap_buf);
  } else {
    auto l = tables_.allocate_lid();
    if (!l.ok()) return fail_alloc(StatusCode::kLidSpaceExhausted);
    new_root_lid = l.value;
    new_root_buf = alloc_with_retry();
    if (!new_root_buf) return fail_alloc(StatusCode::kOutOfMemory);
    allocated.push_back(new_root_buf);
  }

  std::uint64_t node_version = cfg_.mvcc ? version : 0;
  std::uint64_t leaf_old_link = cfg_.mvcc ? reinterpret_cast<std::uint64_t>(leaf.buf) : 0;

  // Build the new leaves.
  {
    std::vector<node::BuildItem> left, right;
    for (std::size_t i = 0; i < leaf_cut; ++i) {
      left.push_back({leaf_items[i].key, leaf_items[i].value, kNullLid});
    }
    for (std::size_t i = leaf_cut; i < leaf_items.size(); ++i) {
      right.push_back({leaf_items[i].key, leaf_items[i].value, kNullLid});
    }
    node::BuildSpec ls{NodeType::kLeaf, node_version, leaf_old_link, left_lid, new_right_lid[0]};
    node::BuildSpec rs{NodeType::kLeaf, node_version, leaf_old_link, new_left_lid[0], right_lid};
    Status st = node::encode_node(ls, left, new_left_buf[0]);
    if (st.ok()) st = node::encode_node(rs, right, new_right_buf[0]);
    if (!st.ok()) return fail_alloc(st);
  }

  // Build the split interior nodes bottom-up.
  auto fill_placeholders = [&](std::vector<InteriorItem>& items, Lid& leftmost, std::size_t k) {
    if (leftmost == kLeftChildPlaceholder) leftmost = new_left_lid[k - 1];
    for (InteriorItem& it : items) {
      if (it.child == kLeftChildPlaceholder) it.child = new_left_lid[k - 1];
      if (it.child == kRightChildPlaceholder) it.child = new_right_lid[k - 1];
    }
  };
  for (std::size_t k = 0; k < split_plans.size(); ++k) {
    InteriorPlan& plan = split_plans[k];
    fill_placeholders(plan.items, plan.leftmost, k + 1);
    std::size_t j = plan.promote;
    std::vector<node::BuildItem> left, right;
    for (std::size_t i = 0; i < j; ++i) left.push_back({plan.items[i].key, {}, plan.items[i].child});
    for (std::size_t i = j + 1; i < plan.items.size(); ++i) {
      right.push_back({plan.items[i].key, {}, plan.items[i].child});
    }
    node::BuildSpec ls{NodeType::kInterior, node_version, 0, plan.leftmost, kNullLid};
    node::BuildSpec rs{NodeType::kInterior, node_version, 0, plan.items[j].child, kNullLid};
    Status st = node::encode_node(ls, left, new_left_buf[k + 1]);
    if (st.ok()) st = node::encode_node(rs, right, new_right_buf[k + 1]);
    if (!st.ok()) return fail_alloc(st);
  }

  if (root_of_split) {
    InteriorPlan& plan = *root_of_split;
    fill_placeholders(plan.items, plan.leftmost, pair_count);
    std::vector<node::BuildItem> items;
    for (const InteriorItem& it : plan.items) items.push_back({it.key, {}, it.child});
    node::BuildSpec spec{NodeType::kInterior, node_version,
                         cfg_.mvcc ? reinterpret_cast<std::uint64_t>(plan.node->buf) : 0,
                         plan.leftmost, kNullLid};
    Status st = node::encode_node(spec, items, root_swap_buf);
    if (!st.ok()) return fail_alloc(st);
  } else {
    std::vector<node::BuildItem> items;
    items.push_back({pending_sep, {}, new_right_lid[pair_count - 1]});
    node::BuildSpec spec{NodeType::kInterior, node_version, 0, new_left_lid[pair_count - 1],
                         kNullLid};
    Status st = node::encode_node(spec, items, new_root_buf);
    if (!st.ok()) return fail_alloc(st);
  }

  // Publish: bind the new subtree, repair sibling links, then swap.
  for (std::size_t k = 0; k < pair_count; ++k) {
    tables_.bind(new_left_lid[k], reinterpret_cast<std::uint64_t>(new_left_buf[k]));
    tables_.bind(new_right_lid[k], reinterpret_cast<std::uint64_t>(new_right_buf[k]));
  }
  if (left_buf) node::set_link(left_buf, node::kOffLink1, new_left_lid[0]);
  if (right_buf) node::set_link(right_buf, node::kOffLink0, new_right_lid[0]);
  if (root_of_split) {
    Status st = tables_.update_mapping(root_of_split->node->lid,
                                       reinterpret_cast<std::uint64_t>(root_swap_buf));
    assert(st.ok());
    (void)st;
  } else {
    tables_.bind(new_root_lid, reinterpret_cast<std::uint64_t>(new_root_buf));
    tables_.set_root({new_root_lid, static_cast<std::uint16_t>(path.size() + 1)});
    metrics_.root_grows.fetch_add(1, std::memory_order_relaxed);
  }

  // Unlock: sibling leaves resume; superseded buffers are retired for good.
  if (left_buf) bump_unlock(left_buf);
  if (right_buf) bump_unlock(right_buf);
  retire_unlock(leaf.buf);
  std::vector<std::uint8_t*> dead_buffers{leaf.buf};
  std::vector<Lid> dead_lids{leaf.lid};
  for (const InteriorPlan& plan : split_plans) {
    retire_unlock(plan.node->buf);
    dead_buffers.push_back(plan.node->buf);
    dead_lids.push_back(plan.node->lid);
  }
  if (root_of_split) {
    retire_unlock(root_of_split->node->buf);
    dead_buffers.push_back(root_of_split->node->buf);
  }

  gate_.release(version);
  reclaim_.retire(std::move(dead_buffers), std::move(dead_lids));
  metrics_.splits.fetch_add(1, std::memory_order_relaxed);
  metrics_.split_nodes.fetch_add(1 + split_plans.size(), std::memory_order_relaxed);
  return StatusCode::kOk;
}

Result<PutOutcome> WriteEngine::write_op(int epoch_slot, std::string_view key,
                                         std::string_view value, bool is_delete,
                                         DeleteOutcome& del_outcome) {
  Status st = validate_key(key);
  if (!st.ok()) return Result<PutOutcome>::error(st.code);
  if (!is_delete) {
    st = validate_value(value);
    if (!st.ok()) return Result<PutOutcome>::error(st.code);
  }

  EpochOp op(epochs_, epoch_slot);
  std::vector<PathEntry> path;
  for (unsigned attempt = 0;; ++attempt) {
    backoff(attempt);
    st = traverse(key, path);
    if (!st.ok()) return Result<PutOutcome>::error(st.code);
    PathEntry& leaf = path.back();

    // Fresh observation; the lock CAS below validates it.
    leaf.word = node::load_word_acquire(leaf.buf, node::kOffSizeLock);
    SizeLock sl = SizeLock::unpack(leaf.word);
    if (sl.locked || sl.retired) {
      metrics_.lock_failures.fetch_add(1, std::memory_order_relaxed);
      metrics_.restarts.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    LeafView view;
    st = read_leaf_view(leaf, view);
    if (!st.ok()) return Result<PutOutcome>::error(st.code);
    WriteTarget tgt;
    st = find_target(leaf, view, key, tgt);
    if (!st.ok()) return Result<PutOutcome>::error(st.code);

    if (is_delete && !tgt.exists) {
      del_outcome = DeleteOutcome::kNotFound;
      return Result<PutOutcome>::of(PutOutcome::kUpdated);
    }
    LogKind kind = is_delete ? LogKind::kDelete
                             : (tgt.exists ? LogKind::kUpdate : LogKind::kInsert);
    std::uint16_t back_ref = kind == LogKind::kInsert ? tgt.successor_offset : tgt.target_offset;
    std::size_t entry_size = node::log_entry_bytes(kind, key.size(), value.size());
    std::size_t log_size = sl.bytes_used - view.hdr.log_boundary;
    bool slow = (log_size > 0 && log_size + entry_size > cfg_.log_block_threshold) ||
                view.log.size() >= kMaxLogEntries ||
                sl.bytes_used + entry_size > kNodeSize;

    if (!node::try_lock(leaf.buf, leaf.word)) {
      metrics_.lock_failures.fetch_add(1, std::memory_order_relaxed);
      metrics_.restarts.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    std::uint64_t version = cfg_.mvcc ? versions_.acquire_write_version() : 0;
    if (cfg_.mvcc && !slow && version - view.hdr.node_version > kMaxVersionDelta) slow = true;

    PutOutcome outcome = tgt.exists ? PutOutcome::kUpdated : PutOutcome::kInserted;
    del_outcome = DeleteOutcome::kDeleted;

    if (!slow) {
      node::LogAppend entry{kind, back_ref, version, key, value};
      st = node::append_and_publish(leaf.buf, entry);
      if (st.ok()) {
        metrics_.fast_path_appends.fetch_add(1, std::memory_order_relaxed);
        gate_.release(version);
        if (is_delete) try_shrink(key);
        return Result<PutOutcome>::of(outcome);
      }
      if (!st.is(StatusCode::kCapacityExceeded) && !st.is(StatusCode::kForceMerge)) {
        unlock_restore(leaf.buf, leaf.word);
        gate_.release(version);
        return Result<PutOutcome>::error(st.code);
      }
      slow = true;
    }

    // Slow path: merge the sorted and log blocks, folding in this operation.
    node::ResolvedLeaf live;
    st = node::resolve_leaf(leaf.buf, sl, UINT64_MAX, false, live);
    if (!st.ok()) {
      unlock_restore(leaf.buf, leaf.word);
      gate_.release(version);
      return Result<PutOutcome>::error(st.code);
    }
    auto pos = std::lower_bound(
        live.items.begin(), live.items.end(), key,
        [](const Item& a, std::string_view b) { return compare_keys(a.key, b) < 0; });
    if (is_delete) {
      if (pos != live.items.end() && compare_keys(pos->key, key) == 0) live.items.erase(pos);
    } else if (pos != live.items.end() && compare_keys(pos->key, key) == 0) {
      pos->value = std::string(value);
    } else {
      live.items.insert(pos, Item{std::string(key), std::string(value)});
    }

    std::vector<node::BuildItem> build;
    build.reserve(live.items.size());
    for (const Item& it : live.items) build.push_back({it.key, it.value, kNullLid});

    if (node::fits_in_node(NodeType::kLeaf, build)) {
      std::size_t live_bytes = 0;
      st = merge_blocks(leaf, view.hdr, std::move(live.items), version, live_bytes);
      if (!st.ok()) {
        unlock_restore(leaf.buf, leaf.word);
        gate_.release(version);
        return Result<PutOutcome>::error(st.code);
      }
      if (kBlockStart + live_bytes < cfg_.underflow_bytes) try_shrink(key);
      return Result<PutOutcome>::of(outcome);
    }

    st = split(path, view.hdr, live.items, version);
    if (st.ok()) return Result<PutOutcome>::of(outcome);
    // split unlocked the interior set; the leaf lock is still ours
    unlock_restore(leaf.buf, leaf.word);
    gate_.release(version);
    if (st.is(kRetry)) {
      metrics_.restarts.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    return Result<PutOutcome>::error(st.code);
  }
}

Result<PutOutcome> WriteEngine::put(int epoch_slot, std::string_view key,
                                    std::string_view value) {
  DeleteOutcome ignored;
  return write_op(epoch_slot, key, value, false, ignored);
}

Result<DeleteOutcome> WriteEngine::del(int epoch_slot, std::string_view key) {
  DeleteOutcome outcome = DeleteOutcome::kNotFound;
  Result<PutOutcome> r = write_op(epoch_slot, key, {}, true, outcome);
  if (!r.ok()) return Result<DeleteOutcome>::error(r.status.code);
  return Result<DeleteOutcome>::of(outcome);
}

// One shrink step at the lowest underflowing level on the path of `key`.
Status WriteEngine::shrink_once(std::string_view key, bool& progressed) {
  progressed = false;
  std::vector<PathEntry> path;
  Status st = traverse(key, path);
  if (!st.ok()) return st;

  // Root collapse: an interior root with a single child drops one level.
  if (path.size() >= 2) {
    PathEntry& root = path.front();
    Lid leftmost;
    std::vector<InteriorItem> items;
    st = decode_interior(root, leftmost, items);
    if (!st.ok()) return st;
    if (items.empty()) {
      if (!node::try_lock(root.buf, root.word)) return kRetry;
      std::uint64_t version = cfg_.mvcc ? versions_.acquire_write_version() : 0;
      tables_.set_root({leftmost, static_cast<std::uint16_t>(path.size() - 1)});
      retire_unlock(root.buf);
      gate_.release(version);
      reclaim_.retire({root.buf}, {root.lid});
      metrics_.root_shrinks.fetch_add(1, std::memory_order_relaxed);
      progressed = true;
      return StatusCode::kOk;
    }
  }
  if (path.size() < 2) return StatusCode::kOk;

  // Find the lowest underflowing node with a parent.
  for (std::size_t depth = path.size() - 1; depth >= 1; --depth) {
    PathEntry& target = path[depth];
    PathEntry& parent = path[depth - 1];
    bool is_leaf_level = depth == path.size() - 1;

    std::uint64_t target_word = node::load_word_acquire(target.buf, node::kOffSizeLock);
    SizeLock target_sl = SizeLock::unpack(target_word);
    if (target_sl.locked || target_sl.retired) return kRetry;
    target.word = target_word;

    std::size_t occupancy = 0;
    std::vector<Item> leaf_items;
    Lid target_leftmost = kNullLid;
    std::vector<InteriorItem> interior_items;
    if (is_leaf_level) {
      node::ResolvedLeaf live;
      st = node::resolve_leaf(target.buf, target_sl, UINT64_MAX, false, live);
      if (!st.ok()) return st;
      occupancy = kBlockStart + live.live_content_bytes;
      leaf_items = std::move(live.items);
    } else {
      st = decode_interior(target, target_leftmost, interior_items);
      if (!st.ok()) return st;
      std::size_t content = 0;
      for (const InteriorItem& it : interior_items) content += 2 + it.key.size() + 6;
      occupancy = kBlockStart + content;
    }
    if (occupancy >= cfg_.underflow_bytes) continue;

    // Locate the target among the parent's children and pick a sibling.
    Lid parent_leftmost;
    std::vector<InteriorItem> parent_items;
    st = decode_interior(parent, parent_leftmost, parent_items);
    if (!st.ok()) return st;
    std::vector<Lid> children{parent_leftmost};
    for (const InteriorItem& it : parent_items) children.push_back(it.child);
    std::size_t idx = children.size();
    for (std::size_t i = 0; i < children.size(); ++i) {
      if (children[i] == target.lid) {
        idx = i;
        break;
      }
    }
    if (idx == children.size()) return kRetry;
    if (children.size() < 2) continue;  // single child handled by root collapse

    bool use_right = idx + 1 < children.size();
    std::size_t left_idx = use_right ? idx : idx - 1;
    Lid a_lid = children[left_idx];
    Lid b_lid = children[left_idx + 1];
    // separator key for B within the parent
    std::string sep_ab = parent_items[left_idx].key;

    auto a_addr = tables_.resolve(a_lid, PageTablePair::Side::kWrite);
    auto b_addr = tables_.resolve(b_lid, PageTablePair::Side::kWrite);
    if (!a_addr.ok() || !b_addr.ok()) return kRetry;
    std::uint8_t* a_buf = reinterpret_cast<std::uint8_t*>(a_addr.value);
    std::uint8_t* b_buf = reinterpret_cast<std::uint8_t*>(b_addr.value);
    std::uint64_t a_word = node::load_word_acquire(a_buf, node::kOffSizeLock);
    std::uint64_t b_word = node::load_word_acquire(b_buf, node::kOffSizeLock);
    SizeLock a_sl = SizeLock::unpack(a_word);
    SizeLock b_sl = SizeLock::unpack(b_word);
    if (a_sl.locked || a_sl.retired || b_sl.locked || b_sl.retired) return kRetry;

    // Resolve both nodes' contents.
    std::vector<Item> a_items, b_items;
    Lid a_leftmost = kNullLid, b_leftmost = kNullLid;
    std::vector<InteriorItem> a_int, b_int;
    std::size_t a_bytes = 0, b_bytes = 0;
    if (is_leaf_level) {
      node::ResolvedLeaf live_a, live_b;
      st = node::resolve_leaf(a_buf, a_sl, UINT64_MAX, false, live_a);
      if (st.ok()) st = node::resolve_leaf(b_buf, b_sl, UINT64_MAX, false, live_b);
      if (!st.ok()) return st;
      a_items = std::move(live_a.items);
      b_items = std::move(live_b.items);
      a_bytes = live_a.live_content_bytes;
      b_bytes = live_b.live_content_bytes;
    } else {
      PathEntry a_pe{a_lid, a_buf, a_word}, b_pe{b_lid, b_buf, b_word};
      st = decode_interior(a_pe, a_leftmost, a_int);
      if (st.ok()) st = decode_interior(b_pe, b_leftmost, b_int);
      if (!st.ok()) return st;
      for (const InteriorItem& it : a_int) a_bytes += 2 + it.key.size() + 6;
      for (const InteriorItem& it : b_int) b_bytes += 2 + it.key.size() + 6;
      b_bytes += 2 + sep_ab.size() + 6;  // separator pulled down with B's leftmost
    }
    bool coalesce = kBlockStart + a_bytes + b_bytes <= kNodeSize;

    // Lock A, B, the parent, and (leaf level) the outer siblings.
    std::vector<std::pair<std::uint8_t*, std::uint64_t>> locked;
    auto unlock_all = [&] {
      for (auto it = locked.rbegin(); it != locked.rend(); ++it) {
        unlock_restore(it->first, it->second);
      }
      locked.clear();
    };
    auto try_lock_word = [&](std::uint8_t* buf, std::uint64_t word) {
      if (!node::try_lock(buf, word)) return false;
      locked.push_back({buf, word});
      return true;
    };
    if (!try_lock_word(a_buf, a_word) || !try_lock_word(b_buf, b_word) ||
        !try_lock_word(parent.buf, parent.word)) {
      unlock_all();
      metrics_.lock_failures.fetch_add(1, std::memory_order_relaxed);
      return kRetry;
    }
    std::uint8_t* outer_left = nullptr;
    std::uint8_t* outer_right = nullptr;
    Lid outer_left_lid = kNullLid, outer_right_lid = kNullLid;
    if (is_leaf_level) {
      outer_left_lid = node::load_link(a_buf, node::kOffLink0);
      outer_right_lid = node::load_link(b_buf, node::kOffLink1);
      auto lock_outer = [&](Lid lid, std::uint8_t*& out) -> bool {
        if (lid == kNullLid) return true;
        auto addr = tables_.resolve(lid, PageTablePair::Side::kWrite);
        if (!addr.ok()) return false;
        std::uint8_t* buf = reinterpret_cast<std::uint8_t*>(addr.value);
        for (unsigned i = 0; i < 64; ++i) {
          std::uint64_t w = node::load_word_acquire(buf, node::kOffSizeLock);
          SizeLock sl2 = SizeLock::unpack(w);
          if (sl2.retired) return false;
          if (!sl2.locked && node::try_lock(buf, w)) {
            out = buf;
            locked.push_back({buf, w});
            return true;
          }
          std::this_thread::yield();
        }
        return false;
      };
      if (!lock_outer(outer_left_lid, outer_left) || !lock_outer(outer_right_lid, outer_right)) {
        unlock_all();
        metrics_.lock_failures.fetch_add(1, std::memory_order_relaxed);
        return kRetry;
      }
    }

    std::uint64_t version = cfg_.mvcc ? versions_.acquire_write_version() : 0;
    std::uint64_t node_version = cfg_.mvcc ? version : 0;
    auto abort = [&](Status why) {
      unlock_all();
      gate_.release(version);
      return why;
    };

    if (coalesce) {
      auto m_lid_r = tables_.allocate_lid();
      if (!m_lid_r.ok()) return abort(m_lid_r.status);
      std::uint8_t* m_buf = alloc_with_retry();
      if (!m_buf) return abort(StatusCode::kOutOfMemory);
      Lid m_lid = m_lid_r.value;

      std::vector<node::BuildItem> build;
      node::BuildSpec spec;
      spec.node_version = node_version;
      spec.old_version_link = cfg_.mvcc ? reinterpret_cast<std::uint64_t>(a_buf) : 0;
      if (is_leaf_level) {
        spec.type = NodeType::kLeaf;
        spec.link0 = outer_left_lid;
        spec.link1 = outer_right_lid;
        for (const Item& it : a_items) build.push_back({it.key, it.value, kNullLid});
        for (const Item& it : b_items) build.push_back({it.key, it.value, kNullLid});
      } else {
        spec.type = NodeType::kInterior;
        spec.link0 = a_leftmost;
        for (const InteriorItem& it : a_int) build.push_back({it.key, {}, it.child});
        build.push_back({sep_ab, {}, b_leftmost});
        for (const InteriorItem& it : b_int) build.push_back({it.key, {}, it.child});
      }
      st = node::encode_node(spec, build, m_buf);
      if (!st.ok()) {
        arena_.free(m_buf);
        return abort(st);
      }

      // New parent content: A's slot now routes to M; B's entry disappears.
      std::vector<InteriorItem> new_parent = parent_items;
      Lid new_leftmost = parent_leftmost;
      if (left_idx == 0) {
        new_leftmost = m_lid;
      } else {
        new_parent[left_idx - 1].child = m_lid;
      }
      new_parent.erase(new_parent.begin() + left_idx);

      bool collapse = depth - 1 == 0 && new_parent.empty();
      std::uint8_t* parent_new = nullptr;
      if (!collapse) {
        parent_new = alloc_with_retry();
        if (!parent_new) {
          arena_.free(m_buf);
          return abort(StatusCode::kOutOfMemory);
        }
        std::vector<node::BuildItem> pbuild;
        for (const InteriorItem& it : new_parent) pbuild.push_back({it.key, {}, it.child});
        node::BuildSpec pspec{NodeType::kInterior, node_version,
                              cfg_.mvcc ? reinterpret_cast<std::uint64_t>(parent.buf) : 0,
                              new_leftmost, kNullLid};
        st = node::encode_node(pspec, pbuild, parent_new);
        if (!st.ok()) {
          arena_.free(m_buf);
          arena_.free(parent_new);
          return abort(st);
        }
      }

      tables_.bind(m_lid, reinterpret_cast<std::uint64_t>(m_buf));
      if (is_leaf_level) {
        if (outer_left) node::set_link(outer_left, node::kOffLink1, m_lid);
        if (outer_right) node::set_link(outer_right, node::kOffLink0, m_lid);
      }
      if (collapse) {
        tables_.set_root({m_lid, static_cast<std::uint16_t>(path.size() - depth)});
        metrics_.root_shrinks.fetch_add(1, std::memory_order_relaxed);
      } else {
        st = tables_.update_mapping(parent.lid, reinterpret_cast<std::uint64_t>(parent_new));
        assert(st.ok());
      }

      if (outer_left) bump_unlock(outer_left);
      if (outer_right) bump_unlock(outer_right);
      retire_unlock(a_buf);
      retire_unlock(b_buf);
      retire_unlock(parent.buf);
      // remaining recorded locks were restored-by-retire; drop the list
      locked.clear();

      gate_.release(version);
      std::vector<Lid> dead_lids{a_lid, b_lid};
      if (collapse) dead_lids.push_back(parent.lid);
      reclaim_.retire({a_buf, b_buf, parent.buf}, std::move(dead_lids));
      metrics_.node_merges.fetch_add(1, std::memory_order_relaxed);
      progressed = true;
      return StatusCode::kOk;
    }

    // Rebalance: redistribute the two nodes evenly under new lids.
    auto al = tables_.allocate_lid();
    auto bl = tables_.allocate_lid();
    if (!al.ok() || !bl.ok()) return abort(StatusCode::kLidSpaceExhausted);
    std::uint8_t* a_new = alloc_with_retry();
    std::uint8_t* b_new = alloc_with_retry();
    std::uint8_t* parent_new = alloc_with_retry();
    if (!a_new || !b_new || !parent_new) {
      if (a_new) arena_.free(a_new);
      if (b_new) arena_.free(b_new);
      if (parent_new) arena_.free(parent_new);
      return abort(StatusCode::kOutOfMemory);
    }

    std::string new_sep;
    if (is_leaf_level) {
      std::vector<Item> all = std::move(a_items);
      for (Item& it : b_items) all.push_back(std::move(it));
      std::size_t cut = leaf_split_index(all);
      std::vector<node::BuildItem> left, right;
      for (std::size_t i = 0; i < cut; ++i) left.push_back({all[i].key, all[i].value, kNullLid});
      for (std::size_t i = cut; i < all.size(); ++i) {
        right.push_back({all[i].key, all[i].value, kNullLid});
      }
      new_sep = all[cut].key;
      node::BuildSpec ls{NodeType::kLeaf, node_version,
                         cfg_.mvcc ? reinterpret_cast<std::uint64_t>(a_buf) : 0, outer_left_lid,
                         bl.value};
      node::BuildSpec rs{NodeType::kLeaf, node_version,
                         cfg_.mvcc ? reinterpret_cast<std::uint64_t>(b_buf) : 0, al.value,
                         outer_right_lid};
      st = node::encode_node(ls, left, a_new);
      if (st.ok()) st = node::encode_node(rs, right, b_new);
    } else {
      std::vector<InteriorItem> all = std::move(a_int);
      all.push_back({sep_ab, b_leftmost});
      for (InteriorItem& it : b_int) all.push_back(std::move(it));
      std::size_t total = 0;
      for (const InteriorItem& it : all) total += 2 + it.key.size() + 6;
      std::size_t half = total / 2, prefix = 0, promote = all.size() - 1;
      for (std::size_t i = 0; i < all.size(); ++i) {
        prefix += 2 + all[i].key.size() + 6;
        if (prefix >= half) {
          promote = i;
          break;
        }
      }
      new_sep = all[promote].key;
      std::vector<node::BuildItem> left, right;
      for (std::size_t i = 0; i < promote; ++i) left.push_back({all[i].key, {}, all[i].child});
      for (std::size_t i = promote + 1; i < all.size(); ++i) {
        right.push_back({all[i].key, {}, all[i].child});
      }
      node::BuildSpec ls{NodeType::kInterior, node_version,
                         cfg_.mvcc ? reinterpret_cast<std::uint64_t>(a_buf) : 0, a_leftmost,
                         kNullLid};
      node::BuildSpec rs{NodeType::kInterior, node_version,
                         cfg_.mvcc ? reinterpret_cast<std::uint64_t>(b_buf) : 0,
                         all[promote].child, kNullLid};
      st = node::encode_node(ls, left, a_new);
      if (st.ok()) st = node::encode_node(rs, right, b_new);
    }
    if (!st.ok()) {
      arena_.free(a_new);
      arena_.free(b_new);
      arena_.free(parent_new);
      return abort(st);
    }

    std::vector<InteriorItem> new_parent = parent_items;
    Lid new_leftmost = parent_leftmost;
    if (left_idx == 0) {
      new_leftmost = al.value;
    } else {
      new_parent[left_idx - 1].child = al.value;
    }
    new_parent[left_idx] = {new_sep, bl.value};
    {
      std::vector<node::BuildItem> pbuild;
      for (const InteriorItem& it : new_parent) pbuild.push_back({it.key, {}, it.child});
      node::BuildSpec pspec{NodeType::kInterior, node_version,
                            cfg_.mvcc ? reinterpret_cast<std::uint64_t>(parent.buf) : 0,
                            new_leftmost, kNullLid};
      st = node::encode_node(pspec, pbuild, parent_new);
      if (!st.ok()) {
        arena_.free(a_new);
        arena_.free(b_new);
        arena_.free(parent_new);
        return abort(st);
      }
    }

    tables_.bind(al.value, reinterpret_cast<std::uint64_t>(a_new));
    tables_.bind(bl.value, reinterpret_cast<std::uint64_t>(b_new));
    if (is_leaf_level) {
      if (outer_left) node::set_link(outer_left, node::kOffLink1, al.value);
      if (outer_right) node::set_link(outer_right, node::kOffLink0, bl.value);
    }
    st = tables_.update_mapping(parent.lid, reinterpret_cast<std::uint64_t>(parent_new));
    assert(st.ok());

    if (outer_left) bump_unlock(outer_left);
    if (outer_right) bump_unlock(outer_right);
    retire_unlock(a_buf);
    retire_unlock(b_buf);
    retire_unlock(parent.buf);
    locked.clear();

    gate_.release(version);
    reclaim_.retire({a_buf, b_buf, parent.buf}, {a_lid, b_lid});
    metrics_.node_rebalances.fetch_add(1, std::memory_order_relaxed);
    progressed = true;
    return StatusCode::kOk;
  }
  return StatusCode::kOk;
}

Status WriteEngine::try_shrink(std::string_view key) {
  for (unsigned round = 0; round < 8; ++round) {
    bool progressed = false;
    Status st = shrink_once(key, progressed);
    if (!st.ok() && !st.is(kRetry)) return st;
    if (st.is(kRetry)) continue;
    if (!progressed) return StatusCode::kOk;
  }
  return StatusCode::kOk;
}

Status WriteEngine::bulk_load(std::vector<Item> items) {
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return compare_keys(a.key, b.key) < 0; });
  for (std::size_t i = 0; i < items.size(); ++i) {
    Status st = validate_key(items[i].key);
    if (!st.ok()) return st;
    st = validate_value(items[i].value);
    if (!st.ok()) return st;
    if (i > 0 && compare_keys(items[i - 1].key, items[i].key) == 0) {
      return StatusCode::kInvalidArgument;
    }
  }

  RootInfo old_root = tables_.write_root();
  const std::size_t target_content =
      static_cast<std::size_t>(cfg_.bulk_load_fill * kNodeSize) - kBlockStart;

  struct Built {
    Lid lid;
    std::string min_key;
  };

  // Pack the leaf level.
  std::vector<Built> level;
  {
    std::vector<std::vector<Item>> leaves;
    std::vector<Item> cur;
    std::size_t cur_bytes = 0;
    for (Item& it : items) {
      std::size_t sz = node::encoded_item_bytes(NodeType::kLeaf, it.key, it.value);
      if (!cur.empty() && cur_bytes + sz > target_content) {
        leaves.push_back(std::move(cur));
        cur = {};
        cur_bytes = 0;
      }
      cur_bytes += sz;
      cur.push_back(std::move(it));
    }
    if (!cur.empty() || leaves.empty()) leaves.push_back(std::move(cur));

    std::vector<Lid> lids(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      auto lid = tables_.allocate_lid();
      if (!lid.ok()) return lid.status;
      lids[i] = lid.value;
    }
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      std::uint8_t* buf = alloc_with_retry();
      if (!buf) return StatusCode::kOutOfMemory;
      std::vector<node::BuildItem> build;
      for (const Item& it : leaves[i]) build.push_back({it.key, it.value, kNullLid});
      node::BuildSpec spec{NodeType::kLeaf, 0, 0, i > 0 ? lids[i - 1] : kNullLid,
                           i + 1 < leaves.size() ? lids[i + 1] : kNullLid};
      Status st = node::encode_node(spec, build, buf);
      if (!st.ok()) {
        arena_.free(buf);
        return st;
      }
      st = tables_.bind(lids[i], reinterpret_cast<std::uint64_t>(buf));
      if (!st.ok()) return st;
      level.push_back({lids[i], leaves[i].empty() ? std::string() : leaves[i][0].key});
    }
  }

  // Build interior levels until a single root remains.
  std::uint16_t height = 1;
  while (level.size() > 1) {
    height += 1;
    std::vector<Built> next;
    std::size_t i = 0;
    while (i < level.size()) {
      Lid leftmost = level[i].lid;
      std::string min_key = level[i].min_key;
      ++i;
      std::size_t first_child = i;
      std::size_t content = 0;
      while (i < level.size()) {
        std::size_t sz = 2 + level[i].min_key.size() + 6;
        if (i > first_child && content + sz > target_content) break;
        content += sz;
        ++i;
      }
      std::vector<node::BuildItem> build;
      for (std::size_t k = first_child; k < i; ++k) {
        build.push_back({level[k].min_key, {}, level[k].lid});
      }
      auto lid = tables_.allocate_lid();
      if (!lid.ok()) return lid.status;
      std::uint8_t* buf = alloc_with_retry();
      if (!buf) return StatusCode::kOutOfMemory;
      node::BuildSpec spec{NodeType::kInterior, 0, 0, leftmost, kNullLid};
      Status st = node::encode_node(spec, build, buf);
      if (!st.ok()) {
        arena_.free(buf);
        return st;
      }
      st = tables_.bind(lid.value, reinterpret_cast<std::uint64_t>(buf));
      if (!st.ok()) return st;
      next.push_back({lid.value, std::move(min_key)});
    }
    level = std::move(next);
  }

  tables_.set_root({level[0].lid, height});

  // Retire the previous (empty) tree.
  auto old_addr = tables_.resolve(old_root.lid, PageTablePair::Side::kWrite);
  if (old_addr.ok()) {
    std::uint8_t* old_buf = reinterpret_cast<std::uint8_t*>(old_addr.value);
    std::uint64_t w = node::load_word_acquire(old_buf, node::kOffSizeLock);
    if (node::try_lock(old_buf, w)) retire_unlock(old_buf);
    reclaim_.retire({old_buf}, {old_root.lid});
  }
  return StatusCode::kOk;
}

Result<WriteEngine::LeafLockGuard> WriteEngine::debug_lock_leaf(std::string_view key) {
  for (unsigned attempt = 0; attempt < 1024; ++attempt) {
    std::vector<PathEntry> path;
    Status st = traverse(key, path);
    if (!st.ok()) return Result<LeafLockGuard>::error(st.code);
    PathEntry& leaf = path.back();
    std::uint64_t word = node::load_word_acquire(leaf.buf, node::kOffSizeLock);
    SizeLock sl = SizeLock::unpack(word);
    if (sl.locked || sl.retired) {
      std::this_thread::yield();
      continue;
    }
    if (node::try_lock(leaf.buf, word)) {
      return Result<LeafLockGuard>::of(LeafLockGuard(leaf.buf, word));
    }
  }
  return Result<LeafLockGuard>::error(StatusCode::kTimeout);
}

WriteEngine::LeafLockGuard& WriteEngine::LeafLockGuard::operator=(LeafLockGuard&& o) noexcept {
  release();
  buf_ = o.buf_;
  restore_ = o.restore_;
  o.buf_ = nullptr;
  return *this;
}

void WriteEngine::LeafLockGuard::release() {
  if (buf_) {
    unlock_restore(buf_, restore_);
    buf_ = nullptr;
  }
}

}  // namespace honeycomb

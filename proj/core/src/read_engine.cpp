#include "honeycomb/read_engine.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>

namespace honeycomb {

Channel DirectBackend::fetch(std::uint64_t, Lid, std::uint64_t addr, std::uint32_t offset,
                             std::uint32_t len, bool, std::uint8_t* dst) {
  node::copy_node_bytes(reinterpret_cast<const std::uint8_t*>(addr), offset, len, dst);
  return Channel::kDirect;
}

ReadEngine::ReadEngine(Config cfg, FetchBackend& backend, const PageTablePair& tables,
                       StoreMetrics& metrics)
    : cfg_(cfg), backend_(backend), tables_(tables), metrics_(metrics),
      slots_(cfg.inflight_slots, 0) {}

Result<ReadEngine::Request> ReadEngine::admit(const ReadOptions& opts) {
  Request req;
  {
    std::lock_guard lock(slots_mu_);
    int free_slot = -1;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      if (slots_[i] == 0) {
        free_slot = static_cast<int>(i);
        break;
      }
    }
    if (free_slot < 0) {
      metrics_.reads_overloaded.fetch_add(1, std::memory_order_relaxed);
      return Result<Request>::error(StatusCode::kOverloaded);
    }
    req.seq = ++s_new_;
    req.slot = free_slot;
    slots_[free_slot] = req.seq;
  }
  req.filter = cfg_.mvcc;
  if (opts.read_version) {
    req.read_version = *opts.read_version;
  } else if (cfg_.mvcc) {
    req.read_version = tables_.acked_read_version();
  } else {
    req.read_version = 0;
  }
  return Result<Request>::of(req);
}

void ReadEngine::complete(const Request& req) {
  backend_.complete(req.seq);
  std::lock_guard lock(slots_mu_);
  slots_[req.slot] = 0;
}

std::pair<std::uint64_t, std::uint64_t> ReadEngine::reader_window() const {
  std::lock_guard lock(slots_mu_);
  std::uint64_t oldest = s_new_ + 1;
  for (std::uint64_t s : slots_) {
    if (s != 0 && s < oldest) oldest = s;
  }
  return {oldest, s_new_};
}

void ReadEngine::set_fetch_observer(FetchObserver fn) {
  std::lock_guard lock(observer_mu_);
  observer_ = std::move(fn);
  has_observer_.store(observer_ != nullptr, std::memory_order_release);
}

void ReadEngine::start_capture() {
  std::lock_guard lock(capture_mu_);
  capturing_ = true;
  capture_.clear();
}

std::vector<memsim::TraceRecord> ReadEngine::stop_capture() {
  std::lock_guard lock(capture_mu_);
  capturing_ = false;
  std::vector<memsim::TraceRecord> out;
  out.swap(capture_);
  return out;
}

struct ReadEngine::ScanState {
  std::string_view lower;
  std::string_view upper;
  bool point = false;
  bool with_trace = false;
  std::optional<Item> pred;  // largest live key <= lower seen so far
  std::vector<Item> items;   // live keys in (lower, upper]
  std::size_t bytes = 0;
  bool done = false;
  Status error;
  ReadStats stats;
  std::vector<FetchTraceRecord> trace;

  // Accepts a resolved live item; returns false when iteration can stop.
  bool deliver(const node::Candidate& live, std::size_t max_items, std::size_t max_bytes) {
    if (compare_keys(live.key, lower) <= 0) {
      pred = Item{std::string(live.key), std::string(live.value)};
      return true;
    }
    if (compare_keys(live.key, upper) > 0) {
      done = true;
      return false;
    }
    items.push_back({std::string(live.key), std::string(live.value)});
    bytes += live.key.size() + live.value.size();
    if (items.size() + 1 > max_items || bytes > max_bytes) {
      error = StatusCode::kResultTooLarge;
      done = true;
      return false;
    }
    return true;
  }
};

Channel ReadEngine::do_fetch(const Request& req, Lid lid, std::uint64_t addr,
                             std::uint32_t offset, std::uint32_t len, bool is_interior,
                             std::uint8_t* dst, ScanState& state) {
  if (has_observer_.load(std::memory_order_acquire)) {
    FetchObserver fn;
    {
      std::lock_guard lock(observer_mu_);
      fn = observer_;
    }
    if (fn) fn(req.seq, lid, offset, len);
  }
  Channel ch = backend_.fetch(req.seq, lid, addr, offset, len, is_interior, dst);
  state.stats.fetches += 1;
  metrics_.read_fetch_bytes.fetch_add(len, std::memory_order_relaxed);
  if (state.with_trace) state.trace.push_back({lid, offset, len, is_interior, ch});
  {
    std::lock_guard lock(capture_mu_);
    if (capturing_) capture_.push_back({req.seq, lid, offset, len, is_interior});
  }
  return ch;
}

Status ReadEngine::fetch_head(const Request& req, Lid lid, bool is_interior, NodeSnap& out,
                              ScanState& state) {
  auto addr = backend_.resolve(req.seq, lid);
  if (!addr.ok()) return addr.status;
  out.lid = lid;
  out.addr = addr.value;
  for (;;) {
    do_fetch(req, lid, out.addr, 0, kBlockStart, is_interior, out.head.data(), state);
    Status st = node::parse_header({out.head.data(), kHeaderSize}, out.hdr);
    if (!st.ok()) return st;
    if (req.filter && out.hdr.node_version > req.read_version) {
      if (out.hdr.old_version_link == 0) return StatusCode::kCorruptNode;
      out.addr = out.hdr.old_version_link;
      backend_.repin(req.seq, lid, out.addr);
      state.stats.chain_hops += 1;
      continue;
    }
    break;
  }
  return node::parse_shortcuts({out.head.data(), kBlockStart}, out.hdr, out.shortcuts);
}

Status ReadEngine::process_leaf(const Request& req, const NodeSnap& leaf, bool first,
                                ScanState& state) {
  const node::HeaderView& hdr = leaf.hdr;
  if (!hdr.is_leaf()) return StatusCode::kCorruptNode;
  const std::uint16_t bytes_used = hdr.size_lock.bytes_used;

  std::vector<std::uint8_t> log_bytes(bytes_used - hdr.log_boundary);
  if (!log_bytes.empty()) {
    do_fetch(req, leaf.lid, leaf.addr, hdr.log_boundary,
             static_cast<std::uint32_t>(log_bytes.size()), false, log_bytes.data(), state);
  }
  node::PreparedLog log;
  Status st = node::prepare_log(log_bytes, hdr, req.read_version, req.filter, log);
  if (!st.ok()) return st;

  std::uint16_t fetch_begin = kBlockStart;
  std::uint16_t fetch_end = hdr.log_boundary;
  std::uint16_t start_sorted = kBlockStart;
  node::SegmentDesc seg;
  if (first) {
    st = node::locate_segment(hdr, leaf.shortcuts, state.lower, seg);
    if (!st.ok()) return st;
    fetch_begin = seg.begin;
    fetch_end = state.point ? seg.end : hdr.log_boundary;
    start_sorted = seg.begin;
  }
  std::vector<std::uint8_t> sorted_bytes(fetch_end - fetch_begin);
  if (!sorted_bytes.empty()) {
    do_fetch(req, leaf.lid, leaf.addr, fetch_begin,
             static_cast<std::uint32_t>(sorted_bytes.size()), false, sorted_bytes.data(), state);
  }

  std::size_t start_log = 0;
  if (first) {
    // position at the largest sorted key <= lower within its segment
    std::string_view covering =
        seg.covering >= 0 ? leaf.shortcuts[seg.covering].key : std::string_view{};
    std::span<const std::uint8_t> seg_span(sorted_bytes.data(),
                                           std::min<std::size_t>(seg.end, fetch_end) - fetch_begin);
    node::SegmentHit hit;
    st = node::search_segment(seg_span, fetch_begin, covering, node::NodeType::kLeaf,
                              state.lower, hit);
    if (!st.ok()) return st;
    if (hit.found) start_sorted = hit.item.offset;

    // first log entry of the run of the largest log key <= lower
    std::size_t lo = 0;
    while (lo < log.order.size() &&
           compare_keys(log.entries[log.order[lo]].key, state.lower) <= 0) {
      ++lo;
    }
    if (lo > 0) {
      std::string_view k = log.entries[log.order[lo - 1]].key;
      std::size_t j = lo - 1;
      while (j > 0 && compare_keys(log.entries[log.order[j - 1]].key, k) == 0) --j;
      start_log = j;
    } else {
      start_log = 0;
    }
  }

  node::MergedLeafIter iter(hdr, leaf.shortcuts, sorted_bytes, fetch_begin, log, start_sorted,
                            start_log);
  node::RunResolver runs;
  node::Candidate c;
  while (!state.done && iter.next(c)) {
    if (auto finished = runs.feed(c)) {
      if (!state.deliver(*finished, cfg_.scan_max_items, cfg_.scan_max_bytes)) break;
    }
    if (compare_keys(c.key, state.upper) > 0) {
      // the in-progress run is already beyond the range
      if (auto finished = runs.take()) {
        state.deliver(*finished, cfg_.scan_max_items, cfg_.scan_max_bytes);
      }
      state.done = true;
      break;
    }
  }
  if (!iter.status().ok()) return iter.status();
  if (!state.done) {
    if (auto finished = runs.take()) {
      state.deliver(*finished, cfg_.scan_max_items, cfg_.scan_max_bytes);
    }
  }
  return state.error;
}

// The located run(s) at or below `lower` all resolved dead: the live
// predecessor, if any, sits earlier in this leaf or in a left sibling.
Status ReadEngine::recover_predecessor(const Request& req, const NodeSnap& first_leaf,
                                       ScanState& state) {
  NodeSnap snap = first_leaf;
  for (std::size_t hops = 0; !state.pred; ++hops) {
    const node::HeaderView& hdr = snap.hdr;
    const std::uint16_t bytes_used = hdr.size_lock.bytes_used;
    std::vector<std::uint8_t> log_bytes(bytes_used - hdr.log_boundary);
    if (!log_bytes.empty()) {
      do_fetch(req, snap.lid, snap.addr, hdr.log_boundary,
               static_cast<std::uint32_t>(log_bytes.size()), false, log_bytes.data(), state);
    }
    node::PreparedLog log;
    Status st = node::prepare_log(log_bytes, hdr, req.read_version, req.filter, log);
    if (!st.ok()) return st;
    std::vector<std::uint8_t> sorted_bytes(hdr.log_boundary - kBlockStart);
    if (!sorted_bytes.empty()) {
      do_fetch(req, snap.lid, snap.addr, kBlockStart,
               static_cast<std::uint32_t>(sorted_bytes.size()), false, sorted_bytes.data(),
               state);
    }
    node::MergedLeafIter iter(hdr, snap.shortcuts, sorted_bytes, kBlockStart, log, kBlockStart,
                              0);
    node::RunResolver runs;
    node::Candidate c;
    std::optional<Item> best;
    auto consider = [&](const node::Candidate& live) {
      if (compare_keys(live.key, state.lower) <= 0) {
        best = Item{std::string(live.key), std::string(live.value)};
      }
    };
    while (iter.next(c)) {
      if (compare_keys(c.key, state.lower) > 0) break;
      if (auto finished = runs.feed(c)) consider(*finished);
    }
    if (!iter.status().ok()) return iter.status();
    if (auto finished = runs.take()) consider(*finished);
    if (best) {
      state.pred = std::move(best);
      return StatusCode::kOk;
    }
    Lid left = hdr.left_sibling();
    if (left == kNullLid) return StatusCode::kOk;
    NodeSnap prev;
    st = fetch_head(req, left, false, prev, state);
    if (!st.ok()) return st;
    state.stats.leaves_visited += 1;
    snap = std::move(prev);
  }
  return StatusCode::kOk;
}

ScanResult ReadEngine::scan_impl(std::string_view lower, std::string_view upper, bool point,
                                 const ReadOptions& opts) {
  ScanResult result;
  if (compare_keys(lower, upper) > 0) {
    result.status = StatusCode::kInvalidArgument;
    return result;
  }
  Status st = validate_key(lower);
  if (st.ok()) st = validate_key(upper);
  if (!st.ok()) {
    result.status = st;
    return result;
  }

  auto admitted = admit(opts);
  if (!admitted.ok()) {
    result.status = admitted.status;
    return result;
  }
  Request req = admitted.value;
  result.seq = req.seq;
  result.read_version = req.read_version;

  ScanState state;
  state.lower = lower;
  state.upper = upper;
  state.point = point;
  state.with_trace = opts.with_trace;

  RootInfo root = tables_.read_root();
  Lid cur = root.lid;
  Status status;
  NodeSnap snap;
  bool have_first_leaf = false;
  NodeSnap first_leaf;

  for (std::uint16_t level = root.height; level > 1 && status.ok(); --level) {
    status = fetch_head(req, cur, true, snap, state);
    if (!status.ok()) break;
    if (snap.hdr.is_leaf()) {
      status = StatusCode::kCorruptNode;
      break;
    }
    node::SegmentDesc seg;
    status = node::locate_segment(snap.hdr, snap.shortcuts, lower, seg);
    if (!status.ok()) break;
    std::vector<std::uint8_t> seg_bytes(seg.end - seg.begin);
    if (!seg_bytes.empty()) {
      do_fetch(req, cur, snap.addr, seg.begin, static_cast<std::uint32_t>(seg_bytes.size()),
               true, seg_bytes.data(), state);
    }
    std::string_view covering =
        seg.covering >= 0 ? snap.shortcuts[seg.covering].key : std::string_view{};
    node::SegmentHit hit;
    status = node::search_segment(seg_bytes, seg.begin, covering, node::NodeType::kInterior,
                                  lower, hit);
    if (!status.ok()) break;
    Lid child;
    if (hit.found) {
      child = node::load_u48(reinterpret_cast<const std::uint8_t*>(hit.item.payload.data()));
    } else {
      child = snap.hdr.leftmost_child();
    }
    if (child == kNullLid) {
      status = StatusCode::kCorruptNode;
      break;
    }
    cur = child;
  }

  bool first = true;
  while (status.ok() && !state.done) {
    status = fetch_head(req, cur, false, snap, state);
    if (!status.ok()) break;
    state.stats.leaves_visited += 1;
    if (first) {
      first_leaf = snap;
      have_first_leaf = true;
    }
    status = process_leaf(req, snap, first, state);
    if (!status.ok() || state.done) break;
    Lid next = snap.hdr.right_sibling();
    if (next == kNullLid) break;
    cur = next;
    first = false;
  }

  if (status.ok() && !point && !state.pred && have_first_leaf) {
    status = recover_predecessor(req, first_leaf, state);
  }

  complete(req);
  result.status = status;
  result.stats = state.stats;
  result.trace = std::move(state.trace);
  if (status.ok()) {
    if (state.pred) result.items.push_back(std::move(*state.pred));
    for (Item& item : state.items) result.items.push_back(std::move(item));
  }
  return result;
}

ScanResult ReadEngine::scan(std::string_view lower, std::string_view upper,
                            const ReadOptions& opts) {
  metrics_.scans.fetch_add(1, std::memory_order_relaxed);
  return scan_impl(lower, upper, false, opts);
}

GetResult ReadEngine::get(std::string_view key, const ReadOptions& opts) {
  metrics_.gets.fetch_add(1, std::memory_order_relaxed);
  ScanResult scan = scan_impl(key, key, true, opts);
  GetResult out;
  out.status = scan.status;
  out.read_version = scan.read_version;
  out.seq = scan.seq;
  out.stats = scan.stats;
  out.trace = std::move(scan.trace);
  if (!scan.status.ok()) return out;
  if (!scan.items.empty() && compare_keys(scan.items.front().key, key) == 0) {
    out.value = std::move(scan.items.front().value);
  } else {
    out.status = StatusCode::kNotFound;
  }
  return out;
}

}  // namespace honeycomb

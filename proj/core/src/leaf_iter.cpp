#include "honeycomb/leaf_iter.hpp"

#include <cassert>

namespace honeycomb::node {

Status prepare_log(std::span<const std::uint8_t> log_bytes, const HeaderView& hdr,
                   std::uint64_t read_version, bool filter, PreparedLog& out) {
  out.entries.clear();
  out.order.clear();
  out.anchors.clear();
  Status st = parse_log(log_bytes, hdr.log_boundary, out.entries);
  if (!st.ok()) return st;
  st = sort_log(out.entries, hdr.node_version, read_version, filter, out.order);
  if (!st.ok()) return st;
  out.anchors.resize(out.order.size());
  for (std::size_t i = 0; i < out.order.size(); ++i) {
    st = resolve_anchor(out.entries, out.order[i], hdr.log_boundary, out.anchors[i]);
    if (!st.ok()) return st;
  }
  return StatusCode::kOk;
}

MergedLeafIter::MergedLeafIter(const HeaderView& hdr, std::span<const ShortcutEntry> shortcuts,
                               std::span<const std::uint8_t> sorted, std::uint16_t sorted_base,
                               const PreparedLog& log, std::uint16_t start_sorted,
                               std::size_t start_log)
    : hdr_(hdr), log_(log),
      walker_(hdr.type, shortcuts, sorted, sorted_base, hdr.log_boundary, start_sorted),
      li_(start_log), cursor_(start_sorted) {}

bool MergedLeafIter::fill_pending() {
  if (pending_) return true;
  SortedItemView item;
  if (walker_.next(item)) {
    pending_ = item;
    cursor_ = item.offset;
    return true;
  }
  status_ = walker_.status();
  cursor_ = hdr_.log_boundary;
  return false;
}

bool MergedLeafIter::next(Candidate& out) {
  if (!status_.ok()) return false;
  bool have_sorted = fill_pending();
  if (!status_.ok()) return false;

  if (li_ < log_.order.size()) {
    const AnchorInfo& a = log_.anchors[li_];
    bool emit_log = a.anchor < cursor_ || (a.anchor == cursor_ && !a.replaces);
    if (!have_sorted) emit_log = true;
    if (emit_log) {
      std::uint32_t idx = log_.order[li_];
      const LogEntryView& e = log_.entries[idx];
      out.key = e.key;
      out.value = e.value;
      out.version = hdr_.node_version + e.version_delta;
      out.arrival = log_arrival_base_ + idx;
      out.is_delete = e.kind == LogKind::kDelete;
      out.from_log = true;
      ++li_;
      return true;
    }
  }
  if (have_sorted) {
    out.key = pending_->key;
    out.value = pending_->payload;
    out.version = hdr_.node_version;
    out.arrival = 0;
    out.is_delete = false;
    out.from_log = false;
    pending_.reset();
    cursor_ = hdr_.log_boundary;  // recomputed on next fill
    return true;
  }
  return false;
}

Status MergedLeafIter::status() const { return status_; }

std::optional<Candidate> RunResolver::feed(const Candidate& c) {
  std::optional<Candidate> finished;
  if (has_run_ && compare_keys(best_.key, c.key) != 0) {
    if (!best_.is_delete) finished = best_;
    has_run_ = false;
  }
  if (!has_run_) {
    best_ = c;
    has_run_ = true;
    return finished;
  }
  if (c.version > best_.version ||
      (c.version == best_.version && c.arrival > best_.arrival)) {
    best_ = c;
  }
  return finished;
}

std::optional<Candidate> RunResolver::take() {
  if (!has_run_) return std::nullopt;
  has_run_ = false;
  if (best_.is_delete) return std::nullopt;
  return best_;
}

Status resolve_leaf(const std::uint8_t* buffer, const SizeLock& observed,
                    std::uint64_t read_version, bool filter, ResolvedLeaf& out) {
  out.items.clear();
  out.live_content_bytes = 0;
  HeaderView hdr;
  Status st = parse_header({buffer, kHeaderSize}, hdr);
  if (!st.ok()) return st;
  hdr.size_lock = observed;
  if (!hdr.is_leaf()) return StatusCode::kInvalidArgument;
  std::vector<ShortcutEntry> shortcuts;
  st = parse_shortcuts({buffer, kBlockStart}, hdr, shortcuts);
  if (!st.ok()) return st;
  PreparedLog log;
  st = prepare_log({buffer + hdr.log_boundary,
                    static_cast<std::size_t>(observed.bytes_used - hdr.log_boundary)},
                   hdr, read_version, filter, log);
  if (!st.ok()) return st;

  MergedLeafIter iter(hdr, shortcuts,
                      {buffer + kBlockStart, static_cast<std::size_t>(hdr.log_boundary - kBlockStart)},
                      kBlockStart, log, kBlockStart, 0);
  RunResolver runs;
  Candidate c;
  auto emit = [&](const Candidate& live) {
    out.items.push_back({std::string(live.key), std::string(live.value)});
    out.live_content_bytes += encoded_item_bytes(NodeType::kLeaf, live.key, live.value);
  };
  while (iter.next(c)) {
    if (auto done = runs.feed(c)) emit(*done);
  }
  if (!iter.status().ok()) return iter.status();
  if (auto done = runs.take()) emit(*done);
  return StatusCode::kOk;
}

}  // namespace honeycomb::node

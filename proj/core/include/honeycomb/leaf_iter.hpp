#pragma once

// Merged, key-ordered iteration over a leaf's sorted block and log block.
// Ordering across the two blocks comes from log-entry back references and
// order hints, not key comparisons: the indirection array produced by
// sort_log is key-ordered, and each entry's sorted-block anchor places it
// relative to the sorted items.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "honeycomb/node_format.hpp"

namespace honeycomb::node {

struct Candidate {
  std::string_view key;
  std::string_view value;
  std::uint64_t version = 0;
  std::uint32_t arrival = 0;  // 0 = sorted item; log entries follow in append order
  bool is_delete = false;
  bool from_log = false;
};

// Version-filtered log entries of one leaf, sorted by key via order hints,
// each with its resolved sorted-block anchor.
struct PreparedLog {
  std::vector<LogEntryView> entries;
  std::vector<std::uint32_t> order;   // indices into entries, ascending key
  std::vector<AnchorInfo> anchors;    // parallel to order
};

Status prepare_log(std::span<const std::uint8_t> log_bytes, const HeaderView& hdr,
                   std::uint64_t read_version, bool filter, PreparedLog& out);

class MergedLeafIter {
 public:
  // `sorted` spans [sorted_base, hdr.log_boundary) node-relative bytes.
  // Iteration starts at sorted offset `start_sorted` and log order position
  // `start_log`.
  MergedLeafIter(const HeaderView& hdr, std::span<const ShortcutEntry> shortcuts,
                 std::span<const std::uint8_t> sorted, std::uint16_t sorted_base,
                 const PreparedLog& log, std::uint16_t start_sorted, std::size_t start_log);

  bool next(Candidate& out);
  Status status() const;

 private:
  const HeaderView& hdr_;
  const PreparedLog& log_;
  SortedWalker walker_;
  std::size_t li_;
  std::optional<SortedItemView> pending_;
  std::uint16_t cursor_;  // offset of the next sorted item (log_boundary at end)
  std::uint32_t log_arrival_base_ = 1;
  Status status_;

  bool fill_pending();
};

// Resolves maximal same-key runs of the candidate stream to the winning
// version; delete winners drop the key.
class RunResolver {
 public:
  // Feeds the next candidate; returns a finished live item when the key
  // changes. Check take() after the stream ends.
  std::optional<Candidate> feed(const Candidate& c);
  std::optional<Candidate> take();

 private:
  bool has_run_ = false;
  Candidate best_;
};

// Fully resolves a leaf buffer to its live items (writer-side view when
// read_version is UINT64_MAX and filtering is off).
struct ResolvedLeaf {
  std::vector<Item> items;
  std::size_t live_content_bytes = 0;  // encoded size of live items
};

Status resolve_leaf(const std::uint8_t* buffer, const SizeLock& observed,
                    std::uint64_t read_version, bool filter, ResolvedLeaf& out);

}  // namespace honeycomb::node

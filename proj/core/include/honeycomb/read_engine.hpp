#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "honeycomb/backend.hpp"
#include "honeycomb/leaf_iter.hpp"
#include "honeycomb/memsim.hpp"
#include "honeycomb/metrics.hpp"
#include "honeycomb/node_format.hpp"
#include "honeycomb/page_table.hpp"
#include "honeycomb/types.hpp"

namespace honeycomb {

struct ReadOptions {
  bool with_trace = false;
  // Pins the request to a specific read version (snapshot queries in tests).
  std::optional<std::uint64_t> read_version;
};

struct FetchTraceRecord {
  Lid lid = kNullLid;
  std::uint32_t offset = 0;
  std::uint32_t len = 0;
  bool is_interior = false;
  Channel channel = Channel::kDirect;
};

struct ReadStats {
  std::size_t fetches = 0;
  std::size_t chain_hops = 0;
  std::size_t leaves_visited = 0;
};

struct ScanResult {
  Status status;
  std::vector<Item> items;
  std::uint64_t read_version = 0;
  std::uint64_t seq = 0;
  ReadStats stats;
  std::vector<FetchTraceRecord> trace;
};

struct GetResult {
  Status status;
  std::string value;
  std::uint64_t read_version = 0;
  std::uint64_t seq = 0;
  ReadStats stats;
  std::vector<FetchTraceRecord> trace;
};

// Wait-free get/scan execution: requests are admitted with a sequence number
// and a read version, traverse interior nodes through header+shortcut and
// segment fetches, and scan leaf chains merging sorted and log blocks.
// Readers never inspect or spin on node locks.
class ReadEngine {
 public:
  struct Config {
    std::size_t inflight_slots = 64;
    bool mvcc = true;
    std::size_t scan_max_items = 4096;
    std::size_t scan_max_bytes = 1 << 20;
  };

  ReadEngine(Config cfg, FetchBackend& backend, const PageTablePair& tables,
             StoreMetrics& metrics);

  GetResult get(std::string_view key, const ReadOptions& opts = {});
  ScanResult scan(std::string_view lower, std::string_view upper, const ReadOptions& opts = {});

  // (S_old, S_new) for the epoch manager. S_old is one past S_new when no
  // request is inflight.
  std::pair<std::uint64_t, std::uint64_t> reader_window() const;

  // Test hook: invoked before every fetch; may block to sequence races.
  using FetchObserver =
      std::function<void(std::uint64_t seq, Lid lid, std::uint32_t offset, std::uint32_t len)>;
  void set_fetch_observer(FetchObserver fn);

  // Global capture of fetch records in the memsim trace format.
  void start_capture();
  std::vector<memsim::TraceRecord> stop_capture();

 private:
  struct Request {
    std::uint64_t seq = 0;
    std::uint64_t read_version = 0;
    int slot = -1;
    bool filter = true;
  };

  struct NodeSnap {
    Lid lid = kNullLid;
    std::uint64_t addr = 0;
    std::array<std::uint8_t, kBlockStart> head{};
    node::HeaderView hdr;
    std::vector<node::ShortcutEntry> shortcuts;
  };

  struct ScanState;

  Config cfg_;
  FetchBackend& backend_;
  const PageTablePair& tables_;
  StoreMetrics& metrics_;

  mutable std::mutex slots_mu_;
  std::vector<std::uint64_t> slots_;
  std::uint64_t s_new_ = 0;

  std::mutex observer_mu_;
  FetchObserver observer_;
  std::atomic<bool> has_observer_{false};

  std::mutex capture_mu_;
  bool capturing_ = false;
  std::vector<memsim::TraceRecord> capture_;

  Result<Request> admit(const ReadOptions& opts);
  void complete(const Request& req);

  Channel do_fetch(const Request& req, Lid lid, std::uint64_t addr, std::uint32_t offset,
                   std::uint32_t len, bool is_interior, std::uint8_t* dst, ScanState& state);
  Status fetch_head(const Request& req, Lid lid, bool is_interior, NodeSnap& out,
                    ScanState& state);
  Status process_leaf(const Request& req, const NodeSnap& leaf, bool first, ScanState& state);
  Status recover_predecessor(const Request& req, const NodeSnap& first_leaf, ScanState& state);
  ScanResult scan_impl(std::string_view lower, std::string_view upper, bool point,
                       const ReadOptions& opts);
};

}  // namespace honeycomb

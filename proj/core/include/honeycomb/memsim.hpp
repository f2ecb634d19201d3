#pragma once

// Discrete-event model of the accelerator memory subsystem: two off-chip
// channels (host link, on-board DRAM), a four-way set-associative interior
// node cache with 256-byte chunk occupancy maps, an on-chip root cache, a
// metadata cache, the per-request node address table (NAT) and the
// hit-diverting load balancer. The simulator affects timing and channel
// choice only; bytes always come from the live buffers.

#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "honeycomb/backend.hpp"
#include "honeycomb/types.hpp"

namespace honeycomb::memsim {

struct SimConfig {
  double host_bandwidth_bps = 13e9;   // PCIe Gen3 x8 pair, measured peak
  double host_latency_s = 1.2e-6;
  double board_bandwidth_bps = 34e9;  // 2 channels DDR4-2133, aggregated
  double board_latency_s = 0.15e-6;
  std::size_t cache_bytes = 256ull << 20;  // 0 disables the interior cache
  std::size_t ways = 4;
  bool root_cache = true;
  bool balancer = true;
  std::size_t metadata_cache_entries = 1024;
  std::size_t page_table_entry_bytes = 16;
  std::size_t metadata_entry_bytes = 64;
  std::uint64_t seed = 1;
};

enum class Category : std::uint8_t { kNodeData = 0, kPageTable = 1, kCacheMetadata = 2 };

struct ChannelStats {
  std::uint64_t read_ops = 0;
  std::uint64_t read_bytes = 0;
  std::uint64_t write_ops = 0;
  std::uint64_t write_bytes = 0;
  std::uint64_t ops_by_category[3] = {0, 0, 0};
  std::uint64_t bytes_by_category[3] = {0, 0, 0};
  double busy_s = 0;
};

struct Stats {
  ChannelStats host;
  ChannelStats board;
  std::uint64_t onchip_ops = 0;
  std::uint64_t onchip_bytes = 0;
  std::uint64_t interior_accesses = 0;
  std::uint64_t interior_hits = 0;
  std::uint64_t hits_served_board = 0;
  std::uint64_t hits_served_host = 0;  // balancer diversions
  std::uint64_t nat_mismatches = 0;
  std::uint64_t requests_completed = 0;
  double makespan_s = 0;

  double interior_hit_rate() const {
    return interior_accesses ? static_cast<double>(interior_hits) / interior_accesses : 0.0;
  }
  double throughput_rps() const {
    return makespan_s > 0 ? requests_completed / makespan_s : 0.0;
  }

  static std::string csv_header();
  std::string csv_row(const std::string& label) const;
};

struct TraceRecord {
  std::uint64_t seq = 0;
  Lid lid = kNullLid;
  std::uint32_t offset = 0;
  std::uint32_t len = 0;
  bool is_interior = false;
};

Status save_trace(const std::string& path, const std::vector<TraceRecord>& records);
Result<std::vector<TraceRecord>> load_trace(const std::string& path);

class Simulator {
 public:
  using Resolver = std::function<Result<std::uint64_t>(Lid)>;
  using RootFn = std::function<Lid()>;

  Simulator(SimConfig cfg, Resolver resolver, RootFn root);

  struct Access {
    Channel channel = Channel::kHost;
    double done_s = 0;
  };

  // Pins (seq, lid) in the NAT, charging a board page-table read on first
  // access. Returns the pinned address and the time the address is known.
  struct Resolved {
    Status status;
    std::uint64_t addr = 0;
    double done_s = 0;
  };
  Resolved nat_resolve(std::uint64_t seq, Lid lid, double ready_s);
  void nat_repin(std::uint64_t seq, Lid lid, std::uint64_t addr);

  Access access(std::uint64_t seq, Lid lid, std::uint64_t addr, std::uint32_t offset,
                std::uint32_t len, bool is_interior, double ready_s);

  void complete(std::uint64_t seq, double done_s);
  void invalidate(Lid lid);

  Stats stats() const;
  void reset_stats();

 private:
  struct Way {
    bool valid = false;
    Lid lid = kNullLid;
    std::uint64_t addr = 0;
    std::uint32_t occupancy = 0;  // bit per 256-byte chunk
  };
  struct PendingWriteback {
    Lid lid = kNullLid;
    std::size_t set = 0;
    Way way;
    double apply_s = 0;
    bool allocate = false;  // false: fill chunks of an existing entry
  };
  struct ChannelState {
    double free_at = 0;
    ChannelStats stats;
  };

  SimConfig cfg_;
  Resolver resolver_;
  RootFn root_;
  mutable std::mutex mu_;
  std::size_t num_sets_ = 0;
  std::vector<Way> ways_;  // num_sets * cfg.ways
  std::vector<std::int64_t> metadata_cache_;  // direct-mapped set tags, -1 empty
  std::vector<PendingWriteback> pending_;
  std::unordered_map<std::uint64_t, std::unordered_map<Lid, std::uint64_t>> nat_;
  std::mt19937_64 rng_;
  ChannelState host_;
  ChannelState board_;
  Stats stats_;

  double serve(ChannelState& ch, Channel which, Category cat, std::uint32_t bytes,
               double ready_s, double latency_s, double bw);
  void board_write(Category cat, std::uint32_t bytes);
  void apply_pending(double now_s);
  Way* find_way(Lid lid, std::size_t set);
  std::uint32_t chunk_mask(std::uint32_t offset, std::uint32_t len) const;
  double project(const ChannelState& ch, double ready_s, std::uint32_t bytes, double latency_s,
                 double bw) const;
};

struct ReplayOptions {
  std::size_t window = 64;
};

Result<Stats> replay(const std::vector<TraceRecord>& records, const SimConfig& cfg,
                     const ReplayOptions& opts = {});

// FetchBackend adapter for running the read engine against the simulator.
class SimBackend final : public FetchBackend {
 public:
  explicit SimBackend(Simulator& sim) : sim_(sim) {}

  Result<std::uint64_t> resolve(std::uint64_t seq, Lid lid) override {
    auto r = sim_.nat_resolve(seq, lid, 0);
    if (!r.status.ok()) return Result<std::uint64_t>::error(r.status.code);
    return Result<std::uint64_t>::of(r.addr);
  }
  void repin(std::uint64_t seq, Lid lid, std::uint64_t addr) override {
    sim_.nat_repin(seq, lid, addr);
  }
  Channel fetch(std::uint64_t seq, Lid lid, std::uint64_t addr, std::uint32_t offset,
                std::uint32_t len, bool is_interior, std::uint8_t* dst) override;
  void complete(std::uint64_t seq) override { sim_.complete(seq, 0); }

 private:
  Simulator& sim_;
};

}  // namespace honeycomb::memsim

#include "honeycomb/memsim.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "honeycomb/node_format.hpp"

namespace honeycomb::memsim {

std::string Stats::csv_header() {
  return "label,requests,makespan_s,throughput_rps,interior_accesses,interior_hits,"
         "hit_rate,hits_board,hits_host,nat_mismatches,onchip_ops,onchip_bytes,"
         "host_read_ops,host_read_bytes,host_node_bytes,host_pt_bytes,host_md_bytes,"
         "host_busy_s,board_read_ops,board_read_bytes,board_node_bytes,board_pt_bytes,"
         "board_md_bytes,board_write_ops,board_write_bytes,board_busy_s";
}

std::string Stats::csv_row(const std::string& label) const {
  std::ostringstream os;
  os << label << ',' << requests_completed << ',' << makespan_s << ',' << throughput_rps()
     << ',' << interior_accesses << ',' << interior_hits << ',' << interior_hit_rate() << ','
     << hits_served_board << ',' << hits_served_host << ',' << nat_mismatches << ','
     << onchip_ops << ',' << onchip_bytes << ',' << host.read_ops << ',' << host.read_bytes
     << ',' << host.bytes_by_category[0] << ',' << host.bytes_by_category[1] << ','
     << host.bytes_by_category[2] << ',' << host.busy_s << ',' << board.read_ops << ','
     << board.read_bytes << ',' << board.bytes_by_category[0] << ','
     << board.bytes_by_category[1] << ',' << board.bytes_by_category[2] << ','
     << board.write_ops << ',' << board.write_bytes << ',' << board.busy_s;
  return os.str();
}

Status save_trace(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path);
  if (!out) return StatusCode::kIoError;
  out << "seq,lid,offset,len,is_interior\n";
  for (const TraceRecord& r : records) {
    out << r.seq << ',' << r.lid << ',' << r.offset << ',' << r.len << ','
        << (r.is_interior ? 1 : 0) << '\n';
  }
  return out ? Status{} : Status{StatusCode::kIoError};
}

Result<std::vector<TraceRecord>> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Result<std::vector<TraceRecord>>::error(StatusCode::kIoError);
  std::vector<TraceRecord> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (line.rfind("seq,", 0) == 0) continue;
    }
    if (line.empty()) continue;
    TraceRecord r;
    unsigned long long seq, lid, off, len;
    int interior;
    if (std::sscanf(line.c_str(), "%llu,%llu,%llu,%llu,%d", &seq, &lid, &off, &len,
                    &interior) != 5) {
      return Result<std::vector<TraceRecord>>::error(StatusCode::kIoError);
    }
    r.seq = seq;
    r.lid = lid;
    r.offset = static_cast<std::uint32_t>(off);
    r.len = static_cast<std::uint32_t>(len);
    r.is_interior = interior != 0;
    out.push_back(r);
  }
  return Result<std::vector<TraceRecord>>::of(std::move(out));
}

Simulator::Simulator(SimConfig cfg, Resolver resolver, RootFn root)
    : cfg_(cfg), resolver_(std::move(resolver)), root_(std::move(root)), rng_(cfg.seed) {
  if (cfg_.cache_bytes >= kNodeSize * cfg_.ways) {
    num_sets_ = cfg_.cache_bytes / (kNodeSize * cfg_.ways);
    // power of two for lid masking
    std::size_t p2 = 1;
    while (p2 * 2 <= num_sets_) p2 *= 2;
    num_sets_ = p2;
    ways_.resize(num_sets_ * cfg_.ways);
  }
  metadata_cache_.assign(cfg_.metadata_cache_entries, -1);
}

double Simulator::project(const ChannelState& ch, double ready_s, std::uint32_t bytes,
                          double latency_s, double bw) const {
  double start = std::max(ready_s, ch.free_at);
  return start + bytes / bw + latency_s;
}

double Simulator::serve(ChannelState& ch, Channel which, Category cat, std::uint32_t bytes,
                        double ready_s, double latency_s, double bw) {
  double start = std::max(ready_s, ch.free_at);
  double transfer = bytes / bw;
  ch.free_at = start + transfer;
  ch.stats.busy_s += transfer;
  ch.stats.read_ops += 1;
  ch.stats.read_bytes += bytes;
  ch.stats.ops_by_category[static_cast<int>(cat)] += 1;
  ch.stats.bytes_by_category[static_cast<int>(cat)] += bytes;
  (void)which;
  return start + transfer + latency_s;
}

void Simulator::board_write(Category cat, std::uint32_t bytes) {
  double transfer = bytes / cfg_.board_bandwidth_bps;
  board_.free_at = std::max(board_.free_at, 0.0) + transfer;
  board_.stats.busy_s += transfer;
  board_.stats.write_ops += 1;
  board_.stats.write_bytes += bytes;
  board_.stats.bytes_by_category[static_cast<int>(cat)] += bytes;
}

void Simulator::apply_pending(double now_s) {
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->apply_s <= now_s) {
      Way* slot = nullptr;
      if (it->allocate) {
        // evict a random way from the set
        Way* set_base = &ways_[it->set * cfg_.ways];
        for (std::size_t w = 0; w < cfg_.ways; ++w) {
          if (!set_base[w].valid) {
            slot = &set_base[w];
            break;
          }
        }
        if (!slot) slot = &set_base[rng_() % cfg_.ways];
        *slot = it->way;
      } else {
        slot = find_way(it->lid, it->set);
        if (slot && slot->addr == it->way.addr) slot->occupancy |= it->way.occupancy;
      }
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
}

Simulator::Way* Simulator::find_way(Lid lid, std::size_t set) {
  Way* set_base = &ways_[set * cfg_.ways];
  for (std::size_t w = 0; w < cfg_.ways; ++w) {
    if (set_base[w].valid && set_base[w].lid == lid) return &set_base[w];
  }
  return nullptr;
}

std::uint32_t Simulator::chunk_mask(std::uint32_t offset, std::uint32_t len) const {
  std::uint32_t first = offset / kChunkBytes;
  std::uint32_t last = (offset + len + kChunkBytes - 1) / kChunkBytes;
  last = std::min<std::uint32_t>(last, 32);
  std::uint32_t mask = 0;
  for (std::uint32_t i = first; i < last; ++i) mask |= 1u << i;
  return mask;
}

Simulator::Resolved Simulator::nat_resolve(std::uint64_t seq, Lid lid, double ready_s) {
  std::lock_guard lock(mu_);
  Resolved out;
  auto& pins = nat_[seq];
  auto it = pins.find(lid);
  if (it != pins.end()) {
    out.addr = it->second;
    out.done_s = ready_s;
    return out;
  }
  auto r = resolver_(lid);
  if (!r.ok()) {
    out.status = r.status;
    return out;
  }
  // page table lives in on-board DRAM
  out.done_s = serve(board_, Channel::kBoard, Category::kPageTable,
                     static_cast<std::uint32_t>(cfg_.page_table_entry_bytes), ready_s,
                     cfg_.board_latency_s, cfg_.board_bandwidth_bps);
  pins[lid] = r.value;
  out.addr = r.value;
  return out;
}

void Simulator::nat_repin(std::uint64_t seq, Lid lid, std::uint64_t addr) {
  std::lock_guard lock(mu_);
  nat_[seq][lid] = addr;
}

Simulator::Access Simulator::access(std::uint64_t seq, Lid lid, std::uint64_t addr,
                                    std::uint32_t offset, std::uint32_t len, bool is_interior,
                                    double ready_s) {
  std::lock_guard lock(mu_);
  Access out;
  apply_pending(ready_s);

  std::uint64_t nat_addr = addr;
  auto pins = nat_.find(seq);
  if (pins != nat_.end()) {
    auto it = pins->second.find(lid);
    if (it != pins->second.end()) nat_addr = it->second;
  }

  if (cfg_.root_cache && root_ && root_() == lid) {
    stats_.onchip_ops += 1;
    stats_.onchip_bytes += len;
    out.channel = Channel::kOnChip;
    out.done_s = ready_s;
    return out;
  }

  std::uint32_t chunk_bytes = [&] {
    std::uint32_t first = offset / kChunkBytes * kChunkBytes;
    std::uint32_t last = (offset + len + kChunkBytes - 1) / kChunkBytes * kChunkBytes;
    return last - first;
  }();

  if (!is_interior || num_sets_ == 0) {
    out.channel = Channel::kHost;
    out.done_s = serve(host_, Channel::kHost, Category::kNodeData, chunk_bytes, ready_s,
                       cfg_.host_latency_s, cfg_.host_bandwidth_bps);
    return out;
  }

  stats_.interior_accesses += 1;
  std::size_t set = lid & (num_sets_ - 1);

  // metadata table access; only sets beyond the on-chip metadata cache pay
  if (num_sets_ > cfg_.metadata_cache_entries) {
    std::size_t slot = set % cfg_.metadata_cache_entries;
    if (metadata_cache_[slot] != static_cast<std::int64_t>(set)) {
      serve(board_, Channel::kBoard, Category::kCacheMetadata,
            static_cast<std::uint32_t>(cfg_.metadata_entry_bytes), ready_s,
            cfg_.board_latency_s, cfg_.board_bandwidth_bps);
      metadata_cache_[slot] = static_cast<std::int64_t>(set);
    }
  }

  std::uint32_t mask = chunk_mask(offset, len);
  Way* way = find_way(lid, set);
  bool hit = way && (way->occupancy & mask) == mask && way->addr == nat_addr;
  if (way && way->addr != nat_addr) stats_.nat_mismatches += 1;

  if (hit) {
    stats_.interior_hits += 1;
    bool to_host = false;
    if (cfg_.balancer) {
      double board_done = project(board_, ready_s, chunk_bytes, cfg_.board_latency_s,
                                  cfg_.board_bandwidth_bps);
      double host_done =
          project(host_, ready_s, chunk_bytes, cfg_.host_latency_s, cfg_.host_bandwidth_bps);
      to_host = host_done < board_done;
    }
    if (to_host) {
      stats_.hits_served_host += 1;
      out.channel = Channel::kHost;
      out.done_s = serve(host_, Channel::kHost, Category::kNodeData, chunk_bytes, ready_s,
                         cfg_.host_latency_s, cfg_.host_bandwidth_bps);
    } else {
      stats_.hits_served_board += 1;
      out.channel = Channel::kBoard;
      out.done_s = serve(board_, Channel::kBoard, Category::kNodeData, chunk_bytes, ready_s,
                         cfg_.board_latency_s, cfg_.board_bandwidth_bps);
    }
    return out;
  }

  // miss (or NAT mismatch): always load from host using the NAT address
  out.channel = Channel::kHost;
  out.done_s = serve(host_, Channel::kHost, Category::kNodeData, chunk_bytes, ready_s,
                     cfg_.host_latency_s, cfg_.host_bandwidth_bps);

  // write back: allocate on header+shortcut misses, fill chunks otherwise
  if (way && way->addr == nat_addr) {
    PendingWriteback wb;
    wb.lid = lid;
    wb.set = set;
    wb.way = *way;
    wb.way.occupancy = mask;
    wb.allocate = false;
    wb.apply_s = out.done_s;
    pending_.push_back(wb);
    board_write(Category::kNodeData, chunk_bytes);
  } else if (!way && offset == 0) {
    PendingWriteback wb;
    wb.lid = lid;
    wb.set = set;
    wb.way.valid = true;
    wb.way.lid = lid;
    wb.way.addr = nat_addr;
    wb.way.occupancy = mask;
    wb.allocate = true;
    wb.apply_s = out.done_s;
    pending_.push_back(wb);
    board_write(Category::kNodeData, chunk_bytes);
  }
  return out;
}

void Simulator::complete(std::uint64_t seq, double done_s) {
  std::lock_guard lock(mu_);
  nat_.erase(seq);
  stats_.requests_completed += 1;
  stats_.makespan_s = std::max(stats_.makespan_s, done_s);
}

void Simulator::invalidate(Lid lid) {
  std::lock_guard lock(mu_);
  // in-progress write-backs for this lid are discarded (write-back loses)
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->lid == lid) {
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  if (num_sets_ == 0) return;
  std::size_t set = lid & (num_sets_ - 1);
  if (Way* way = find_way(lid, set)) way->valid = false;
}

Stats Simulator::stats() const {
  std::lock_guard lock(mu_);
  Stats out = stats_;
  out.host = host_.stats;
  out.board = board_.stats;
  return out;
}

void Simulator::reset_stats() {
  std::lock_guard lock(mu_);
  stats_ = Stats{};
  host_.stats = ChannelStats{};
  board_.stats = ChannelStats{};
  host_.free_at = 0;
  board_.free_at = 0;
}

Channel SimBackend::fetch(std::uint64_t seq, Lid lid, std::uint64_t addr, std::uint32_t offset,
                          std::uint32_t len, bool is_interior, std::uint8_t* dst) {
  Simulator::Access a = sim_.access(seq, lid, addr, offset, len, is_interior, 0);
  node::copy_node_bytes(reinterpret_cast<const std::uint8_t*>(addr), offset, len, dst);
  return a.channel;
}

Result<Stats> replay(const std::vector<TraceRecord>& records, const SimConfig& cfg,
                     const ReplayOptions& opts) {
  // Group records into requests by sequence number, in first-appearance order.
  std::vector<std::vector<const TraceRecord*>> requests;
  {
    std::unordered_map<std::uint64_t, std::size_t> index;
    for (const TraceRecord& r : records) {
      auto [it, inserted] = index.try_emplace(r.seq, requests.size());
      if (inserted) requests.emplace_back();
      requests[it->second].push_back(&r);
    }
  }
  if (requests.empty()) {
    Simulator sim(cfg, [](Lid) { return Result<std::uint64_t>::error(StatusCode::kUnknownLid); },
                  nullptr);
    return Result<Stats>::of(sim.stats());
  }

  Lid root_lid = requests[0][0]->lid;
  Simulator sim(
      cfg, [](Lid lid) { return Result<std::uint64_t>::of(lid << 13); },
      [root_lid] { return root_lid; });

  struct Active {
    std::size_t request = 0;
    std::size_t next = 0;
    double ready = 0;
  };
  std::vector<Active> active;
  std::size_t admitted = 0;
  while (admitted < requests.size() && active.size() < opts.window) {
    active.push_back({admitted++, 0, 0.0});
  }
  double makespan = 0;
  while (!active.empty()) {
    std::size_t pick = 0;
    for (std::size_t i = 1; i < active.size(); ++i) {
      if (active[i].ready < active[pick].ready) pick = i;
    }
    Active& a = active[pick];
    const TraceRecord& r = *requests[a.request][a.next];
    auto res = sim.nat_resolve(r.seq, r.lid, a.ready);
    if (!res.status.ok()) return Result<Stats>::error(res.status.code);
    Simulator::Access acc =
        sim.access(r.seq, r.lid, res.addr, r.offset, r.len, r.is_interior, res.done_s);
    a.ready = acc.done_s;
    a.next += 1;
    if (a.next == requests[a.request].size()) {
      sim.complete(r.seq, a.ready);
      makespan = std::max(makespan, a.ready);
      double freed_at = a.ready;
      active.erase(active.begin() + pick);
      if (admitted < requests.size()) {
        active.push_back({admitted++, 0, freed_at});
      }
    }
  }
  Stats out = sim.stats();
  out.makespan_s = makespan;
  return Result<Stats>::of(out);
}

}  // namespace honeycomb::memsim

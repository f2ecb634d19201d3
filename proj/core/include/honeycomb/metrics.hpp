#pragma once

#include <atomic>
#include <cstdint>

namespace honeycomb {

struct StoreMetrics {
  std::atomic<std::uint64_t> fast_path_appends{0};
  std::atomic<std::uint64_t> merges{0};
  std::atomic<std::uint64_t> splits{0};
  std::atomic<std::uint64_t> split_nodes{0};
  std::atomic<std::uint64_t> node_merges{0};
  std::atomic<std::uint64_t> node_rebalances{0};
  std::atomic<std::uint64_t> root_grows{0};
  std::atomic<std::uint64_t> root_shrinks{0};
  std::atomic<std::uint64_t> restarts{0};
  std::atomic<std::uint64_t> lock_failures{0};
  std::atomic<std::uint64_t> oom_retries{0};
  std::atomic<std::uint64_t> gets{0};
  std::atomic<std::uint64_t> scans{0};
  std::atomic<std::uint64_t> reads_overloaded{0};
  std::atomic<std::uint64_t> read_fetch_bytes{0};
};

}  // namespace honeycomb

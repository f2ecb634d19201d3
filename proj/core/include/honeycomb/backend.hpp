#pragma once

#include <cstdint>

#include "honeycomb/page_table.hpp"
#include "honeycomb/types.hpp"

namespace honeycomb {

enum class Channel : std::uint8_t { kDirect = 0, kHost, kBoard, kOnChip };

inline const char* to_string(Channel c) {
  switch (c) {
    case Channel::kDirect: return "direct";
    case Channel::kHost: return "host";
    case Channel::kBoard: return "board";
    case Channel::kOnChip: return "onchip";
  }
  return "?";
}

// Memory access interface of the read engine. The direct backend copies from
// host buffers; the simulated backend routes every access through the
// accelerator memory-subsystem model. Both return identical bytes.
class FetchBackend {
 public:
  virtual ~FetchBackend() = default;

  // Resolves a lid for a request. The first resolution pins the physical
  // address for (seq, lid); repeated calls return the pinned address.
  virtual Result<std::uint64_t> resolve(std::uint64_t seq, Lid lid) = 0;

  // Re-pins (seq, lid) to an old-version buffer reached through the
  // old-version chain.
  virtual void repin(std::uint64_t seq, Lid lid, std::uint64_t addr) = 0;

  // Copies [offset, offset+len) of the node at `addr` into dst.
  virtual Channel fetch(std::uint64_t seq, Lid lid, std::uint64_t addr, std::uint32_t offset,
                        std::uint32_t len, bool is_interior, std::uint8_t* dst) = 0;

  // Request finished; drop per-request pins.
  virtual void complete(std::uint64_t seq) = 0;
};

class DirectBackend final : public FetchBackend {
 public:
  explicit DirectBackend(const PageTablePair& tables) : tables_(tables) {}

  Result<std::uint64_t> resolve(std::uint64_t /*seq*/, Lid lid) override {
    return tables_.resolve(lid, PageTablePair::Side::kRead);
  }
  void repin(std::uint64_t, Lid, std::uint64_t) override {}
  Channel fetch(std::uint64_t, Lid, std::uint64_t addr, std::uint32_t offset, std::uint32_t len,
                bool, std::uint8_t* dst) override;
  void complete(std::uint64_t) override {}

 private:
  const PageTablePair& tables_;
};

}  // namespace honeycomb

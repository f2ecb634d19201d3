#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <vector>

#include "honeycomb/types.hpp"

namespace honeycomb {

// Fixed pool of 8 KB node buffers. Buffers are stable for their lifetime and
// play the role of pinned host memory: a buffer address is the "physical
// address" stored in page tables and old-version links.
class BufferArena {
 public:
  explicit BufferArena(std::size_t capacity_bytes, bool poison_on_free = true);
  ~BufferArena();

  BufferArena(const BufferArena&) = delete;
  BufferArena& operator=(const BufferArena&) = delete;

  // Returns a zeroed 8 KB buffer or null when exhausted.
  std::uint8_t* allocate();
  void free(std::uint8_t* buf);

  std::size_t capacity_buffers() const { return capacity_; }
  std::size_t live_buffers() const { return live_.load(std::memory_order_relaxed); }
  std::size_t live_bytes() const { return live_buffers() * kNodeSize; }

  bool owns(const std::uint8_t* buf) const {
    return buf >= base_ && buf < base_ + capacity_ * kNodeSize;
  }
  // True when the buffer still carries the free-poison pattern (debug aid).
  static bool looks_poisoned(const std::uint8_t* buf);

  static constexpr std::uint8_t kPoisonByte = 0xDD;

 private:
  std::uint8_t* base_ = nullptr;
  std::size_t capacity_ = 0;
  bool poison_;
  std::mutex mu_;
  std::vector<std::uint8_t*> free_list_;
  std::atomic<std::size_t> live_{0};
};

}  // namespace honeycomb

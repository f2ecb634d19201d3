#include "honeycomb/arena.hpp"

#include <cassert>
#include <cstring>
#include <new>

namespace honeycomb {

BufferArena::BufferArena(std::size_t capacity_bytes, bool poison_on_free)
    : capacity_(capacity_bytes / kNodeSize), poison_(poison_on_free) {
  assert(capacity_ > 0);
  base_ = static_cast<std::uint8_t*>(
      ::operator new(capacity_ * kNodeSize, std::align_val_t(kNodeSize)));
  free_list_.reserve(capacity_);
  for (std::size_t i = capacity_; i > 0; --i) {
    free_list_.push_back(base_ + (i - 1) * kNodeSize);
  }
}

BufferArena::~BufferArena() {
  ::operator delete(base_, std::align_val_t(kNodeSize));
}

std::uint8_t* BufferArena::allocate() {
  std::uint8_t* buf = nullptr;
  {
    std::lock_guard lock(mu_);
    if (free_list_.empty()) return nullptr;
    buf = free_list_.back();
    free_list_.pop_back();
  }
  std::memset(buf, 0, kNodeSize);
  live_.fetch_add(1, std::memory_order_relaxed);
  return buf;
}

void BufferArena::free(std::uint8_t* buf) {
  assert(owns(buf));
  if (poison_) std::memset(buf, kPoisonByte, kNodeSize);
  {
    std::lock_guard lock(mu_);
    free_list_.push_back(buf);
  }
  live_.fetch_sub(1, std::memory_order_relaxed);
}

bool BufferArena::looks_poisoned(const std::uint8_t* buf) {
  for (std::size_t i = 0; i < 64; ++i) {
    if (buf[i] != kPoisonByte) return false;
  }
  return true;
}

}  // namespace honeycomb

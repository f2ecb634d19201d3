#include "honeycomb/mvcc.hpp"

#include <cassert>
#include <chrono>

namespace honeycomb {

void ReleaseGate::release(std::uint64_t version) {
  if (!mvcc_on_) return;
  auto start = std::chrono::steady_clock::now();
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return versions_.read_version() == version - 1; });
    versions_.set_read_version(version);
  }
  cv_.notify_all();
  // A successor that released after us may already have covered our version
  // on the read side.
  if (tables_.acked_read_version() < version) {
    tables_.propagate_read_version(version);
  }
  tables_.wait_read_version_acked(version);
  releases_.fetch_add(1, std::memory_order_relaxed);
  auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                std::chrono::steady_clock::now() - start)
                .count();
  wait_ns_.fetch_add(static_cast<std::uint64_t>(ns), std::memory_order_relaxed);
}

EpochRegistry::EpochRegistry(std::size_t max_writers) : slots_(max_writers) {}

int EpochRegistry::register_writer() {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    bool expected = false;
    if (slots_[i].used.compare_exchange_strong(expected, true)) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

void EpochRegistry::unregister_writer(int slot) {
  assert(slot >= 0 && static_cast<std::size_t>(slot) < slots_.size());
  assert((slots_[slot].word.load() & 1) == 0);
  slots_[slot].used.store(false);
}

std::uint64_t EpochRegistry::begin_op(int slot) {
  std::uint64_t w = slots_[slot].word.load(std::memory_order_relaxed);
  assert((w & 1) == 0);
  std::uint64_t seq = (w >> 1) + 1;
  slots_[slot].word.store((seq << 1) | 1, std::memory_order_release);
  return seq;
}

void EpochRegistry::end_op(int slot) {
  std::uint64_t w = slots_[slot].word.load(std::memory_order_relaxed);
  assert(w & 1);
  slots_[slot].word.store(w & ~std::uint64_t{1}, std::memory_order_release);
}

std::vector<std::uint64_t> EpochRegistry::snapshot() const {
  std::vector<std::uint64_t> out(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    out[i] = slots_[i].word.load(std::memory_order_acquire);
  }
  return out;
}

bool EpochRegistry::dominated(const std::vector<std::uint64_t>& stamp) const {
  for (std::size_t i = 0; i < stamp.size(); ++i) {
    if ((stamp[i] & 1) == 0) continue;  // idle at stamp time
    // Words only move forward; any change means that operation completed.
    if (slots_[i].word.load(std::memory_order_acquire) == stamp[i]) return false;
  }
  return true;
}

void ReclaimList::set_reader_window(ReaderWindowFn fn) {
  std::lock_guard lock(mu_);
  reader_window_ = std::move(fn);
}

void ReclaimList::retire(std::vector<std::uint8_t*> buffers, std::vector<Lid> lids) {
  ReclaimItem item;
  item.buffers = std::move(buffers);
  item.lids = std::move(lids);
  item.writer_stamp = epochs_.snapshot();
  {
    std::lock_guard lock(mu_);
    if (reader_window_) item.reader_newest = reader_window_().second;
    items_.push_back(std::move(item));
  }
}

std::size_t ReclaimList::sweep() {
  // One sweeper at a time; concurrent callers fall through.
  std::unique_lock sweeping(sweep_mu_, std::try_to_lock);
  if (!sweeping.owns_lock()) return 0;

  std::vector<ReclaimItem> ready;
  {
    std::lock_guard lock(mu_);
    std::uint64_t reader_oldest = UINT64_MAX;
    if (reader_window_) reader_oldest = reader_window_().first;
    for (auto it = items_.begin(); it != items_.end();) {
      if (it->reader_newest < reader_oldest && epochs_.dominated(it->writer_stamp)) {
        ready.push_back(std::move(*it));
        it = items_.erase(it);
      } else {
        ++it;
      }
    }
  }
  std::size_t freed = 0;
  for (ReclaimItem& item : ready) {
    for (Lid lid : item.lids) tables_.remove(lid);
    for (std::uint8_t* buf : item.buffers) {
      arena_.free(buf);
      ++freed;
    }
  }
  reclaimed_.fetch_add(freed, std::memory_order_relaxed);
  return freed;
}

std::size_t ReclaimList::pending() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

}  // namespace honeycomb

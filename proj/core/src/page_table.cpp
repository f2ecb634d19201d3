#include "honeycomb/page_table.hpp"

#include <cassert>
#include <chrono>

namespace honeycomb {

PageTableSide::PageTableSide(std::size_t lid_capacity)
    : chunk_count_((lid_capacity + kChunkEntries - 1) / kChunkEntries),
      dir_(new std::atomic<Chunk*>[chunk_count_]) {
  for (std::size_t i = 0; i < chunk_count_; ++i) dir_[i].store(nullptr, std::memory_order_relaxed);
}

PageTableSide::~PageTableSide() {
  for (std::size_t i = 0; i < chunk_count_; ++i) {
    delete[] dir_[i].load(std::memory_order_relaxed);
  }
}

PageTableSide::Chunk* PageTableSide::chunk_for(Lid lid, bool create) const {
  std::size_t hi = lid / kChunkEntries;
  if (hi >= chunk_count_) return nullptr;
  Chunk* chunk = dir_[hi].load(std::memory_order_acquire);
  if (chunk || !create) return chunk;
  std::lock_guard lock(grow_mu_);
  chunk = dir_[hi].load(std::memory_order_acquire);
  if (!chunk) {
    chunk = new Chunk[kChunkEntries];
    for (std::size_t i = 0; i < kChunkEntries; ++i) chunk[i].store(0, std::memory_order_relaxed);
    dir_[hi].store(chunk, std::memory_order_release);
  }
  return chunk;
}

Result<std::uint64_t> PageTableSide::resolve(Lid lid) const {
  if (lid == kNullLid || lid > kLidLimit) return Result<std::uint64_t>::error(StatusCode::kUnknownLid);
  Chunk* chunk = chunk_for(lid, false);
  if (!chunk) return Result<std::uint64_t>::error(StatusCode::kUnknownLid);
  std::uint64_t addr = chunk[lid % kChunkEntries].load(std::memory_order_acquire);
  if (addr == 0) return Result<std::uint64_t>::error(StatusCode::kUnknownLid);
  return Result<std::uint64_t>::of(addr);
}

bool PageTableSide::contains(Lid lid) const { return resolve(lid).ok(); }

Status PageTableSide::set(Lid lid, std::uint64_t addr) {
  if (lid == kNullLid || lid > kLidLimit) return StatusCode::kUnknownLid;
  Chunk* chunk = chunk_for(lid, true);
  if (!chunk) return StatusCode::kLidSpaceExhausted;
  chunk[lid % kChunkEntries].store(addr, std::memory_order_release);
  return StatusCode::kOk;
}

CommandChannel::CommandChannel(std::size_t capacity) : capacity_(capacity) {}

CommandChannel::~CommandChannel() { stop(); }

void CommandChannel::start(Applier applier) {
  applier_ = std::move(applier);
  running_ = true;
  consumer_ = std::thread([this] { consume_loop(); });
}

void CommandChannel::stop() {
  {
    std::lock_guard lock(mu_);
    if (!running_) return;
    running_ = false;
  }
  not_empty_.notify_all();
  not_full_.notify_all();
  if (consumer_.joinable()) consumer_.join();
}

void CommandChannel::submit_sync(const Command& cmd) {
  Pending p;
  p.cmd = cmd;
  p.enqueued = std::chrono::steady_clock::now();
  p.done = std::make_shared<std::atomic<bool>>(false);
  auto done = p.done;
  {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [this] { return queue_.size() < capacity_ || !running_; });
    if (!running_) return;
    queue_.push_back(std::move(p));
    submitted_.fetch_add(1, std::memory_order_relaxed);
  }
  not_empty_.notify_one();
  std::unique_lock ack(ack_mu_);
  ack_cv_.wait(ack, [&] { return done->load(std::memory_order_acquire); });
}

void CommandChannel::wait_read_version_acked(std::uint64_t version) {
  if (acked_read_version() >= version) return;
  std::unique_lock ack(ack_mu_);
  ack_cv_.wait(ack, [&] { return acked_read_version() >= version; });
}

void CommandChannel::enable_trace(bool on) {
  std::lock_guard lock(trace_mu_);
  trace_enabled_ = on;
}

std::vector<CommandTraceRecord> CommandChannel::drain_trace() {
  std::lock_guard lock(trace_mu_);
  std::vector<CommandTraceRecord> out;
  out.swap(trace_);
  return out;
}

void CommandChannel::consume_loop() {
  for (;;) {
    Pending p;
    {
      std::unique_lock lock(mu_);
      not_empty_.wait(lock, [this] { return !queue_.empty() || !running_; });
      if (queue_.empty()) {
        if (!running_) return;
        continue;
      }
      p = std::move(queue_.front());
      queue_.pop_front();
    }
    not_full_.notify_one();
    applier_(p.cmd);
    if (p.cmd.kind == CommandKind::kSetReadVersion) {
      std::uint64_t prev = acked_read_version_.load(std::memory_order_relaxed);
      while (prev < p.cmd.version &&
             !acked_read_version_.compare_exchange_weak(prev, p.cmd.version,
                                                        std::memory_order_release)) {
      }
    }
    {
      std::lock_guard lock(trace_mu_);
      if (trace_enabled_) {
        auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::steady_clock::now() - p.enqueued)
                      .count();
        trace_.push_back({p.cmd.kind, p.cmd.lid, static_cast<std::uint64_t>(ns)});
      }
    }
    {
      std::lock_guard ack(ack_mu_);
      p.done->store(true, std::memory_order_release);
    }
    ack_cv_.notify_all();
  }
}

PageTablePair::PageTablePair(std::size_t lid_capacity)
    : write_(lid_capacity), read_(lid_capacity) {
  channel_.start([this](const Command& cmd) { apply(cmd); });
}

PageTablePair::~PageTablePair() { channel_.stop(); }

void PageTablePair::set_invalidate_hook(InvalidateHook hook) {
  std::lock_guard lock(hook_mu_);
  invalidate_ = std::move(hook);
}

Result<Lid> PageTablePair::allocate_lid() {
  Lid lid = next_lid_.fetch_add(1, std::memory_order_relaxed);
  if (lid > kLidLimit) {
    next_lid_.store(kLidLimit + 1, std::memory_order_relaxed);
    return Result<Lid>::error(StatusCode::kLidSpaceExhausted);
  }
  return Result<Lid>::of(lid);
}

Status PageTablePair::bind(Lid lid, std::uint64_t addr) {
  if (addr == 0) return StatusCode::kInvalidArgument;
  if (write_.contains(lid)) return StatusCode::kInvalidArgument;
  Status st = write_.set(lid, addr);
  if (!st.ok()) return st;
  counters_.binds.fetch_add(1, std::memory_order_relaxed);
  Command cmd;
  cmd.kind = CommandKind::kSetMapping;
  cmd.lid = lid;
  cmd.addr = addr;
  cmd.remap = false;
  channel_.submit_sync(cmd);
  return StatusCode::kOk;
}

Status PageTablePair::update_mapping(Lid lid, std::uint64_t new_addr) {
  if (!write_.contains(lid)) return StatusCode::kUnknownLid;
  Status st = write_.set(lid, new_addr);
  if (!st.ok()) return st;
  counters_.remaps.fetch_add(1, std::memory_order_relaxed);
  Command cmd;
  cmd.kind = CommandKind::kSetMapping;
  cmd.lid = lid;
  cmd.addr = new_addr;
  cmd.remap = true;
  channel_.submit_sync(cmd);
  return StatusCode::kOk;
}

void PageTablePair::remove(Lid lid) {
  write_.set(lid, 0);
  Command cmd;
  cmd.kind = CommandKind::kSetMapping;
  cmd.lid = lid;
  cmd.addr = 0;
  cmd.remap = true;
  channel_.submit_sync(cmd);
}

Result<std::uint64_t> PageTablePair::resolve(Lid lid, Side side) const {
  return side == Side::kWrite ? write_.resolve(lid) : read_.resolve(lid);
}

void PageTablePair::set_root(RootInfo info) {
  write_.set_root(info);
  counters_.set_roots.fetch_add(1, std::memory_order_relaxed);
  Command cmd;
  cmd.kind = CommandKind::kSetRoot;
  cmd.lid = info.lid;
  cmd.root = info;
  channel_.submit_sync(cmd);
}

void PageTablePair::propagate_read_version(std::uint64_t version) {
  counters_.read_version_updates.fetch_add(1, std::memory_order_relaxed);
  Command cmd;
  cmd.kind = CommandKind::kSetReadVersion;
  cmd.version = version;
  channel_.submit_sync(cmd);
}

void PageTablePair::apply(const Command& cmd) {
  switch (cmd.kind) {
    case CommandKind::kSetMapping: {
      read_.set(cmd.lid, cmd.addr);
      InvalidateHook hook;
      {
        std::lock_guard lock(hook_mu_);
        hook = invalidate_;
      }
      if (hook) hook(cmd.lid);
      break;
    }
    case CommandKind::kSetRoot:
      read_.set_root(cmd.root);
      break;
    case CommandKind::kSetReadVersion:
    case CommandKind::kShutdown:
      break;
  }
}

}  // namespace honeycomb

#include "honeycomb/store.hpp"

#include <cassert>

namespace honeycomb {

Store::Store(StoreConfig cfg)
    : cfg_(cfg), arena_(cfg.arena_bytes, cfg.poison_on_free), tables_(cfg.lid_capacity),
      gate_(versions_, tables_, cfg.mvcc), epochs_(cfg.max_writers),
      reclaim_(epochs_, arena_, tables_) {
  if (cfg_.sim_backend) {
    sim_ = std::make_unique<memsim::Simulator>(
        cfg_.sim,
        [this](Lid lid) { return tables_.resolve(lid, PageTablePair::Side::kRead); },
        [this] { return tables_.read_root().lid; });
    backend_ = std::make_unique<memsim::SimBackend>(*sim_);
    tables_.set_invalidate_hook([this](Lid lid) { sim_->invalidate(lid); });
  } else {
    backend_ = std::make_unique<DirectBackend>(tables_);
  }

  ReadEngine::Config rcfg;
  rcfg.inflight_slots = cfg_.inflight_slots;
  rcfg.mvcc = cfg_.mvcc;
  rcfg.scan_max_items = cfg_.scan_max_items;
  rcfg.scan_max_bytes = cfg_.scan_max_bytes;
  read_engine_ = std::make_unique<ReadEngine>(rcfg, *backend_, tables_, metrics_);

  WriteEngine::Config wcfg;
  wcfg.mvcc = cfg_.mvcc;
  wcfg.log_block_threshold = cfg_.log_block_threshold;
  wcfg.backoff_after_restarts = cfg_.backoff_after_restarts;
  wcfg.bulk_load_fill = cfg_.bulk_load_fill;
  write_engine_ = std::make_unique<WriteEngine>(wcfg, arena_, tables_, versions_, gate_,
                                                epochs_, reclaim_, metrics_);

  reclaim_.set_reader_window([this] { return read_engine_->reader_window(); });
  init_root();

  if (cfg_.background_sweep) {
    sweeper_ = std::thread([this] {
      std::unique_lock lock(sweep_mu_);
      while (!stopping_) {
        sweep_cv_.wait_for(lock, cfg_.sweep_interval);
        if (stopping_) break;
        lock.unlock();
        reclaim_.sweep();
        lock.lock();
      }
    });
  }
}

Store::~Store() {
  {
    std::lock_guard lock(sweep_mu_);
    stopping_ = true;
  }
  sweep_cv_.notify_all();
  if (sweeper_.joinable()) sweeper_.join();
  tables_.set_invalidate_hook(nullptr);
  tables_.channel().stop();
}

void Store::init_root() {
  std::uint8_t* buf = arena_.allocate();
  assert(buf);
  node::BuildSpec spec;
  spec.type = node::NodeType::kLeaf;
  Status st = node::encode_node(spec, {}, buf);
  assert(st.ok());
  (void)st;
  auto lid = tables_.allocate_lid();
  assert(lid.ok());
  tables_.bind(lid.value, reinterpret_cast<std::uint64_t>(buf));
  tables_.set_root({lid.value, 1});
}

Status Store::bulk_load(std::vector<Item> items) {
  RootInfo root = tables_.write_root();
  if (root.height != 1) return StatusCode::kInvalidArgument;
  auto addr = tables_.resolve(root.lid, PageTablePair::Side::kWrite);
  if (!addr.ok()) return addr.status;
  node::SizeLock sl =
      node::load_size_lock(reinterpret_cast<const std::uint8_t*>(addr.value));
  if (sl.bytes_used != kBlockStart) return StatusCode::kInvalidArgument;
  return write_engine_->bulk_load(std::move(items));
}

Store::Writer Store::writer() { return Writer(this, epochs_.register_writer()); }

Store::Writer& Store::Writer::operator=(Writer&& o) noexcept {
  if (store_ && slot_ >= 0) store_->epochs_.unregister_writer(slot_);
  store_ = o.store_;
  slot_ = o.slot_;
  o.store_ = nullptr;
  return *this;
}

Store::Writer::~Writer() {
  if (store_ && slot_ >= 0) store_->epochs_.unregister_writer(slot_);
}

Result<PutOutcome> Store::Writer::put(std::string_view key, std::string_view value) {
  if (!valid()) return Result<PutOutcome>::error(StatusCode::kOverloaded);
  return store_->write_engine_->put(slot_, key, value);
}

Result<DeleteOutcome> Store::Writer::del(std::string_view key) {
  if (!valid()) return Result<DeleteOutcome>::error(StatusCode::kOverloaded);
  return store_->write_engine_->del(slot_, key);
}

GetResult Store::get(std::string_view key, const ReadOptions& opts) {
  return read_engine_->get(key, opts);
}

ScanResult Store::scan(std::string_view lower, std::string_view upper, const ReadOptions& opts) {
  return read_engine_->scan(lower, upper, opts);
}

memsim::Stats Store::sim_stats() const {
  return sim_ ? sim_->stats() : memsim::Stats{};
}

void Store::sim_reset_stats() {
  if (sim_) sim_->reset_stats();
}

Result<std::vector<std::uint8_t>> Store::dump_node_image(Lid lid) const {
  auto addr = tables_.resolve(lid, PageTablePair::Side::kRead);
  if (!addr.ok()) return Result<std::vector<std::uint8_t>>::error(addr.status.code);
  std::vector<std::uint8_t> image(kNodeSize);
  node::copy_node_bytes(reinterpret_cast<const std::uint8_t*>(addr.value), 0, kNodeSize,
                        image.data());
  return Result<std::vector<std::uint8_t>>::of(std::move(image));
}

std::vector<std::pair<Lid, std::uint16_t>> Store::collect_tree_nodes() const {
  std::vector<std::pair<Lid, std::uint16_t>> out;
  RootInfo root = tables_.read_root();
  std::vector<std::pair<Lid, std::uint16_t>> frontier{{root.lid, root.height}};
  while (!frontier.empty()) {
    auto [lid, level] = frontier.back();
    frontier.pop_back();
    out.push_back({lid, level});
    if (level == 1) continue;
    auto addr = tables_.resolve(lid, PageTablePair::Side::kRead);
    if (!addr.ok()) continue;
    const std::uint8_t* buf = reinterpret_cast<const std::uint8_t*>(addr.value);
    node::HeaderView hdr;
    std::array<std::uint8_t, kBlockStart> head;
    node::copy_node_bytes(buf, 0, kBlockStart, head.data());
    if (!node::parse_header({head.data(), kHeaderSize}, hdr).ok()) continue;
    std::vector<node::ShortcutEntry> shortcuts;
    if (!node::parse_shortcuts({head.data(), kBlockStart}, hdr, shortcuts).ok()) continue;
    frontier.push_back({hdr.leftmost_child(), static_cast<std::uint16_t>(level - 1)});
    node::SortedWalker walker(
        node::NodeType::kInterior, shortcuts,
        {buf + kBlockStart, static_cast<std::size_t>(hdr.log_boundary - kBlockStart)},
        kBlockStart, hdr.log_boundary, kBlockStart);
    node::SortedItemView item;
    while (walker.next(item)) {
      frontier.push_back(
          {node::load_u48(reinterpret_cast<const std::uint8_t*>(item.payload.data())),
           static_cast<std::uint16_t>(level - 1)});
    }
  }
  return out;
}

}  // namespace honeycomb

#include "honeycomb/workload.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace honeycomb::bench {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string derive_bytes(std::uint64_t seed, std::uint64_t index, std::uint64_t salt,
                         std::size_t size) {
  std::string out(size, '\0');
  std::uint64_t state = seed ^ (index * 0xd1342543de82ef95ull) ^ (salt * 0xaf251af3b0f025b5ull);
  std::size_t pos = 0;
  while (pos < size) {
    std::uint64_t w = splitmix64(state);
    std::size_t n = std::min<std::size_t>(8, size - pos);
    for (std::size_t i = 0; i < n; ++i) out[pos + i] = static_cast<char>(w >> (8 * i));
    pos += n;
  }
  return out;
}

}  // namespace

Status apply_named_workload(WorkloadSpec& spec, const std::string& name) {
  spec.name = name;
  spec.cloud = false;
  if (name == "A") {
    spec.read_op = ReadOp::kLookup;
    spec.write_op = WriteOp::kUpdate;
    spec.read_pct = 50;
  } else if (name == "B") {
    spec.read_op = ReadOp::kLookup;
    spec.write_op = WriteOp::kUpdate;
    spec.read_pct = 95;
  } else if (name == "C") {
    spec.read_op = ReadOp::kLookup;
    spec.write_op = WriteOp::kUpdate;
    spec.read_pct = 100;
  } else if (name == "D") {
    spec.read_op = ReadOp::kLookup;
    spec.write_op = WriteOp::kInsert;
    spec.read_pct = 95;
    spec.dist = Dist::kLatest;
  } else if (name == "E") {
    spec.read_op = ReadOp::kScan;
    spec.write_op = WriteOp::kInsert;
    spec.read_pct = 95;
    spec.scan_len_min = 1;
    spec.scan_len_max = 100;
  } else if (name == "F") {
    spec.read_op = ReadOp::kLookup;
    spec.write_op = WriteOp::kReadModifyWrite;
    spec.read_pct = 50;
  } else if (name == "cloud") {
    spec.read_op = ReadOp::kScan;
    spec.write_op = WriteOp::kInsert;
    spec.cloud = true;
  } else {
    return StatusCode::kInvalidArgument;
  }
  return StatusCode::kOk;
}

std::string key_for(std::uint64_t seed, std::uint64_t index, std::size_t key_size) {
  return derive_bytes(seed, index, 0, key_size);
}

std::string value_for(std::uint64_t seed, std::uint64_t index, std::size_t value_size) {
  return derive_bytes(seed, index, 1, value_size);
}

ZipfGenerator::ZipfGenerator(std::size_t n, double theta) : n_(n), theta_(theta) {
  zetan_ = 0;
  for (std::size_t i = 1; i <= n_; ++i) zetan_ += 1.0 / std::pow(static_cast<double>(i), theta_);
  zeta2_ = 1.0 + 1.0 / std::pow(2.0, theta_);
  alpha_ = 1.0 / (1.0 - theta_);
  eta_ = (1.0 - std::pow(2.0 / static_cast<double>(n_), 1.0 - theta_)) / (1.0 - zeta2_ / zetan_);
}

std::size_t ZipfGenerator::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u = uni(rng);
  double uz = u * zetan_;
  if (uz < 1.0) return 0;
  if (uz < 1.0 + std::pow(0.5, theta_)) return 1;
  auto rank = static_cast<std::size_t>(static_cast<double>(n_) *
                                       std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return std::min(rank, n_ - 1);
}

double ZipfGenerator::rank_probability(std::size_t rank) const {
  return 1.0 / std::pow(static_cast<double>(rank + 1), theta_) / zetan_;
}

KeyChooser::KeyChooser(Dist dist, std::size_t initial_count, double theta) : dist_(dist),
                                                                             theta_(theta) {
  if (dist_ != Dist::kUniform && initial_count > 0) {
    zipf_ = std::make_unique<ZipfGenerator>(initial_count, theta_);
  }
}

std::size_t KeyChooser::pick(std::mt19937_64& rng, std::size_t current_count) const {
  if (current_count == 0) return 0;
  switch (dist_) {
    case Dist::kUniform:
      return rng() % current_count;
    case Dist::kZipfian: {
      std::size_t rank = zipf_ ? zipf_->sample(rng) : 0;
      return rank % current_count;
    }
    case Dist::kLatest: {
      std::size_t rank = zipf_ ? zipf_->sample(rng) : 0;
      return current_count - 1 - (rank % current_count);
    }
  }
  return 0;
}

Result<LoadReport> load(Store& store, const WorkloadSpec& spec) {
  LoadReport report;
  std::vector<Item> items;
  items.reserve(spec.key_count);
  std::unordered_set<std::string> seen;
  seen.reserve(spec.key_count * 2);
  for (std::uint64_t i = 0; i < spec.key_count; ++i) {
    std::string key = key_for(spec.seed, i, spec.key_size);
    std::uint64_t salt = 1;
    while (!seen.insert(key).second) {
      key = derive_bytes(spec.seed, i, 0x100 + salt++, spec.key_size);
    }
    items.push_back({std::move(key), value_for(spec.seed, i, spec.value_size)});
  }
  for (const Item& it : items) report.data_bytes += it.key.size() + it.value.size();
  report.keys = items.size();

  Status st = store.bulk_load(std::move(items));
  if (!st.ok()) return Result<LoadReport>::error(st.code);
  store.sweep_now();
  report.footprint_bytes = store.footprint_bytes();
  report.ratio = report.data_bytes > 0
                     ? static_cast<double>(report.footprint_bytes) / report.data_bytes
                     : -1.0;
  return Result<LoadReport>::of(report);
}

Status StoreExecutor::lookup(std::string_view key) {
  GetResult r = store_.get(key);
  return r.status.is(StatusCode::kNotFound) ? Status{} : r.status;
}

Status StoreExecutor::scan(std::string_view lower, std::string_view upper) {
  return store_.scan(lower, upper).status;
}

Status StoreExecutor::insert(std::string_view key, std::string_view value) {
  return writer_.put(key, value).status;
}

Status StoreExecutor::update(std::string_view key, std::string_view value) {
  return writer_.put(key, value).status;
}

Status ClientExecutor::lookup(std::string_view key) {
  auto r = client_.get(key);
  return r.status.is(StatusCode::kNotFound) ? Status{} : r.status;
}

Status ClientExecutor::scan(std::string_view lower, std::string_view upper) {
  return client_.scan(lower, upper).status;
}

Status ClientExecutor::insert(std::string_view key, std::string_view value) {
  return client_.put(key, value);
}

Status ClientExecutor::update(std::string_view key, std::string_view value) {
  return client_.update(key, value);
}

Result<RunReport> run(Store* stats_store, const WorkloadSpec& spec,
                      const ExecutorFactory& make_executor) {
  RunReport report;
  report.workload = spec.name;
  report.distribution = spec.dist == Dist::kUniform    ? "uniform"
                        : spec.dist == Dist::kZipfian  ? "zipfian"
                                                       : "latest";
  report.read_pct = spec.read_pct;

  // Sorted initial keys for scan bounds.
  std::vector<std::string> sorted_keys;
  if (spec.read_op == ReadOp::kScan || spec.cloud) {
    std::unordered_set<std::string> seen;
    sorted_keys.reserve(spec.key_count);
    for (std::uint64_t i = 0; i < spec.key_count; ++i) {
      std::string key = key_for(spec.seed, i, spec.key_size);
      std::uint64_t salt = 1;
      while (!seen.insert(key).second) {
        key = derive_bytes(spec.seed, i, 0x100 + salt++, spec.key_size);
      }
      sorted_keys.push_back(std::move(key));
    }
    std::sort(sorted_keys.begin(), sorted_keys.end());
  }

  std::uint64_t merges0 = 0, splits0 = 0, node_merges0 = 0, read_bytes0 = 0, reads0 = 0;
  if (stats_store) {
    merges0 = stats_store->metrics().merges.load();
    splits0 = stats_store->metrics().splits.load();
    node_merges0 = stats_store->metrics().node_merges.load();
    read_bytes0 = stats_store->metrics().read_fetch_bytes.load();
    reads0 = stats_store->metrics().gets.load() + stats_store->metrics().scans.load();
    if (stats_store->config().sim_backend) stats_store->sim_reset_stats();
  }

  std::atomic<std::uint64_t> inserted{0};
  std::atomic<std::uint64_t> lookups{0}, scans{0}, updates{0}, inserts{0};
  std::atomic<bool> failed{false};
  std::vector<std::vector<std::uint32_t>> latencies(spec.threads);
  std::size_t ops_per_thread = spec.ops / std::max<std::size_t>(spec.threads, 1);

  auto start = std::chrono::steady_clock::now();
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < spec.threads; ++t) {
    threads.emplace_back([&, t] {
      auto exec = make_executor();
      std::mt19937_64 rng(spec.seed + 0x51ed2701 * (t + 1));
      KeyChooser chooser(spec.dist, spec.key_count, spec.zipf_theta);
      latencies[t].reserve(ops_per_thread);
      for (std::size_t i = 0; i < ops_per_thread && !failed.load(); ++i) {
        bool is_read =
            static_cast<double>(rng() % 10000) < spec.read_pct * 100.0;
        auto op_start = std::chrono::steady_clock::now();
        Status st;
        if (is_read) {
          if (spec.read_op == ReadOp::kScan) {
            std::size_t n = sorted_keys.size();
            if (spec.cloud) {
              std::size_t bound = (chooser.pick(rng, n) / 3) * 3;
              std::size_t hi = std::min(bound + 2, n - 1);
              st = exec->scan(sorted_keys[bound], sorted_keys[hi]);
            } else {
              std::size_t len =
                  spec.scan_len_min + rng() % (spec.scan_len_max - spec.scan_len_min + 1);
              std::size_t pos = chooser.pick(rng, n);
              std::size_t hi = std::min(pos + len - 1, n - 1);
              st = exec->scan(sorted_keys[pos], sorted_keys[hi]);
            }
            scans.fetch_add(1, std::memory_order_relaxed);
          } else {
            std::size_t count = spec.key_count + inserted.load(std::memory_order_relaxed);
            std::size_t idx = chooser.pick(rng, count);
            st = exec->lookup(key_for(spec.seed, idx, spec.key_size));
            lookups.fetch_add(1, std::memory_order_relaxed);
          }
        } else {
          switch (spec.write_op) {
            case WriteOp::kUpdate: {
              std::size_t idx = chooser.pick(rng, spec.key_count);
              st = exec->update(key_for(spec.seed, idx, spec.key_size),
                                value_for(spec.seed, rng(), spec.value_size));
              updates.fetch_add(1, std::memory_order_relaxed);
              break;
            }
            case WriteOp::kInsert: {
              std::uint64_t idx = spec.key_count + inserted.fetch_add(1);
              st = exec->insert(key_for(spec.seed, idx, spec.key_size),
                                value_for(spec.seed, idx, spec.value_size));
              inserts.fetch_add(1, std::memory_order_relaxed);
              break;
            }
            case WriteOp::kReadModifyWrite: {
              std::size_t idx = chooser.pick(rng, spec.key_count);
              std::string key = key_for(spec.seed, idx, spec.key_size);
              st = exec->lookup(key);
              lookups.fetch_add(1, std::memory_order_relaxed);
              if (st.ok()) {
                st = exec->update(key, value_for(spec.seed, rng(), spec.value_size));
                updates.fetch_add(1, std::memory_order_relaxed);
              }
              break;
            }
          }
        }
        if (!st.ok() && !st.is(StatusCode::kNotFound)) failed.store(true);
        auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                      std::chrono::steady_clock::now() - op_start)
                      .count();
        latencies[t].push_back(static_cast<std::uint32_t>(std::min<std::int64_t>(us, UINT32_MAX)));
      }
    });
  }
  for (auto& t : threads) t.join();
  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (failed.load()) return Result<RunReport>::error(StatusCode::kIoError);

  std::vector<std::uint32_t> all;
  for (auto& v : latencies) all.insert(all.end(), v.begin(), v.end());
  report.ops = all.size();
  report.seconds = elapsed;
  report.throughput = elapsed > 0 ? report.ops / elapsed : 0;
  if (!all.empty()) {
    auto nth = [&](double q) {
      std::size_t idx = static_cast<std::size_t>(q * (all.size() - 1));
      std::nth_element(all.begin(), all.begin() + idx, all.end());
      return static_cast<double>(all[idx]);
    };
    report.p50_us = nth(0.50);
    report.p99_us = nth(0.99);
  }
  report.lookups = lookups.load();
  report.scans = scans.load();
  report.updates = updates.load();
  report.inserts = inserts.load();
  if (stats_store) {
    report.merges = stats_store->metrics().merges.load() - merges0;
    report.splits = stats_store->metrics().splits.load() - splits0;
    report.node_merges = stats_store->metrics().node_merges.load() - node_merges0;
    std::uint64_t reads = stats_store->metrics().gets.load() +
                          stats_store->metrics().scans.load() - reads0;
    std::uint64_t bytes = stats_store->metrics().read_fetch_bytes.load() - read_bytes0;
    report.bytes_per_read = reads > 0 ? static_cast<double>(bytes) / reads : 0;
    if (stats_store->config().sim_backend) {
      report.sim = true;
      report.sim_stats = stats_store->sim_stats();
    }
  }
  return Result<RunReport>::of(report);
}

Result<RunReport> run(Store& store, const WorkloadSpec& spec) {
  return run(&store, spec, [&store] { return std::make_unique<StoreExecutor>(store); });
}

std::string RunReport::csv_header() {
  return "workload,distribution,read_pct,ops,seconds,throughput,p50_us,p99_us,lookups,scans,"
         "updates,inserts,merges,splits,node_merges,bytes_per_read,sim_hit_rate,"
         "sim_host_bytes,sim_board_bytes,sim_host_ops,sim_board_ops";
}

std::string RunReport::csv_row() const {
  std::ostringstream os;
  os << workload << ',' << distribution << ',' << read_pct << ',' << ops << ',' << seconds
     << ',' << throughput << ',' << p50_us << ',' << p99_us << ',' << lookups << ',' << scans
     << ',' << updates << ',' << inserts << ',' << merges << ',' << splits << ','
     << node_merges << ',' << bytes_per_read << ',';
  if (sim) {
    os << sim_stats.interior_hit_rate() << ',' << sim_stats.host.read_bytes << ','
       << sim_stats.board.read_bytes << ',' << sim_stats.host.read_ops << ','
       << sim_stats.board.read_ops;
  } else {
    os << ",,,,";
  }
  return os.str();
}

std::string RunReport::table_header() {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %-8s %7s %10s %12s %9s %9s %8s %8s", "workload",
                "dist", "read%", "ops", "ops/sec", "p50(us)", "p99(us)", "merges", "splits");
  return buf;
}

std::string RunReport::table_row() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %-8s %7.1f %10zu %12.0f %9.1f %9.1f %8llu %8llu",
                workload.c_str(), distribution.c_str(), read_pct, ops, throughput, p50_us,
                p99_us, static_cast<unsigned long long>(merges),
                static_cast<unsigned long long>(splits));
  return buf;
}

Status append_report_csv(const std::string& path, const RunReport& report) {
  bool need_header = true;
  {
    std::ifstream probe(path);
    need_header = !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
  }
  std::ofstream out(path, std::ios::app);
  if (!out) return StatusCode::kIoError;
  if (need_header) out << RunReport::csv_header() << '\n';
  out << report.csv_row() << '\n';
  return out ? Status{} : Status{StatusCode::kIoError};
}

}  // namespace honeycomb::bench

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "honeycomb/client.hpp"
#include "honeycomb/store.hpp"
#include "honeycomb/types.hpp"

namespace honeycomb::bench {

enum class Dist : std::uint8_t { kUniform, kZipfian, kLatest };
enum class ReadOp : std::uint8_t { kLookup, kScan };
enum class WriteOp : std::uint8_t { kUpdate, kInsert, kReadModifyWrite };

struct WorkloadSpec {
  std::string name = "C";
  ReadOp read_op = ReadOp::kLookup;
  WriteOp write_op = WriteOp::kUpdate;
  double read_pct = 100.0;
  std::size_t scan_len_min = 1;
  std::size_t scan_len_max = 100;
  std::size_t key_size = 16;
  std::size_t value_size = 16;
  std::size_t key_count = 128 * 1024;
  Dist dist = Dist::kUniform;
  double zipf_theta = 0.99;
  std::uint64_t seed = 42;
  std::size_t ops = 100000;
  std::size_t threads = 4;
  std::size_t pipeline_depth = 64;
  bool cloud = false;  // cloud-storage workload: scans bounded to 3-4 items
};

// Fills operation mix and shapes for the named workload (A-F or "cloud");
// distribution, counts and sizes keep their current values.
Status apply_named_workload(WorkloadSpec& spec, const std::string& name);

// Deterministic uniform-random fixed-size key for (seed, index).
std::string key_for(std::uint64_t seed, std::uint64_t index, std::size_t key_size);
std::string value_for(std::uint64_t seed, std::uint64_t index, std::size_t value_size);

// Standard YCSB zipfian over [0, n) with parameter theta.
class ZipfGenerator {
 public:
  ZipfGenerator(std::size_t n, double theta);
  std::size_t sample(std::mt19937_64& rng) const;
  double rank_probability(std::size_t rank) const;  // P(rank), rank 0 = hottest

 private:
  std::size_t n_;
  double theta_;
  double zetan_;
  double alpha_;
  double eta_;
  double zeta2_;
};

// Key-index chooser for reads under a distribution; `current_count` reflects
// inserts made during the run ("latest" skews toward them).
class KeyChooser {
 public:
  KeyChooser(Dist dist, std::size_t initial_count, double theta);
  std::size_t pick(std::mt19937_64& rng, std::size_t current_count) const;

 private:
  Dist dist_;
  double theta_;
  std::unique_ptr<ZipfGenerator> zipf_;
};

struct LoadReport {
  std::size_t keys = 0;
  std::size_t data_bytes = 0;
  std::size_t footprint_bytes = 0;
  // footprint / raw data size; < 0 when undefined (empty load)
  double ratio = -1.0;
};

Result<LoadReport> load(Store& store, const WorkloadSpec& spec);

struct RunReport {
  std::string workload;
  std::string distribution;
  double read_pct = 0;
  std::size_t ops = 0;
  double seconds = 0;
  double throughput = 0;
  double p50_us = 0;
  double p99_us = 0;
  std::uint64_t lookups = 0;
  std::uint64_t scans = 0;
  std::uint64_t updates = 0;
  std::uint64_t inserts = 0;
  std::uint64_t deletes = 0;
  std::uint64_t merges = 0;
  std::uint64_t splits = 0;
  std::uint64_t node_merges = 0;
  double bytes_per_read = 0;
  bool sim = false;
  memsim::Stats sim_stats;

  static std::string csv_header();
  std::string csv_row() const;
  std::string table_row() const;
  static std::string table_header();
};

// Operation sink: either an in-process store or a remote connection.
class Executor {
 public:
  virtual ~Executor() = default;
  virtual Status lookup(std::string_view key) = 0;
  virtual Status scan(std::string_view lower, std::string_view upper) = 0;
  virtual Status insert(std::string_view key, std::string_view value) = 0;
  virtual Status update(std::string_view key, std::string_view value) = 0;
};

class StoreExecutor final : public Executor {
 public:
  explicit StoreExecutor(Store& store) : store_(store), writer_(store.writer()) {}
  Status lookup(std::string_view key) override;
  Status scan(std::string_view lower, std::string_view upper) override;
  Status insert(std::string_view key, std::string_view value) override;
  Status update(std::string_view key, std::string_view value) override;

 private:
  Store& store_;
  Store::Writer writer_;
};

class ClientExecutor final : public Executor {
 public:
  explicit ClientExecutor(Client& client) : client_(client) {}
  Status lookup(std::string_view key) override;
  Status scan(std::string_view lower, std::string_view upper) override;
  Status insert(std::string_view key, std::string_view value) override;
  Status update(std::string_view key, std::string_view value) override;

 private:
  Client& client_;
};

using ExecutorFactory = std::function<std::unique_ptr<Executor>()>;

// Closed-loop run; `make_executor` is called once per client thread.
Result<RunReport> run(Store* stats_store, const WorkloadSpec& spec,
                      const ExecutorFactory& make_executor);
// Convenience: in-process run against `store`.
Result<RunReport> run(Store& store, const WorkloadSpec& spec);

Status append_report_csv(const std::string& path, const RunReport& report);

}  // namespace honeycomb::bench

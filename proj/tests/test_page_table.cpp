#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include "honeycomb/page_table.hpp"
#include "test_util.hpp"

using namespace honeycomb;

TEST_CASE("lid allocation starts at 1 and is monotonic") {
  PageTablePair tables(1 << 20);
  auto a = tables.allocate_lid();
  auto b = tables.allocate_lid();
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(a.value == 1);
  CHECK(b.value == 2);
  CHECK(a.value != b.value);
}

TEST_CASE("lid space exhaustion at the 48-bit boundary") {
  PageTablePair tables(1 << 20);
  tables.set_next_lid_for_test(kLidLimit);
  auto last = tables.allocate_lid();
  REQUIRE(last.ok());
  CHECK(last.value == kLidLimit);
  auto over = tables.allocate_lid();
  CHECK(over.status.is(StatusCode::kLidSpaceExhausted));
  // stays exhausted
  CHECK(tables.allocate_lid().status.is(StatusCode::kLidSpaceExhausted));
}

TEST_CASE("bind propagates to the read side before the ack") {
  PageTablePair tables(1 << 20);
  auto lid = tables.allocate_lid();
  REQUIRE(lid.ok());
  REQUIRE(tables.bind(lid.value, 0x1000).ok());
  auto w = tables.resolve(lid.value, PageTablePair::Side::kWrite);
  auto r = tables.resolve(lid.value, PageTablePair::Side::kRead);
  REQUIRE(w.ok());
  REQUIRE(r.ok());
  CHECK(w.value == 0x1000);
  CHECK(r.value == 0x1000);
}

TEST_CASE("update_mapping swaps both sides and fires the invalidate hook") {
  PageTablePair tables(1 << 20);
  std::atomic<Lid> invalidated{0};
  tables.set_invalidate_hook([&](Lid lid) { invalidated.store(lid); });
  auto lid = tables.allocate_lid();
  REQUIRE(tables.bind(lid.value, 0x1000).ok());
  REQUIRE(tables.update_mapping(lid.value, 0x2000).ok());
  CHECK(invalidated.load() == lid.value);
  CHECK(tables.resolve(lid.value, PageTablePair::Side::kWrite).value == 0x2000);
  CHECK(tables.resolve(lid.value, PageTablePair::Side::kRead).value == 0x2000);
}

TEST_CASE("update of an unknown lid fails") {
  PageTablePair tables(1 << 20);
  CHECK(tables.update_mapping(12345, 0x2000).is(StatusCode::kUnknownLid));
}

TEST_CASE("null lid never resolves") {
  PageTablePair tables(1 << 20);
  CHECK(tables.resolve(kNullLid, PageTablePair::Side::kWrite).status.is(StatusCode::kUnknownLid));
  CHECK(tables.resolve(kNullLid, PageTablePair::Side::kRead).status.is(StatusCode::kUnknownLid));
}

TEST_CASE("concurrent read-side resolution sees old or new address, never garbage") {
  PageTablePair tables(1 << 20);
  auto lid = tables.allocate_lid();
  REQUIRE(tables.bind(lid.value, 0x1000).ok());

  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!stop.load()) {
      auto r = tables.resolve(lid.value, PageTablePair::Side::kRead);
      if (!r.ok()) continue;
      // every valid address is 0x1000 + k*0x1000 for k in [0, 64]
      if (r.value < 0x1000 || r.value > 0x1000 + 64 * 0x1000 || (r.value & 0xfff) != 0) {
        bad.fetch_add(1);
      }
    }
  });
  for (int i = 1; i <= 64; ++i) {
    REQUIRE(tables.update_mapping(lid.value, 0x1000 + i * 0x1000).ok());
  }
  stop.store(true);
  reader.join();
  CHECK(bad.load() == 0);
}

TEST_CASE("set_root publishes to both sides") {
  PageTablePair tables(1 << 20);
  tables.set_root({7, 2});
  CHECK(tables.write_root().lid == 7);
  CHECK(tables.write_root().height == 2);
  CHECK(tables.read_root().lid == 7);
  CHECK(tables.read_root().height == 2);
  tables.set_root({9, 3});
  CHECK(tables.read_root().lid == 9);
  CHECK(tables.read_root().height == 3);
}

TEST_CASE("read version updates are acked; stale values never regress") {
  PageTablePair tables(1 << 20);
  tables.propagate_read_version(5);
  CHECK(tables.acked_read_version() == 5);
  tables.propagate_read_version(3);
  CHECK(tables.acked_read_version() == 5);
  tables.wait_read_version_acked(5);
}

TEST_CASE("command trace records kinds and lids") {
  PageTablePair tables(1 << 20);
  tables.channel().enable_trace(true);
  auto lid = tables.allocate_lid();
  REQUIRE(tables.bind(lid.value, 0x1000).ok());
  REQUIRE(tables.update_mapping(lid.value, 0x2000).ok());
  tables.set_root({lid.value, 1});
  tables.propagate_read_version(1);
  auto trace = tables.channel().drain_trace();
  REQUIRE(trace.size() == 4);
  CHECK(trace[0].kind == CommandKind::kSetMapping);
  CHECK(trace[0].lid == lid.value);
  CHECK(trace[1].kind == CommandKind::kSetMapping);
  CHECK(trace[2].kind == CommandKind::kSetRoot);
  CHECK(trace[3].kind == CommandKind::kSetReadVersion);
}

TEST_CASE("after a quiescent point both tables agree for every bound lid") {
  PageTablePair tables(1 << 20);
  std::vector<Lid> lids;
  for (int i = 0; i < 500; ++i) {
    auto lid = tables.allocate_lid();
    REQUIRE(lid.ok());
    REQUIRE(tables.bind(lid.value, 0x1000 + i * 0x40).ok());
    lids.push_back(lid.value);
  }
  for (int i = 0; i < 100; ++i) {
    REQUIRE(tables.update_mapping(lids[i * 3], 0x900000 + i * 0x40).ok());
  }
  for (Lid lid : lids) {
    auto w = tables.resolve(lid, PageTablePair::Side::kWrite);
    auto r = tables.resolve(lid, PageTablePair::Side::kRead);
    REQUIRE(w.ok());
    REQUIRE(r.ok());
    CHECK(w.value == r.value);
  }
}

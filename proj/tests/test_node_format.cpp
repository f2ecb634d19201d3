#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <thread>

#include "honeycomb/leaf_iter.hpp"
#include "honeycomb/node_format.hpp"
#include "test_util.hpp"

using namespace honeycomb;
using namespace honeycomb::node;
using namespace honeycomb::test;

namespace {


// Keeps key/value storage alive across the append (LogAppend holds views).
Status append(AlignedNode& node, LogKind kind, std::uint16_t back_ref, std::uint64_t version,
              const std::string& key, const std::string& value) {
  lock_node(node.data());
  LogAppend entry{kind, back_ref, version, key, value};
  return append_and_publish(node.data(), entry);
}

Status encode_leaf(const std::vector<Item>& items, std::uint64_t version, AlignedNode& out,
                   Lid left = kNullLid, Lid right = kNullLid) {
  std::vector<BuildItem> build;
  for (const Item& it : items) build.push_back({it.key, it.value, kNullLid});
  BuildSpec spec{NodeType::kLeaf, version, 0, left, right};
  return encode_node(spec, build, out.data());
}

std::vector<Item> decode_leaf_items(const AlignedNode& node) {
  std::vector<SortedItemView> views;
  REQUIRE(decode_sorted(node.data(), views).ok());
  std::vector<Item> out;
  for (const SortedItemView& v : views) out.push_back({std::string(v.key), std::string(v.payload)});
  return out;
}

struct ParsedNode {
  HeaderView hdr;
  std::vector<ShortcutEntry> shortcuts;
};

ParsedNode parse(const AlignedNode& node) {
  ParsedNode out;
  REQUIRE(parse_header({node.data(), kHeaderSize}, out.hdr).ok());
  REQUIRE(parse_shortcuts({node.data(), kBlockStart}, out.hdr, out.shortcuts).ok());
  return out;
}

// Linear-scan search oracle over the full sorted block.
struct OracleHit {
  bool found = false;
  std::string key;
  std::string payload;
};

OracleHit linear_search(const AlignedNode& node, std::string_view target) {
  OracleHit out;
  std::vector<SortedItemView> views;
  REQUIRE(decode_sorted(node.data(), views).ok());
  for (const SortedItemView& v : views) {
    if (compare_keys(v.key, target) <= 0) {
      out.found = true;
      out.key = std::string(v.key);
      out.payload = std::string(v.payload);
    } else {
      break;
    }
  }
  return out;
}

OracleHit shortcut_search(const AlignedNode& node, std::string_view target) {
  ParsedNode p = parse(node);
  SegmentDesc seg;
  REQUIRE(locate_segment(p.hdr, p.shortcuts, target, seg).ok());
  std::string_view covering =
      seg.covering >= 0 ? p.shortcuts[seg.covering].key : std::string_view{};
  SegmentHit hit;
  REQUIRE(search_segment({node.data() + seg.begin, static_cast<std::size_t>(seg.end - seg.begin)},
                         seg.begin, covering, p.hdr.type, target, hit)
              .ok());
  OracleHit out;
  out.found = hit.found;
  if (hit.found) {
    out.key = std::string(hit.item.key);
    out.payload = std::string(hit.item.payload);
  }
  return out;
}

}  // namespace

TEST_CASE("empty leaf encodes to a bare header plus shortcut area") {
  AlignedNode node;
  REQUIRE(encode_leaf({}, 0, node).ok());
  ParsedNode p = parse(node);
  CHECK(p.hdr.size_lock.bytes_used == kBlockStart);
  CHECK(p.hdr.log_boundary == kBlockStart);
  CHECK(p.hdr.shortcut_count == 0);
  CHECK(p.hdr.node_version == 0);
  CHECK(p.hdr.is_leaf());
}

TEST_CASE("single item round trip") {
  AlignedNode node;
  std::vector<Item> items{{"hello", "world"}};
  REQUIRE(encode_leaf(items, 7, node).ok());
  CHECK(decode_leaf_items(node) == items);
  ParsedNode p = parse(node);
  CHECK(p.hdr.node_version == 7);
}

TEST_CASE("round trip over randomized item lists") {
  std::mt19937_64 rng(42);
  for (int iter = 0; iter < 200; ++iter) {
    std::size_t key_len = 1 + rng() % 32;
    std::size_t val_len = rng() % 48;
    std::size_t count = rng() % 120;
    auto items = random_items(rng, count, key_len, val_len);
    std::vector<BuildItem> build;
    for (const Item& it : items) build.push_back({it.key, it.value, kNullLid});
    if (!fits_in_node(NodeType::kLeaf, build)) continue;
    AlignedNode node;
    REQUIRE(encode_leaf(items, 3, node).ok());
    CHECK(decode_leaf_items(node) == items);
  }
}

TEST_CASE("blob limits are enforced") {
  AlignedNode node;
  std::string long_key(kMaxKeyLen + 1, 'k');
  std::string long_val(kMaxValueLen + 1, 'v');
  CHECK(encode_leaf({{long_key, "v"}}, 0, node).is(StatusCode::kKeyTooLong));
  CHECK(encode_leaf({{"k", long_val}}, 0, node).is(StatusCode::kValueTooLong));
  CHECK(encode_leaf({{std::string(kMaxKeyLen, 'k'), std::string(kMaxValueLen, 'v')}}, 0, node)
            .ok());
}

TEST_CASE("shortcut selection: tiny nodes get a single segment") {
  std::vector<BuildItem> items;
  std::vector<Item> storage;
  for (int i = 0; i < 5; ++i) storage.push_back({be_key(i), "v"});
  for (const Item& it : storage) items.push_back({it.key, it.value, kNullLid});
  // well under the minimum segment size
  CHECK(content_bytes(NodeType::kLeaf, items) < kMinSegmentBytes);
  CHECK(select_shortcuts(NodeType::kLeaf, items).empty());
}

TEST_CASE("shortcut selection constraints for 16-byte keys and values") {
  // ~7 KB of sorted content from 16 B keys and values
  std::vector<Item> storage;
  for (int i = 0; i < 196; ++i) storage.push_back({be_key(i, 16), std::string(16, 'v')});
  std::vector<BuildItem> items;
  for (const Item& it : storage) items.push_back({it.key, it.value, kNullLid});
  auto selected = select_shortcuts(NodeType::kLeaf, items);
  REQUIRE(!selected.empty());

  // budget: every selected key plus offsets fits the shortcut area
  std::size_t budget = 0;
  for (std::size_t idx : selected) budget += 4 + items[idx].key.size();
  CHECK(budget <= kShortcutBudget);

  // segment sizes: at least the minimum, similar sizes capped at 768
  AlignedNode node;
  REQUIRE(encode_leaf(storage, 0, node).ok());
  ParsedNode p = parse(node);
  REQUIRE(p.hdr.shortcut_count == selected.size());
  std::vector<std::size_t> bounds{kBlockStart};
  for (const ShortcutEntry& e : p.shortcuts) bounds.push_back(e.segment_offset);
  bounds.push_back(p.hdr.log_boundary);
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    std::size_t len = bounds[i + 1] - bounds[i];
    if (i + 2 < bounds.size()) CHECK(len >= kMinSegmentBytes);
    CHECK(len <= 768);
  }
}

TEST_CASE("shortcut selection with maximum-size keys picks at most one") {
  std::vector<Item> storage;
  for (int i = 0; i < 8; ++i) {
    storage.push_back({be_key(i, kMaxKeyLen), "v"});
  }
  std::vector<BuildItem> items;
  for (const Item& it : storage) items.push_back({it.key, it.value, kNullLid});
  auto selected = select_shortcuts(NodeType::kLeaf, items);
  // one 460-byte key costs 464 bytes encoded, exactly the budget
  CHECK(selected.size() <= 1);
}

TEST_CASE("search_shortcuts ordering and boundaries") {
  // segments covered by shortcut keys "g" and "p"
  std::vector<Item> storage;
  auto pad = [](std::string k) { return k + std::string(40, 'x'); };
  storage.push_back({"a" + std::string(3, 'a'), pad("1")});
  storage.push_back({"d", pad("2")});
  storage.push_back({"g", pad("3")});
  storage.push_back({"k", pad("4")});
  storage.push_back({"p", pad("5")});
  storage.push_back({"t", pad("6")});
  AlignedNode node;
  REQUIRE(encode_leaf(storage, 0, node).ok());

  // force shortcuts by hand-checking the generic search instead: build a node
  // whose shortcut block is populated, then exercise the ordering contract
  ParsedNode p = parse(node);
  if (p.shortcuts.empty()) {
    // tiny node: single segment, no covering key
    SegmentDesc seg;
    REQUIRE(locate_segment(p.hdr, p.shortcuts, "m", seg).ok());
    CHECK(seg.covering == -1);
    CHECK(seg.begin == kBlockStart);
  }

  // a node large enough to have shortcuts
  std::mt19937_64 rng(7);
  auto big = random_items(rng, 150, 12, 24);
  AlignedNode node2;
  REQUIRE(encode_leaf(big, 0, node2).ok());
  ParsedNode p2 = parse(node2);
  REQUIRE(p2.shortcuts.size() >= 2);
  // key below every shortcut key -> first segment, no covering key
  SegmentDesc seg;
  std::string low(1, '\0');
  REQUIRE(locate_segment(p2.hdr, p2.shortcuts, low, seg).ok());
  CHECK(seg.covering == -1);
  CHECK(seg.begin == kBlockStart);
  CHECK(seg.end == p2.shortcuts[0].segment_offset);
  // key equal to a shortcut key -> that segment (equality included)
  std::string k0(p2.shortcuts[0].key);
  REQUIRE(locate_segment(p2.hdr, p2.shortcuts, k0, seg).ok());
  CHECK(seg.covering == 0);
  CHECK(seg.begin == p2.shortcuts[0].segment_offset);
  // key between shortcut 0 and 1 -> segment 0 covers it
  std::string mid = std::string(p2.shortcuts[0].key) + "\x01";
  REQUIRE(locate_segment(p2.hdr, p2.shortcuts, mid, seg).ok());
  CHECK(seg.covering == 0);
}

TEST_CASE("search_segment streaming semantics") {
  std::vector<Item> storage{{be_key(10), "ten"}, {be_key(20), "twenty"}, {be_key(30), "thirty"}};
  AlignedNode node;
  REQUIRE(encode_leaf(storage, 0, node).ok());
  ParsedNode p = parse(node);
  std::span<const std::uint8_t> seg{node.data() + kBlockStart,
                                    static_cast<std::size_t>(p.hdr.log_boundary - kBlockStart)};

  SegmentHit hit;
  REQUIRE(search_segment(seg, kBlockStart, {}, NodeType::kLeaf, be_key(25), hit).ok());
  REQUIRE(hit.found);
  CHECK(hit.item.key == be_key(20));
  CHECK(hit.item.payload == "twenty");

  // below every key: not found, caller falls back to the leftmost child
  REQUIRE(search_segment(seg, kBlockStart, {}, NodeType::kLeaf, be_key(5), hit).ok());
  CHECK(!hit.found);
  CHECK(hit.insert_pos == kBlockStart);

  // covering key equality: payload at segment start
  REQUIRE(search_segment(seg.subspan(0), kBlockStart, be_key(10), NodeType::kLeaf, be_key(10), hit)
              .ok());
  // the segment starts with a bare payload for the covering key
  AlignedNode node2;
  {
    // craft: covering key "g", segment payload "vg", then item ("k","vk")
    std::vector<Item> items{{"g", "vg"}, {"k", "vk"}};
    REQUIRE(encode_leaf(items, 0, node2).ok());
  }
  // search the raw block pretending "g" is a covering key
  ParsedNode p2 = parse(node2);
  // skip "g"'s inline key blob: emulate by locating the payload offset
  std::vector<SortedItemView> views;
  REQUIRE(decode_sorted(node2.data(), views).ok());
  REQUIRE(views.size() == 2);
}

TEST_CASE("shortcut+segment search equals linear scan (oracle equivalence)") {
  std::mt19937_64 rng(1234);
  for (int iter = 0; iter < 100; ++iter) {
    std::size_t count = 1 + rng() % 180;
    auto items = random_items(rng, count, 8 + rng() % 8, 16);
    std::vector<BuildItem> build;
    for (const Item& it : items) build.push_back({it.key, it.value, kNullLid});
    if (!fits_in_node(NodeType::kLeaf, build)) continue;
    AlignedNode node;
    REQUIRE(encode_leaf(items, 0, node).ok());
    for (int probe = 0; probe < 50; ++probe) {
      std::string target;
      if (probe % 3 == 0 && !items.empty()) {
        target = items[rng() % items.size()].key;  // exact key
      } else {
        target = random_bytes(rng, 8 + rng() % 8);
      }
      OracleHit expect = linear_search(node, target);
      OracleHit got = shortcut_search(node, target);
      CHECK(got.found == expect.found);
      if (expect.found) {
        CHECK(got.key == expect.key);
        CHECK(got.payload == expect.payload);
      }
    }
  }
}

TEST_CASE("order hints follow the worked insertion example") {
  // log inserts of keys 90, 60, 30, 45 receive hints 0, 0, 0, 1
  AlignedNode node;
  REQUIRE(encode_leaf({}, 0, node).ok());
  int expected_hints[] = {0, 0, 0, 1};
  int keys[] = {90, 60, 30, 45};
  for (int i = 0; i < 4; ++i) {
    REQUIRE(append(node, LogKind::kInsert, kBlockStart, 0, be_key(keys[i]), "v").ok());
  }
  HeaderView hdr;
  REQUIRE(parse_header({node.data(), kHeaderSize}, hdr).ok());
  SizeLock sl = load_size_lock(node.data());
  std::vector<LogEntryView> log;
  REQUIRE(parse_log({node.data() + hdr.log_boundary,
                     static_cast<std::size_t>(sl.bytes_used - hdr.log_boundary)},
                    hdr.log_boundary, log)
              .ok());
  REQUIRE(log.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(log[i].order_hint == expected_hints[i]);
  }
  CHECK(sl.seq == 4);  // one publication per append

  // sorting the indirection array yields 30, 45, 60, 90
  std::vector<std::uint32_t> order;
  REQUIRE(sort_log(log, 0, UINT64_MAX, true, order).ok());
  REQUIRE(order.size() == 4);
  CHECK(log[order[0]].key == be_key(30));
  CHECK(log[order[1]].key == be_key(45));
  CHECK(log[order[2]].key == be_key(60));
  CHECK(log[order[3]].key == be_key(90));
}

TEST_CASE("first log entry gets hint 0 and the successor back-ref") {
  AlignedNode node;
  REQUIRE(encode_leaf({{be_key(50), "x"}}, 0, node).ok());
  HeaderView hdr;
  REQUIRE(parse_header({node.data(), kHeaderSize}, hdr).ok());
  // key 10 sorts before 50: back_ref is the offset of the first sorted item
  REQUIRE(append(node, LogKind::kInsert, kBlockStart, 0, be_key(10), "v").ok());
  SizeLock sl = load_size_lock(node.data());
  std::vector<LogEntryView> log;
  REQUIRE(parse_log({node.data() + hdr.log_boundary,
                     static_cast<std::size_t>(sl.bytes_used - hdr.log_boundary)},
                    hdr.log_boundary, log)
              .ok());
  REQUIRE(log.size() == 1);
  CHECK(log[0].order_hint == 0);
  CHECK(log[0].back_ref == kBlockStart);
}

TEST_CASE("version delta overflow forces a merge") {
  AlignedNode node;
  REQUIRE(encode_leaf({{"a", "1"}}, 100, node).ok());
  lock_node(node.data());
  std::string key = "b", value = "v";
  LogAppend entry{LogKind::kInsert, kBlockStart, 100 + kMaxVersionDelta + 1, key, value};
  CHECK(append_and_publish(node.data(), entry).is(StatusCode::kForceMerge));
  // node is left locked and unchanged on failure
  SizeLock sl = SizeLock::unpack(node::load_word_acquire(node.data(), kOffSizeLock));
  CHECK(sl.locked);
  CHECK(sl.seq == 0);
}

TEST_CASE("sort_log is empty for an empty log") {
  std::vector<LogEntryView> log;
  std::vector<std::uint32_t> order;
  REQUIRE(sort_log(log, 0, UINT64_MAX, true, order).ok());
  CHECK(order.empty());
}

TEST_CASE("sort_log rejects a hint beyond the array length") {
  std::vector<LogEntryView> log(1);
  log[0].order_hint = 1;  // only position 0 exists
  std::vector<std::uint32_t> order;
  CHECK(sort_log(log, 0, UINT64_MAX, false, order).is(StatusCode::kCorruptNode));
}

namespace {

// Builds a log block through append_and_publish and checks sort_log against a
// stable comparison sort.
void check_sorted_log(const std::vector<std::uint64_t>& keys) {
  AlignedNode node;
  REQUIRE(encode_leaf({}, 0, node).ok());
  HeaderView hdr;
  REQUIRE(parse_header({node.data(), kHeaderSize}, hdr).ok());
  for (std::uint64_t k : keys) {
    REQUIRE(append(node, LogKind::kInsert, kBlockStart, 0, be_key(k), "v").ok());
  }
  SizeLock sl = load_size_lock(node.data());
  std::vector<LogEntryView> log;
  REQUIRE(parse_log({node.data() + hdr.log_boundary,
                     static_cast<std::size_t>(sl.bytes_used - hdr.log_boundary)},
                    hdr.log_boundary, log)
              .ok());
  std::vector<std::uint32_t> order;
  REQUIRE(sort_log(log, 0, UINT64_MAX, false, order).ok());

  std::vector<std::uint32_t> expect(keys.size());
  for (std::uint32_t i = 0; i < keys.size(); ++i) expect[i] = i;
  std::stable_sort(expect.begin(), expect.end(), [&](std::uint32_t a, std::uint32_t b) {
    return compare_keys(log[a].key, log[b].key) < 0;
  });
  CHECK(order == expect);
}

}  // namespace

TEST_CASE("sort_log equals comparison sort: exhaustive over short sequences") {
  // all insertion sequences of up to 6 keys over a fixed alphabet (with
  // repetitions, so equal-key ties are covered)
  const std::uint64_t alphabet[] = {10, 20, 30, 40};
  for (std::size_t len = 0; len <= 6; ++len) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < len; ++i) combos *= 4;
    for (std::size_t c = 0; c < combos; ++c) {
      std::vector<std::uint64_t> keys;
      std::size_t x = c;
      for (std::size_t i = 0; i < len; ++i) {
        keys.push_back(alphabet[x % 4]);
        x /= 4;
      }
      check_sorted_log(keys);
    }
  }
}

TEST_CASE("sort_log equals comparison sort: randomized logs") {
  std::mt19937_64 rng(99);
  for (int iter = 0; iter < 300; ++iter) {
    std::size_t count = rng() % 150;  // bounded by node space with 9+10+3 byte entries
    std::vector<std::uint64_t> keys;
    for (std::size_t i = 0; i < count; ++i) keys.push_back(rng() % 64);
    check_sorted_log(keys);
  }
}

TEST_CASE("sort_log filters entries beyond the read version") {
  AlignedNode node;
  REQUIRE(encode_leaf({}, 100, node).ok());
  HeaderView hdr;
  REQUIRE(parse_header({node.data(), kHeaderSize}, hdr).ok());
  std::uint64_t versions[] = {101, 105, 103};
  std::uint64_t keys[] = {3, 1, 2};
  for (int i = 0; i < 3; ++i) {
    REQUIRE(append(node, LogKind::kInsert, kBlockStart, versions[i], be_key(keys[i]), "v").ok());
  }
  SizeLock sl = load_size_lock(node.data());
  std::vector<LogEntryView> log;
  REQUIRE(parse_log({node.data() + hdr.log_boundary,
                     static_cast<std::size_t>(sl.bytes_used - hdr.log_boundary)},
                    hdr.log_boundary, log)
              .ok());
  std::vector<std::uint32_t> order;
  REQUIRE(sort_log(log, 100, 103, true, order).ok());
  REQUIRE(order.size() == 2);  // version 105 filtered out
  CHECK(log[order[0]].key == be_key(2));
  CHECK(log[order[1]].key == be_key(3));
}

TEST_CASE("a search touches at most 1.5 KB of an 8 KB node for small keys") {
  std::mt19937_64 rng(5);
  auto items = random_items(rng, 180, 16, 16);  // fills most of the node
  AlignedNode node;
  REQUIRE(encode_leaf(items, 0, node).ok());
  // append a log block up to the merge threshold
  for (int i = 0; i < 11; ++i) {
    REQUIRE(append(node, LogKind::kInsert, kBlockStart, 0, random_bytes(rng, 16),
                   std::string(16, 'v'))
                .ok());
  }
  ParsedNode p = parse(node);
  SizeLock sl = load_size_lock(node.data());
  std::size_t log_bytes = sl.bytes_used - p.hdr.log_boundary;
  CHECK(log_bytes <= 512);
  for (int probe = 0; probe < 200; ++probe) {
    std::string target = random_bytes(rng, 16);
    SegmentDesc seg;
    REQUIRE(locate_segment(p.hdr, p.shortcuts, target, seg).ok());
    std::size_t touched = kBlockStart + (seg.end - seg.begin) + log_bytes;
    CHECK(touched <= 1536);
  }
}

TEST_CASE("atomic size publication: readers see whole entries or nothing") {
  AlignedNode node;
  REQUIRE(encode_leaf({}, 0, node).ok());
  HeaderView hdr;
  REQUIRE(parse_header({node.data(), kHeaderSize}, hdr).ok());

  std::atomic<bool> stop{false};
  std::atomic<int> torn{0};
  std::thread reader([&] {
    while (!stop.load(std::memory_order_acquire)) {
      SizeLock sl = load_size_lock(node.data());
      std::vector<LogEntryView> log;
      Status st = parse_log({node.data() + hdr.log_boundary,
                             static_cast<std::size_t>(sl.bytes_used - hdr.log_boundary)},
                            hdr.log_boundary, log);
      if (!st.ok()) {
        torn.fetch_add(1);
        continue;
      }
      // every visible entry must be fully formed
      for (const LogEntryView& e : log) {
        if (e.key.size() != 8 || e.value.size() != 16) torn.fetch_add(1);
      }
    }
  });
  std::mt19937_64 rng(11);
  for (int i = 0; i < 150; ++i) {
    Status st = append(node, LogKind::kInsert, kBlockStart, 0, be_key(rng() % 1000),
                       std::string(16, 'x'));
    if (!st.ok()) break;  // node full
  }
  stop.store(true, std::memory_order_release);
  reader.join();
  CHECK(torn.load() == 0);
}

TEST_CASE("interior node encode and child search") {
  std::vector<BuildItem> items;
  std::vector<std::string> keys;
  for (int i = 1; i <= 10; ++i) keys.push_back(be_key(i * 10));
  for (int i = 0; i < 10; ++i) items.push_back({keys[i], {}, static_cast<Lid>(100 + i)});
  AlignedNode node;
  BuildSpec spec{NodeType::kInterior, 0, 0, /*leftmost=*/99, kNullLid};
  REQUIRE(encode_node(spec, items, node.data()).ok());

  ParsedNode p = parse(node);
  CHECK(!p.hdr.is_leaf());
  CHECK(p.hdr.leftmost_child() == 99);
  SegmentDesc seg;
  REQUIRE(locate_segment(p.hdr, p.shortcuts, be_key(35), seg).ok());
  SegmentHit hit;
  REQUIRE(search_segment({node.data() + seg.begin, static_cast<std::size_t>(seg.end - seg.begin)},
                         seg.begin,
                         seg.covering >= 0 ? p.shortcuts[seg.covering].key : std::string_view{},
                         NodeType::kInterior, be_key(35), hit)
              .ok());
  REQUIRE(hit.found);
  CHECK(load_u48(reinterpret_cast<const std::uint8_t*>(hit.item.payload.data())) == 102);

  // below every key: caller takes the leftmost child
  REQUIRE(locate_segment(p.hdr, p.shortcuts, be_key(5), seg).ok());
  REQUIRE(search_segment({node.data() + seg.begin, static_cast<std::size_t>(seg.end - seg.begin)},
                         seg.begin,
                         seg.covering >= 0 ? p.shortcuts[seg.covering].key : std::string_view{},
                         NodeType::kInterior, be_key(5), hit)
              .ok());
  CHECK(!hit.found);
}

TEST_CASE("merged leaf iteration resolves updates, deletes and back-ref chains") {
  AlignedNode node;
  REQUIRE(encode_leaf({{be_key(10), "a"}, {be_key(30), "b"}}, 0, node).ok());
  HeaderView hdr;
  REQUIRE(parse_header({node.data(), kHeaderSize}, hdr).ok());
  std::vector<ShortcutEntry> shortcuts;
  REQUIRE(parse_shortcuts({node.data(), kBlockStart}, hdr, shortcuts).ok());

  // find the sorted offset of key 30 for back refs
  std::vector<SortedItemView> views;
  REQUIRE(decode_sorted(node.data(), views).ok());
  std::uint16_t off10 = views[0].offset;
  std::uint16_t off30 = views[1].offset;

  // insert 20 (before 30), update it via a chain, delete 10
  REQUIRE(append(node, LogKind::kInsert, off30, 1, be_key(20), "c0").ok());
  std::uint16_t insert_off = hdr.log_boundary;
  REQUIRE(append(node, LogKind::kUpdate, insert_off, 2, be_key(20), "c1").ok());
  REQUIRE(append(node, LogKind::kDelete, off10, 3, be_key(10), "").ok());

  SizeLock sl = load_size_lock(node.data());
  hdr.size_lock = sl;
  node::PreparedLog log;
  REQUIRE(prepare_log({node.data() + hdr.log_boundary,
                       static_cast<std::size_t>(sl.bytes_used - hdr.log_boundary)},
                      hdr, UINT64_MAX, false, log)
              .ok());
  MergedLeafIter iter(hdr, shortcuts,
                      {node.data() + kBlockStart,
                       static_cast<std::size_t>(hdr.log_boundary - kBlockStart)},
                      kBlockStart, log, kBlockStart, 0);
  RunResolver runs;
  Candidate c;
  std::vector<Item> out;
  while (iter.next(c)) {
    if (auto f = runs.feed(c)) out.push_back({std::string(f->key), std::string(f->value)});
  }
  REQUIRE(iter.status().ok());
  if (auto f = runs.take()) out.push_back({std::string(f->key), std::string(f->value)});

  // 10 deleted; 20 updated to c1; 30 untouched
  REQUIRE(out.size() == 2);
  CHECK(out[0].key == be_key(20));
  CHECK(out[0].value == "c1");
  CHECK(out[1].key == be_key(30));
  CHECK(out[1].value == "b");
}

TEST_CASE("node dump prints structure") {
  AlignedNode node;
  REQUIRE(encode_leaf({{"alpha", "1"}, {"beta", "2"}}, 5, node).ok());
  REQUIRE(append(node, LogKind::kInsert, kBlockStart, 6, "ant", "3").ok());
  std::string text = dump_node({node.data(), kNodeSize});
  CHECK(text.find("leaf") != std::string::npos);
  CHECK(text.find("alpha") != std::string::npos);
  CHECK(text.find("insert") != std::string::npos);
  CHECK(text.find("node_version:     5") != std::string::npos);
}

TEST_CASE("corrupt headers are rejected") {
  AlignedNode node;
  REQUIRE(encode_leaf({{"k", "v"}}, 0, node).ok());
  // log boundary below the block start
  AlignedNode bad = node;
  store_u16(bad.data() + kOffLogBoundary, 100);
  HeaderView hdr;
  CHECK(parse_header({bad.data(), kHeaderSize}, hdr).is(StatusCode::kCorruptNode));
  // bogus node type
  bad = node;
  bad.data()[kOffNodeType] = 9;
  CHECK(parse_header({bad.data(), kHeaderSize}, hdr).is(StatusCode::kCorruptNode));
}

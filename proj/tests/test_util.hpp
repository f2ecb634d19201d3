#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "honeycomb/node_format.hpp"
#include "honeycomb/types.hpp"

namespace honeycomb::test {

// Big-endian integer keys: byte-wise order equals numeric order.
inline std::string be_key(std::uint64_t v, std::size_t width = 8) {
  std::string out(width, '\0');
  for (std::size_t i = 0; i < width; ++i) {
    out[width - 1 - i] = static_cast<char>(v >> (8 * i));
  }
  return out;
}

struct AlignedNode {
  alignas(8) std::array<std::uint8_t, kNodeSize> bytes{};
  std::uint8_t* data() { return bytes.data(); }
  const std::uint8_t* data() const { return bytes.data(); }
};

inline void lock_node(std::uint8_t* buf) {
  for (;;) {
    std::uint64_t w = node::load_word_acquire(buf, node::kOffSizeLock);
    if (node::try_lock(buf, w)) return;
  }
}

inline std::string random_bytes(std::mt19937_64& rng, std::size_t len) {
  std::string out(len, '\0');
  for (std::size_t i = 0; i < len; ++i) out[i] = static_cast<char>(rng() & 0xff);
  return out;
}

inline std::vector<Item> random_items(std::mt19937_64& rng, std::size_t count,
                                      std::size_t key_len, std::size_t value_len) {
  std::map<std::string, std::string> m;
  while (m.size() < count) {
    m[random_bytes(rng, key_len)] = random_bytes(rng, value_len);
  }
  std::vector<Item> out;
  for (auto& [k, v] : m) out.push_back({k, v});
  return out;
}

}  // namespace honeycomb::test

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace honeycomb {

// Logical node identifier. Only the low 48 bits are significant; 0 is the
// null link (no sibling / no child).
using Lid = std::uint64_t;
inline constexpr Lid kNullLid = 0;
inline constexpr Lid kLidLimit = (std::uint64_t{1} << 48) - 1;

inline constexpr std::size_t kNodeSize = 8192;
inline constexpr std::size_t kHeaderSize = 48;
inline constexpr std::size_t kShortcutBudget = 464;
// Sorted block starts right after the header + shortcut area.
inline constexpr std::size_t kBlockStart = kHeaderSize + kShortcutBudget;
inline constexpr std::size_t kMaxKeyLen = 460;
inline constexpr std::size_t kMaxValueLen = 469;
inline constexpr std::size_t kMinSegmentBytes = 256;
inline constexpr std::size_t kChunkBytes = 256;
inline constexpr std::size_t kMaxLogEntries = 256;
inline constexpr std::uint64_t kMaxVersionDelta = (std::uint64_t{1} << 40) - 1;

enum class StatusCode : std::uint8_t {
  kOk = 0,
  kNotFound,
  kKeyTooLong,
  kValueTooLong,
  kCapacityExceeded,
  kForceMerge,  // capacity-family: version delta or entry count would overflow
  kCorruptNode,
  kUnknownLid,
  kLidSpaceExhausted,
  kOutOfMemory,
  kOverloaded,
  kResultTooLarge,
  kInvalidArgument,
  kIoError,
  kTimeout,
  kConnectionReset,
};

const char* to_string(StatusCode code);

struct Status {
  StatusCode code = StatusCode::kOk;

  Status() = default;
  Status(StatusCode c) : code(c) {}  // NOLINT: implicit by design

  bool ok() const { return code == StatusCode::kOk; }
  bool is(StatusCode c) const { return code == c; }
  const char* message() const { return to_string(code); }

  friend bool operator==(const Status& a, const Status& b) = default;
};

template <typename T>
struct Result {
  Status status;
  T value{};

  bool ok() const { return status.ok(); }
  static Result of(T v) { return Result{Status{}, std::move(v)}; }
  static Result error(StatusCode c) { return Result{Status{c}, T{}}; }
};

struct Item {
  std::string key;
  std::string value;

  friend bool operator==(const Item& a, const Item& b) = default;
};

// Byte-wise key order, as by memcmp on the shorter length, then length.
inline int compare_keys(std::string_view a, std::string_view b) {
  return a.compare(b);
}

Status validate_key(std::string_view key);
Status validate_value(std::string_view value);

}  // namespace honeycomb

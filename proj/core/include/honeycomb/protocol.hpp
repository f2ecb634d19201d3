#pragma once

// Length-prefixed binary protocol. Every frame is a 4-byte little-endian
// payload length followed by the payload; docs/protocol.md has the byte
// layout.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "honeycomb/types.hpp"

namespace honeycomb::wire {

inline constexpr std::uint32_t kMagic = 0x424d4348;  // "HCMB" in LE byte order
inline constexpr std::size_t kMaxFrame = 64 * 1024;

enum class Opcode : std::uint8_t {
  kGet = 1,
  kScan = 2,
  kPut = 3,
  kUpdate = 4,
  kDelete = 5,
};

enum class RespStatus : std::uint8_t {
  kOk = 0,
  kNotFound = 1,
  kErr = 2,
  kOverloaded = 3,
};

struct Request {
  std::uint64_t request_id = 0;
  Opcode opcode = Opcode::kGet;
  std::string key;
  std::string upper;  // SCAN only
  std::string value;  // PUT / UPDATE only
};

struct Response {
  std::uint64_t request_id = 0;
  RespStatus status = RespStatus::kOk;
  std::vector<Item> items;
};

// Encoded frames include the 4-byte length prefix.
std::string encode_request(const Request& req);
std::string encode_response(const Response& resp);

Result<Request> decode_request(std::span<const std::uint8_t> payload);
Result<Response> decode_response(std::span<const std::uint8_t> payload);

}  // namespace honeycomb::wire

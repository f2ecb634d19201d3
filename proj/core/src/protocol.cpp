#include "honeycomb/protocol.hpp"

#include <cstring>

namespace honeycomb::wire {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

struct Reader {
  std::span<const std::uint8_t> buf;
  std::size_t pos = 0;

  bool u8(std::uint8_t& v) {
    if (pos + 1 > buf.size()) return false;
    v = buf[pos++];
    return true;
  }
  bool u16(std::uint16_t& v) {
    if (pos + 2 > buf.size()) return false;
    v = static_cast<std::uint16_t>(buf[pos] | (buf[pos + 1] << 8));
    pos += 2;
    return true;
  }
  bool u32(std::uint32_t& v) {
    if (pos + 4 > buf.size()) return false;
    v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[pos + i];
    pos += 4;
    return true;
  }
  bool u64(std::uint64_t& v) {
    if (pos + 8 > buf.size()) return false;
    v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[pos + i];
    pos += 8;
    return true;
  }
  bool bytes(std::string& out, std::size_t n) {
    if (pos + n > buf.size()) return false;
    out.assign(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return true;
  }
  bool done() const { return pos == buf.size(); }
};

std::string with_length_prefix(std::string payload) {
  std::string out;
  out.reserve(payload.size() + 4);
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out += payload;
  return out;
}

}  // namespace

std::string encode_request(const Request& req) {
  std::string p;
  put_u32(p, kMagic);
  put_u64(p, req.request_id);
  p.push_back(static_cast<char>(req.opcode));
  put_u16(p, static_cast<std::uint16_t>(req.key.size()));
  p += req.key;
  switch (req.opcode) {
    case Opcode::kScan:
      put_u16(p, static_cast<std::uint16_t>(req.upper.size()));
      p += req.upper;
      break;
    case Opcode::kPut:
    case Opcode::kUpdate:
      put_u16(p, static_cast<std::uint16_t>(req.value.size()));
      p += req.value;
      break;
    case Opcode::kGet:
    case Opcode::kDelete:
      break;
  }
  return with_length_prefix(std::move(p));
}

std::string encode_response(const Response& resp) {
  std::string p;
  put_u64(p, resp.request_id);
  p.push_back(static_cast<char>(resp.status));
  put_u32(p, static_cast<std::uint32_t>(resp.items.size()));
  for (const Item& item : resp.items) {
    put_u16(p, static_cast<std::uint16_t>(item.key.size()));
    p += item.key;
    put_u16(p, static_cast<std::uint16_t>(item.value.size()));
    p += item.value;
  }
  return with_length_prefix(std::move(p));
}

Result<Request> decode_request(std::span<const std::uint8_t> payload) {
  using R = Result<Request>;
  if (payload.size() + 4 > kMaxFrame) return R::error(StatusCode::kInvalidArgument);
  Reader r{payload};
  Request req;
  std::uint32_t magic;
  std::uint8_t opcode;
  std::uint16_t key_len;
  if (!r.u32(magic) || magic != kMagic) return R::error(StatusCode::kInvalidArgument);
  if (!r.u64(req.request_id) || !r.u8(opcode)) return R::error(StatusCode::kInvalidArgument);
  if (opcode < 1 || opcode > 5) return R::error(StatusCode::kInvalidArgument);
  req.opcode = static_cast<Opcode>(opcode);
  if (!r.u16(key_len) || !r.bytes(req.key, key_len)) {
    return R::error(StatusCode::kInvalidArgument);
  }
  std::uint16_t len;
  switch (req.opcode) {
    case Opcode::kScan:
      if (!r.u16(len) || !r.bytes(req.upper, len)) return R::error(StatusCode::kInvalidArgument);
      break;
    case Opcode::kPut:
    case Opcode::kUpdate:
      if (!r.u16(len) || !r.bytes(req.value, len)) return R::error(StatusCode::kInvalidArgument);
      break;
    case Opcode::kGet:
    case Opcode::kDelete:
      break;
  }
  if (!r.done()) return R::error(StatusCode::kInvalidArgument);
  return R::of(std::move(req));
}

Result<Response> decode_response(std::span<const std::uint8_t> payload) {
  using R = Result<Response>;
  Reader r{payload};
  Response resp;
  std::uint8_t status;
  std::uint32_t count;
  if (!r.u64(resp.request_id) || !r.u8(status) || status > 3 || !r.u32(count)) {
    return R::error(StatusCode::kInvalidArgument);
  }
  resp.status = static_cast<RespStatus>(status);
  resp.items.reserve(std::min<std::uint32_t>(count, 4096));
  for (std::uint32_t i = 0; i < count; ++i) {
    Item item;
    std::uint16_t len;
    if (!r.u16(len) || !r.bytes(item.key, len)) return R::error(StatusCode::kInvalidArgument);
    if (!r.u16(len) || !r.bytes(item.value, len)) return R::error(StatusCode::kInvalidArgument);
    resp.items.push_back(std::move(item));
  }
  if (!r.done()) return R::error(StatusCode::kInvalidArgument);
  return R::of(std::move(resp));
}

}  // namespace honeycomb::wire

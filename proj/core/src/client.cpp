#include "honeycomb/client.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <vector>

namespace honeycomb {

namespace {

bool read_exact(int fd, std::uint8_t* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r <= 0) return false;
    got += static_cast<std::size_t>(r);
  }
  return true;
}

bool write_all(int fd, const char* buf, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (r <= 0) return false;
    sent += static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

Client::Client() : Client(Options{}) {}

Client::Client(Options opts) : opts_(opts) {}

Client::~Client() { close(); }

Status Client::connect(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) return StatusCode::kIoError;
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    fd_ = -1;
    return StatusCode::kInvalidArgument;
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd_);
    fd_ = -1;
    return StatusCode::kConnectionReset;
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  open_.store(true);
  broken_ = false;
  receiver_ = std::thread([this] { receive_loop(); });
  return StatusCode::kOk;
}

void Client::close() {
  if (open_.exchange(false)) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
  }
  if (receiver_.joinable()) receiver_.join();
  fd_ = -1;
}

void Client::receive_loop() {
  std::vector<std::uint8_t> payload;
  while (open_.load()) {
    std::uint8_t len_buf[4];
    if (!read_exact(fd_, len_buf, 4)) break;
    std::uint32_t len = 0;
    for (int i = 3; i >= 0; --i) len = (len << 8) | len_buf[i];
    if (len == 0 || len + 4 > wire::kMaxFrame) break;
    payload.resize(len);
    if (!read_exact(fd_, payload.data(), len)) break;
    auto decoded = wire::decode_response(payload);
    if (!decoded.ok()) break;
    {
      std::lock_guard lock(mu_);
      ready_[decoded.value.request_id] = std::move(decoded.value);
    }
    cv_.notify_all();
  }
  {
    std::lock_guard lock(mu_);
    broken_ = true;
  }
  cv_.notify_all();
}

Result<std::uint64_t> Client::submit(wire::Request req) {
  if (!open_.load()) return Result<std::uint64_t>::error(StatusCode::kConnectionReset);
  if (req.request_id == 0) req.request_id = next_id_.fetch_add(1);
  {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, opts_.timeout,
                      [this] { return inflight_ < opts_.pipeline_window || broken_; })) {
      return Result<std::uint64_t>::error(StatusCode::kTimeout);
    }
    if (broken_) return Result<std::uint64_t>::error(StatusCode::kConnectionReset);
    inflight_ += 1;
  }
  std::string frame = wire::encode_request(req);
  {
    std::lock_guard lock(send_mu_);
    if (!write_all(fd_, frame.data(), frame.size())) {
      std::lock_guard l2(mu_);
      broken_ = true;
      inflight_ -= 1;
      cv_.notify_all();
      return Result<std::uint64_t>::error(StatusCode::kConnectionReset);
    }
  }
  return Result<std::uint64_t>::of(req.request_id);
}

Result<wire::Response> Client::wait(std::uint64_t request_id) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, opts_.timeout,
                    [&] { return ready_.count(request_id) > 0 || broken_; })) {
    return Result<wire::Response>::error(StatusCode::kTimeout);
  }
  auto it = ready_.find(request_id);
  if (it == ready_.end()) return Result<wire::Response>::error(StatusCode::kConnectionReset);
  wire::Response resp = std::move(it->second);
  ready_.erase(it);
  inflight_ -= 1;
  cv_.notify_all();
  return Result<wire::Response>::of(std::move(resp));
}

Result<wire::Response> Client::execute(wire::Request req) {
  for (unsigned attempt = 0;; ++attempt) {
    wire::Request copy = req;
    copy.request_id = next_id_.fetch_add(1);
    auto id = submit(std::move(copy));
    if (!id.ok()) return Result<wire::Response>::error(id.status.code);
    auto resp = wait(id.value);
    if (!resp.ok()) return resp;
    if (resp.value.status == wire::RespStatus::kOverloaded && attempt < opts_.max_retries) {
      std::this_thread::sleep_for(std::chrono::microseconds(100u << std::min(attempt, 8u)));
      continue;
    }
    return resp;
  }
}

Result<std::string> Client::get(std::string_view key) {
  wire::Request req;
  req.opcode = wire::Opcode::kGet;
  req.key = std::string(key);
  auto resp = execute(std::move(req));
  if (!resp.ok()) return Result<std::string>::error(resp.status.code);
  switch (resp.value.status) {
    case wire::RespStatus::kOk:
      if (resp.value.items.size() != 1) return Result<std::string>::error(StatusCode::kIoError);
      return Result<std::string>::of(std::move(resp.value.items[0].value));
    case wire::RespStatus::kNotFound:
      return Result<std::string>::error(StatusCode::kNotFound);
    case wire::RespStatus::kOverloaded:
      return Result<std::string>::error(StatusCode::kOverloaded);
    default:
      return Result<std::string>::error(StatusCode::kIoError);
  }
}

Result<std::vector<Item>> Client::scan(std::string_view lower, std::string_view upper) {
  wire::Request req;
  req.opcode = wire::Opcode::kScan;
  req.key = std::string(lower);
  req.upper = std::string(upper);
  auto resp = execute(std::move(req));
  if (!resp.ok()) return Result<std::vector<Item>>::error(resp.status.code);
  if (resp.value.status != wire::RespStatus::kOk) {
    return Result<std::vector<Item>>::error(StatusCode::kIoError);
  }
  return Result<std::vector<Item>>::of(std::move(resp.value.items));
}

Status Client::put(std::string_view key, std::string_view value) {
  wire::Request req;
  req.opcode = wire::Opcode::kPut;
  req.key = std::string(key);
  req.value = std::string(value);
  auto resp = execute(std::move(req));
  if (!resp.ok()) return resp.status;
  return resp.value.status == wire::RespStatus::kOk ? Status{} : Status{StatusCode::kIoError};
}

Status Client::update(std::string_view key, std::string_view value) {
  wire::Request req;
  req.opcode = wire::Opcode::kUpdate;
  req.key = std::string(key);
  req.value = std::string(value);
  auto resp = execute(std::move(req));
  if (!resp.ok()) return resp.status;
  return resp.value.status == wire::RespStatus::kOk ? Status{} : Status{StatusCode::kIoError};
}

Result<bool> Client::del(std::string_view key) {
  wire::Request req;
  req.opcode = wire::Opcode::kDelete;
  req.key = std::string(key);
  auto resp = execute(std::move(req));
  if (!resp.ok()) return Result<bool>::error(resp.status.code);
  if (resp.value.status == wire::RespStatus::kOk) return Result<bool>::of(true);
  if (resp.value.status == wire::RespStatus::kNotFound) return Result<bool>::of(false);
  return Result<bool>::error(StatusCode::kIoError);
}

}  // namespace honeycomb

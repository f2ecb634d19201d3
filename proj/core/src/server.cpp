#include "honeycomb/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

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

Server::Server(Store& store, Options opts) : store_(store), opts_(opts) {}

Server::~Server() { stop(); }

Status Server::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) return StatusCode::kIoError;
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(opts_.port);
  if (::inet_pton(AF_INET, opts_.listen_addr.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    return StatusCode::kInvalidArgument;
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 128) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    return StatusCode::kIoError;
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  running_.store(true);
  for (std::size_t i = 0; i < opts_.read_threads; ++i) {
    read_workers_.emplace_back([this] { read_worker(); });
  }
  for (std::size_t i = 0; i < opts_.write_threads; ++i) {
    write_workers_.emplace_back([this] { write_worker(); });
  }
  acceptor_ = std::thread([this] { accept_loop(); });
  return StatusCode::kOk;
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(conns_mu_);
    for (auto& conn : conns_) {
      if (conn->open.exchange(false)) {
        ::shutdown(conn->fd, SHUT_RDWR);
        ::close(conn->fd);
      }
    }
  }
  read_cv_.notify_all();
  write_cv_.notify_all();
  for (auto& t : read_workers_) {
    if (t.joinable()) t.join();
  }
  for (auto& t : write_workers_) {
    if (t.joinable()) t.join();
  }
  read_workers_.clear();
  write_workers_.clear();
  std::lock_guard lock(conns_mu_);
  for (auto& conn : conns_) {
    if (conn->reader.joinable()) conn->reader.join();
  }
  conns_.clear();
}

void Server::accept_loop() {
  while (running_.load()) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_.load()) return;
      continue;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    {
      std::lock_guard lock(conns_mu_);
      conns_.push_back(conn);
    }
    conn->reader = std::thread([this, conn] { connection_loop(conn); });
  }
}

void Server::close_connection(const std::shared_ptr<Connection>& conn) {
  if (conn->open.exchange(false)) {
    ::shutdown(conn->fd, SHUT_RDWR);
    ::close(conn->fd);
  }
}

void Server::connection_loop(std::shared_ptr<Connection> conn) {
  std::vector<std::uint8_t> payload;
  while (running_.load() && conn->open.load()) {
    std::uint8_t len_buf[4];
    if (!read_exact(conn->fd, len_buf, 4)) break;
    std::uint32_t len = 0;
    for (int i = 3; i >= 0; --i) len = (len << 8) | len_buf[i];
    if (len == 0 || len + 4 > wire::kMaxFrame) {
      send_response(conn, {0, wire::RespStatus::kErr, {}});
      break;
    }
    payload.resize(len);
    if (!read_exact(conn->fd, payload.data(), len)) break;
    auto decoded = wire::decode_request(payload);
    if (!decoded.ok()) {
      send_response(conn, {0, wire::RespStatus::kErr, {}});
      break;
    }
    Task task{conn, std::move(decoded.value)};
    bool is_write = task.request.opcode == wire::Opcode::kPut ||
                    task.request.opcode == wire::Opcode::kUpdate ||
                    task.request.opcode == wire::Opcode::kDelete;
    if (is_write) {
      bool enqueued = false;
      {
        std::lock_guard lock(write_mu_);
        if (write_queue_.size() < opts_.write_queue_capacity) {
          write_queue_.push_back(std::move(task));
          enqueued = true;
        }
      }
      if (enqueued) {
        write_cv_.notify_one();
      } else {
        send_response(conn, {task.request.request_id, wire::RespStatus::kOverloaded, {}});
      }
    } else {
      {
        std::lock_guard lock(read_mu_);
        read_queue_.push_back(std::move(task));
      }
      read_cv_.notify_one();
    }
  }
  close_connection(conn);
}

void Server::read_worker() {
  while (true) {
    Task task;
    {
      std::unique_lock lock(read_mu_);
      read_cv_.wait(lock, [this] { return !read_queue_.empty() || !running_.load(); });
      if (read_queue_.empty()) {
        if (!running_.load()) return;
        continue;
      }
      task = std::move(read_queue_.front());
      read_queue_.pop_front();
    }
    execute(task);
  }
}

void Server::write_worker() {
  Store::Writer writer = store_.writer();
  while (true) {
    Task task;
    {
      std::unique_lock lock(write_mu_);
      write_cv_.wait(lock, [this] { return !write_queue_.empty() || !running_.load(); });
      if (write_queue_.empty()) {
        if (!running_.load()) return;
        continue;
      }
      task = std::move(write_queue_.front());
      write_queue_.pop_front();
    }
    const wire::Request& req = task.request;
    wire::Response resp;
    resp.request_id = req.request_id;
    switch (req.opcode) {
      case wire::Opcode::kPut:
      case wire::Opcode::kUpdate: {
        auto r = writer.put(req.key, req.value);
        resp.status = r.ok() ? wire::RespStatus::kOk : wire::RespStatus::kErr;
        break;
      }
      case wire::Opcode::kDelete: {
        auto r = writer.del(req.key);
        if (!r.ok()) {
          resp.status = wire::RespStatus::kErr;
        } else {
          resp.status = r.value == DeleteOutcome::kDeleted ? wire::RespStatus::kOk
                                                           : wire::RespStatus::kNotFound;
        }
        break;
      }
      default:
        resp.status = wire::RespStatus::kErr;
    }
    send_response(task.conn, resp);
  }
}

void Server::execute(const Task& task) {
  const wire::Request& req = task.request;
  wire::Response resp;
  resp.request_id = req.request_id;
  switch (req.opcode) {
    case wire::Opcode::kGet: {
      GetResult r = store_.get(req.key);
      if (r.status.ok()) {
        resp.status = wire::RespStatus::kOk;
        resp.items.push_back({req.key, std::move(r.value)});
      } else if (r.status.is(StatusCode::kNotFound)) {
        resp.status = wire::RespStatus::kNotFound;
      } else if (r.status.is(StatusCode::kOverloaded)) {
        resp.status = wire::RespStatus::kOverloaded;
      } else {
        resp.status = wire::RespStatus::kErr;
      }
      break;
    }
    case wire::Opcode::kScan: {
      ScanResult r = store_.scan(req.key, req.upper);
      if (r.status.ok()) {
        resp.status = wire::RespStatus::kOk;
        resp.items = std::move(r.items);
      } else if (r.status.is(StatusCode::kOverloaded)) {
        resp.status = wire::RespStatus::kOverloaded;
      } else {
        resp.status = wire::RespStatus::kErr;
      }
      break;
    }
    default:
      resp.status = wire::RespStatus::kErr;
  }
  send_response(task.conn, resp);
}

void Server::send_response(const std::shared_ptr<Connection>& conn, const wire::Response& resp) {
  if (!conn->open.load()) return;
  std::string frame = wire::encode_response(resp);
  std::lock_guard lock(conn->write_mu);
  if (!write_all(conn->fd, frame.data(), frame.size())) {
    close_connection(conn);
  }
}

}  // namespace honeycomb

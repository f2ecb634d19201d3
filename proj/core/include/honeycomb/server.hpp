#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "honeycomb/protocol.hpp"
#include "honeycomb/store.hpp"

namespace honeycomb {

// TCP front end. Reads are dispatched to a read pool, writes to a pool of
// registered writer threads; responses may return out of order and are
// matched by request_id. Write responses are sent only after the release of
// the operation's version has been acknowledged by the read side, which the
// engine guarantees before returning.
class Server {
 public:
  struct Options {
    std::string listen_addr = "127.0.0.1";
    std::uint16_t port = 0;  // 0 picks an ephemeral port
    std::size_t read_threads = 8;
    std::size_t write_threads = 4;
    std::size_t write_queue_capacity = 1024;
  };

  Server(Store& store, Options opts);
  ~Server();

  Status start();
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  struct Connection {
    int fd = -1;
    std::thread reader;
    std::mutex write_mu;
    std::atomic<bool> open{true};
  };

  struct Task {
    std::shared_ptr<Connection> conn;
    wire::Request request;
  };

  Store& store_;
  Options opts_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex conns_mu_;
  std::vector<std::shared_ptr<Connection>> conns_;

  std::mutex read_mu_;
  std::condition_variable read_cv_;
  std::deque<Task> read_queue_;
  std::vector<std::thread> read_workers_;

  std::mutex write_mu_;
  std::condition_variable write_cv_;
  std::deque<Task> write_queue_;
  std::vector<std::thread> write_workers_;

  void accept_loop();
  void connection_loop(std::shared_ptr<Connection> conn);
  void read_worker();
  void write_worker();
  void execute(const Task& task);
  void send_response(const std::shared_ptr<Connection>& conn, const wire::Response& resp);
  void close_connection(const std::shared_ptr<Connection>& conn);
};

}  // namespace honeycomb

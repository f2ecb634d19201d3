#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>

#include "honeycomb/protocol.hpp"
#include "honeycomb/types.hpp"

namespace honeycomb {

// Pipelined client: requests go out as fast as the window allows, responses
// are matched by request_id. OVERLOADED responses are retried with backoff.
class Client {
 public:
  struct Options {
    std::size_t pipeline_window = 64;
    unsigned max_retries = 64;
    std::chrono::milliseconds timeout{10000};
  };

  Client();
  explicit Client(Options opts);
  ~Client();

  Status connect(const std::string& host, std::uint16_t port);
  void close();

  // Asynchronous submission; wait() blocks for the matching response.
  Result<std::uint64_t> submit(wire::Request req);
  Result<wire::Response> wait(std::uint64_t request_id);
  // Synchronous roundtrip with OVERLOADED retry.
  Result<wire::Response> execute(wire::Request req);

  Result<std::string> get(std::string_view key);
  Result<std::vector<Item>> scan(std::string_view lower, std::string_view upper);
  Status put(std::string_view key, std::string_view value);
  Status update(std::string_view key, std::string_view value);
  Result<bool> del(std::string_view key);  // true when the key existed

 private:
  Options opts_;
  int fd_ = -1;
  std::atomic<bool> open_{false};
  std::atomic<std::uint64_t> next_id_{1};
  std::thread receiver_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::unordered_map<std::uint64_t, wire::Response> ready_;
  std::size_t inflight_ = 0;
  bool broken_ = false;

  std::mutex send_mu_;

  void receive_loop();
};

}  // namespace honeycomb

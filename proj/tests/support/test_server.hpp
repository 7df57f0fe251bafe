#pragma once

// Instrumented local detector endpoint for gateway tests: records arrival
// timestamps, concurrency, and headers; response behavior is scriptable.

#include <httplib.h>

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace metaod::testing {

class TestServer {
 public:
  using Responder = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit TestServer(Responder responder) : responder_(std::move(responder)) {
    server_.Post("/detect", [this](const httplib::Request& req, httplib::Response& res) {
      const double now = now_ms();
      {
        std::lock_guard lock(mutex_);
        arrival_times_ms_.push_back(now);
        last_auth_ = req.get_header_value("Authorization");
      }
      const int inflight = ++in_flight_;
      int expected = max_in_flight_.load();
      while (inflight > expected &&
             !max_in_flight_.compare_exchange_weak(expected, inflight)) {
      }
      ++requests_;
      responder_(req, res);
      --in_flight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~TestServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/detect";
  }
  long requests() const { return requests_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }
  std::vector<double> arrival_times_ms() const {
    std::lock_guard lock(mutex_);
    return arrival_times_ms_;
  }
  std::string last_auth() const {
    std::lock_guard lock(mutex_);
    return last_auth_;
  }

  static double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }

 private:
  httplib::Server server_;
  Responder responder_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<long> requests_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  mutable std::mutex mutex_;
  std::vector<double> arrival_times_ms_;
  std::string last_auth_;
};

inline const char* kCannedResponse =
    R"({"detections":[{"label":"car","confidence":0.9,"box":{"x":10,"y":20,"w":30,"h":40}},)"
    R"({"label":"dog","confidence":0.75,"box":{"x":60,"y":5,"w":15,"h":25}}]})";

}  // namespace metaod::testing

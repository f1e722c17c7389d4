#pragma once

// Deterministic, scripted stand-in for an OpenAI-compatible endpoint.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rolesynth/digest.hpp"
#include "rolesynth/error.hpp"
#include "rolesynth/gateway.hpp"

namespace rolesynth {

struct MockReply {
  int status = 200;
  std::string content;
  bool empty_choices = false;
};

/// Request fingerprint -> replies served in order; the last one repeats.
using MockScript = std::map<std::string, std::vector<MockReply>>;

inline nlohmann::json completion_document(const std::string& content, bool empty_choices) {
  nlohmann::json doc;
  doc["id"] = "chatcmpl-mock";
  doc["object"] = "chat.completion";
  doc["created"] = 0;
  doc["model"] = "mock";
  doc["choices"] = nlohmann::json::array();
  if (!empty_choices) {
    doc["choices"].push_back({{"index", 0},
                              {"message", {{"role", "assistant"}, {"content", content}}},
                              {"finish_reason", "stop"}});
  }
  return doc;
}

/// Script file: {"<fingerprint>": "text" | {reply} | [{reply}, ...]} where a
/// reply is {"status": int, "content": text, "empty_choices": bool}.
inline MockScript mock_script_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("mock script must be an object");
  auto reply_from = [](const nlohmann::json& r) {
    if (r.is_string()) return MockReply{200, r.get<std::string>(), false};
    if (!r.is_object()) throw ParseError("mock reply must be a string or object");
    return MockReply{r.value("status", 200), r.value("content", std::string()),
                     r.value("empty_choices", false)};
  };
  MockScript script;
  for (const auto& [fp, v] : doc.items()) {
    auto& seq = script[fp];
    if (v.is_array()) {
      for (const auto& r : v) seq.push_back(reply_from(r));
    } else {
      seq.push_back(reply_from(v));
    }
    if (seq.empty()) throw ParseError("empty reply list for " + fp);
  }
  return script;
}

inline nlohmann::json mock_script_to_json(const MockScript& script) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [fp, seq] : script) {
    auto arr = nlohmann::json::array();
    for (const auto& r : seq) {
      arr.push_back({{"status", r.status}, {"content", r.content},
                     {"empty_choices", r.empty_choices}});
    }
    doc[fp] = std::move(arr);
  }
  return doc;
}

class MockEndpoint {
 public:
  explicit MockEndpoint(MockScript script = {},
                        std::chrono::milliseconds latency = std::chrono::milliseconds(0))
      : script_(std::move(script)), latency_(latency) {
    server_.Post(R"(.*/chat/completions)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   handle(req, res);
                 });
  }

  ~MockEndpoint() { stop(); }

  MockEndpoint(const MockEndpoint&) = delete;
  MockEndpoint& operator=(const MockEndpoint&) = delete;

  /// Binds to 127.0.0.1 (port 0 = ephemeral) and serves on a background thread.
  int start(int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port("127.0.0.1")
                      : (server_.bind_to_port("127.0.0.1", port) ? port : -1);
    if (port_ < 0) throw IoError("mock endpoint could not bind");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Serves on the calling thread until stop() is called elsewhere.
  void serve_blocking(int port) {
    if (!server_.bind_to_port("127.0.0.1", port)) throw IoError("mock endpoint could not bind");
    port_ = port;
    server_.listen_after_bind();
  }

  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
  }

  void add(const std::string& fingerprint, std::vector<MockReply> replies) {
    std::lock_guard lock(mu_);
    script_[fingerprint] = std::move(replies);
  }

  void add(const std::vector<ChatTurn>& turns, std::vector<MockReply> replies) {
    add(request_fingerprint(turns), std::move(replies));
  }

  /// Fingerprints of every request received, in arrival order.
  std::vector<std::string> call_log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  std::size_t request_count() const {
    std::lock_guard lock(mu_);
    return log_.size();
  }

  /// Raw body of the most recent request.
  std::string last_body() const {
    std::lock_guard lock(mu_);
    return last_body_;
  }

  int max_in_flight() const { return max_in_flight_.load(); }

  void reset_log() {
    std::lock_guard lock(mu_);
    log_.clear();
    served_.clear();
    max_in_flight_ = 0;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    int now = ++in_flight_;
    int prev = max_in_flight_.load();
    while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
    }
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

    auto doc = nlohmann::json::parse(req.body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("messages")) {
      --in_flight_;
      res.status = 400;
      res.set_content(R"({"error":{"message":"malformed request"}})", "application/json");
      return;
    }
    const std::string fp = messages_fingerprint(doc["messages"]);

    MockReply reply;
    bool found = false;
    {
      std::lock_guard lock(mu_);
      log_.push_back(fp);
      last_body_ = req.body;
      if (auto it = script_.find(fp); it != script_.end()) {
        std::size_t n = served_[fp]++;
        reply = it->second[std::min(n, it->second.size() - 1)];
        found = true;
      }
    }
    --in_flight_;

    if (!found) {
      nlohmann::json err = {{"error",
                             {{"message", "mock endpoint: unscripted request"},
                              {"type", "mock_unscripted"},
                              {"fingerprint", fp}}}};
      res.status = 404;
      res.set_content(err.dump(), "application/json");
      return;
    }
    res.status = reply.status;
    if (reply.status >= 200 && reply.status < 300) {
      res.set_content(completion_document(reply.content, reply.empty_choices).dump(),
                      "application/json");
    } else {
      nlohmann::json err = {{"error", {{"message", reply.content}, {"code", reply.status}}}};
      res.set_content(err.dump(), "application/json");
    }
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  mutable std::mutex mu_;
  MockScript script_;
  std::map<std::string, std::size_t> served_;
  std::vector<std::string> log_;
  std::string last_body_;
  std::chrono::milliseconds latency_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

}  // namespace rolesynth

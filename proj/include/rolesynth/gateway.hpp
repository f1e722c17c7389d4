#pragma once

// Client for OpenAI-compatible multimodal chat-completion endpoints.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "rolesynth/digest.hpp"
#include "rolesynth/error.hpp"

namespace rolesynth {

struct SamplingParams {
  int top_k = 1;
  double top_p = 1.0;
  double temperature = 0.0;
  double repetition_penalty = 1.0;
  double presence_penalty = 0.0;
  double frequency_penalty = 0.0;

  void validate() const {
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
  }

  bool operator==(const SamplingParams&) const = default;
};

/// Captioner sampling settings (the recommended Qwen generation settings).
inline SamplingParams default_generation_params() {
  return SamplingParams{.top_k = 1,
                        .top_p = 0.001,
                        .temperature = 0.01,
                        .repetition_penalty = 1.0,
                        .presence_penalty = 1.5,
                        .frequency_penalty = 0.0};
}

/// Scorer defaults: greedy decoding.
inline SamplingParams default_scoring_params() {
  return SamplingParams{.top_k = 1,
                        .top_p = 1.0,
                        .temperature = 0.0,
                        .repetition_penalty = 1.0,
                        .presence_penalty = 0.0,
                        .frequency_penalty = 0.0};
}

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model_name = "Qwen/Qwen2.5-VL-7B-Instruct";
  /// Name of the environment variable holding the bearer token. Unset or
  /// empty variable means no Authorization header is sent.
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{120'000};
  int max_retries = 3;
  int max_concurrency = 4;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (base_url.empty()) throw ConfigError("base_url is empty");
  }
};

struct ImagePayload {
  std::string bytes;
  std::string media_type = "image/png";
};

enum class TurnRole { system, user, assistant };

inline const char* to_string(TurnRole r) {
  switch (r) {
    case TurnRole::system: return "system";
    case TurnRole::user: return "user";
    case TurnRole::assistant: return "assistant";
  }
  return "user";
}

struct ChatTurn {
  TurnRole role = TurnRole::user;
  std::string text;
  std::optional<ImagePayload> image;

  static ChatTurn user(std::string text, std::optional<ImagePayload> image = {}) {
    return {TurnRole::user, std::move(text), std::move(image)};
  }
  static ChatTurn assistant(std::string text) {
    return {TurnRole::assistant, std::move(text), std::nullopt};
  }
  static ChatTurn system(std::string text) {
    return {TurnRole::system, std::move(text), std::nullopt};
  }
};

inline std::string media_type_for_path(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "webp") return "image/webp";
  if (ext == "gif") return "image/gif";
  if (ext == "bmp") return "image/bmp";
  return "image/png";
}

/// The `messages` array of a chat-completion request. Turns carrying an image
/// use the content-parts form, all others a plain string.
inline nlohmann::json build_messages(const std::vector<ChatTurn>& turns) {
  auto messages = nlohmann::json::array();
  for (const auto& t : turns) {
    if (t.image && t.role != TurnRole::user) {
      throw ValidationError("image payloads are only allowed on user turns");
    }
    nlohmann::json m;
    m["role"] = to_string(t.role);
    if (t.image) {
      auto parts = nlohmann::json::array();
      parts.push_back({{"type", "text"}, {"text", t.text}});
      parts.push_back(
          {{"type", "image_url"},
           {"image_url",
            {{"url", "data:" + t.image->media_type + ";base64," +
                         base64_encode(t.image->bytes)}}}});
      m["content"] = std::move(parts);
    } else {
      m["content"] = t.text;
    }
    messages.push_back(std::move(m));
  }
  return messages;
}

/// Request body for one completion. Pure: identical inputs give identical bytes.
inline std::string build_request_body(const std::string& model,
                                      const std::vector<ChatTurn>& turns,
                                      const SamplingParams& p) {
  if (turns.empty()) throw ValidationError("chat request needs at least one turn");
  nlohmann::json body;
  body["model"] = model;
  body["messages"] = build_messages(turns);
  body["stream"] = false;
  body["top_k"] = p.top_k;
  body["top_p"] = p.top_p;
  body["temperature"] = p.temperature;
  body["repetition_penalty"] = p.repetition_penalty;
  body["presence_penalty"] = p.presence_penalty;
  body["frequency_penalty"] = p.frequency_penalty;
  return body.dump();
}

/// Identity of a request as seen by the mock endpoint: digest of the
/// serialized `messages` array only, so scripts survive sampling changes.
inline std::string messages_fingerprint(const nlohmann::json& messages) {
  return sha256_hex(messages.dump());
}

inline std::string request_fingerprint(const std::vector<ChatTurn>& turns) {
  return messages_fingerprint(build_messages(turns));
}

/// Assistant text of the first choice. Throws EndpointError on empty choices
/// or an undecodable body.
inline std::string extract_completion_text(const std::string& body, int status = 200) {
  nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw EndpointError("malformed completion response", status, body);
  }
  auto it = doc.find("choices");
  if (it == doc.end() || !it->is_array() || it->empty()) {
    throw EndpointError("completion response has no choices", status, body);
  }
  const auto& choice = it->front();
  if (!choice.contains("message")) {
    throw EndpointError("first choice has no message", status, body);
  }
  const auto& content = choice["message"].value("content", nlohmann::json());
  if (content.is_string()) return content.get<std::string>();
  if (content.is_null()) return {};
  if (content.is_array()) {
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") text += part.value("text", "");
    }
    return text;
  }
  throw EndpointError("unsupported message content type", status, body);
}

struct ChatResult {
  std::string text;
  int retries = 0;
};

/// Splits "http://host:port/v1" into {"http://host:port", "/v1/chat/completions"}.
inline std::pair<std::string, std::string> split_endpoint_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_begin = base_url.find('/', host_begin);
  std::string origin = base_url.substr(0, path_begin);
  std::string path = path_begin == std::string::npos ? "" : base_url.substr(path_begin);
  while (!path.empty() && path.back() == '/') path.pop_back();
  const std::string suffix = "/chat/completions";
  if (path.size() < suffix.size() ||
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    path += suffix;
  }
  return {origin, path};
}

/// Shareable client for one endpoint. Enforces the configured in-flight cap
/// across every thread that submits through it.
class Gateway {
 public:
  explicit Gateway(EndpointConfig cfg)
      : cfg_((cfg.validate(), std::move(cfg))),
        slots_(cfg_.max_concurrency),
        rng_(cfg_.seed) {
    std::tie(origin_, path_) = split_endpoint_url(cfg_.base_url);
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
      api_key_ = key;
    }
  }

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  const EndpointConfig& config() const { return cfg_; }

  ChatResult complete(const std::vector<ChatTurn>& turns, const SamplingParams& params) {
    params.validate();
    const std::string body = build_request_body(cfg_.model_name, turns, params);

    int status = 0;
    std::string payload;
    std::string failure;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 0) {
        retries_.fetch_add(1, std::memory_order_relaxed);
        std::this_thread::sleep_for(backoff_delay(attempt - 1));
      }
      requests_.fetch_add(1, std::memory_order_relaxed);
      bool transient = false;
      {
        SlotGuard guard(slots_);
        httplib::Client client(origin_);
        client.set_connection_timeout(cfg_.timeout);
        client.set_read_timeout(cfg_.timeout);
        client.set_write_timeout(cfg_.timeout);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
          status = 0;
          payload.clear();
          failure = "transport error: " + httplib::to_string(res.error());
          transient = true;
        } else {
          status = res->status;
          payload = res->body;
          if (status >= 200 && status < 300) {
            return ChatResult{extract_completion_text(payload, status), attempt};
          }
          failure = "endpoint returned HTTP " + std::to_string(status);
          transient = status == 429 || status >= 500;
        }
      }
      if (!transient) throw EndpointError(failure, status, payload);
      if (attempt >= cfg_.max_retries) {
        throw EndpointError(failure + " after " + std::to_string(attempt) + " retries",
                            status, payload);
      }
    }
  }

  std::uint64_t total_requests() const { return requests_.load(); }
  std::uint64_t total_retries() const { return retries_.load(); }

 private:
  struct SlotGuard {
    explicit SlotGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
    ~SlotGuard() { sem.release(); }
    std::counting_semaphore<>& sem;
  };

  // Full jitter: uniform in [0, base * factor^k].
  std::chrono::milliseconds backoff_delay(int k) {
    double cap = static_cast<double>(cfg_.backoff_base.count()) *
                 std::pow(cfg_.backoff_factor, k);
    std::lock_guard lock(rng_mu_);
    std::uniform_real_distribution<double> dist(0.0, cap);
    return std::chrono::milliseconds(static_cast<long long>(dist(rng_)));
  }

  EndpointConfig cfg_;
  std::string origin_;
  std::string path_;
  std::string api_key_;
  std::counting_semaphore<> slots_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> retries_{0};
};

inline std::string complete_chat(const EndpointConfig& cfg, const std::vector<ChatTurn>& turns,
                                 const SamplingParams& params) {
  Gateway gateway(cfg);
  return gateway.complete(turns, params).text;
}

}  // namespace rolesynth

#pragma once

#include <condition_variable>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "kgforge/backend.hpp"
#include "kgforge/errors.hpp"

namespace kgforge {

inline constexpr const char* kApiKeyEnvVar = "KGFORGE_API_KEY";

struct RemoteConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string chat_model = "gpt-4";
  std::string embed_model = "text-embedding-3-large";
  int timeout_seconds = 120;
  int max_in_flight = 4;
  int embed_dimensions = 0;  // 0 = whatever the model returns
};

namespace detail {

// Bounds concurrent HTTP calls per backend instance.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit) : limit_(limit > 0 ? limit : 1) {}

  struct Slot {
    InFlightLimiter& limiter;
    ~Slot() { limiter.release(); }
  };

  Slot acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
    return Slot{*this};
  }

 private:
  void release() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  int limit_;
  int in_flight_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
};

// "https://host:port/v1" -> ("https://host:port", "/v1")
inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  auto scheme = base_url.find("://");
  auto path_start = scheme == std::string::npos ? base_url.find('/')
                                                : base_url.find('/', scheme + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string path = base_url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {base_url.substr(0, path_start), path};
}

}  // namespace detail

// Shared HTTP plumbing for the chat-completions and embeddings endpoints.
class RemoteSession {
 public:
  explicit RemoteSession(RemoteConfig config)
      : config_(std::move(config)), limiter_(config_.max_in_flight) {
    const char* key = std::getenv(kApiKeyEnvVar);
    api_key_ = key ? key : "";
    std::tie(host_, path_prefix_) = detail::split_base_url(config_.base_url);
    if (host_.empty()) throw ConfigError("remote backend base URL is empty");
  }

  const RemoteConfig& config() const { return config_; }

  nlohmann::json post_json(const std::string& endpoint, const nlohmann::json& body) {
    auto slot = limiter_.acquire();
    httplib::Client client(host_);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_write_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path_prefix_ + endpoint, headers, body.dump(), "application/json");
    if (!res) {
      throw BackendUnreachableError("POST " + host_ + path_prefix_ + endpoint + " failed: " +
                                    httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw BackendUnreachableError("POST " + host_ + path_prefix_ + endpoint + " returned HTTP " +
                                    std::to_string(res->status) + ": " + res->body);
    }
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
      throw BackendUnreachableError("non-JSON response from " + endpoint);
    }
    return parsed;
  }

 private:
  RemoteConfig config_;
  std::string api_key_;
  std::string host_;
  std::string path_prefix_;
  detail::InFlightLimiter limiter_;
};

// Chat-completions transport: instruction as the system message, context as
// the user message, response constrained to a JSON object.
class RemoteLlm : public LlmBackend {
 public:
  explicit RemoteLlm(std::shared_ptr<RemoteSession> session) : session_(std::move(session)) {}
  explicit RemoteLlm(RemoteConfig config)
      : session_(std::make_shared<RemoteSession>(std::move(config))) {}

  std::string complete(const ExtractionRequest& request) override {
    nlohmann::json body{
        {"model", session_->config().chat_model},
        {"messages",
         {{{"role", "system"}, {"content", request.instruction}},
          {{"role", "user"}, {"content", request.context}}}},
        {"response_format", {{"type", "json_object"}}},
    };
    nlohmann::json reply = session_->post_json("/chat/completions", body);
    if (!reply.contains("choices") || reply["choices"].empty() ||
        !reply["choices"][0].contains("message")) {
      throw BackendUnreachableError("chat response missing choices[0].message");
    }
    return reply["choices"][0]["message"].value("content", std::string{});
  }

  int max_parallel() const override { return session_->config().max_in_flight; }

 private:
  std::shared_ptr<RemoteSession> session_;
};

class RemoteEmbedder : public EmbeddingBackend {
 public:
  explicit RemoteEmbedder(std::shared_ptr<RemoteSession> session) : session_(std::move(session)) {
    dimension_ = session_->config().embed_dimensions;
  }
  explicit RemoteEmbedder(RemoteConfig config)
      : RemoteEmbedder(std::make_shared<RemoteSession>(std::move(config))) {}

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    if (texts.empty()) return {};
    nlohmann::json body{{"model", session_->config().embed_model}, {"input", texts}};
    if (session_->config().embed_dimensions > 0) {
      body["dimensions"] = session_->config().embed_dimensions;
    }
    nlohmann::json reply = session_->post_json("/embeddings", body);
    if (!reply.contains("data") || !reply["data"].is_array() ||
        reply["data"].size() != texts.size()) {
      throw BackendUnreachableError("embeddings response data does not match input size");
    }
    std::vector<EmbeddingVector> out(texts.size());
    for (const auto& item : reply["data"]) {
      std::size_t index = item.value("index", static_cast<std::size_t>(out.size()));
      if (index >= out.size()) throw BackendUnreachableError("embedding index out of range");
      EmbeddingVector vec = item.value("embedding", EmbeddingVector{});
      if (vec.empty()) throw BackendUnreachableError("embedding response entry is empty");
      normalize(vec);
      out[index] = std::move(vec);
    }
    std::lock_guard<std::mutex> lock(mutex_);
    for (const EmbeddingVector& vec : out) {
      if (dimension_ == 0) dimension_ = static_cast<int>(vec.size());
      if (static_cast<int>(vec.size()) != dimension_) {
        throw DimensionMismatchError("embedding dimension drifted from " +
                                     std::to_string(dimension_) + " to " +
                                     std::to_string(vec.size()) + " within one run");
      }
    }
    return out;
  }

  // Probes the endpoint once when the dimension was not configured.
  int dimension() override {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (dimension_ > 0) return dimension_;
    }
    embed_batch({"dimension probe"});
    std::lock_guard<std::mutex> lock(mutex_);
    return dimension_;
  }

 private:
  std::shared_ptr<RemoteSession> session_;
  std::mutex mutex_;
  int dimension_ = 0;
};

}  // namespace kgforge

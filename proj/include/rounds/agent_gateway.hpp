#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

// Uniform access to chat models: an OpenAI-style chat-completions client
// with retries, a token-bucket rate limiter and a content-addressed response
// cache, plus in-process stub backends for offline runs.
namespace rounds {

enum class Role { System, User, Assistant };
std::string_view to_string(Role r);

struct ChatTurn {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatTurn&) const = default;
};

using ChatHistory = std::vector<ChatTurn>;

enum class CacheMode { Off, ReadWrite, ReadOnly };
std::string_view to_string(CacheMode m);
std::optional<CacheMode> parse_cache_mode(std::string_view s);

struct EndpointConfig {
  std::string name;  // roster key; selects the ROUNDS_API_KEY_<NAME> variable
  std::string base_url;
  std::string model_name;
  double temperature = 0.0;
  double top_p = 1.0;
  std::optional<std::int64_t> seed;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  double rate_limit = 0.0;  // requests per second, 0 = unlimited
  CacheMode cache_mode = CacheMode::Off;
  std::filesystem::path cache_dir;
  std::chrono::milliseconds backoff_base{500};

  // Throws ConfigError.
  void validate() const;
  // Judges must decode greedily: temperature 0.0 and top-p 1.0.
  void validate_for_judge() const;
};

EndpointConfig endpoint_from_json(std::string name, const nlohmann::json& j);
nlohmann::json to_json(const EndpointConfig& c);

// Environment variable holding the API key for an endpoint name:
// "gpt-4o mini" -> "ROUNDS_API_KEY_GPT_4O_MINI".
std::string credential_env_var(std::string_view endpoint_name);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatHistory& history) = 0;
};

struct HttpResult {
  int status = 0;  // 0 when no HTTP response was received
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post_json(const std::string& base_url, const std::string& path, const std::string& body,
                               const std::vector<std::pair<std::string, std::string>>& headers,
                               std::chrono::milliseconds timeout) = 0;
};

// cpp-httplib backed transport (http and https).
std::shared_ptr<HttpTransport> make_http_transport();

// Token bucket holding at most `burst` tokens, refilled at `rate` per
// second. A rate of 0 disables limiting. Safe to share across threads.
class RateLimiter {
 public:
  explicit RateLimiter(double rate, double burst = 1.0);
  void acquire();

 private:
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

// One JSON file per key: {"key", "request_digest", "model", "response", "timestamp"}.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<std::string> get(const std::string& key) const;
  // Atomic: writes a temp file and renames it into place.
  void put(const std::string& key, const std::string& model, const std::string& response) const;
  const std::filesystem::path& dir() const { return dir_; }

  // Digest of model name, sampling parameters and canonical history.
  static std::string key_for(const EndpointConfig& config, const ChatHistory& history);

 private:
  std::filesystem::path dir_;
};

nlohmann::json chat_request_body(const EndpointConfig& config, const ChatHistory& history);

// Chat-completions client. Thread-safe.
class ChatClient : public ChatBackend {
 public:
  explicit ChatClient(EndpointConfig config, std::shared_ptr<HttpTransport> transport = make_http_transport(),
                      std::shared_ptr<RateLimiter> limiter = nullptr);

  std::string complete(const ChatHistory& history) override;

  const EndpointConfig& config() const { return config_; }
  std::size_t network_calls() const { return network_calls_.load(); }

 private:
  std::string call_endpoint(const ChatHistory& history);

  EndpointConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<RateLimiter> limiter_;
  std::optional<ResponseCache> cache_;
  std::atomic<std::size_t> network_calls_{0};
};

// Calls a function; handy for stubs in tests and offline runs.
class FunctionBackend : public ChatBackend {
 public:
  explicit FunctionBackend(std::function<std::string(const ChatHistory&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const ChatHistory& history) override { return fn_(history); }

 private:
  std::function<std::string(const ChatHistory&)> fn_;
};

// Returns the content of the last user turn.
class EchoBackend : public ChatBackend {
 public:
  std::string complete(const ChatHistory& history) override;
};

// Replays a fixed list of replies in order; throws TransportError once
// exhausted.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const ChatHistory& history) override;
  // Every call, including ones that found the script exhausted.
  std::size_t calls() const;

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

// Forwards to another backend and keeps every outbound history.
class RecordingBackend : public ChatBackend {
 public:
  explicit RecordingBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}
  std::string complete(const ChatHistory& history) override;
  std::vector<ChatHistory> requests() const;

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::vector<ChatHistory> requests_;
  mutable std::mutex mu_;
};

}  // namespace rounds

#include "rounds/agent_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "rounds/digest.hpp"
#include "rounds/error.hpp"
#include "rounds/text.hpp"

namespace rounds {

using nlohmann::json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(CacheMode m) {
  switch (m) {
    case CacheMode::Off: return "Off";
    case CacheMode::ReadWrite: return "ReadWrite";
    case CacheMode::ReadOnly: return "ReadOnly";
  }
  return "Off";
}

std::optional<CacheMode> parse_cache_mode(std::string_view s) {
  for (auto m : {CacheMode::Off, CacheMode::ReadWrite, CacheMode::ReadOnly}) {
    if (text::iequals(s, to_string(m))) return m;
  }
  return std::nullopt;
}

void EndpointConfig::validate() const {
  auto fail = [&](const std::string& msg) { throw ConfigError("endpoint '" + name + "': " + msg); };
  if (model_name.empty()) fail("model_name is empty");
  if (!(temperature >= 0.0)) fail("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) fail("top_p must be in (0, 1]");
  if (max_retries < 0) fail("max_retries must be >= 0");
  if (timeout.count() <= 0) fail("timeout must be positive");
  if (!(rate_limit >= 0.0)) fail("rate_limit must be >= 0");
  if (backoff_base.count() < 0) fail("backoff_base must be >= 0");
  if (cache_mode != CacheMode::Off && cache_dir.empty()) fail("cache_dir required when caching");
}

void EndpointConfig::validate_for_judge() const {
  validate();
  if (temperature != 0.0) throw ConfigError("judge endpoint '" + name + "': temperature must be 0.0");
  if (top_p != 1.0) throw ConfigError("judge endpoint '" + name + "': top_p must be 1.0");
}

EndpointConfig endpoint_from_json(std::string name, const json& j) {
  if (!j.is_object()) throw ConfigError("endpoint '" + name + "': expected an object");
  EndpointConfig c;
  c.name = std::move(name);
  try {
    c.base_url = j.value("base_url", "");
    c.model_name = j.value("model_name", c.name);
    c.temperature = j.value("temperature", 0.0);
    c.top_p = j.value("top_p", 1.0);
    if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::int64_t>();
    c.max_retries = j.value("max_retries", 3);
    c.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(j.value("timeout_s", 60.0) * 1000));
    c.rate_limit = j.value("rate_limit", 0.0);
    auto mode = j.value("cache_mode", std::string("Off"));
    auto parsed = parse_cache_mode(mode);
    if (!parsed) throw ConfigError("endpoint '" + c.name + "': unknown cache_mode '" + mode + "'");
    c.cache_mode = *parsed;
    c.cache_dir = j.value("cache_dir", std::string());
    c.backoff_base = std::chrono::milliseconds(j.value("backoff_ms", 500));
  } catch (const json::exception& e) {
    throw ConfigError("endpoint '" + c.name + "': " + e.what());
  }
  return c;
}

json to_json(const EndpointConfig& c) {
  json j = {{"base_url", c.base_url},
            {"model_name", c.model_name},
            {"temperature", c.temperature},
            {"top_p", c.top_p},
            {"seed", c.seed ? json(*c.seed) : json(nullptr)},
            {"max_retries", c.max_retries},
            {"timeout_s", static_cast<double>(c.timeout.count()) / 1000.0},
            {"rate_limit", c.rate_limit},
            {"cache_mode", to_string(c.cache_mode)},
            {"cache_dir", c.cache_dir.string()},
            {"backoff_ms", c.backoff_base.count()}};
  return j;
}

std::string credential_env_var(std::string_view endpoint_name) {
  std::string out = "ROUNDS_API_KEY_";
  for (unsigned char c : endpoint_name) {
    out.push_back(std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_');
  }
  return out;
}

// --- transport -------------------------------------------------------------

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttpResult post_json(const std::string& base_url, const std::string& path, const std::string& body,
                       const std::vector<std::pair<std::string, std::string>>& headers,
                       std::chrono::milliseconds timeout) override {
    // Split "scheme://host:port/prefix" into the origin and the path prefix.
    std::string origin = base_url;
    std::string prefix;
    auto scheme_end = base_url.find("://");
    auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
      origin = base_url.substr(0, path_start);
      prefix = base_url.substr(path_start);
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    auto res = client.Post(prefix + path, hdrs, body, "application/json");
    HttpResult out;
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  }
};

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json history_json(const ChatHistory& history) {
  json msgs = json::array();
  for (const auto& t : history) msgs.push_back({{"role", to_string(t.role)}, {"content", t.content}});
  return msgs;
}

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

// --- rate limiter ----------------------------------------------------------

RateLimiter::RateLimiter(double rate, double burst)
    : rate_(rate), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)), last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (rate_ <= 0.0) return;
  std::unique_lock lock(mu_);
  for (;;) {
    auto now = std::chrono::steady_clock::now();
    double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    // Sleep while holding the lock so waiters are served in turn.
    std::this_thread::sleep_for(std::chrono::duration<double>((1.0 - tokens_) / rate_));
  }
}

// --- cache -----------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::ifstream in(dir_ / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  auto j = json::parse(ss.str(), nullptr, false);
  // A torn or foreign file is treated as a miss.
  if (j.is_discarded() || !j.is_object() || !j.contains("response") || !j["response"].is_string()) {
    return std::nullopt;
  }
  return j["response"].get<std::string>();
}

void ResponseCache::put(const std::string& key, const std::string& model, const std::string& response) const {
  static std::atomic<std::uint64_t> counter{0};
  json j = {{"key", key}, {"request_digest", key}, {"model", model}, {"response", response}, {"timestamp", utc_timestamp()}};
  std::ostringstream tmp_name;
  tmp_name << key << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "." << counter++;
  auto tmp = dir_ / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache file " + tmp.string());
    out << j.dump(2) << "\n";
  }
  std::error_code ec;
  std::filesystem::rename(tmp, dir_ / (key + ".json"), ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot commit cache file for key " + key);
  }
}

json chat_request_body(const EndpointConfig& config, const ChatHistory& history) {
  json body = {{"model", config.model_name},
               {"messages", history_json(history)},
               {"temperature", config.temperature},
               {"top_p", config.top_p}};
  if (config.seed) body["seed"] = *config.seed;
  return body;
}

std::string ResponseCache::key_for(const EndpointConfig& config, const ChatHistory& history) {
  // nlohmann::json orders object keys, so dump() is canonical.
  return sha256_hex(chat_request_body(config, history).dump());
}

// --- client ----------------------------------------------------------------

ChatClient::ChatClient(EndpointConfig config, std::shared_ptr<HttpTransport> transport,
                       std::shared_ptr<RateLimiter> limiter)
    : config_(std::move(config)), transport_(std::move(transport)), limiter_(std::move(limiter)) {
  config_.validate();
  if (!limiter_) limiter_ = std::make_shared<RateLimiter>(config_.rate_limit);
  if (config_.cache_mode != CacheMode::Off) cache_.emplace(config_.cache_dir);
}

std::string ChatClient::complete(const ChatHistory& history) {
  if (history.empty()) throw PreconditionError("complete: empty history");
  for (const auto& t : history) {
    if (t.role != Role::Assistant && t.content.empty()) {
      throw PreconditionError("complete: empty " + std::string(to_string(t.role)) + " turn");
    }
  }

  std::string key;
  if (cache_) {
    key = ResponseCache::key_for(config_, history);
    if (auto hit = cache_->get(key)) return *hit;
    if (config_.cache_mode == CacheMode::ReadOnly) {
      throw CacheMissError("endpoint '" + config_.name + "': no cached response for " + key);
    }
  }
  std::string reply = call_endpoint(history);
  if (cache_) cache_->put(key, config_.model_name, reply);
  return reply;
}

std::string ChatClient::call_endpoint(const ChatHistory& history) {
  if (!transport_) throw ConfigError("endpoint '" + config_.name + "': no transport");
  if (config_.base_url.empty()) throw ConfigError("endpoint '" + config_.name + "': base_url is empty");

  std::vector<std::pair<std::string, std::string>> headers;
  if (const char* key = std::getenv(credential_env_var(config_.name).c_str()); key && *key) {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = chat_request_body(config_, history).dump();

  std::string last_error;
  bool rate_limited = false;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = config_.backoff_base * (1LL << std::min(attempt - 1, 16));
      std::this_thread::sleep_for(delay);
    }
    limiter_->acquire();
    ++network_calls_;
    HttpResult res = transport_->post_json(config_.base_url, "/chat/completions", body, headers, config_.timeout);

    if (res.status == 0) {
      last_error = "transport failure: " + res.error;
      rate_limited = false;
      continue;
    }
    if (res.status == 429) {
      last_error = "HTTP 429";
      rate_limited = true;
      continue;
    }
    if (res.status >= 500) {
      last_error = "HTTP " + std::to_string(res.status);
      rate_limited = false;
      continue;
    }
    if (res.status < 200 || res.status >= 300) {
      // Client errors will not improve on retry.
      throw TransportError("endpoint '" + config_.name + "': HTTP " + std::to_string(res.status) + ": " +
                           res.body.substr(0, 200));
    }
    auto j = json::parse(res.body, nullptr, false);
    try {
      if (!j.is_discarded()) {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
        if (content.is_null()) return std::string();
      }
    } catch (const json::exception&) {
    }
    throw TransportError("endpoint '" + config_.name + "': malformed completion body");
  }
  std::string msg = "endpoint '" + config_.name + "': giving up after " + std::to_string(config_.max_retries + 1) +
                    " attempts: " + last_error;
  if (rate_limited) throw RateLimitError(msg);
  throw TransportError(msg);
}

// --- stubs -----------------------------------------------------------------

std::string EchoBackend::complete(const ChatHistory& history) {
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->role == Role::User) return it->content;
  }
  return std::string();
}

std::string ScriptedBackend::complete(const ChatHistory&) {
  std::lock_guard lock(mu_);
  ++calls_;
  if (next_ >= replies_.size()) throw TransportError("scripted backend exhausted");
  return replies_[next_++];
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::string RecordingBackend::complete(const ChatHistory& history) {
  {
    std::lock_guard lock(mu_);
    requests_.push_back(history);
  }
  return inner_->complete(history);
}

std::vector<ChatHistory> RecordingBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

}  // namespace rounds

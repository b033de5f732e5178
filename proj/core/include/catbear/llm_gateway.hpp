#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace catbear {

enum class Role { system, user, assistant };
std::string_view to_string(Role r);
Role parse_role(std::string_view s);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct GenerationRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed;

  /// Throws an input error unless: >= 1 message, temperature in [0, 2],
  /// max_tokens > 0, and system/user messages are nonempty.
  void validate() const;
  /// Canonical rendering; also the body sent over the wire.
  nlohmann::ordered_json to_json() const;

  friend bool operator==(const GenerationRequest&, const GenerationRequest&) = default;
};

/// SHA-256 of the canonical JSON rendering; stable across runs and platforms.
std::string prompt_hash(const GenerationRequest& req);

struct GenerationResult {
  std::string text;
  std::string prompt_hash;
  std::string backend_id;
  double latency_ms = 0.0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
  bool from_journal = false;
};

struct BackendReply {
  std::string text;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
};

/// Thrown by a Backend for failures worth retrying (timeouts, 429, 5xx).
class TransientFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One provider. send() returns the reply, throws TransientFailure for
/// retryable problems, or catbear::Error(backend) for application errors.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendReply send(const GenerationRequest& req) = 0;
  virtual std::string id() const = 0;
};

/// Deterministic, thread-safe backend driven by an ordered script or by a
/// responder function. Records every request and the peak number of
/// concurrent send() calls.
class MockBackend : public Backend {
 public:
  struct Step {
    enum class Kind { reply, transient_failure, application_error };
    Kind kind = Kind::reply;
    std::string text;

    static Step ok(std::string text) { return {Kind::reply, std::move(text)}; }
    static Step transient(std::string why = "scripted failure") {
      return {Kind::transient_failure, std::move(why)};
    }
    static Step error(std::string body) { return {Kind::application_error, std::move(body)}; }
  };
  using Responder = std::function<Step(const GenerationRequest&, std::size_t call_index)>;

  explicit MockBackend(std::vector<Step> script, std::string id = "mock");
  explicit MockBackend(Responder responder, std::string id = "mock");

  /// Simulated service time per call, for concurrency tests.
  void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

  BackendReply send(const GenerationRequest& req) override;
  std::string id() const override { return id_; }

  std::size_t calls() const;
  std::vector<GenerationRequest> requests() const;
  std::size_t max_in_flight() const;

 private:
  std::string id_;
  std::vector<Step> script_;
  Responder responder_;
  std::chrono::milliseconds latency_{0};

  mutable std::mutex mu_;
  std::vector<GenerationRequest> requests_;
  std::size_t in_flight_ = 0;
  std::size_t max_in_flight_ = 0;
};

/// Speaks the de-facto chat-completion JSON protocol:
/// POST {base_url}/chat/completions with a bearer token.
class HttpBackend : public Backend {
 public:
  HttpBackend(std::string base_url, std::string api_key, int timeout_seconds = 120);

  BackendReply send(const GenerationRequest& req) override;
  std::string id() const override { return "http:" + base_url_; }

 private:
  std::string base_url_;
  std::string api_key_;
  int timeout_seconds_;
};

struct GatewayConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4-turbo";
  double temperature = 1.0;
  int max_tokens = 1024;
  int parallelism = 4;
  int retry_cap = 3;
  int backoff_ms = 500;
  int backoff_max_ms = 30000;
  /// Minimum spacing between request starts; 0 disables.
  double requests_per_second = 0.0;
  int timeout_seconds = 120;
  std::string api_key_env = "CATBEAR_API_KEY";
  /// When set, every completed call is appended here and replayed on a
  /// matching prompt hash.
  std::string journal_path;
};

/// Append-only JSONL journal of completed calls, keyed by prompt hash.
class RequestJournal {
 public:
  explicit RequestJournal(std::string path);

  std::optional<GenerationResult> lookup(const std::string& hash) const;
  void append(const GenerationRequest& req, const GenerationResult& result);
  std::size_t size() const;

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, GenerationResult> entries_;
};

/// Shareable client: bounded parallelism, request spacing, retry with
/// exponential backoff, optional journal. Not copyable.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, GatewayConfig config);
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// HTTP backend with the key read from config.api_key_env; throws a
  /// configuration error when the variable is unset or empty.
  static std::unique_ptr<Gateway> from_config(const GatewayConfig& config);

  /// Request pre-filled with the configured model and decoding settings.
  GenerationRequest make_request(std::vector<ChatMessage> messages) const;

  GenerationResult complete(const GenerationRequest& req);

  const GatewayConfig& config() const { return config_; }
  std::string backend_id() const { return backend_->id(); }
  /// Backend attempts made so far, including retries.
  std::size_t attempts() const;

 private:
  void acquire_slot();
  void release_slot();
  void pace();

  std::shared_ptr<Backend> backend_;
  GatewayConfig config_;
  std::unique_ptr<RequestJournal> journal_;

  mutable std::mutex mu_;
  std::condition_variable slot_cv_;
  int in_flight_ = 0;
  std::size_t attempts_ = 0;
  std::chrono::steady_clock::time_point next_start_{};
  std::mutex pace_mu_;
};

}  // namespace catbear

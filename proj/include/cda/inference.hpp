#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace cda {

enum class EndpointRole { teacher, student };

struct EndpointConfig {
  std::string base_url;
  std::string model_id;
  std::string api_key_env;  // bearer token source; empty means no auth
  double temperature = 0.0;
  int max_tokens = 16;
  int timeout_ms = 60000;
  int max_retries = 3;
  int max_in_flight = 4;
  int backoff_base_ms = 500;
  EndpointRole role = EndpointRole::student;

  /// Students decode greedily for evaluation; teachers sample at 0.7.
  static EndpointConfig defaults_for(EndpointRole role);

  /// Throws ConfigError on a violated invariant.
  void validate() const;

  bool operator==(const EndpointConfig&) const = default;
};

nlohmann::json to_json(const EndpointConfig& config);
/// Missing fields take the defaults for `role` (or the role in `j`).
EndpointConfig endpoint_from_json(const nlohmann::json& j,
                                  EndpointRole role = EndpointRole::student);

/// A prompt plus an opaque tag (the instance id when there is one). The tag
/// never goes on the wire; mock backends may match on it.
struct ChatRequest {
  std::string prompt;
  std::string tag;
};

struct Completion {
  std::string text;
  std::string finish_reason;
  std::size_t request_index = 0;
};

/// Result of one wire attempt, before retry classification.
struct Attempt {
  enum class Kind {
    ok,
    timeout,
    connection_error,
    http_error,
    empty_choice,
    malformed,
    no_rule,
  };
  Kind kind = Kind::ok;
  int status = 0;
  std::string text;
  std::string finish_reason;
  std::string body;
};

/// Anything that can answer a chat request: a network endpoint or a mock.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Attempt send(const EndpointConfig& config,
                       const ChatRequest& request) = 0;
};

/// OpenAI-compatible chat-completions over HTTP(S).
class HttpBackend final : public ChatBackend {
 public:
  Attempt send(const EndpointConfig& config,
               const ChatRequest& request) override;

  /// The JSON body sent for `prompt` under `config`.
  static nlohmann::json request_body(const EndpointConfig& config,
                                     const std::string& prompt);
};

/// Per-item failure surfaced by complete_many.
struct RequestError {
  enum class Kind { transport, protocol, empty_choice, no_rule };
  Kind kind = Kind::transport;
  int status = 0;
  std::string message;
  std::size_t request_index = 0;
};

using CompletionResult = std::variant<Completion, RequestError>;

struct ClientCounters {
  std::uint64_t requests = 0;
  std::uint64_t attempts = 0;
  std::uint64_t retries = 0;
  std::uint64_t failures = 0;
};

/// Retrying client bound to one endpoint. Copies share the in-flight limit
/// and the counters.
class ChatClient {
 public:
  ChatClient(EndpointConfig config, std::shared_ptr<ChatBackend> backend);

  /// One request, retried on timeouts, connection errors, 429 and 5xx.
  /// Throws TransportError, ProtocolError, EmptyChoice or NoRuleMatches.
  Completion complete(const ChatRequest& request, std::size_t index = 0) const;
  Completion complete(const std::string& prompt) const;

  /// Index-aligned results with at most max_in_flight requests outstanding.
  /// Item failures are returned in place, never thrown.
  std::vector<CompletionResult> complete_many(
      const std::vector<ChatRequest>& requests) const;
  std::vector<CompletionResult> complete_many(
      const std::vector<std::string>& prompts) const;

  const EndpointConfig& config() const { return config_; }
  ClientCounters counters() const;

  /// Same backend and shared state, different decoding settings.
  ChatClient with_config(EndpointConfig config) const;

 private:
  struct Shared;
  ChatClient(EndpointConfig config, std::shared_ptr<ChatBackend> backend,
             std::shared_ptr<Shared> shared);

  EndpointConfig config_;
  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<Shared> shared_;
};

/// Maps endpoint configs to backends. URLs registered here (typically
/// mock://...) win; any other http(s) URL gets an HttpBackend.
class BackendResolver {
 public:
  using Factory =
      std::function<std::shared_ptr<ChatBackend>(const EndpointConfig&)>;

  void add(std::string url, std::shared_ptr<ChatBackend> backend);
  void add_prefix(std::string url_prefix, Factory factory);

  std::shared_ptr<ChatBackend> resolve(const EndpointConfig& config) const;
  ChatClient client(const EndpointConfig& config) const;

 private:
  std::map<std::string, std::shared_ptr<ChatBackend>> exact_;
  std::vector<std::pair<std::string, Factory>> prefixes_;
};

}  // namespace cda

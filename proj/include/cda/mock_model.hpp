#pragma once

#include <cstddef>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cda/inference.hpp"

namespace cda {

/// One scripted reply: text, an HTTP error status, or a timeout.
struct MockStep {
  enum class Kind { text, http_error, timeout };
  Kind kind = Kind::text;
  std::string text;
  int status = 0;
  int latency_ms = 0;

  static MockStep reply(std::string text, int latency_ms = 0) {
    return {Kind::text, std::move(text), 0, latency_ms};
  }
  static MockStep error(int status) { return {Kind::http_error, {}, status, 0}; }
  static MockStep timed_out() { return {Kind::timeout, {}, 0, 0}; }
};

struct MockRule {
  enum class Match { instance_id, contains, any };
  Match match = Match::any;
  std::string pattern;
  // Served in order; the last step repeats once the script runs out.
  std::vector<MockStep> steps;

  static MockRule by_id(std::string id, std::vector<MockStep> steps);
  static MockRule containing(std::string needle, std::vector<MockStep> steps);
  static MockRule fallback(std::vector<MockStep> steps);
};

/// Parses [{"id"|"contains"|"default": ..., "response"|"sequence"|"error":
/// ..., "latency_ms": n}, ...].
std::vector<MockRule> mock_rules_from_json(const nlohmann::json& j);

using MockResponder = std::function<MockStep(const ChatRequest&)>;

struct MockInvocation {
  std::string prompt;
  std::string tag;
  MockStep::Kind kind = MockStep::Kind::text;
  std::string reply;
};

/// In-process deterministic model. Rules are tried in order; the first match
/// answers. Thread-safe; every call is appended to the invocation log.
class MockModel final : public ChatBackend {
 public:
  explicit MockModel(std::vector<MockRule> rules);
  explicit MockModel(MockResponder responder);

  Attempt send(const EndpointConfig& config,
               const ChatRequest& request) override;

  std::vector<MockInvocation> log() const;
  std::size_t invocation_count() const;

 private:
  std::vector<MockRule> rules_;
  std::vector<std::size_t> cursors_;
  MockResponder responder_;
  mutable std::mutex mutex_;
  std::vector<MockInvocation> log_;
};

}  // namespace cda

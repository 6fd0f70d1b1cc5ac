#include "cda/mock_model.hpp"

#include <chrono>
#include <thread>

#include "cda/error.hpp"

namespace cda {

using nlohmann::json;

MockRule MockRule::by_id(std::string id, std::vector<MockStep> steps) {
  return {Match::instance_id, std::move(id), std::move(steps)};
}

MockRule MockRule::containing(std::string needle, std::vector<MockStep> steps) {
  return {Match::contains, std::move(needle), std::move(steps)};
}

MockRule MockRule::fallback(std::vector<MockStep> steps) {
  return {Match::any, {}, std::move(steps)};
}

namespace {

MockStep step_from_json(const json& j, int latency_ms) {
  if (j.is_string()) return MockStep::reply(j.get<std::string>(), latency_ms);
  if (j.is_object()) {
    if (j.contains("error")) return MockStep::error(j.at("error").get<int>());
    if (j.value("timeout", false)) return MockStep::timed_out();
    return MockStep::reply(j.at("response").get<std::string>(),
                           j.value("latency_ms", latency_ms));
  }
  throw ConfigError("mock step must be a string or object: " + j.dump());
}

}  // namespace

std::vector<MockRule> mock_rules_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("mock rules must be an array");
  std::vector<MockRule> rules;
  for (const auto& r : j) {
    MockRule rule;
    if (r.contains("id")) {
      rule.match = MockRule::Match::instance_id;
      rule.pattern = r.at("id").get<std::string>();
    } else if (r.contains("contains")) {
      rule.match = MockRule::Match::contains;
      rule.pattern = r.at("contains").get<std::string>();
    } else if (r.value("default", false)) {
      rule.match = MockRule::Match::any;
    } else {
      throw ConfigError("mock rule needs id, contains or default: " + r.dump());
    }
    const int latency = r.value("latency_ms", 0);
    if (r.contains("sequence")) {
      for (const auto& s : r.at("sequence")) {
        rule.steps.push_back(step_from_json(s, latency));
      }
    } else if (r.contains("response")) {
      rule.steps.push_back(MockStep::reply(r.at("response").get<std::string>(), latency));
    } else if (r.contains("error")) {
      rule.steps.push_back(MockStep::error(r.at("error").get<int>()));
    } else {
      throw ConfigError("mock rule needs response, sequence or error: " + r.dump());
    }
    if (rule.steps.empty()) throw ConfigError("mock rule with empty sequence");
    rules.push_back(std::move(rule));
  }
  return rules;
}

MockModel::MockModel(std::vector<MockRule> rules)
    : rules_(std::move(rules)), cursors_(rules_.size(), 0) {}

MockModel::MockModel(MockResponder responder)
    : responder_(std::move(responder)) {}

Attempt MockModel::send(const EndpointConfig&, const ChatRequest& request) {
  MockStep step;
  bool matched = false;
  {
    std::lock_guard lock(mutex_);
    if (responder_) {
      step = responder_(request);
      matched = true;
    } else {
      for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& rule = rules_[i];
        const bool hit =
            rule.match == MockRule::Match::any ||
            (rule.match == MockRule::Match::instance_id && request.tag == rule.pattern) ||
            (rule.match == MockRule::Match::contains &&
             request.prompt.find(rule.pattern) != std::string::npos);
        if (!hit) continue;
        const auto pos = std::min(cursors_[i], rule.steps.size() - 1);
        step = rule.steps[pos];
        ++cursors_[i];
        matched = true;
        break;
      }
    }
    log_.push_back({request.prompt, request.tag, step.kind,
                    matched ? step.text : std::string()});
  }
  Attempt a;
  if (!matched) {
    a.kind = Attempt::Kind::no_rule;
    return a;
  }
  if (step.latency_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(step.latency_ms));
  }
  switch (step.kind) {
    case MockStep::Kind::text:
      a.kind = Attempt::Kind::ok;
      a.status = 200;
      a.text = std::move(step.text);
      a.finish_reason = "stop";
      break;
    case MockStep::Kind::http_error:
      a.kind = Attempt::Kind::http_error;
      a.status = step.status;
      a.body = "mock error";
      break;
    case MockStep::Kind::timeout:
      a.kind = Attempt::Kind::timeout;
      break;
  }
  return a;
}

std::vector<MockInvocation> MockModel::log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t MockModel::invocation_count() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

}  // namespace cda

#include "cda/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <semaphore>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "cda/error.hpp"
#include "cda/text.hpp"

namespace cda {

using nlohmann::json;

EndpointConfig EndpointConfig::defaults_for(EndpointRole role) {
  EndpointConfig c;
  c.role = role;
  if (role == EndpointRole::teacher) {
    c.temperature = 0.7;
    c.max_tokens = 256;
  } else {
    c.temperature = 0.0;
    c.max_tokens = 16;
  }
  return c;
}

void EndpointConfig::validate() const {
  if (base_url.empty()) throw ConfigError("endpoint base_url is empty");
  if (!std::isfinite(temperature) || temperature < 0) {
    throw ConfigError("endpoint temperature must be finite and >= 0");
  }
  if (max_tokens <= 0) throw ConfigError("endpoint max_tokens must be > 0");
  if (max_retries < 0) throw ConfigError("endpoint max_retries must be >= 0");
  if (max_in_flight < 1) throw ConfigError("endpoint max_in_flight must be >= 1");
  if (timeout_ms <= 0) throw ConfigError("endpoint timeout_ms must be > 0");
}

json to_json(const EndpointConfig& c) {
  return json{{"base_url", c.base_url},
              {"model_id", c.model_id},
              {"api_key_env", c.api_key_env},
              {"temperature", c.temperature},
              {"max_tokens", c.max_tokens},
              {"timeout_ms", c.timeout_ms},
              {"max_retries", c.max_retries},
              {"max_in_flight", c.max_in_flight},
              {"backoff_base_ms", c.backoff_base_ms},
              {"role", c.role == EndpointRole::teacher ? "teacher" : "student"}};
}

EndpointConfig endpoint_from_json(const json& j, EndpointRole role) {
  if (j.contains("role")) {
    const auto r = j.at("role").get<std::string>();
    if (r == "teacher") {
      role = EndpointRole::teacher;
    } else if (r == "student") {
      role = EndpointRole::student;
    } else {
      throw ConfigError("unknown endpoint role '" + r + "'");
    }
  }
  auto c = EndpointConfig::defaults_for(role);
  c.base_url = j.value("base_url", c.base_url);
  c.model_id = j.value("model_id", c.model_id);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.temperature = j.value("temperature", c.temperature);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.backoff_base_ms = j.value("backoff_base_ms", c.backoff_base_ms);
  return c;
}

// ---------------------------------------------------------------- http

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("base_url lacks a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

std::string excerpt(const std::string& s, std::size_t n = 200) {
  return s.size() <= n ? s : s.substr(0, n) + "...";
}

}  // namespace

json HttpBackend::request_body(const EndpointConfig& config,
                               const std::string& prompt) {
  return json{{"model", config.model_id},
              {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
              {"temperature", config.temperature},
              {"max_tokens", config.max_tokens}};
}

Attempt HttpBackend::send(const EndpointConfig& config,
                          const ChatRequest& request) {
  const auto url = split_url(config.base_url);
  httplib::Client client(url.origin);
  const auto timeout = std::chrono::milliseconds(config.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!config.api_key_env.empty()) {
    if (const char* key = std::getenv(config.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const auto body = request_body(config, request.prompt).dump();
  auto res = client.Post(url.path + "/chat/completions", headers, body,
                         "application/json");
  Attempt a;
  if (!res) {
    const auto err = res.error();
    a.kind = (err == httplib::Error::ConnectionTimeout ||
              err == httplib::Error::Read || err == httplib::Error::Write)
                 ? Attempt::Kind::timeout
                 : Attempt::Kind::connection_error;
    a.body = httplib::to_string(err);
    return a;
  }
  a.status = res->status;
  a.body = res->body;
  if (res->status != 200) {
    a.kind = Attempt::Kind::http_error;
    return a;
  }
  auto parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    a.kind = Attempt::Kind::malformed;
    return a;
  }
  const auto choices = parsed.find("choices");
  if (choices == parsed.end() || !choices->is_array() || choices->empty()) {
    a.kind = Attempt::Kind::empty_choice;
    return a;
  }
  const auto& first = (*choices)[0];
  const auto message = first.find("message");
  if (message == first.end() || !message->is_object() ||
      !message->contains("content") || !(*message)["content"].is_string()) {
    a.kind = Attempt::Kind::empty_choice;
    return a;
  }
  a.kind = Attempt::Kind::ok;
  a.text = (*message)["content"].get<std::string>();
  if (auto fr = first.find("finish_reason"); fr != first.end() && fr->is_string()) {
    a.finish_reason = fr->get<std::string>();
  }
  return a;
}

// ---------------------------------------------------------------- client

struct ChatClient::Shared {
  explicit Shared(int max_in_flight) : slots(max_in_flight) {}
  std::counting_semaphore<> slots;
  std::atomic<std::uint64_t> requests{0};
  std::atomic<std::uint64_t> attempts{0};
  std::atomic<std::uint64_t> retries{0};
  std::atomic<std::uint64_t> failures{0};
};

ChatClient::ChatClient(EndpointConfig config,
                       std::shared_ptr<ChatBackend> backend)
    : ChatClient(config, std::move(backend),
                 std::make_shared<Shared>(std::max(1, config.max_in_flight))) {}

ChatClient::ChatClient(EndpointConfig config,
                       std::shared_ptr<ChatBackend> backend,
                       std::shared_ptr<Shared> shared)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      shared_(std::move(shared)) {
  config_.validate();
  if (!backend_) throw ConfigError("chat client without backend");
}

ChatClient ChatClient::with_config(EndpointConfig config) const {
  return ChatClient(std::move(config), backend_, shared_);
}

ClientCounters ChatClient::counters() const {
  return {shared_->requests.load(), shared_->attempts.load(),
          shared_->retries.load(), shared_->failures.load()};
}

namespace {

bool retryable(const Attempt& a) {
  switch (a.kind) {
    case Attempt::Kind::timeout:
    case Attempt::Kind::connection_error:
      return true;
    case Attempt::Kind::http_error:
      return a.status == 429 || a.status >= 500;
    default:
      return false;
  }
}

void backoff_sleep(int base_ms, int attempt) {
  if (base_ms <= 0) return;
  thread_local std::mt19937 rng{std::random_device{}()};
  const auto scaled = static_cast<double>(base_ms) * std::pow(2.0, attempt);
  std::uniform_real_distribution<double> jitter(0.0, base_ms);
  const auto ms = std::min(scaled + jitter(rng), 60000.0);
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

}  // namespace

Completion ChatClient::complete(const ChatRequest& request,
                                std::size_t index) const {
  shared_->requests.fetch_add(1);
  shared_->slots.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{shared_->slots};

  Attempt last;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      shared_->retries.fetch_add(1);
      backoff_sleep(config_.backoff_base_ms, attempt - 1);
    }
    shared_->attempts.fetch_add(1);
    last = backend_->send(config_, request);
    if (last.kind == Attempt::Kind::ok) {
      return Completion{std::move(last.text), std::move(last.finish_reason), index};
    }
    if (!retryable(last)) break;
  }
  shared_->failures.fetch_add(1);
  switch (last.kind) {
    case Attempt::Kind::http_error:
      if (!retryable(last)) throw ProtocolError(last.status, excerpt(last.body));
      throw TransportError(fmt::format("HTTP {} after {} retries: {}", last.status,
                                       config_.max_retries, excerpt(last.body)));
    case Attempt::Kind::malformed:
      throw ProtocolError(last.status, excerpt(last.body));
    case Attempt::Kind::empty_choice:
      throw EmptyChoice();
    case Attempt::Kind::no_rule:
      throw NoRuleMatches(excerpt(request.prompt, 80));
    default:
      throw TransportError(fmt::format("{} after {} retries{}",
                                       last.kind == Attempt::Kind::timeout
                                           ? "timeout"
                                           : "connection error",
                                       config_.max_retries,
                                       last.body.empty() ? "" : ": " + last.body));
  }
}

Completion ChatClient::complete(const std::string& prompt) const {
  return complete(ChatRequest{prompt, {}});
}

std::vector<CompletionResult> ChatClient::complete_many(
    const std::vector<ChatRequest>& requests) const {
  std::vector<CompletionResult> results(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
      try {
        results[i] = complete(requests[i], i);
      } catch (const ProtocolError& e) {
        results[i] = RequestError{RequestError::Kind::protocol, e.status(), e.what(), i};
      } catch (const EmptyChoice& e) {
        results[i] = RequestError{RequestError::Kind::empty_choice, 0, e.what(), i};
      } catch (const NoRuleMatches& e) {
        results[i] = RequestError{RequestError::Kind::no_rule, 0, e.what(), i};
      } catch (const std::exception& e) {
        results[i] = RequestError{RequestError::Kind::transport, 0, e.what(), i};
      }
    }
  };
  const auto n_workers = std::min<std::size_t>(
      requests.size(), static_cast<std::size_t>(config_.max_in_flight));
  if (n_workers <= 1) {
    worker();
    return results;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

std::vector<CompletionResult> ChatClient::complete_many(
    const std::vector<std::string>& prompts) const {
  std::vector<ChatRequest> requests;
  requests.reserve(prompts.size());
  for (const auto& p : prompts) requests.push_back({p, {}});
  return complete_many(requests);
}

// ---------------------------------------------------------------- resolver

void BackendResolver::add(std::string url, std::shared_ptr<ChatBackend> backend) {
  exact_[std::move(url)] = std::move(backend);
}

void BackendResolver::add_prefix(std::string url_prefix, Factory factory) {
  prefixes_.emplace_back(std::move(url_prefix), std::move(factory));
}

std::shared_ptr<ChatBackend> BackendResolver::resolve(
    const EndpointConfig& config) const {
  if (auto it = exact_.find(config.base_url); it != exact_.end()) {
    return it->second;
  }
  for (const auto& [prefix, factory] : prefixes_) {
    if (config.base_url.rfind(prefix, 0) == 0) return factory(config);
  }
  if (config.base_url.rfind("http://", 0) == 0 ||
      config.base_url.rfind("https://", 0) == 0) {
    return std::make_shared<HttpBackend>();
  }
  throw ConfigError("no backend registered for " + config.base_url);
}

ChatClient BackendResolver::client(const EndpointConfig& config) const {
  return ChatClient(config, resolve(config));
}

}  // namespace cda

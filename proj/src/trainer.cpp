#include "cda/trainer.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "cda/dataset_io.hpp"
#include "cda/error.hpp"
#include "cda/text.hpp"

extern "C" char** environ;

namespace cda {

namespace fs = std::filesystem;
using nlohmann::json;

CheckpointRef base_checkpoint(const EndpointConfig& student_base) {
  return CheckpointRef{std::string(kBaseCheckpointId), student_base.model_id,
                       std::nullopt, student_base};
}

json to_json(const CheckpointRef& ref) {
  json j{{"id", ref.id}, {"location", ref.location}, {"serving", to_json(ref.serving)}};
  j["parent"] = ref.parent ? json(*ref.parent) : json();
  return j;
}

CheckpointRef checkpoint_from_json(const json& j) {
  CheckpointRef ref;
  ref.id = j.at("id").get<std::string>();
  ref.location = j.value("location", std::string());
  if (j.contains("parent") && !j.at("parent").is_null()) {
    ref.parent = j.at("parent").get<std::string>();
  }
  ref.serving = endpoint_from_json(j.at("serving"));
  return ref;
}

// ---------------------------------------------------------------- config

void TrainerConfig::validate() const {
  if (epochs < 1) throw ConfigError("trainer epochs must be >= 1");
  if (const auto* cmd = std::get_if<CommandHookSpec>(&hook)) {
    if (cmd->argv.empty()) throw ConfigError("trainer command is empty");
    for (std::string_view ph : {"{train_file}", "{base}", "{out_dir}"}) {
      const bool found = std::any_of(cmd->argv.begin(), cmd->argv.end(),
                                     [&](const std::string& a) {
                                       return a.find(ph) != std::string::npos;
                                     });
      if (!found) {
        throw ConfigError(fmt::format("trainer command lacks placeholder {}", ph));
      }
    }
  } else if (const auto* http = std::get_if<HttpHookSpec>(&hook)) {
    if (http->url.empty()) throw ConfigError("trainer http hook url is empty");
  }
}

namespace {

std::vector<std::string> split_command(const std::string& command) {
  std::istringstream in(command);
  std::vector<std::string> argv;
  for (std::string a; in >> a;) argv.push_back(a);
  return argv;
}

std::string passthrough_value(const json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

json to_json(const TrainerConfig& c) {
  json hook;
  if (const auto* cmd = std::get_if<CommandHookSpec>(&c.hook)) {
    hook = json{{"type", "command"}, {"command", cmd->argv}};
  } else if (const auto* http = std::get_if<HttpHookSpec>(&c.hook)) {
    hook = json{{"type", "http"},
                {"url", http->url},
                {"poll_interval_ms", http->poll_interval_ms},
                {"job_timeout_ms", http->job_timeout_ms}};
  } else {
    hook = json{{"type", "mock"},
                {"schedule", std::get<MockHookSpec>(c.hook).schedule}};
  }
  return json{{"hook", hook},
              {"epochs", c.epochs},
              {"passthrough", c.passthrough},
              {"work_dir", c.work_dir.string()},
              {"manifest_timeout_ms", c.manifest_timeout_ms},
              {"manifest_poll_ms", c.manifest_poll_ms}};
}

TrainerConfig trainer_config_from_json(const json& j) {
  TrainerConfig c;
  if (j.contains("hook")) {
    const auto& h = j.at("hook");
    const auto type = h.value("type", std::string("command"));
    if (type == "command") {
      const auto& cmd = h.at("command");
      c.hook = CommandHookSpec{cmd.is_string() ? split_command(cmd.get<std::string>())
                                               : cmd.get<std::vector<std::string>>()};
    } else if (type == "http") {
      HttpHookSpec spec;
      spec.url = h.at("url").get<std::string>();
      spec.poll_interval_ms = h.value("poll_interval_ms", spec.poll_interval_ms);
      spec.job_timeout_ms = h.value("job_timeout_ms", spec.job_timeout_ms);
      c.hook = spec;
    } else if (type == "mock") {
      c.hook = MockHookSpec{h.value("schedule", json::array())};
    } else {
      throw ConfigError("unknown trainer hook type '" + type + "'");
    }
  }
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("passthrough")) {
    for (const auto& [k, v] : j.at("passthrough").items()) {
      c.passthrough[k] = passthrough_value(v);
    }
  }
  c.work_dir = j.value("work_dir", std::string());
  c.manifest_timeout_ms = j.value("manifest_timeout_ms", c.manifest_timeout_ms);
  c.manifest_poll_ms = j.value("manifest_poll_ms", c.manifest_poll_ms);
  c.validate();
  return c;
}

// ---------------------------------------------------------------- command hook

CommandHook::CommandHook(CommandHookSpec spec) : spec_(std::move(spec)) {}

std::vector<std::string> CommandHook::expand(const HookInvocation& inv) const {
  const std::vector<std::pair<std::string, std::string>> values = {
      {"{train_file}", inv.train_file.string()},
      {"{base_id}", inv.base.id},
      {"{base}", inv.base.location},
      {"{out_dir}", inv.out_dir.string()},
      {"{epochs}", std::to_string(inv.epochs)},
  };
  std::vector<std::string> argv;
  argv.reserve(spec_.argv.size());
  for (const auto& arg : spec_.argv) {
    std::string out;
    for (std::size_t i = 0; i < arg.size();) {
      bool replaced = false;
      for (const auto& [ph, v] : values) {
        if (arg.compare(i, ph.size(), ph) == 0) {
          out += v;
          i += ph.size();
          replaced = true;
          break;
        }
      }
      if (!replaced) out += arg[i++];
    }
    argv.push_back(std::move(out));
  }
  return argv;
}

namespace {

std::string env_key(const std::string& key) {
  std::string out = "TRAINER_OPT_";
  for (char c : key) {
    out += std::isalnum(static_cast<unsigned char>(c))
               ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
               : '_';
  }
  return out;
}

std::string tail_of(const fs::path& file, std::size_t bytes = 2000) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  auto s = ss.str();
  return s.size() <= bytes ? s : s.substr(s.size() - bytes);
}

}  // namespace

void CommandHook::run(const HookInvocation& inv) {
  const auto argv = expand(inv);
  fs::create_directories(inv.out_dir);
  const auto log_path = inv.out_dir / "hook.log";

  std::vector<std::pair<std::string, std::string>> env = {
      {"TRAINER_EPOCHS", std::to_string(inv.epochs)}};
  for (const auto& [k, v] : inv.passthrough) env.emplace_back(env_key(k), v);

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  const auto log_str = log_path.string();

  // Child environment is assembled before fork; only async-signal-safe calls
  // happen in the child.
  std::vector<std::string> env_strings;
  for (char** e = environ; *e != nullptr; ++e) {
    std::string_view entry(*e);
    const auto name = entry.substr(0, entry.find('='));
    const bool overridden = std::any_of(env.begin(), env.end(), [&](const auto& kv) {
      return kv.first == name;
    });
    if (!overridden) env_strings.emplace_back(entry);
  }
  for (const auto& [k, v] : env) env_strings.push_back(k + "=" + v);
  std::vector<char*> cenv;
  for (auto& e : env_strings) cenv.push_back(e.data());
  cenv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw HookFailed(-1, "fork failed");
  if (pid == 0) {
    const int fd = ::open(log_str.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      ::dup2(fd, STDOUT_FILENO);
      ::dup2(fd, STDERR_FILENO);
      ::close(fd);
    }
    ::execvpe(cargv[0], cargv.data(), cenv.data());
    constexpr char kMsg[] = "exec failed\n";
    [[maybe_unused]] auto n = ::write(STDERR_FILENO, kMsg, sizeof(kMsg) - 1);
    ::_exit(127);
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw HookFailed(-1, "waitpid failed");
  }
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  if (code != 0) throw HookFailed(code, tail_of(log_path));
}

// ---------------------------------------------------------------- http hook

HttpHook::HttpHook(HttpHookSpec spec) : spec_(std::move(spec)) {}

json HttpHook::job_request(const HookInvocation& inv) {
  return json{{"base", inv.base.location},
              {"base_id", inv.base.id},
              {"train_file", inv.train_file.string()},
              {"out_dir", inv.out_dir.string()},
              {"epochs", inv.epochs},
              {"passthrough", inv.passthrough}};
}

void HttpHook::run(const HookInvocation& inv) {
  const auto scheme_end = spec_.url.find("://");
  const auto path_start =
      scheme_end == std::string::npos ? std::string::npos : spec_.url.find('/', scheme_end + 3);
  const auto origin = spec_.url.substr(0, path_start);
  auto prefix = path_start == std::string::npos ? std::string() : spec_.url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  fs::create_directories(inv.out_dir);
  httplib::Client client(origin);
  auto res = client.Post(prefix + "/jobs", job_request(inv).dump(), "application/json");
  if (!res) throw HookFailed(-1, "job submission failed: " + httplib::to_string(res.error()));
  if (res->status / 100 != 2) throw HookFailed(res->status, res->body.substr(0, 2000));
  const auto submitted = json::parse(res->body, nullptr, false);
  if (submitted.is_discarded() || !submitted.contains("job_id")) {
    throw HookFailed(res->status, "job submission response lacks job_id");
  }
  const auto job_id = passthrough_value(submitted.at("job_id"));

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(spec_.job_timeout_ms);
  while (true) {
    auto poll = client.Get(prefix + "/jobs/" + job_id);
    if (!poll) throw HookFailed(-1, "job poll failed: " + httplib::to_string(poll.error()));
    if (poll->status / 100 != 2) throw HookFailed(poll->status, poll->body.substr(0, 2000));
    const auto state = json::parse(poll->body, nullptr, false);
    const auto status = state.is_object() ? state.value("status", std::string()) : std::string();
    if (status == "succeeded" || status == "done" || status == "completed") return;
    if (status == "failed" || status == "error") {
      throw HookFailed(poll->status, state.value("log", std::string()));
    }
    if (std::chrono::steady_clock::now() > deadline) {
      throw HookFailed(-1, "timed out waiting for job " + job_id);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(spec_.poll_interval_ms));
  }
}

std::shared_ptr<TrainerHook> make_hook(const TrainerConfig& config) {
  if (const auto* cmd = std::get_if<CommandHookSpec>(&config.hook)) {
    return std::make_shared<CommandHook>(*cmd);
  }
  if (const auto* http = std::get_if<HttpHookSpec>(&config.hook)) {
    return std::make_shared<HttpHook>(*http);
  }
  throw ConfigError("mock trainer hooks must be supplied by the caller");
}

// ---------------------------------------------------------------- manifest

void write_manifest(const fs::path& out_dir,
                    const std::map<std::string, std::string>& fields) {
  std::string body;
  for (const auto& [k, v] : fields) body += k + "=" + v + "\n";
  write_file_atomic(out_dir / kManifestName, body);
}

std::map<std::string, std::string> read_manifest(const fs::path& file) {
  std::map<std::string, std::string> out;
  for (const auto& raw : text::split_lines(read_file(file))) {
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ManifestMalformed("manifest line without '=': " + std::string(line));
    }
    out[std::string(text::trim(line.substr(0, eq)))] =
        std::string(text::trim(line.substr(eq + 1)));
  }
  return out;
}

// ---------------------------------------------------------------- gateway

std::size_t export_training_file(const Dataset& dataset, const fs::path& path) {
  if (dataset.empty()) throw PreconditionError("cannot export an empty training set");
  std::string body;
  for (const auto& inst : dataset.instances) {
    body += to_json(render_qa(inst)).dump();
    body += '\n';
  }
  write_file_atomic(path, body);
  return dataset.size();
}

CheckpointRef train(const TrainerConfig& config, TrainerHook& hook,
                    const CheckpointRef& base, const fs::path& train_file,
                    const fs::path& out_dir) {
  config.validate();
  std::error_code ec;
  if (!fs::is_regular_file(train_file, ec) || fs::file_size(train_file, ec) == 0) {
    throw PreconditionError("training file missing or empty: " + train_file.string());
  }
  const auto manifest_path = out_dir / kManifestName;
  fs::remove(manifest_path, ec);
  fs::create_directories(out_dir);

  hook.run(HookInvocation{base, fs::absolute(train_file), fs::absolute(out_dir),
                          config.epochs, config.passthrough});

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(config.manifest_timeout_ms);
  while (!fs::exists(manifest_path)) {
    if (std::chrono::steady_clock::now() > deadline) {
      throw ManifestMissing("no manifest in " + out_dir.string());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(config.manifest_poll_ms));
  }
  const auto fields = read_manifest(manifest_path);
  for (const char* key : {"checkpoint_id", "base_url", "model_id"}) {
    auto it = fields.find(key);
    if (it == fields.end() || it->second.empty()) {
      throw ManifestMalformed(fmt::format("manifest lacks '{}'", key));
    }
  }
  CheckpointRef ref;
  ref.id = fields.at("checkpoint_id");
  if (ref.id == base.id || ref.id == kBaseCheckpointId) {
    throw ManifestMalformed("checkpoint id '" + ref.id + "' would create a cycle");
  }
  auto loc = fields.find("location");
  ref.location = loc != fields.end() ? loc->second : fs::absolute(out_dir).string();
  ref.parent = base.id;
  ref.serving = base.serving;
  ref.serving.base_url = fields.at("base_url");
  ref.serving.model_id = fields.at("model_id");
  return ref;
}

// ---------------------------------------------------------------- mock

ModelFactory mock_factory(MockResponder responder) {
  return [responder = std::move(responder)] {
    return std::make_shared<MockModel>(responder);
  };
}

ModelFactory mock_factory(std::vector<MockRule> rules) {
  return [rules = std::move(rules)] { return std::make_shared<MockModel>(rules); };
}

MockTrainer::MockTrainer(std::vector<ModelFactory> schedule, fs::path state_dir)
    : schedule_(std::move(schedule)), state_dir_(std::move(state_dir)) {
  if (schedule_.empty()) throw ConfigError("mock trainer schedule is empty");
}

std::shared_ptr<MockTrainer> MockTrainer::from_spec(const MockHookSpec& spec,
                                                    fs::path state_dir) {
  std::vector<ModelFactory> schedule;
  for (const auto& rules : spec.schedule) {
    schedule.push_back(mock_factory(mock_rules_from_json(rules)));
  }
  return std::make_shared<MockTrainer>(std::move(schedule), std::move(state_dir));
}

std::size_t MockTrainer::completed_rounds() const {
  if (state_dir_.empty()) return calls_.size();
  const auto ledger = state_dir_ / "mock_trainer.jsonl";
  if (!fs::exists(ledger)) return 0;
  return read_jsonl(ledger).size();
}

void MockTrainer::run(const HookInvocation& inv) {
  std::lock_guard lock(mutex_);
  const auto round = completed_rounds() + 1;
  MockTrainingCall call{inv.base.id, text::sha256_hex(read_file(inv.train_file)),
                        round, fmt::format("mock-ckpt-{}", round)};
  if (!state_dir_.empty()) {
    const auto ledger = state_dir_ / "mock_trainer.jsonl";
    std::string body = fs::exists(ledger) ? read_file(ledger) : std::string();
    body += json{{"base_id", call.base_id},
                 {"train_file_sha256", call.train_file_sha256},
                 {"round", call.round},
                 {"checkpoint_id", call.checkpoint_id}}
                .dump();
    body += '\n';
    write_file_atomic(ledger, body);
  }
  write_manifest(inv.out_dir, {{"checkpoint_id", call.checkpoint_id},
                               {"base_url", fmt::format("mock://trainer/{}", round)},
                               {"model_id", call.checkpoint_id}});
  calls_.push_back(std::move(call));
}

std::shared_ptr<ChatBackend> MockTrainer::model_for_round(std::size_t round) {
  std::lock_guard lock(mutex_);
  auto& slot = models_[round];
  if (!slot) {
    const auto idx = std::min(round == 0 ? 0 : round - 1, schedule_.size() - 1);
    slot = schedule_[idx]();
  }
  return slot;
}

void MockTrainer::attach(BackendResolver& resolver) {
  resolver.add_prefix("mock://trainer/", [this](const EndpointConfig& c) {
    const auto round = std::stoul(c.base_url.substr(std::string("mock://trainer/").size()));
    return model_for_round(round);
  });
}

std::vector<MockTrainingCall> MockTrainer::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

}  // namespace cda

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cda/dataset.hpp"
#include "cda/inference.hpp"
#include "cda/mock_model.hpp"

namespace cda {

/// Handle to a model produced by a trainer (or the untouched base model).
struct CheckpointRef {
  std::string id;
  std::string location;
  std::optional<std::string> parent;
  EndpointConfig serving;

  bool operator==(const CheckpointRef&) const = default;
};

inline constexpr std::string_view kBaseCheckpointId = "base";

CheckpointRef base_checkpoint(const EndpointConfig& student_base);

nlohmann::json to_json(const CheckpointRef& ref);
CheckpointRef checkpoint_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------- config

/// argv template; {train_file}, {base}, {base_id}, {out_dir} and {epochs}
/// are substituted per element. No shell is involved.
struct CommandHookSpec {
  std::vector<std::string> argv;
};

/// Job API: POST <url>/jobs, then GET <url>/jobs/<job_id> until done.
struct HttpHookSpec {
  std::string url;
  int poll_interval_ms = 1000;
  int job_timeout_ms = 6 * 3600 * 1000;
};

/// In-process mock; `schedule` holds one mock rule table per training round.
struct MockHookSpec {
  nlohmann::json schedule = nlohmann::json::array();
};

using HookSpec = std::variant<CommandHookSpec, HttpHookSpec, MockHookSpec>;

struct TrainerConfig {
  HookSpec hook = MockHookSpec{};
  int epochs = 3;
  // Handed to the trainer verbatim; never interpreted here.
  std::map<std::string, std::string> passthrough = {
      {"adapter_rank", "8"}, {"adapter_alpha", "16"}, {"learning_rate", "2e-4"}};
  std::filesystem::path work_dir;
  int manifest_timeout_ms = 10000;
  int manifest_poll_ms = 50;

  void validate() const;
};

nlohmann::json to_json(const TrainerConfig& config);
TrainerConfig trainer_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------- hooks

struct HookInvocation {
  CheckpointRef base;
  std::filesystem::path train_file;
  std::filesystem::path out_dir;
  int epochs = 3;
  std::map<std::string, std::string> passthrough;
};

/// A trainer backend. `run` returns once the job has finished; the result
/// reaches the gateway only through the manifest written into out_dir.
class TrainerHook {
 public:
  virtual ~TrainerHook() = default;
  virtual void run(const HookInvocation& invocation) = 0;
};

class CommandHook final : public TrainerHook {
 public:
  explicit CommandHook(CommandHookSpec spec);
  void run(const HookInvocation& invocation) override;

  /// argv after placeholder substitution.
  std::vector<std::string> expand(const HookInvocation& invocation) const;

 private:
  CommandHookSpec spec_;
};

class HttpHook final : public TrainerHook {
 public:
  explicit HttpHook(HttpHookSpec spec);
  void run(const HookInvocation& invocation) override;

  static nlohmann::json job_request(const HookInvocation& invocation);

 private:
  HttpHookSpec spec_;
};

/// Builds the hook for a command or HTTP spec. Mock specs need a
/// MockTrainer, which the caller owns.
std::shared_ptr<TrainerHook> make_hook(const TrainerConfig& config);

// ---------------------------------------------------------------- manifest

inline constexpr std::string_view kManifestName = "manifest";

/// key=value lines; written atomically.
void write_manifest(const std::filesystem::path& out_dir,
                    const std::map<std::string, std::string>& fields);
std::map<std::string, std::string> read_manifest(const std::filesystem::path& file);

// ---------------------------------------------------------------- gateway

/// One instruction-tuning record per instance, in order. Returns the count.
std::size_t export_training_file(const Dataset& dataset,
                                 const std::filesystem::path& path);

/// Runs the hook and turns its manifest into a checkpoint whose parent is
/// `base`. The serving config inherits decoding settings from `base`.
CheckpointRef train(const TrainerConfig& config, TrainerHook& hook,
                    const CheckpointRef& base,
                    const std::filesystem::path& train_file,
                    const std::filesystem::path& out_dir);

// ---------------------------------------------------------------- mock

using ModelFactory = std::function<std::shared_ptr<ChatBackend>()>;

ModelFactory mock_factory(MockResponder responder);
ModelFactory mock_factory(std::vector<MockRule> rules);

struct MockTrainingCall {
  std::string base_id;
  std::string train_file_sha256;
  std::size_t round = 0;
  std::string checkpoint_id;
};

/// Trainer stand-in: round k (1-based) yields a student built from
/// schedule[k-1], the last entry repeating once the schedule runs out. With
/// a state directory the round counter survives process restarts.
class MockTrainer final : public TrainerHook {
 public:
  explicit MockTrainer(std::vector<ModelFactory> schedule,
                       std::filesystem::path state_dir = {});

  /// Schedule of mock rule tables as in MockHookSpec.
  static std::shared_ptr<MockTrainer> from_spec(const MockHookSpec& spec,
                                                std::filesystem::path state_dir);

  void run(const HookInvocation& invocation) override;

  /// Routes mock://trainer/<round> endpoints to this trainer's students.
  void attach(BackendResolver& resolver);
  std::shared_ptr<ChatBackend> model_for_round(std::size_t round);

  std::vector<MockTrainingCall> calls() const;

 private:
  std::size_t completed_rounds() const;

  std::vector<ModelFactory> schedule_;
  std::filesystem::path state_dir_;
  mutable std::mutex mutex_;
  std::vector<MockTrainingCall> calls_;
  std::map<std::size_t, std::shared_ptr<ChatBackend>> models_;
};

}  // namespace cda

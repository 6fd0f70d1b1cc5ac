#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cda/augmenter.hpp"
#include "cda/dataset.hpp"
#include "cda/evaluator.hpp"
#include "cda/inference.hpp"
#include "cda/trainer.hpp"

namespace cda {

enum class TrainOn { correct, all };
enum class AugmentSeed { wrong, all };
enum class NextData { merged, augmented_only };
enum class FinetuneMode { continuous, from_scratch };

/// Every switch of the curriculum loop. Defaults are the main configuration;
/// each ablation flips exactly one field.
struct RunConfig {
  int iterations = 3;
  TrainOn train_on = TrainOn::correct;
  AugmentSeed augment_seed = AugmentSeed::wrong;
  NextData next_data = NextData::merged;
  FinetuneMode finetune_mode = FinetuneMode::continuous;
  std::vector<AugMethod> methods{kAllAugMethods.begin(), kAllAugMethods.end()};
  EndpointConfig teacher = EndpointConfig::defaults_for(EndpointRole::teacher);
  EndpointConfig student_base = EndpointConfig::defaults_for(EndpointRole::student);
  TrainerConfig trainer;
  struct Seeds {
    std::uint64_t sampling = 0;
    std::uint64_t shuffling = 0;
  } seeds;
  struct Sample {
    std::size_t train_per_class = 3000;
    std::size_t test_per_class = 150;
  } sample;
  int retries_per_generation = 2;
  // Stop after an iteration whose wrong split came back empty.
  bool stop_if_wrong_empty = false;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Fields absent from `j` keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);

enum class Stage { filter, sample, evaluate, train, augment, merge };

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view s);

/// What one loop iteration consumed and produced. Paths are relative to the
/// run directory. Fields fill in stage by stage.
struct IterationRecord {
  int index = 0;
  std::optional<Stage> completed;  // last finished stage of this iteration

  std::string dataset_ref;  // D^{n-1}
  std::size_t dataset_size = 0;

  std::string report_ref;
  std::string correct_ref;
  std::string wrong_ref;
  std::size_t correct_count = 0;
  std::size_t wrong_count = 0;
  std::optional<DatasetStats> stats;
  Metrics metrics;

  std::string train_ref;       // instances trained on
  std::string train_file_ref;  // exported instruction-tuning file
  std::size_t train_size = 0;
  bool trained = false;
  std::string base_checkpoint_id;
  std::string checkpoint_id;

  std::string seeds_ref;
  std::string aug_ref;
  std::string aug_log_ref;
  std::size_t aug_size = 0;
  std::map<std::string, std::size_t> aug_outcomes;

  std::string next_dataset_ref;  // D^n
  std::size_t next_dataset_size = 0;

  std::uint64_t student_requests = 0;
  std::uint64_t teacher_requests = 0;
};

nlohmann::json to_json(const IterationRecord& record);
IterationRecord iteration_record_from_json(const nlohmann::json& j);

struct RunStatus {
  enum class Kind { in_progress, completed, failed };
  Kind kind = Kind::in_progress;
  std::optional<Stage> failed_stage;
  std::string error;
};

struct RunState {
  RunConfig config;
  std::optional<Stage> prelude_completed;  // filter or sample
  std::vector<IterationRecord> records;
  std::optional<std::string> final_checkpoint;
  RunStatus status;
  std::string stop_reason;
};

nlohmann::json to_json(const RunState& state);
RunState run_state_from_json(const nlohmann::json& j);

/// Backends a run talks to: endpoint resolution and the trainer hook.
struct Backends {
  BackendResolver resolver;
  std::shared_ptr<TrainerHook> trainer;
};

struct StageEvent {
  int iteration = 0;  // 0 for filter and sample
  Stage stage = Stage::filter;
};

struct RunHooks {
  /// Called after each stage has been persisted. Exceptions propagate and
  /// leave the run directory as a killed process would.
  std::function<void(const StageEvent&)> after_stage;
};

struct FilterResult {
  Dataset kept;
  DatasetStats before;
  DatasetStats after;
  EvalReport report;
};

/// Keeps the instances the teacher labels correctly.
FilterResult teacher_filter(const ChatClient& teacher, const Dataset& raw);

/// The teacher's client for filtering: its endpoint with greedy decoding.
ChatClient teacher_eval_client(const Backends& backends, const RunConfig& config);

/// Runs the curriculum loop in `run_dir`, resuming when the directory already
/// holds a run. Stage failures are recorded and rethrown as StageFailed.
RunState run_cda(const RunConfig& config, const Dataset& initial,
                 const std::filesystem::path& run_dir, Backends& backends,
                 const RunHooks& hooks = {});

/// Continues a run from its persisted state.
RunState resume_cda(const std::filesystem::path& run_dir, Backends& backends,
                    const RunHooks& hooks = {});

RunState load_run_state(const std::filesystem::path& run_dir);
std::vector<CheckpointRef> load_checkpoints(const std::filesystem::path& run_dir);

/// Keys of every dataset and augmentation set the run has produced so far.
std::unordered_set<std::string> history_keys(const std::filesystem::path& run_dir,
                                             const RunState& state);

}  // namespace cda

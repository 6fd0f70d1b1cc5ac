#include "cda/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <utility>

#include <fmt/format.h>

#include "cda/dataset_io.hpp"
#include "cda/error.hpp"
#include "cda/text.hpp"

namespace cda {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<TrainOn, 2> kTrainOn{{{TrainOn::correct, "correct"},
                                          {TrainOn::all, "all"}}};
constexpr NameTable<AugmentSeed, 2> kAugmentSeed{{{AugmentSeed::wrong, "wrong"},
                                                  {AugmentSeed::all, "all"}}};
constexpr NameTable<NextData, 2> kNextData{{{NextData::merged, "merged"},
                                            {NextData::augmented_only, "augmented_only"}}};
constexpr NameTable<FinetuneMode, 2> kFinetuneMode{
    {{FinetuneMode::continuous, "continuous"}, {FinetuneMode::from_scratch, "from_scratch"}}};
constexpr NameTable<Stage, 6> kStages{{{Stage::filter, "filter"},
                                       {Stage::sample, "sample"},
                                       {Stage::evaluate, "evaluate"},
                                       {Stage::train, "train"},
                                       {Stage::augment, "augment"},
                                       {Stage::merge, "merge"}}};
constexpr NameTable<RunStatus::Kind, 3> kStatus{{{RunStatus::Kind::in_progress, "in_progress"},
                                                 {RunStatus::Kind::completed, "completed"},
                                                 {RunStatus::Kind::failed, "failed"}}};

template <class E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return {};
}

template <class E, std::size_t N>
E value_of(const NameTable<E, N>& table, const json& j, std::string_view field) {
  const auto s = j.get<std::string>();
  for (const auto& [v, name] : table) {
    if (name == s) return v;
  }
  throw ConfigError(fmt::format("unknown value '{}' for {}", s, field));
}

template <class E, std::size_t N>
void read_enum(const json& j, const char* field, const NameTable<E, N>& table, E& out) {
  if (j.contains(field)) out = value_of(table, j.at(field), field);
}

json opt_stage(const std::optional<Stage>& s) {
  return s ? json(name_of(kStages, *s)) : json();
}

std::optional<Stage> stage_from(const json& j, const char* field) {
  if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
  return value_of(kStages, j.at(field), field);
}

}  // namespace

std::string_view to_string(Stage stage) { return name_of(kStages, stage); }

std::optional<Stage> parse_stage(std::string_view s) {
  for (const auto& [v, name] : kStages) {
    if (name == s) return v;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- config

void RunConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (methods.empty()) throw ConfigError("at least one augmentation method is required");
  if (retries_per_generation < 0) throw ConfigError("retries_per_generation must be >= 0");
  if (sample.train_per_class < 1) throw ConfigError("train_per_class must be >= 1");
  if (sample.test_per_class < 1) throw ConfigError("test_per_class must be >= 1");
  teacher.validate();
  student_base.validate();
  trainer.validate();
}

json to_json(const RunConfig& c) {
  json methods = json::array();
  for (auto m : normalize_methods(c.methods)) methods.push_back(to_string(m));
  return json{{"iterations", c.iterations},
              {"train_on", name_of(kTrainOn, c.train_on)},
              {"augment_seed", name_of(kAugmentSeed, c.augment_seed)},
              {"next_data", name_of(kNextData, c.next_data)},
              {"finetune_mode", name_of(kFinetuneMode, c.finetune_mode)},
              {"methods", methods},
              {"teacher", to_json(c.teacher)},
              {"student_base", to_json(c.student_base)},
              {"trainer", to_json(c.trainer)},
              {"seeds", {{"sampling", c.seeds.sampling}, {"shuffling", c.seeds.shuffling}}},
              {"sample",
               {{"train_per_class", c.sample.train_per_class},
                {"test_per_class", c.sample.test_per_class}}},
              {"retries_per_generation", c.retries_per_generation},
              {"stop_if_wrong_empty", c.stop_if_wrong_empty}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  try {
    c.iterations = j.value("iterations", c.iterations);
    read_enum(j, "train_on", kTrainOn, c.train_on);
    read_enum(j, "augment_seed", kAugmentSeed, c.augment_seed);
    read_enum(j, "next_data", kNextData, c.next_data);
    read_enum(j, "finetune_mode", kFinetuneMode, c.finetune_mode);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) {
        auto parsed = parse_aug_method(m.get<std::string>());
        if (!parsed) throw ConfigError("unknown augmentation method '" + m.get<std::string>() + "'");
        c.methods.push_back(*parsed);
      }
    }
    if (j.contains("teacher")) c.teacher = endpoint_from_json(j.at("teacher"), EndpointRole::teacher);
    if (j.contains("student_base")) {
      c.student_base = endpoint_from_json(j.at("student_base"), EndpointRole::student);
    }
    if (j.contains("trainer")) c.trainer = trainer_config_from_json(j.at("trainer"));
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      c.seeds.sampling = s.value("sampling", c.seeds.sampling);
      c.seeds.shuffling = s.value("shuffling", c.seeds.shuffling);
    }
    if (j.contains("sample")) {
      const auto& s = j.at("sample");
      c.sample.train_per_class = s.value("train_per_class", c.sample.train_per_class);
      c.sample.test_per_class = s.value("test_per_class", c.sample.test_per_class);
    }
    c.retries_per_generation = j.value("retries_per_generation", c.retries_per_generation);
    c.stop_if_wrong_empty = j.value("stop_if_wrong_empty", c.stop_if_wrong_empty);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------- state

json to_json(const IterationRecord& r) {
  return json{{"index", r.index},
              {"completed", opt_stage(r.completed)},
              {"dataset_ref", r.dataset_ref},
              {"dataset_size", r.dataset_size},
              {"report_ref", r.report_ref},
              {"correct_ref", r.correct_ref},
              {"wrong_ref", r.wrong_ref},
              {"correct_count", r.correct_count},
              {"wrong_count", r.wrong_count},
              {"stats", r.stats ? to_json(*r.stats) : json()},
              {"metrics", to_json(r.metrics)},
              {"train_ref", r.train_ref},
              {"train_file_ref", r.train_file_ref},
              {"train_size", r.train_size},
              {"trained", r.trained},
              {"base_checkpoint_id", r.base_checkpoint_id},
              {"checkpoint_id", r.checkpoint_id},
              {"seeds_ref", r.seeds_ref},
              {"aug_ref", r.aug_ref},
              {"aug_log_ref", r.aug_log_ref},
              {"aug_size", r.aug_size},
              {"aug_outcomes", r.aug_outcomes},
              {"next_dataset_ref", r.next_dataset_ref},
              {"next_dataset_size", r.next_dataset_size},
              {"student_requests", r.student_requests},
              {"teacher_requests", r.teacher_requests}};
}

IterationRecord iteration_record_from_json(const json& j) {
  IterationRecord r;
  r.index = j.at("index").get<int>();
  r.completed = stage_from(j, "completed");
  r.dataset_ref = j.value("dataset_ref", "");
  r.dataset_size = j.value("dataset_size", std::size_t{0});
  r.report_ref = j.value("report_ref", "");
  r.correct_ref = j.value("correct_ref", "");
  r.wrong_ref = j.value("wrong_ref", "");
  r.correct_count = j.value("correct_count", std::size_t{0});
  r.wrong_count = j.value("wrong_count", std::size_t{0});
  if (j.contains("stats") && !j.at("stats").is_null()) r.stats = stats_from_json(j.at("stats"));
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    r.metrics = Metrics{m.value("accuracy", 0.0), m.value("precision", 0.0),
                        m.value("recall", 0.0), m.value("f1", 0.0)};
  }
  r.train_ref = j.value("train_ref", "");
  r.train_file_ref = j.value("train_file_ref", "");
  r.train_size = j.value("train_size", std::size_t{0});
  r.trained = j.value("trained", false);
  r.base_checkpoint_id = j.value("base_checkpoint_id", "");
  r.checkpoint_id = j.value("checkpoint_id", "");
  r.seeds_ref = j.value("seeds_ref", "");
  r.aug_ref = j.value("aug_ref", "");
  r.aug_log_ref = j.value("aug_log_ref", "");
  r.aug_size = j.value("aug_size", std::size_t{0});
  if (j.contains("aug_outcomes")) {
    r.aug_outcomes = j.at("aug_outcomes").get<std::map<std::string, std::size_t>>();
  }
  r.next_dataset_ref = j.value("next_dataset_ref", "");
  r.next_dataset_size = j.value("next_dataset_size", std::size_t{0});
  r.student_requests = j.value("student_requests", std::uint64_t{0});
  r.teacher_requests = j.value("teacher_requests", std::uint64_t{0});
  return r;
}

json to_json(const RunState& s) {
  json records = json::array();
  for (const auto& r : s.records) records.push_back(to_json(r));
  return json{{"config", to_json(s.config)},
              {"prelude_completed", opt_stage(s.prelude_completed)},
              {"records", records},
              {"final_checkpoint", s.final_checkpoint ? json(*s.final_checkpoint) : json()},
              {"status",
               {{"kind", name_of(kStatus, s.status.kind)},
                {"failed_stage", opt_stage(s.status.failed_stage)},
                {"error", s.status.error}}},
              {"stop_reason", s.stop_reason}};
}

RunState run_state_from_json(const json& j) {
  RunState s;
  s.config = run_config_from_json(j.at("config"));
  s.prelude_completed = stage_from(j, "prelude_completed");
  for (const auto& r : j.at("records")) s.records.push_back(iteration_record_from_json(r));
  if (j.contains("final_checkpoint") && !j.at("final_checkpoint").is_null()) {
    s.final_checkpoint = j.at("final_checkpoint").get<std::string>();
  }
  const auto& st = j.at("status");
  s.status.kind = value_of(kStatus, st.at("kind"), "status");
  s.status.failed_stage = stage_from(st, "failed_stage");
  s.status.error = st.value("error", "");
  s.stop_reason = j.value("stop_reason", "");
  return s;
}

RunState load_run_state(const fs::path& run_dir) {
  const auto path = run_dir / "state.json";
  if (!fs::exists(path)) throw MissingFile(path.string());
  try {
    return run_state_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<CheckpointRef> load_checkpoints(const fs::path& run_dir) {
  const auto path = run_dir / "checkpoints.json";
  if (!fs::exists(path)) throw MissingFile(path.string());
  std::vector<CheckpointRef> out;
  for (const auto& c : json::parse(read_file(path))) out.push_back(checkpoint_from_json(c));
  return out;
}

std::unordered_set<std::string> history_keys(const fs::path& run_dir, const RunState& state) {
  std::unordered_set<std::string> keys;
  auto absorb = [&](const std::string& ref) {
    if (ref.empty() || !fs::exists(run_dir / ref)) return;
    for (const auto& inst : read_dataset(run_dir / ref).instances) keys.insert(dedup_key(inst));
  };
  if (state.prelude_completed == Stage::sample) absorb("d0.jsonl");
  for (const auto& r : state.records) {
    absorb(r.dataset_ref);
    if (r.completed && *r.completed >= Stage::augment) absorb(r.aug_ref);
  }
  return keys;
}

// ---------------------------------------------------------------- filter

ChatClient teacher_eval_client(const Backends& backends, const RunConfig& config) {
  auto c = config.teacher;
  c.temperature = 0.0;
  return backends.resolver.client(c);
}

FilterResult teacher_filter(const ChatClient& teacher, const Dataset& raw) {
  auto eval = evaluate_split(teacher, raw);
  FilterResult out;
  out.before = compute_stats(raw, correctness_of(eval.report));
  out.kept = std::move(eval.split.correct);
  out.kept.name = raw.name + "_filtered";
  out.after = compute_stats(out.kept);
  out.report = std::move(eval.report);
  return out;
}

// ---------------------------------------------------------------- controller

namespace {

constexpr std::string_view kInitialFile = "initial.jsonl";

std::string iter_dir(int n) { return fmt::format("iter_{}", n); }

std::string iter_file(int n, std::string_view name) {
  return fmt::format("iter_{}/{}", n, name);
}

class Controller {
 public:
  Controller(fs::path run_dir, RunState state, Backends& backends, const RunHooks& hooks)
      : dir_(std::move(run_dir)), state_(std::move(state)), backends_(backends), hooks_(hooks) {}

  RunState run() {
    if (state_.status.kind == RunStatus::Kind::completed) return state_;
    if (state_.status.kind == RunStatus::Kind::failed) {
      state_.status = RunStatus{};
      persist();
    }
    while (auto step = next_step()) {
      execute(step->first, step->second);
    }
    state_.status = RunStatus{RunStatus::Kind::completed, std::nullopt, {}};
    if (!state_.records.empty()) state_.final_checkpoint = state_.records.back().checkpoint_id;
    persist();
    return state_;
  }

 private:
  const RunConfig& config() const { return state_.config; }

  std::optional<std::pair<int, Stage>> next_step() const {
    if (!state_.prelude_completed) return std::pair{0, Stage::filter};
    if (*state_.prelude_completed == Stage::filter) return std::pair{0, Stage::sample};
    if (state_.records.empty()) return std::pair{1, Stage::evaluate};
    const auto& last = state_.records.back();
    if (!last.completed) return std::pair{last.index, Stage::evaluate};
    switch (*last.completed) {
      case Stage::evaluate:
        return std::pair{last.index, Stage::train};
      case Stage::train:
        return std::pair{last.index, Stage::augment};
      case Stage::augment:
        return std::pair{last.index, Stage::merge};
      default:
        break;
    }
    if (!state_.stop_reason.empty() || last.index >= config().iterations) return std::nullopt;
    return std::pair{last.index + 1, Stage::evaluate};
  }

  void execute(int n, Stage stage) {
    const auto started = std::chrono::steady_clock::now();
    try {
      switch (stage) {
        case Stage::filter:
          do_filter();
          break;
        case Stage::sample:
          do_sample();
          break;
        case Stage::evaluate:
          do_evaluate(n);
          break;
        case Stage::train:
          do_train(n);
          break;
        case Stage::augment:
          do_augment(n);
          break;
        case Stage::merge:
          do_merge(n);
          break;
      }
      if (n == 0) {
        state_.prelude_completed = stage;
      } else {
        state_.records.back().completed = stage;
      }
      persist();
    } catch (const std::exception& e) {
      state_.status = RunStatus{RunStatus::Kind::failed, stage, e.what()};
      persist();
      throw StageFailed(std::string(to_string(stage)), e.what());
    }
    record_timing(n, stage, started);
    if (hooks_.after_stage) hooks_.after_stage(StageEvent{n, stage});
  }

  void do_filter() {
    const auto initial = read_dataset(dir_ / kInitialFile, "initial");
    auto result = teacher_filter(teacher_eval_client(backends_, config()), initial);
    result.kept.name = "filtered";
    write_dataset(dir_ / "filtered.jsonl", result.kept);
    write_report(dir_ / "filter_report.jsonl", result.report);
    const json stats{{"before", to_json(result.before)},
                     {"after", to_json(result.after)},
                     {"teacher_metrics", to_json(result.report.metrics)}};
    write_file_atomic(dir_ / "filter_stats.json", stats.dump(2) + "\n");
  }

  void do_sample() {
    const auto filtered = read_dataset(dir_ / "filtered.jsonl", "filtered");
    auto d0 = sample_balanced(filtered, config().sample.train_per_class, config().seeds.sampling);
    d0.name = "d0";
    write_dataset(dir_ / "d0.jsonl", d0);
  }

  IterationRecord& record(int n) {
    if (state_.records.empty() || state_.records.back().index != n) {
      IterationRecord r;
      r.index = n;
      r.dataset_ref = n == 1 ? "d0.jsonl" : iter_file(n - 1, "next_dataset.jsonl");
      state_.records.push_back(std::move(r));
    }
    return state_.records.back();
  }

  Dataset dataset_of(const IterationRecord& r) const {
    return read_dataset(dir_ / r.dataset_ref, fmt::format("d{}", r.index - 1));
  }

  CheckpointRef checkpoint(const std::string& id) const {
    if (id == kBaseCheckpointId) return base_checkpoint(config().student_base);
    for (auto& c : load_checkpoints(dir_)) {
      if (c.id == id) return c;
    }
    throw PreconditionError("unknown checkpoint '" + id + "'");
  }

  // Checkpoint that produced the predictions of iteration n.
  std::string previous_checkpoint_id(int n) const {
    if (n == 1) return std::string(kBaseCheckpointId);
    return state_.records.at(static_cast<std::size_t>(n - 2)).checkpoint_id;
  }

  void do_evaluate(int n) {
    auto& r = record(n);
    const auto data = dataset_of(r);
    fs::create_directories(dir_ / iter_dir(n));
    const auto student = backends_.resolver.client(checkpoint(previous_checkpoint_id(n)).serving);
    const auto eval = evaluate_split(student, data);

    r.dataset_size = data.size();
    r.report_ref = iter_file(n, "report.jsonl");
    r.correct_ref = iter_file(n, "correct.jsonl");
    r.wrong_ref = iter_file(n, "wrong.jsonl");
    write_report(dir_ / r.report_ref, eval.report);
    write_dataset(dir_ / r.correct_ref, eval.split.correct);
    write_dataset(dir_ / r.wrong_ref, eval.split.wrong);
    r.correct_count = eval.split.correct.size();
    r.wrong_count = eval.split.wrong.size();
    r.stats = compute_stats(data, correctness_of(eval.report));
    r.metrics = eval.report.metrics;
    r.student_requests = student.counters().requests;
    write_file_atomic(dir_ / iter_file(n, "stats.json"), to_json(*r.stats).dump(2) + "\n");
  }

  void do_train(int n) {
    auto& r = record(n);
    const auto previous = previous_checkpoint_id(n);
    const auto set = config().train_on == TrainOn::correct
                         ? read_dataset(dir_ / r.correct_ref)
                         : dataset_of(r);
    r.train_size = set.size();
    if (set.empty()) {
      // Nothing to learn from; the current student carries over.
      r.trained = false;
      r.train_ref.clear();
      r.train_file_ref.clear();
      r.base_checkpoint_id = previous;
      r.checkpoint_id = previous;
      return;
    }
    r.train_ref = iter_file(n, "train_set.jsonl");
    r.train_file_ref = iter_file(n, "train_qa.jsonl");
    write_dataset(dir_ / r.train_ref, set);
    export_training_file(set, dir_ / r.train_file_ref);

    const auto base = config().finetune_mode == FinetuneMode::continuous
                          ? checkpoint(previous)
                          : base_checkpoint(config().student_base);
    auto trainer_config = config().trainer;
    trainer_config.passthrough.try_emplace("shuffle_seed",
                                           std::to_string(config().seeds.shuffling));
    if (!backends_.trainer) throw PreconditionError("no trainer hook configured");
    auto ref = train(trainer_config, *backends_.trainer, base, dir_ / r.train_file_ref,
                     dir_ / iter_file(n, "checkpoint"));
    ref.location = relative_to_run(ref.location);

    auto checkpoints = load_checkpoints(dir_);
    std::erase_if(checkpoints, [&](const CheckpointRef& c) { return c.id == ref.id; });
    checkpoints.push_back(ref);
    save_checkpoints(checkpoints);

    r.trained = true;
    r.base_checkpoint_id = base.id;
    r.checkpoint_id = ref.id;
  }

  void do_augment(int n) {
    auto& r = record(n);
    r.seeds_ref = config().augment_seed == AugmentSeed::wrong ? r.wrong_ref : r.dataset_ref;
    const auto seeds = read_dataset(dir_ / r.seeds_ref);
    AugmentRound round;
    round.aug.name = fmt::format("aug_{}", n);
    if (!seeds.empty()) {
      const auto teacher = backends_.resolver.client(config().teacher);
      round = augment_round(teacher, seeds, config().methods, n, history_keys(dir_, state_),
                            config().retries_per_generation);
    }
    r.aug_ref = iter_file(n, "augmented.jsonl");
    r.aug_log_ref = iter_file(n, "aug_log.jsonl");
    write_dataset(dir_ / r.aug_ref, round.aug);
    write_file_atomic(dir_ / r.aug_log_ref, log_to_jsonl(round.log));
    r.aug_size = round.aug.size();
    r.aug_outcomes = round.log.outcome_counts();
    r.teacher_requests = round.log.requests;
  }

  void do_merge(int n) {
    auto& r = record(n);
    const auto aug = read_dataset(dir_ / r.aug_ref);
    auto next = config().next_data == NextData::merged ? merge_dedup(dataset_of(r), aug) : aug;
    next.name = fmt::format("d{}", n);
    r.next_dataset_ref = iter_file(n, "next_dataset.jsonl");
    write_dataset(dir_ / r.next_dataset_ref, next);
    r.next_dataset_size = next.size();
    state_.final_checkpoint = r.checkpoint_id;

    if (config().stop_if_wrong_empty && r.wrong_count == 0) {
      state_.stop_reason = fmt::format("iteration {}: wrong split empty", n);
    } else if (next.empty() && n < config().iterations) {
      state_.stop_reason = fmt::format("iteration {}: next dataset empty", n);
    }
  }

  std::string relative_to_run(const std::string& location) const {
    const auto root = fs::weakly_canonical(fs::absolute(dir_));
    const auto loc = fs::weakly_canonical(fs::path(location));
    auto rel = loc.lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..") return location;
    return rel.generic_string();
  }

  void save_checkpoints(const std::vector<CheckpointRef>& checkpoints) {
    json arr = json::array();
    for (const auto& c : checkpoints) arr.push_back(to_json(c));
    write_file_atomic(dir_ / "checkpoints.json", arr.dump(2) + "\n");
  }

  void persist() { write_file_atomic(dir_ / "state.json", to_json(state_).dump(2) + "\n"); }

  // Wall-clock data lives apart from state so reruns stay byte-identical.
  void record_timing(int n, Stage stage, std::chrono::steady_clock::time_point started) const {
    const auto seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const auto path = dir_ / "timings.jsonl";
    std::string body = fs::exists(path) ? read_file(path) : std::string();
    body += json{{"iteration", n}, {"stage", to_string(stage)}, {"seconds", seconds}}.dump();
    body += '\n';
    write_file_atomic(path, body);
  }

  fs::path dir_;
  RunState state_;
  Backends& backends_;
  const RunHooks& hooks_;
};

void init_run_dir(const RunConfig& config, const Dataset& initial, const fs::path& run_dir) {
  fs::create_directories(run_dir);
  const auto body = to_jsonl(initial);
  write_file_atomic(run_dir / kInitialFile, body);
  const json run{{"config", to_json(config)},
                 {"seeds", {{"sampling", config.seeds.sampling},
                            {"shuffling", config.seeds.shuffling}}},
                 {"input",
                  {{"name", initial.name},
                   {"file", kInitialFile},
                   {"instances", initial.size()},
                   {"metaphor", initial.count(Label::metaphor)},
                   {"sha256", text::sha256_hex(body)}}}};
  write_file_atomic(run_dir / "run.json", run.dump(2) + "\n");
  write_file_atomic(run_dir / "checkpoints.json",
                    json::array({to_json(base_checkpoint(config.student_base))}).dump(2) + "\n");
  RunState state;
  state.config = config;
  write_file_atomic(run_dir / "state.json", to_json(state).dump(2) + "\n");
}

}  // namespace

RunState run_cda(const RunConfig& config, const Dataset& initial, const fs::path& run_dir,
                 Backends& backends, const RunHooks& hooks) {
  config.validate();
  if (fs::exists(run_dir / "state.json")) {
    const auto stored = load_run_state(run_dir);
    if (to_json(stored.config) != to_json(config)) {
      throw ConfigError("run directory " + run_dir.string() + " holds a different configuration");
    }
    const auto run = json::parse(read_file(run_dir / "run.json"));
    if (run.at("input").at("sha256") != text::sha256_hex(to_jsonl(initial))) {
      throw ConfigError("run directory " + run_dir.string() + " holds a different input");
    }
    return resume_cda(run_dir, backends, hooks);
  }
  std::error_code ec;
  if (fs::exists(run_dir) && !fs::is_empty(run_dir, ec)) {
    throw PreconditionError("run directory is neither empty nor a run: " + run_dir.string());
  }
  if (initial.empty()) throw PreconditionError("initial dataset is empty");
  init_run_dir(config, initial, run_dir);
  return Controller(run_dir, load_run_state(run_dir), backends, hooks).run();
}

RunState resume_cda(const fs::path& run_dir, Backends& backends, const RunHooks& hooks) {
  auto state = load_run_state(run_dir);
  state.config.validate();
  return Controller(run_dir, std::move(state), backends, hooks).run();
}

}  // namespace cda

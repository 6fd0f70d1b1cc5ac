#include <doctest.h>

#include <atomic>

#include "cda/dataset_io.hpp"
#include "cda/error.hpp"
#include "cda/pipeline.hpp"
#include "cda/report.hpp"
#include "synthetic.hpp"
#include "world.hpp"

using namespace cda;
using namespace cda::testing;
namespace fs = std::filesystem;

namespace {

struct Dir {
  fs::path path;
  explicit Dir(std::string_view name) : path(fresh_dir(name) / "run") {}
  ~Dir() { fs::remove_all(path.parent_path()); }
};

// 100 + 100 instances, ten of each level 1..10 per class.
Dataset pool() { return synthetic_dataset(100, 100, 10); }

RunState run(const RunConfig& c, const World& w, const fs::path& dir, const RunHooks& hooks = {}) {
  auto b = w.backends(dir);
  return run_cda(c, pool(), dir, b, hooks);
}

std::vector<std::size_t> wrong_counts(const RunState& s) {
  std::vector<std::size_t> out;
  for (const auto& r : s.records) out.push_back(r.wrong_count);
  return out;
}

}  // namespace

TEST_CASE("run config json") {
  auto c = mock_config(4, 10);
  c.train_on = TrainOn::all;
  c.methods = {AugMethod::replace_context_lit, AugMethod::direct_met};
  c.stop_if_wrong_empty = true;
  CHECK(to_json(run_config_from_json(to_json(c))) == to_json(c));
  const auto partial = run_config_from_json(nlohmann::json{{"iterations", 2}, {"future_key", 1}});
  CHECK(partial.iterations == 2);
  CHECK(partial.methods.size() == 6);
  CHECK(partial.sample.train_per_class == 3000);
  CHECK(partial.sample.test_per_class == 150);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"train_on", "some"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"iterations", 0}}).validate(), ConfigError);
  for (auto s : {Stage::filter, Stage::sample, Stage::evaluate, Stage::train, Stage::augment,
                 Stage::merge}) {
    CHECK(parse_stage(to_string(s)) == s);
  }
}

TEST_CASE("default run") {
  Dir dir("pipe_default");
  const auto s = run(mock_config(3, 100), level_world(1, {9, 10}), dir.path);

  CHECK(s.status.kind == RunStatus::Kind::completed);
  CHECK(s.stop_reason.empty());
  REQUIRE(s.records.size() == 3);
  // Level 1 of 10 known, then 9 of 10, then everything.
  CHECK(wrong_counts(s) == std::vector<std::size_t>{180, 80, 0});
  CHECK(s.records[0].dataset_size == 200);
  CHECK(s.records[0].aug_size == 540);
  CHECK(s.records[1].dataset_size == 740);
  // Direct prompts depend only on the target word, so augmented seeds that
  // share a target with their parent regenerate known sentences.
  const auto& outcomes = s.records[1].aug_outcomes;
  CHECK(outcomes.count("Duplicate") == 1);
  CHECK(s.records[1].aug_size + outcomes.at("Duplicate") == 240);
  CHECK(s.records[2].dataset_size == 740 + s.records[1].aug_size);
  CHECK(s.records[2].aug_size == 0);
  CHECK(s.records[2].next_dataset_size == s.records[2].dataset_size);
  CHECK(s.final_checkpoint == "mock-ckpt-3");
  CHECK(s.records[2].base_checkpoint_id == "mock-ckpt-2");
  CHECK(check_data_flow(dir.path).empty());

  const auto checkpoints = load_checkpoints(dir.path);
  REQUIRE(checkpoints.size() == 4);
  CHECK(checkpoints[0].id == "base");
  CHECK(checkpoints[1].location == "iter_1/checkpoint");

  const auto run_json = nlohmann::json::parse(read_file(dir.path / "run.json"));
  CHECK(run_json["input"]["instances"] == 200);
  CHECK(run_json["input"]["metaphor"] == 100);
  CHECK(run_json["seeds"]["sampling"] == 7);
  const auto filter = nlohmann::json::parse(read_file(dir.path / "filter_stats.json"));
  CHECK(filter["before"]["pct_correct"] == "100.00");

  // The stats file matches the record.
  CHECK(stats_from_json(nlohmann::json::parse(read_file(dir.path / "iter_1/stats.json"))) ==
        *s.records[0].stats);
  CHECK(s.records[0].stats->pct_correct->str() == "10.00");

  // A completed run is returned as is.
  auto b = level_world(1, {9, 10}).backends(dir.path);
  const auto again = run_cda(mock_config(3, 100), pool(), dir.path, b);
  CHECK(to_json(again) == to_json(s));
}

TEST_CASE("ablation: train on all") {
  Dir dir("pipe_train_all");
  auto c = mock_config(2, 100);
  c.train_on = TrainOn::all;
  const auto s = run(c, level_world(1, {9}), dir.path);
  CHECK(check_data_flow(dir.path).empty());
  CHECK(s.records[0].train_size == s.records[0].dataset_size);
  CHECK(load(dir.path, s.records[0].train_ref).ids() == load(dir.path, "d0.jsonl").ids());
}

TEST_CASE("ablation: augment every seed") {
  Dir dir("pipe_seed_all");
  auto c = mock_config(1, 100);
  c.augment_seed = AugmentSeed::all;
  const auto s = run(c, level_world(1, {9}), dir.path);
  CHECK(check_data_flow(dir.path).empty());
  CHECK(s.records[0].seeds_ref == "d0.jsonl");
  CHECK(s.records[0].aug_size == 600);
}

TEST_CASE("ablation: augmented data only") {
  Dir dir("pipe_aug_only");
  auto c = mock_config(4, 100);
  c.next_data = NextData::augmented_only;
  const auto s = run(c, level_world(1, {9, 10}), dir.path);
  CHECK(check_data_flow(dir.path).empty());
  CHECK(load(dir.path, s.records[0].next_dataset_ref).ids() ==
        load(dir.path, s.records[0].aug_ref).ids());
  CHECK(s.records[1].dataset_size == 540);
  // 60 of the 540 sit at level 10, which the round-1 student does not know.
  CHECK(s.records[1].wrong_count == 60);
  REQUIRE(s.records.size() == 3);
  CHECK(s.records[2].next_dataset_size == 0);
  CHECK(s.stop_reason == "iteration 3: next dataset empty");
  CHECK(s.status.kind == RunStatus::Kind::completed);
}

TEST_CASE("ablation: fine-tune from scratch") {
  Dir dir("pipe_scratch");
  auto c = mock_config(3, 100);
  c.finetune_mode = FinetuneMode::from_scratch;
  const auto s = run(c, level_world(1, {9, 10}), dir.path);
  CHECK(check_data_flow(dir.path).empty());
  for (const auto& ck : load_checkpoints(dir.path)) {
    if (ck.id != "base") CHECK(ck.parent == "base");
  }
  for (const auto& r : s.records) CHECK(r.base_checkpoint_id == "base");
  // Iteration 2 still evaluates with the round-1 checkpoint.
  CHECK(s.records[1].wrong_count == 80);
}

TEST_CASE("ablation: method subset") {
  Dir dir("pipe_methods");
  auto c = mock_config(1, 100);
  c.methods = {AugMethod::direct_met, AugMethod::replace_target_lit};
  const auto s = run(c, level_world(1, {9}), dir.path);
  const auto aug = load(dir.path, s.records[0].aug_ref);
  CHECK(aug.size() == 180);
  for (const auto& i : aug.instances) {
    const auto m = std::get<AugmentedSource>(i.provenance).method;
    CHECK((m == AugMethod::direct_met || m == AugMethod::replace_target_lit));
  }
}

TEST_CASE("stop guard on an empty wrong split") {
  Dir dir("pipe_guard");
  auto c = mock_config(5, 100);
  c.stop_if_wrong_empty = true;
  const auto s = run(c, level_world(1, {10}), dir.path);
  REQUIRE(s.records.size() == 2);
  CHECK(s.records[1].wrong_count == 0);
  CHECK(s.stop_reason == "iteration 2: wrong split empty");
  CHECK(s.final_checkpoint == "mock-ckpt-2");

  Dir off("pipe_guard_off");
  c.stop_if_wrong_empty = false;
  CHECK(run(c, level_world(1, {10}), off.path).records.size() == 5);
}

TEST_CASE("a student that knows nothing trains on nothing") {
  Dir dir("pipe_untrained");
  const auto s = run(mock_config(2, 100), level_world(0, {0}), dir.path);
  for (const auto& r : s.records) {
    CHECK_FALSE(r.trained);
    CHECK(r.checkpoint_id == "base");
  }
  CHECK(s.final_checkpoint == "base");
  CHECK(load_checkpoints(dir.path).size() == 1);
  CHECK(check_data_flow(dir.path).empty());
}

TEST_CASE("failures are recorded and resumable") {
  Dir dir("pipe_fail");
  const auto c = mock_config(2, 100);
  auto broken = level_world(1, {9, 10});
  broken.teacher = [](const ChatRequest& req) {
    if (read_question(req.prompt)) return oracle_teacher()(req);
    return MockStep::error(500);
  };
  CHECK_THROWS_AS(run(c, broken, dir.path), StageFailed);
  auto s = load_run_state(dir.path);
  CHECK(s.status.kind == RunStatus::Kind::failed);
  CHECK(s.status.failed_stage == Stage::augment);
  CHECK_FALSE(s.status.error.empty());
  CHECK(s.records.at(0).completed == Stage::train);

  CHECK_THROWS_AS(report_run(dir.path, {}, 1, broken.backends(dir.path)), IncompleteRun);

  auto b = level_world(1, {9, 10}).backends(dir.path);
  s = resume_cda(dir.path, b);
  CHECK(s.status.kind == RunStatus::Kind::completed);
  CHECK(s.records.size() == 2);
  CHECK(check_data_flow(dir.path).empty());

  Dir clean("pipe_fail_clean");
  run(c, level_world(1, {9, 10}), clean.path);
  CHECK(snapshot(dir.path) == snapshot(clean.path));
}

TEST_CASE("run directory guards") {
  Dir dir("pipe_guards");
  const auto w = level_world(1, {9});
  run(mock_config(1, 100), w, dir.path);

  auto b = w.backends(dir.path);
  CHECK_THROWS_AS(run_cda(mock_config(2, 100), pool(), dir.path, b), ConfigError);
  CHECK_THROWS_AS(run_cda(mock_config(1, 100), synthetic_dataset(3, 3), dir.path, b), ConfigError);

  Dir other("pipe_guards_other");
  fs::create_directories(other.path);
  write_file_atomic(other.path / "notes.txt", "x");
  CHECK_THROWS_AS(run_cda(mock_config(1, 100), pool(), other.path, b), PreconditionError);

  Dir empty("pipe_guards_empty");
  CHECK_THROWS_AS(run_cda(mock_config(1, 100), Dataset{}, empty.path, b), PreconditionError);
  CHECK_THROWS_AS(resume_cda(empty.path, b), MissingFile);

  // Too few instances per class after filtering fails the sample stage.
  Dir small("pipe_guards_small");
  CHECK_THROWS_AS(run_cda(mock_config(1, 101), pool(), small.path, b), StageFailed);
  CHECK(load_run_state(small.path).status.failed_stage == Stage::sample);
}

TEST_CASE("history keys cover every produced dataset") {
  Dir dir("pipe_history");
  const auto s = run(mock_config(2, 100), level_world(1, {9, 10}), dir.path);
  const auto keys = history_keys(dir.path, s);
  for (const auto& r : s.records) {
    for (const auto& i : load(dir.path, r.dataset_ref).instances) CHECK(keys.count(dedup_key(i)));
    for (const auto& i : load(dir.path, r.aug_ref).instances) CHECK(keys.count(dedup_key(i)));
  }
}

TEST_CASE("teacher filter") {
  SUBCASE("retention and metaphor share") {
    // 4000 metaphors and 11000 literals; the teacher gets 3251 and 10357 right.
    const auto raw = synthetic_dataset(4000, 11000);
    std::unordered_set<std::string> right;
    std::size_t m = 0, l = 0;
    for (const auto& i : raw.instances) {
      auto& n = i.label == Label::metaphor ? m : l;
      if (n < (i.label == Label::metaphor ? 3251u : 10357u)) right.insert(i.id);
      ++n;
    }
    auto cfg = EndpointConfig::defaults_for(EndpointRole::teacher);
    cfg.base_url = kTeacherUrl;
    const ChatClient teacher(cfg, std::make_shared<MockModel>(id_student(right)));
    const auto f = teacher_filter(teacher, raw);
    CHECK(f.kept.size() == 13608);
    CHECK(f.after.n_instances == 13608);
    CHECK(f.after.pct_metaphor.str() == "23.89");
    CHECK(f.before.pct_correct->str() == "90.72");
    CHECK(f.kept.ids() == right);
  }
  SUBCASE("greedy decoding") {
    auto c = mock_config(1, 1);
    c.teacher.temperature = 0.9;
    Backends b;
    b.resolver.add(kTeacherUrl, std::make_shared<MockModel>(oracle_teacher()));
    CHECK(teacher_eval_client(b, c).config().temperature == 0.0);
    CHECK(teacher_eval_client(b, c).config().model_id == c.teacher.model_id);
  }
}

TEST_CASE("report_run") {
  const std::vector<TestSet> sets{{"syn", synthetic_dataset(20, 20, 8, 5000)}};

  SUBCASE("deterministic student has zero spread") {
    Dir dir("report_det");
    const auto w = level_world(1, {10});
    run(mock_config(1, 100), w, dir.path);
    const auto r = report_run(dir.path, sets, 3, w.backends(dir.path));
    REQUIRE(r.test_sets.size() == 1);
    const auto& t = r.test_sets[0];
    REQUIRE(t.trials.size() == 3);
    CHECK(t.accuracy.mean == 1.0);
    CHECK(t.accuracy.stddev == 0.0);
    CHECK(t.f1.stddev == 0.0);
    CHECK(t.trials[0].seed == 7);
    CHECK(t.trials[2].seed == 9);
    CHECK(t.trials[0].confusion.total() == 10);
    CHECK(r.final_checkpoint == "mock-ckpt-1");
    CHECK(r.notes.size() == 1);
    REQUIRE(r.iterations.size() == 1);
    CHECK(r.iterations[0].stats.n_instances == 200);
    REQUIRE(r.drift.size() == 1);
    CHECK(r.drift[0].train_pct_metaphor->str() == "50.00");
    CHECK(r.drift[0].train_size == 20);

    const auto text = render_text(r);
    CHECK(text.find("I ") != std::string::npos);
    CHECK(text.find("10.00") != std::string::npos);
    const auto j = to_json(r);
    CHECK(j["iterations"][0]["pct_correct"] == "10.00");
    CHECK(j["test_sets"][0]["trials"].size() == 3);
  }
  SUBCASE("three trials at 0.6, 0.7 and 0.8") {
    Dir dir("report_spread");
    auto w = level_world(1, {10});
    // Ten questions per trial; the first 6, 7 and 8 of each trial come back right.
    auto calls = std::make_shared<std::atomic<int>>(0);
    w.schedule = {mock_factory([calls](const ChatRequest& req) {
      const auto q = read_question(req.prompt);
      const int c = (*calls)++;
      const bool right = c % 10 < 6 + c / 10;
      const bool gold_yes = label_of_sentence(q->sentence) == Label::metaphor;
      return answer(right ? gold_yes : !gold_yes);
    })};
    run(mock_config(1, 100), w, dir.path);
    const auto r = report_run(dir.path, sets, 3, w.backends(dir.path));
    const auto& t = r.test_sets[0];
    CHECK(t.trials[0].metrics.accuracy == doctest::Approx(0.6));
    CHECK(t.trials[1].metrics.accuracy == doctest::Approx(0.7));
    CHECK(t.trials[2].metrics.accuracy == doctest::Approx(0.8));
    CHECK(t.accuracy.mean == doctest::Approx(0.7));
    CHECK(t.accuracy.stddev == doctest::Approx(0.1));
  }
}

TEST_CASE("mean_stddev and roman") {
  CHECK(mean_stddev({}).mean == 0.0);
  CHECK(mean_stddev({0.5}).stddev == 0.0);
  const auto m = mean_stddev({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(m.mean == doctest::Approx(5.0));
  CHECK(m.stddev == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(roman(1) == "I");
  CHECK(roman(4) == "IV");
  CHECK(roman(9) == "IX");
  CHECK(roman(14) == "XIV");
  CHECK(roman(1994) == "MCMXCIV");
  CHECK(roman(0) == "0");
}

// cda-forge: command-line front end for the curriculum augmentation loop.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cda/augmenter.hpp"
#include "cda/dataset.hpp"
#include "cda/dataset_io.hpp"
#include "cda/error.hpp"
#include "cda/evaluator.hpp"
#include "cda/mock_model.hpp"
#include "cda/pipeline.hpp"
#include "cda/report.hpp"
#include "cda/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;
constexpr const char* kSavedConfig = "cli_config.json";

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  if (!fs::exists(path)) throw cda::MissingFile(path);
  auto j = json::parse(cda::read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw cda::ConfigError("config file is not a JSON object: " + path);
  }
  return j;
}

cda::IngestOptions ingest_options(const json& source) {
  cda::IngestOptions opt;
  if (source.contains("format")) {
    auto f = cda::parse_dataset_format(source.at("format").get<std::string>());
    if (!f) throw cda::ConfigError("unknown dataset format " + source.at("format").dump());
    opt.format = *f;
  }
  if (source.contains("mapping")) {
    const auto& m = source.at("mapping");
    opt.mapping.sentence = m.value("sentence", opt.mapping.sentence);
    opt.mapping.target_word = m.value("target_word", opt.mapping.target_word);
    opt.mapping.label = m.value("label", opt.mapping.label);
    if (m.contains("delimiter")) {
      const auto d = m.at("delimiter").get<std::string>();
      if (d.size() != 1) throw cda::ConfigError("delimiter must be one character");
      opt.mapping.delimiter = d[0];
    }
    if (m.contains("label_values")) {
      for (const auto& [raw, label] : m.at("label_values").items()) {
        auto parsed = cda::parse_label(label.get<std::string>());
        if (!parsed) throw cda::ConfigError("unknown label '" + label.get<std::string>() + "'");
        opt.mapping.label_values[raw] = *parsed;
      }
    }
  }
  opt.dataset_name = source.value("name", "");
  opt.skip_invalid = source.value("skip_invalid", false);
  return opt;
}

cda::Dataset load_dataset(const json& source) {
  const auto path = source.at("path").get<std::string>();
  auto result = cda::ingest_dataset(path, ingest_options(source));
  for (const auto& d : result.rejected) {
    fmt::print(stderr, "{}: row {} skipped: {}\n", path, d.row, d.reason);
  }
  if (result.duplicate_count > 0) {
    fmt::print(stderr, "{}: {} duplicate rows dropped\n", path, result.duplicate_count);
  }
  return std::move(result.dataset);
}

// Source given on the command line overrides the config's entry.
json source_from(const json& config, const char* key, const std::string& path_flag) {
  json source = config.value(key, json::object());
  if (!path_flag.empty()) source["path"] = path_flag;
  if (!source.contains("path")) {
    throw cda::ConfigError(fmt::format("no {} dataset given (config '{}' or flag)", key, key));
  }
  return source;
}

cda::Backends make_backends(const json& config, const cda::RunConfig& run,
                            const fs::path& trainer_state) {
  cda::Backends b;
  if (config.contains("mock_endpoints")) {
    for (const auto& [url, rules] : config.at("mock_endpoints").items()) {
      b.resolver.add(url, std::make_shared<cda::MockModel>(cda::mock_rules_from_json(rules)));
    }
  }
  if (const auto* spec = std::get_if<cda::MockHookSpec>(&run.trainer.hook)) {
    if (!spec->schedule.empty()) {
      auto mock = cda::MockTrainer::from_spec(*spec, trainer_state);
      mock->attach(b.resolver);
      b.trainer = mock;
    }
  } else {
    b.trainer = cda::make_hook(run.trainer);
  }
  return b;
}

struct RunOverrides {
  std::optional<int> iterations;
  std::string train_on;
  std::string augment_seed;
  std::string next_data;
  std::string finetune_mode;
  std::vector<std::string> methods;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> shuffle_seed;
  std::optional<std::size_t> train_per_class;
  std::optional<std::size_t> test_per_class;
  std::optional<int> retries;
  bool stop_if_wrong_empty = false;

  void apply(json& config) const {
    if (iterations) config["iterations"] = *iterations;
    if (!train_on.empty()) config["train_on"] = train_on;
    if (!augment_seed.empty()) config["augment_seed"] = augment_seed;
    if (!next_data.empty()) config["next_data"] = next_data;
    if (!finetune_mode.empty()) config["finetune_mode"] = finetune_mode;
    if (!methods.empty()) config["methods"] = methods;
    if (seed) config["seeds"]["sampling"] = *seed;
    if (shuffle_seed) config["seeds"]["shuffling"] = *shuffle_seed;
    if (train_per_class) config["sample"]["train_per_class"] = *train_per_class;
    if (test_per_class) config["sample"]["test_per_class"] = *test_per_class;
    if (retries) config["retries_per_generation"] = *retries;
    if (stop_if_wrong_empty) config["stop_if_wrong_empty"] = true;
  }
};

void add_run_flags(CLI::App* cmd, RunOverrides& o) {
  cmd->add_option("--iterations,-N", o.iterations, "Number of iterations");
  cmd->add_option("--train-on", o.train_on, "correct | all")
      ->check(CLI::IsMember({"correct", "all"}));
  cmd->add_option("--augment-seed", o.augment_seed, "wrong | all")
      ->check(CLI::IsMember({"wrong", "all"}));
  cmd->add_option("--next-data", o.next_data, "merged | augmented_only")
      ->check(CLI::IsMember({"merged", "augmented_only"}));
  cmd->add_option("--finetune-mode", o.finetune_mode, "continuous | from_scratch")
      ->check(CLI::IsMember({"continuous", "from_scratch"}));
  cmd->add_option("--methods", o.methods, "Augmentation methods")->delimiter(',');
  cmd->add_option("--seed", o.seed, "Sampling seed");
  cmd->add_option("--shuffle-seed", o.shuffle_seed, "Shuffling seed passed to the trainer");
  cmd->add_option("--train-per-class", o.train_per_class, "Training instances per class");
  cmd->add_option("--test-per-class", o.test_per_class, "Test instances per class");
  cmd->add_option("--retries", o.retries, "Retries per generation");
  cmd->add_flag("--stop-if-wrong-empty", o.stop_if_wrong_empty,
                "Stop once an iteration has no wrong predictions");
}

void print_stats(const std::string& label, const cda::DatasetStats& s) {
  fmt::print("{:<10} n={} %M={}", label, s.n_instances, s.pct_metaphor.str());
  if (s.pct_correct) fmt::print(" %Correct={}", s.pct_correct->str());
  if (s.pct_correct_metaphor) fmt::print(" %Correct.M={}", s.pct_correct_metaphor->str());
  fmt::print("\n");
}

cda::EndpointConfig pick_endpoint(const cda::RunConfig& run, const std::string& which,
                                  const std::string& url, const std::string& model) {
  auto ep = which == "teacher" ? run.teacher : run.student_base;
  if (which == "teacher") ep.temperature = 0.0;
  if (!url.empty()) ep.base_url = url;
  if (!model.empty()) ep.model_id = model;
  ep.validate();
  return ep;
}

void print_summary(const cda::RunState& state) {
  for (const auto& r : state.records) {
    fmt::print("iteration {}: |D|={} correct={} wrong={} trained={} ckpt={} aug={} next={}\n",
               r.index, r.dataset_size, r.correct_count, r.wrong_count, r.trained,
               r.checkpoint_id, r.aug_size, r.next_dataset_size);
  }
  if (!state.stop_reason.empty()) fmt::print("stopped early: {}\n", state.stop_reason);
  fmt::print("final checkpoint: {}\n", state.final_checkpoint.value_or("-"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curriculum-style data augmentation for metaphor detection"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config,-c", config_path, "JSON config file")->check(CLI::ExistingFile);

  // filter
  auto* filter = app.add_subcommand("filter", "Keep the instances the teacher labels correctly");
  std::string filter_input, filter_out;
  filter->add_option("--input,-i", filter_input, "Raw dataset");
  filter->add_option("--out,-o", filter_out, "Filtered dataset (canonical JSONL)")->required();

  // run
  auto* run = app.add_subcommand("run", "Run the full loop");
  std::string run_input, run_dir;
  RunOverrides overrides;
  run->add_option("--input,-i", run_input, "Initial dataset");
  run->add_option("--run-dir,-d", run_dir, "Run directory")->required();
  add_run_flags(run, overrides);

  // resume
  auto* resume = app.add_subcommand("resume", "Continue an interrupted or failed run");
  std::string resume_dir;
  resume->add_option("run_dir", resume_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  // augment
  auto* augment = app.add_subcommand("augment", "One augmentation round over a seed dataset");
  std::string aug_seeds, aug_out, aug_log;
  int aug_iteration = 1;
  augment->add_option("--seeds,-i", aug_seeds, "Seed dataset (canonical JSONL)")->required();
  augment->add_option("--out,-o", aug_out, "Augmented dataset")->required();
  augment->add_option("--log", aug_log, "Generation log (JSONL)");
  augment->add_option("--iteration", aug_iteration, "Iteration recorded in provenance");
  add_run_flags(augment, overrides);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate an endpoint on a dataset");
  std::string eval_dataset, eval_report, eval_endpoint = "student", eval_url, eval_model;
  evaluate->add_option("--dataset,-i", eval_dataset, "Dataset (canonical JSONL)")->required();
  evaluate->add_option("--report,-o", eval_report, "Report file");
  evaluate->add_option("--endpoint", eval_endpoint, "teacher | student")
      ->check(CLI::IsMember({"teacher", "student"}));
  evaluate->add_option("--base-url", eval_url, "Override the endpoint URL");
  evaluate->add_option("--model", eval_model, "Override the model id");

  // stats
  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  std::string stats_dataset, stats_report;
  stats->add_option("--dataset,-i", stats_dataset, "Dataset (canonical JSONL)")->required();
  stats->add_option("--report", stats_report, "Evaluation report with correctness");

  // report
  auto* report = app.add_subcommand("report", "Evaluate the final checkpoint of a run");
  std::string report_dir, report_json;
  std::vector<std::string> report_tests;
  int trials = 3;
  report->add_option("run_dir", report_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--test", report_tests, "Test set as name=path (canonical JSONL)");
  report->add_option("--trials", trials, "Trials per test set")->check(CLI::PositiveNumber);
  report->add_option("--json", report_json, "Also write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    json config = load_config(config_path);

    if (*filter) {
      const auto rc = cda::run_config_from_json(config);
      auto backends = make_backends(config, rc, {});
      const auto raw = load_dataset(source_from(config, "input", filter_input));
      auto result = cda::teacher_filter(cda::teacher_eval_client(backends, rc), raw);
      cda::write_dataset(filter_out, result.kept);
      print_stats("before", result.before);
      print_stats("after", result.after);
      return 0;
    }

    if (*run) {
      overrides.apply(config);
      const auto rc = cda::run_config_from_json(config);
      rc.validate();
      const auto initial = load_dataset(source_from(config, "input", run_input));
      auto backends = make_backends(config, rc, fs::path(run_dir) / "trainer");
      // Mock endpoints are not part of the run config; keep them for resume.
      const bool fresh = !fs::exists(fs::path(run_dir) / "state.json");
      const auto save = [&] {
        if (fresh && fs::exists(fs::path(run_dir) / "state.json")) {
          cda::write_file_atomic(fs::path(run_dir) / kSavedConfig, config.dump(2) + "\n");
        }
      };
      std::optional<cda::RunState> state;
      try {
        state = cda::run_cda(rc, initial, run_dir, backends);
      } catch (...) {
        save();
        throw;
      }
      save();
      print_summary(*state);
      return 0;
    }

    if (*resume) {
      const fs::path dir = resume_dir;
      if (config.empty() && fs::exists(dir / kSavedConfig)) {
        config = json::parse(cda::read_file(dir / kSavedConfig));
      }
      const auto stored = cda::load_run_state(dir);
      auto backends = make_backends(config, stored.config, dir / "trainer");
      print_summary(cda::resume_cda(dir, backends));
      return 0;
    }

    if (*augment) {
      overrides.apply(config);
      const auto rc = cda::run_config_from_json(config);
      auto backends = make_backends(config, rc, {});
      const auto seeds = cda::read_dataset(aug_seeds);
      const auto teacher = backends.resolver.client(rc.teacher);
      auto round = cda::augment_round(teacher, seeds, rc.methods, aug_iteration, seeds.keys(),
                                      rc.retries_per_generation);
      cda::write_dataset(aug_out, round.aug);
      if (!aug_log.empty()) cda::write_file_atomic(aug_log, cda::log_to_jsonl(round.log));
      for (const auto& [outcome, n] : round.log.outcome_counts()) {
        fmt::print("{}: {}\n", outcome, n);
      }
      fmt::print("augmented: {} from {} seeds ({} requests)\n", round.aug.size(), seeds.size(),
                 round.log.requests);
      return 0;
    }

    if (*evaluate) {
      const auto rc = cda::run_config_from_json(config);
      auto backends = make_backends(config, rc, {});
      const auto data = cda::read_dataset(eval_dataset);
      const auto ep = pick_endpoint(rc, eval_endpoint, eval_url, eval_model);
      const auto eval = cda::evaluate_split(backends.resolver.client(ep), data);
      if (!eval_report.empty()) cda::write_report(eval_report, eval.report);
      const auto& c = eval.report.confusion;
      const auto& m = eval.report.metrics;
      fmt::print("tp={} fp={} fn={} tn={} unparseable={}\n", c.tp, c.fp, c.fn, c.tn,
                 c.unparseable);
      fmt::print("accuracy={:.4f} precision={:.4f} recall={:.4f} f1={:.4f}\n", m.accuracy,
                 m.precision, m.recall, m.f1);
      return 0;
    }

    if (*stats) {
      const auto data = cda::read_dataset(stats_dataset);
      if (stats_report.empty()) {
        print_stats(data.name, cda::compute_stats(data));
        return 0;
      }
      cda::CorrectnessMap correctness;
      for (const auto& line : cda::read_jsonl(stats_report)) {
        if (line.contains("instance_id")) {
          correctness[line.at("instance_id").get<std::string>()] = line.at("correct").get<bool>();
        }
      }
      print_stats(data.name, cda::compute_stats(data, correctness));
      return 0;
    }

    if (*report) {
      const fs::path dir = report_dir;
      if (config.empty() && fs::exists(dir / kSavedConfig)) {
        config = json::parse(cda::read_file(dir / kSavedConfig));
      }
      const auto stored = cda::load_run_state(dir);
      auto backends = make_backends(config, stored.config, dir / "trainer");
      std::vector<cda::TestSet> sets;
      for (const auto& spec : report_tests) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw cda::ConfigError("--test expects name=path: " + spec);
        sets.push_back({spec.substr(0, eq), cda::read_dataset(spec.substr(eq + 1))});
      }
      if (sets.empty() && config.contains("test_sets")) {
        for (const auto& t : config.at("test_sets")) {
          auto data = load_dataset(t);
          sets.push_back({t.value("name", data.name), std::move(data)});
        }
      }
      const auto doc = cda::report_run(dir, sets, trials, backends);
      std::cout << cda::render_text(doc);
      if (!report_json.empty()) {
        cda::write_file_atomic(report_json, cda::to_json(doc).dump(2) + "\n");
      }
      return 0;
    }
  } catch (const cda::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitUsage;
  } catch (const cda::MissingFile& e) {
    fmt::print(stderr, "missing file: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cda/dataset.hpp"
#include "cda/evaluator.hpp"
#include "cda/pipeline.hpp"

namespace cda {

struct TestSet {
  std::string name;
  Dataset data;
};

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  ConfusionMatrix confusion;
  Metrics metrics;
};

struct MeanStd {
  double mean = 0;
  double stddev = 0;  // sample standard deviation; 0 for fewer than two values
};

MeanStd mean_stddev(const std::vector<double>& values);

struct TestSetReport {
  std::string name;
  std::vector<TrialResult> trials;
  MeanStd accuracy;
  MeanStd f1;
};

/// Dataset statistics of the data each iteration was evaluated on.
struct IterationStatsRow {
  int iteration = 0;
  DatasetStats stats;
  std::size_t aug_size = 0;
};

/// Share of metaphors in what was trained on and in what came next.
struct DriftPoint {
  int iteration = 0;
  std::size_t train_size = 0;
  std::optional<Percent> train_pct_metaphor;
  Percent next_pct_metaphor;
};

struct RunReport {
  std::string final_checkpoint;
  std::vector<std::string> notes;
  std::vector<TestSetReport> test_sets;
  std::vector<IterationStatsRow> iterations;
  std::vector<DriftPoint> drift;
};

/// Evaluates the final checkpoint of a completed run on `trials` balanced
/// draws from each test set, seeded with the sampling seed plus the trial
/// index. Throws IncompleteRun unless the run has completed.
RunReport report_run(const std::filesystem::path& run_dir,
                     const std::vector<TestSet>& test_sets, int trials,
                     const Backends& backends);

nlohmann::json to_json(const RunReport& report);
std::string render_text(const RunReport& report);

/// Upper-case Roman numeral for 1..3999; decimal otherwise.
std::string roman(int n);

}  // namespace cda

#include "cda/report.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cda/dataset_io.hpp"
#include "cda/error.hpp"

namespace cda {

namespace fs = std::filesystem;
using nlohmann::json;

MeanStd mean_stddev(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  const auto n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return out;
  double ss = 0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(ss / (n - 1));
  return out;
}

std::string roman(int n) {
  if (n < 1 || n > 3999) return std::to_string(n);
  static constexpr std::pair<int, const char*> kDigits[] = {
      {1000, "M"}, {900, "CM"}, {500, "D"}, {400, "CD"}, {100, "C"}, {90, "XC"}, {50, "L"},
      {40, "XL"},  {10, "X"},   {9, "IX"},  {5, "V"},   {4, "IV"},  {1, "I"}};
  std::string out;
  for (const auto& [value, digits] : kDigits) {
    for (; n >= value; n -= value) out += digits;
  }
  return out;
}

RunReport report_run(const fs::path& run_dir, const std::vector<TestSet>& test_sets, int trials,
                     const Backends& backends) {
  const auto state = load_run_state(run_dir);
  if (state.status.kind != RunStatus::Kind::completed || !state.final_checkpoint) {
    throw IncompleteRun("run in " + run_dir.string() + " has not completed");
  }
  if (trials < 1) throw PreconditionError("trials must be >= 1");
  const auto& config = state.config;

  RunReport report;
  report.final_checkpoint = *state.final_checkpoint;
  report.notes.push_back(fmt::format(
      "Every trial evaluates the same final checkpoint ({}); trials differ only in the "
      "test sample drawn.",
      report.final_checkpoint));

  auto final_ref = base_checkpoint(config.student_base);
  for (const auto& c : load_checkpoints(run_dir)) {
    if (c.id == report.final_checkpoint) final_ref = c;
  }
  const auto model = backends.resolver.client(final_ref.serving);

  for (const auto& set : test_sets) {
    TestSetReport tr;
    tr.name = set.name;
    std::vector<double> acc;
    std::vector<double> f1;
    for (int t = 0; t < trials; ++t) {
      const auto seed = config.seeds.sampling + static_cast<std::uint64_t>(t);
      const auto sample = sample_balanced(set.data, config.sample.test_per_class, seed);
      const auto eval = evaluate_split(model, sample);
      tr.trials.push_back(
          TrialResult{t, seed, eval.report.confusion, eval.report.metrics});
      acc.push_back(eval.report.metrics.accuracy);
      f1.push_back(eval.report.metrics.f1);
    }
    tr.accuracy = mean_stddev(acc);
    tr.f1 = mean_stddev(f1);
    report.test_sets.push_back(std::move(tr));
  }

  for (const auto& r : state.records) {
    if (r.stats) report.iterations.push_back(IterationStatsRow{r.index, *r.stats, r.aug_size});
    if (r.completed != Stage::merge) continue;
    DriftPoint d;
    d.iteration = r.index;
    d.train_size = r.train_size;
    if (!r.train_ref.empty()) {
      d.train_pct_metaphor = compute_stats(read_dataset(run_dir / r.train_ref)).pct_metaphor;
    }
    d.next_pct_metaphor = compute_stats(read_dataset(run_dir / r.next_dataset_ref)).pct_metaphor;
    report.drift.push_back(d);
  }
  return report;
}

json to_json(const RunReport& report) {
  json sets = json::array();
  for (const auto& s : report.test_sets) {
    json trials = json::array();
    for (const auto& t : s.trials) {
      trials.push_back(json{{"trial", t.trial},
                            {"seed", t.seed},
                            {"confusion", to_json(t.confusion)},
                            {"metrics", to_json(t.metrics)}});
    }
    sets.push_back(json{{"name", s.name},
                        {"trials", trials},
                        {"accuracy", {{"mean", s.accuracy.mean}, {"stddev", s.accuracy.stddev}}},
                        {"f1", {{"mean", s.f1.mean}, {"stddev", s.f1.stddev}}}});
  }
  json rows = json::array();
  for (const auto& r : report.iterations) {
    auto j = to_json(r.stats);
    j["iteration"] = r.iteration;
    j["aug_size"] = r.aug_size;
    rows.push_back(j);
  }
  json drift = json::array();
  for (const auto& d : report.drift) {
    drift.push_back(json{{"iteration", d.iteration},
                         {"train_size", d.train_size},
                         {"train_pct_metaphor",
                          d.train_pct_metaphor ? json(d.train_pct_metaphor->str()) : json()},
                         {"next_pct_metaphor", d.next_pct_metaphor.str()}});
  }
  return json{{"final_checkpoint", report.final_checkpoint},
              {"notes", report.notes},
              {"test_sets", sets},
              {"iterations", rows},
              {"drift", drift}};
}

std::string render_text(const RunReport& report) {
  std::string out;
  for (const auto& n : report.notes) out += "# " + n + "\n";
  out += "\n";
  out += fmt::format("{:<12}{:>7}  {:>16}  {:>16}\n", "Test set", "Trials", "Acc", "F1");
  for (const auto& s : report.test_sets) {
    out += fmt::format("{:<12}{:>7}  {:>7.2f} ± {:<6.2f}  {:>7.2f} ± {:<6.2f}\n", s.name,
                       s.trials.size(), 100 * s.accuracy.mean, 100 * s.accuracy.stddev,
                       100 * s.f1.mean, 100 * s.f1.stddev);
  }
  out += "\n";
  out += fmt::format("{:<10}{:>10}{:>8}{:>10}{:>12}{:>8}\n", "Iteration", "#Instance", "%M",
                     "%Correct", "%Correct.M", "#Aug");
  for (const auto& r : report.iterations) {
    const auto pct = [](const std::optional<Percent>& p) { return p ? p->str() : "-"; };
    out += fmt::format("{:<10}{:>10}{:>8}{:>10}{:>12}{:>8}\n", roman(r.iteration),
                       r.stats.n_instances, r.stats.pct_metaphor.str(),
                       pct(r.stats.pct_correct), pct(r.stats.pct_correct_metaphor), r.aug_size);
  }
  out += "\n";
  out += fmt::format("{:<10}{:>10}{:>10}{:>10}\n", "Iteration", "#Train", "Train %M", "Next %M");
  for (const auto& d : report.drift) {
    out += fmt::format("{:<10}{:>10}{:>10}{:>10}\n", roman(d.iteration), d.train_size,
                       d.train_pct_metaphor ? d.train_pct_metaphor->str() : "-",
                       d.next_pct_metaphor.str());
  }
  return out;
}

}  // namespace cda

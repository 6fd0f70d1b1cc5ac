#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cda/dataset.hpp"
#include "cda/inference.hpp"

namespace cda {

struct ParsedAnswer {
  enum class Kind { yes, no, unparseable };
  Kind kind = Kind::unparseable;
  std::string raw;  // kept only for unparseable answers

  static ParsedAnswer yes() { return {Kind::yes, {}}; }
  static ParsedAnswer no() { return {Kind::no, {}}; }
  static ParsedAnswer unparseable(std::string raw) {
    return {Kind::unparseable, std::move(raw)};
  }
  bool operator==(const ParsedAnswer&) const = default;
};

/// Takes the first run of ASCII letters and compares it to yes/no without
/// regard to case. Never throws.
ParsedAnswer parse_answer(std::string_view raw) noexcept;

struct PredictionRecord {
  std::string instance_id;
  std::string raw_text;
  ParsedAnswer parsed;
  std::optional<Label> predicted_label;
  Label gold = Label::literal;
  bool correct = false;
  std::string error;  // transport failure after retries, if any
};

// Positive class is Metaphor. Unparseable answers and failed requests are
// counted apart and are always wrong.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t unparseable = 0;

  std::size_t total() const { return tp + fp + fn + tn + unparseable; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct Metrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Zero denominators yield 0. Throws EmptyConfusion when total() == 0.
Metrics compute_metrics(const ConfusionMatrix& confusion);

struct EvalReport {
  std::vector<PredictionRecord> records;
  ConfusionMatrix confusion;
  Metrics metrics;
};

struct Split {
  Dataset correct;
  Dataset wrong;
};

struct Evaluation {
  EvalReport report;
  Split split;
};

/// Asks `model` the yes/no question for every instance and partitions the
/// dataset by correctness. Throws EndpointUnavailable only if no request
/// succeeded at all.
Evaluation evaluate_split(const ChatClient& model, const Dataset& dataset);

CorrectnessMap correctness_of(const EvalReport& report);

nlohmann::json to_json(const PredictionRecord& record);
nlohmann::json to_json(const ConfusionMatrix& confusion);
nlohmann::json to_json(const Metrics& metrics);

/// One line per record followed by a {"summary": ...} line.
std::string report_to_jsonl(const EvalReport& report);
void write_report(const std::filesystem::path& path, const EvalReport& report);

}  // namespace cda

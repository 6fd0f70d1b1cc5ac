#include "cda/evaluator.hpp"

#include <cctype>

#include <fmt/format.h>

#include "cda/dataset_io.hpp"
#include "cda/error.hpp"
#include "cda/text.hpp"

namespace cda {

using nlohmann::json;

ParsedAnswer parse_answer(std::string_view raw) noexcept {
  try {
    const auto is_alpha = [](char c) {
      return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    };
    const auto trimmed = text::trim(raw);
    std::size_t i = 0;
    while (i < trimmed.size() && !is_alpha(trimmed[i])) ++i;
    std::size_t j = i;
    while (j < trimmed.size() && is_alpha(trimmed[j])) ++j;
    const auto token = text::to_lower(trimmed.substr(i, j - i));
    if (token == "yes") return ParsedAnswer::yes();
    if (token == "no") return ParsedAnswer::no();
    return ParsedAnswer::unparseable(std::string(raw));
  } catch (...) {
    // only reachable on allocation failure
    return ParsedAnswer{};
  }
}

Metrics compute_metrics(const ConfusionMatrix& c) {
  const auto total = c.total();
  if (total == 0) throw EmptyConfusion();
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics m;
  m.accuracy = ratio(c.tp + c.tn, total);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  const auto denom = m.precision + m.recall;
  m.f1 = denom == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / denom;
  return m;
}

Evaluation evaluate_split(const ChatClient& model, const Dataset& dataset) {
  if (dataset.empty()) throw PreconditionError("cannot evaluate an empty dataset");

  std::vector<ChatRequest> requests;
  requests.reserve(dataset.size());
  for (const auto& inst : dataset.instances) {
    requests.push_back({render_qa(inst).instruction, inst.id});
  }
  const auto results = model.complete_many(requests);

  Evaluation out;
  out.split.correct.name = dataset.name;
  out.split.wrong.name = dataset.name;
  auto& report = out.report;
  report.records.reserve(dataset.size());
  std::size_t succeeded = 0;
  std::string first_error;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& inst = dataset.instances[i];
    PredictionRecord rec;
    rec.instance_id = inst.id;
    rec.gold = inst.label;
    if (const auto* done = std::get_if<Completion>(&results[i])) {
      ++succeeded;
      rec.raw_text = done->text;
      rec.parsed = parse_answer(done->text);
    } else {
      const auto& err = std::get<RequestError>(results[i]);
      rec.error = err.message;
      rec.parsed = ParsedAnswer::unparseable({});
      if (first_error.empty()) first_error = err.message;
    }
    switch (rec.parsed.kind) {
      case ParsedAnswer::Kind::yes:
        rec.predicted_label = Label::metaphor;
        break;
      case ParsedAnswer::Kind::no:
        rec.predicted_label = Label::literal;
        break;
      case ParsedAnswer::Kind::unparseable:
        break;
    }
    rec.correct = rec.predicted_label == inst.label;
    auto& c = report.confusion;
    if (!rec.predicted_label) {
      ++c.unparseable;
    } else if (*rec.predicted_label == Label::metaphor) {
      ++(inst.label == Label::metaphor ? c.tp : c.fp);
    } else {
      ++(inst.label == Label::metaphor ? c.fn : c.tn);
    }
    (rec.correct ? out.split.correct : out.split.wrong).instances.push_back(inst);
    report.records.push_back(std::move(rec));
  }
  if (succeeded == 0) {
    throw EndpointUnavailable(fmt::format("all {} requests to {} failed: {}",
                                          dataset.size(), model.config().base_url,
                                          first_error));
  }
  report.metrics = compute_metrics(report.confusion);
  return out;
}

CorrectnessMap correctness_of(const EvalReport& report) {
  CorrectnessMap out;
  out.reserve(report.records.size());
  for (const auto& r : report.records) out.emplace(r.instance_id, r.correct);
  return out;
}

namespace {

std::string_view answer_name(ParsedAnswer::Kind k) {
  switch (k) {
    case ParsedAnswer::Kind::yes:
      return "yes";
    case ParsedAnswer::Kind::no:
      return "no";
    default:
      return "unparseable";
  }
}

}  // namespace

json to_json(const PredictionRecord& r) {
  json j{{"instance_id", r.instance_id},
         {"raw_text", r.raw_text},
         {"parsed", answer_name(r.parsed.kind)},
         {"gold", to_string(r.gold)},
         {"correct", r.correct}};
  j["predicted_label"] =
      r.predicted_label ? json(std::string(to_string(*r.predicted_label))) : json();
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

json to_json(const ConfusionMatrix& c) {
  return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn},
              {"unparseable", c.unparseable}};
}

json to_json(const Metrics& m) {
  return json{{"accuracy", m.accuracy},
              {"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1}};
}

std::string report_to_jsonl(const EvalReport& report) {
  std::string out;
  for (const auto& r : report.records) {
    out += to_json(r).dump();
    out += '\n';
  }
  json summary{{"confusion", to_json(report.confusion)},
               {"metrics", to_json(report.metrics)},
               {"total", report.confusion.total()}};
  out += json{{"summary", summary}}.dump();
  out += '\n';
  return out;
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  write_file_atomic(path, report_to_jsonl(report));
}

}  // namespace cda

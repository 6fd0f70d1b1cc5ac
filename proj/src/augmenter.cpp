#include "cda/augmenter.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <fmt/format.h>

#include "cda/error.hpp"
#include "cda/text.hpp"

namespace cda {

using nlohmann::json;

std::string render_aug_prompt(AugMethod method, const Instance& seed) {
  if (polarity(method) != seed.label) {
    throw PolarityMismatch(fmt::format("{} cannot augment a {} seed",
                                       to_string(method), to_string(seed.label)));
  }
  // Single pass so placeholder-like text inside the seed stays verbatim.
  constexpr std::string_view kTarget = "{target_word}";
  constexpr std::string_view kSentence = "{sentence}";
  const auto tmpl = aug_template(method);
  std::string out;
  out.reserve(tmpl.size() + 2 * seed.sentence.size());
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.compare(i, kTarget.size(), kTarget) == 0) {
      out += seed.target_word;
      i += kTarget.size();
    } else if (tmpl.compare(i, kSentence.size(), kSentence) == 0) {
      out += seed.sentence;
      i += kSentence.size();
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::missing_target_word:
      return "MissingTargetWord";
    case RejectReason::unchanged_target:
      return "UnchangedTarget";
    case RejectReason::parse_failure:
      return "ParseFailure";
    case RejectReason::duplicate:
      return "Duplicate";
    case RejectReason::empty_output:
      return "EmptyOutput";
  }
  return "?";
}

// ---------------------------------------------------------------- parsing

namespace {

// Drops list/markdown decoration such as "- ", "**", "## ".
std::string_view undecorate(std::string_view line) {
  line = text::trim(line);
  while (!line.empty() && (line.front() == '*' || line.front() == '#' ||
                           line.front() == '-' || line.front() == '>' ||
                           line.front() == '_')) {
    line.remove_prefix(1);
    line = text::trim(line);
  }
  return line;
}

// Value after "<label>:" when the line carries that label.
std::optional<std::string_view> labelled(std::string_view line,
                                         std::string_view label) {
  line = undecorate(line);
  if (!text::istarts_with(line, label)) return std::nullopt;
  auto rest = line.substr(label.size());
  while (!rest.empty() && (rest.front() == '*' || rest.front() == '_')) {
    rest.remove_prefix(1);
  }
  rest = text::trim(rest);
  if (rest.empty() || rest.front() != ':') return std::nullopt;
  rest.remove_prefix(1);
  while (!rest.empty() && (rest.front() == '*' || rest.front() == '_')) {
    rest.remove_prefix(1);
  }
  return text::trim(rest);
}

constexpr std::array<std::string_view, 5> kSentenceLabels = {
    "your sentence", "new sentence", "sentence", "output", "answer"};

std::optional<std::string_view> strip_sentence_label(std::string_view line) {
  for (auto label : kSentenceLabels) {
    if (auto v = labelled(line, label)) return v;
  }
  return std::nullopt;
}

// True when text holds a second sentence: a terminator followed by
// whitespace and a capital letter.
bool has_multiple_sentences(std::string_view s) {
  for (std::size_t i = 0; i + 2 < s.size(); ++i) {
    if (s[i] != '.' && s[i] != '!' && s[i] != '?') continue;
    std::size_t j = i + 1;
    while (j < s.size() && (s[j] == '"' || s[j] == '\'' || s[j] == ')')) ++j;
    if (j >= s.size() || !std::isspace(static_cast<unsigned char>(s[j]))) continue;
    while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    while (j < s.size() && (s[j] == '"' || s[j] == '\'')) ++j;
    if (j < s.size() && std::isupper(static_cast<unsigned char>(s[j]))) return true;
  }
  return false;
}

Instance derive(const Instance& seed, AugMethod method, int iteration,
                std::string sentence, std::string target) {
  return make_instance(std::move(sentence), std::move(target), seed.label,
                       AugmentedSource{method, seed.id, iteration});
}

GenerationOutcome parse_free_sentence(AugMethod method, std::string_view raw,
                                      const Instance& seed, int iteration) {
  std::vector<std::string> lines;
  for (auto& l : text::split_lines(raw)) {
    if (!text::trim(l).empty()) lines.emplace_back(text::trim(l));
  }
  // "Your sentence:" may sit on its own line above the sentence.
  if (!lines.empty()) {
    if (auto v = strip_sentence_label(lines.front())) {
      if (v->empty()) {
        lines.erase(lines.begin());
      } else {
        lines.front() = std::string(*v);
      }
    }
  }
  if (lines.empty()) return Rejected{RejectReason::empty_output, std::string(raw)};
  if (lines.size() > 1) return Rejected{RejectReason::parse_failure, std::string(raw)};

  const auto sentence = std::string(text::strip_quotes(undecorate(lines.front())));
  if (sentence.empty()) return Rejected{RejectReason::empty_output, std::string(raw)};
  if (has_multiple_sentences(sentence)) {
    return Rejected{RejectReason::parse_failure, std::string(raw)};
  }
  auto token = text::find_stem_match(sentence, seed.target_word);
  if (!token) return Rejected{RejectReason::missing_target_word, std::string(raw)};
  return Accepted{derive(seed, method, iteration, sentence, std::move(*token))};
}

GenerationOutcome parse_replacement(AugMethod method, std::string_view raw,
                                    const Instance& seed, int iteration) {
  if (text::trim(raw).empty()) {
    return Rejected{RejectReason::empty_output, std::string(raw)};
  }
  const auto lines = text::split_lines(raw);
  // Skip an echoed seed block so few-shot examples are not picked up.
  std::size_t start = 0;
  const auto seed_sentence = text::trim(seed.sentence);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (auto v = labelled(lines[i], "original sentence")) {
      if (text::strip_quotes(*v) == seed_sentence) start = i + 1;
    }
  }
  std::optional<std::string> new_sentence;
  std::optional<std::string> new_word;
  for (std::size_t i = start; i < lines.size(); ++i) {
    if (!new_sentence) {
      if (auto v = labelled(lines[i], "new sentence")) {
        new_sentence = std::string(text::strip_quotes(*v));
        continue;
      }
    }
    if (!new_word) {
      if (auto v = labelled(lines[i], "new word")) {
        new_word = std::string(text::strip_punct_edges(text::strip_quotes(*v)));
      }
    }
  }
  if (!new_sentence || !new_word || new_sentence->empty() || new_word->empty()) {
    return Rejected{RejectReason::parse_failure, std::string(raw)};
  }
  if (text::iequals(*new_word, text::trim(seed.target_word))) {
    return Rejected{RejectReason::unchanged_target, std::string(raw)};
  }
  auto token = text::find_stem_match(*new_sentence, *new_word);
  if (!token) return Rejected{RejectReason::missing_target_word, std::string(raw)};
  return Accepted{derive(seed, method, iteration, std::move(*new_sentence),
                         std::move(*token))};
}

}  // namespace

GenerationOutcome parse_generation(AugMethod method, std::string_view raw,
                                   const Instance& seed, int iteration) noexcept {
  try {
    return is_replace_target(method)
               ? parse_replacement(method, raw, seed, iteration)
               : parse_free_sentence(method, raw, seed, iteration);
  } catch (...) {
    try {
      return Rejected{RejectReason::parse_failure, std::string(raw)};
    } catch (...) {
      return Rejected{};
    }
  }
}

// ---------------------------------------------------------------- log

std::map<std::string, std::size_t> AugmentationLog::outcome_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : entries) {
    switch (e.outcome) {
      case AugLogEntry::Outcome::accepted:
        ++counts["accepted"];
        break;
      case AugLogEntry::Outcome::request_failed:
        ++counts["request_failed"];
        break;
      case AugLogEntry::Outcome::rejected:
        ++counts[std::string(to_string(e.reason.value_or(RejectReason::parse_failure)))];
        break;
    }
  }
  return counts;
}

json to_json(const AugLogEntry& e) {
  static constexpr std::array<std::string_view, 3> kOutcome = {
      "accepted", "rejected", "request_failed"};
  json j{{"seed_id", e.seed_id},
         {"method", std::string(to_string(e.method))},
         {"attempt", e.attempt},
         {"outcome", kOutcome[static_cast<std::size_t>(e.outcome)]},
         {"raw", e.raw}};
  if (e.reason) j["reason"] = std::string(to_string(*e.reason));
  if (!e.instance_id.empty()) j["instance_id"] = e.instance_id;
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

std::string log_to_jsonl(const AugmentationLog& log) {
  std::string out;
  for (const auto& e : log.entries) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------- round

std::vector<AugMethod> normalize_methods(const std::vector<AugMethod>& methods) {
  std::vector<AugMethod> out;
  for (auto m : kAllAugMethods) {
    if (std::find(methods.begin(), methods.end(), m) != methods.end()) {
      out.push_back(m);
    }
  }
  return out;
}

AugmentRound augment_round(const ChatClient& teacher, const Dataset& seeds,
                           const std::vector<AugMethod>& methods, int iteration,
                           const std::unordered_set<std::string>& history_keys,
                           int retries_per_generation) {
  const auto enabled = normalize_methods(methods);
  if (enabled.empty()) throw PreconditionError("no augmentation method enabled");
  if (iteration < 1) throw PreconditionError("iteration must be >= 1");
  retries_per_generation = std::max(0, retries_per_generation);

  struct Job {
    const Instance* seed;
    AugMethod method;
    std::string prompt;
    std::vector<AugLogEntry> attempts;
    std::optional<Instance> accepted;
  };
  std::vector<Job> jobs;
  for (const auto& seed : seeds.instances) {
    for (auto m : enabled) {
      if (polarity(m) == seed.label) {
        jobs.push_back({&seed, m, render_aug_prompt(m, seed), {}, std::nullopt});
      }
    }
  }

  AugmentRound out;
  out.aug.name = fmt::format("aug_{}", iteration);
  std::size_t delivered = 0;
  std::vector<std::size_t> pending(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) pending[i] = i;

  for (int attempt = 0; attempt <= retries_per_generation && !pending.empty();
       ++attempt) {
    std::vector<ChatRequest> requests;
    requests.reserve(pending.size());
    for (auto j : pending) requests.push_back({jobs[j].prompt, jobs[j].seed->id});
    const auto results = teacher.complete_many(requests);
    out.log.requests += requests.size();

    std::vector<std::size_t> retry;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      auto& job = jobs[pending[k]];
      AugLogEntry entry;
      entry.seed_id = job.seed->id;
      entry.method = job.method;
      entry.attempt = attempt;
      if (const auto* err = std::get_if<RequestError>(&results[k])) {
        entry.outcome = AugLogEntry::Outcome::request_failed;
        entry.error = err->message;
        job.attempts.push_back(std::move(entry));
        retry.push_back(pending[k]);
        continue;
      }
      ++delivered;
      const auto& raw = std::get<Completion>(results[k]).text;
      entry.raw = raw;
      auto outcome = parse_generation(job.method, raw, *job.seed, iteration);
      if (auto* ok = std::get_if<Accepted>(&outcome)) {
        entry.outcome = AugLogEntry::Outcome::accepted;
        entry.instance_id = ok->instance.id;
        job.accepted = std::move(ok->instance);
      } else {
        entry.outcome = AugLogEntry::Outcome::rejected;
        entry.reason = std::get<Rejected>(outcome).reason;
        retry.push_back(pending[k]);
      }
      job.attempts.push_back(std::move(entry));
    }
    pending = std::move(retry);
  }

  if (out.log.requests > 0 && delivered == 0) {
    throw EndpointUnavailable(fmt::format("all {} generation requests to {} failed",
                                          out.log.requests, teacher.config().base_url));
  }

  // Sequential dedup pass in (seed, method) order.
  std::unordered_set<std::string> seen;
  for (auto& job : jobs) {
    if (job.accepted) {
      const auto key = dedup_key(*job.accepted);
      if (history_keys.count(key) || !seen.insert(key).second) {
        auto& last = job.attempts.back();
        last.outcome = AugLogEntry::Outcome::rejected;
        last.reason = RejectReason::duplicate;
        last.instance_id.clear();
      } else {
        out.aug.instances.push_back(std::move(*job.accepted));
      }
    }
    for (auto& e : job.attempts) out.log.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace cda

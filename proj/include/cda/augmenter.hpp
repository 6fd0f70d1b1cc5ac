#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cda/dataset.hpp"
#include "cda/inference.hpp"

namespace cda {

/// Teacher prompt for `method`, with {target_word} and {sentence}
/// placeholders.
std::string_view aug_template(AugMethod method);

/// Fills the template for `method` from `seed`. Throws PolarityMismatch when
/// the method's polarity differs from the seed label.
std::string render_aug_prompt(AugMethod method, const Instance& seed);

enum class RejectReason {
  missing_target_word,
  unchanged_target,
  parse_failure,
  duplicate,
  empty_output,
};

std::string_view to_string(RejectReason reason);

struct Accepted {
  Instance instance;
};

struct Rejected {
  RejectReason reason = RejectReason::parse_failure;
  std::string raw;
};

using GenerationOutcome = std::variant<Accepted, Rejected>;

/// Validates one teacher output. Total: every failure becomes Rejected.
GenerationOutcome parse_generation(AugMethod method, std::string_view raw,
                                   const Instance& seed, int iteration) noexcept;

struct AugLogEntry {
  enum class Outcome { accepted, rejected, request_failed };
  std::string seed_id;
  AugMethod method = AugMethod::direct_met;
  int attempt = 0;
  Outcome outcome = Outcome::rejected;
  std::optional<RejectReason> reason;
  std::string instance_id;
  std::string raw;
  std::string error;
};

struct AugmentationLog {
  std::vector<AugLogEntry> entries;
  std::size_t requests = 0;

  /// Counts keyed by "accepted", "request_failed" or a reject reason name.
  std::map<std::string, std::size_t> outcome_counts() const;
};

nlohmann::json to_json(const AugLogEntry& entry);
std::string log_to_jsonl(const AugmentationLog& log);

struct AugmentRound {
  Dataset aug;
  AugmentationLog log;
};

/// Every enabled method in canonical order, duplicates removed.
std::vector<AugMethod> normalize_methods(const std::vector<AugMethod>& methods);

/// One generation per (seed, method of matching polarity). Failed parses and
/// failed requests are retried up to `retries_per_generation` times with the
/// same prompt. Accepted outputs are deduplicated against `history_keys` and
/// each other in (seed, method) order.
AugmentRound augment_round(const ChatClient& teacher, const Dataset& seeds,
                           const std::vector<AugMethod>& methods, int iteration,
                           const std::unordered_set<std::string>& history_keys,
                           int retries_per_generation = 2);

}  // namespace cda

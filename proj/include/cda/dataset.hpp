#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace cda {

// Metaphor is the positive class for every metric.
enum class Label { metaphor, literal };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view s);

/// The six teacher prompt strategies, three per polarity.
enum class AugMethod {
  direct_met,
  replace_target_met,
  replace_context_met,
  direct_lit,
  replace_target_lit,
  replace_context_lit,
};

inline constexpr std::array<AugMethod, 6> kAllAugMethods = {
    AugMethod::direct_met,  AugMethod::replace_target_met,
    AugMethod::replace_context_met, AugMethod::direct_lit,
    AugMethod::replace_target_lit,  AugMethod::replace_context_lit,
};

std::string_view to_string(AugMethod method);
std::optional<AugMethod> parse_aug_method(std::string_view s);
Label polarity(AugMethod method);
bool is_replace_target(AugMethod method);
bool is_direct(AugMethod method);

struct OriginalSource {
  std::string dataset_name;
  std::size_t source_index = 0;
  bool operator==(const OriginalSource&) const = default;
};

struct AugmentedSource {
  AugMethod method = AugMethod::direct_met;
  std::string parent_id;
  int iteration = 1;
  bool operator==(const AugmentedSource&) const = default;
};

using Provenance = std::variant<OriginalSource, AugmentedSource>;

bool is_augmented(const Provenance& p);

struct Instance {
  std::string id;
  std::string sentence;
  std::string target_word;
  Label label = Label::literal;
  Provenance provenance;
  // Fields found on ingestion that this model does not know about; written
  // back unchanged.
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const Instance&) const = default;
};

/// Content hash over the normalized sentence, target word, label and
/// provenance kind. Deterministic across runs and platforms.
std::string compute_instance_id(std::string_view sentence,
                                std::string_view target_word, Label label,
                                const Provenance& provenance);

/// Builds an instance and assigns its id. Does not validate.
Instance make_instance(std::string sentence, std::string target_word,
                       Label label, Provenance provenance);

/// Reason the instance violates its invariants, or nullopt when valid.
std::optional<std::string> validate_instance(const Instance& instance);

/// Case-, punctuation- and whitespace-insensitive identity of an instance,
/// independent of label and provenance.
std::string dedup_key(const Instance& instance);
std::string dedup_key(std::string_view sentence, std::string_view target_word);

struct Dataset {
  std::string name;
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }

  std::unordered_set<std::string> ids() const;
  std::unordered_set<std::string> keys() const;
  std::size_t count(Label label) const;

  bool operator==(const Dataset&) const = default;
};

/// A percentage held as an exact count of hundredths, rounded half-up.
struct Percent {
  std::int64_t hundredths = 0;

  static Percent ratio(std::uint64_t numerator, std::uint64_t denominator);
  double value() const { return static_cast<double>(hundredths) / 100.0; }
  std::string str() const;

  bool operator==(const Percent&) const = default;
};

struct DatasetStats {
  std::size_t n_instances = 0;
  Percent pct_metaphor;
  std::optional<Percent> pct_correct;
  std::optional<Percent> pct_correct_metaphor;

  bool operator==(const DatasetStats&) const = default;
};

/// Instruction-tuning triple for one instance.
struct QaRecord {
  std::string instruction;
  std::string input;
  std::string output;

  bool operator==(const QaRecord&) const = default;
};

// ---------------------------------------------------------------- ingestion

enum class DatasetFormat { canonical_jsonl, columnar_csv };

std::optional<DatasetFormat> parse_dataset_format(std::string_view s);

/// Names the source fields and the label encoding. With an empty
/// `label_values` the accepted encodings are 1/0, metaphor/literal and
/// yes/no, case-insensitively.
struct ColumnMap {
  std::string sentence = "sentence";
  std::string target_word = "target_word";
  std::string label = "label";
  std::map<std::string, Label> label_values;
  char delimiter = ',';
};

struct IngestOptions {
  DatasetFormat format = DatasetFormat::canonical_jsonl;
  ColumnMap mapping;
  std::string dataset_name;  // defaults to the file stem
  // Collect invalid rows as diagnostics instead of failing on the first.
  bool skip_invalid = false;
};

struct RowDiagnostic {
  std::size_t row = 0;
  std::string reason;
};

struct IngestResult {
  Dataset dataset;
  std::size_t duplicate_count = 0;
  std::vector<RowDiagnostic> rejected;
};

IngestResult ingest_dataset(const std::filesystem::path& path,
                            const IngestOptions& options = {});

// ---------------------------------------------------------------- operations

/// The yes/no question put to a model for one sentence and target word.
std::string render_question(std::string_view sentence,
                            std::string_view target_word);

QaRecord render_qa(const Instance& instance);

/// Exactly `n_per_class` instances of each label, drawn without replacement
/// and shuffled, both driven by `seed`.
Dataset sample_balanced(const Dataset& dataset, std::size_t n_per_class,
                        std::uint64_t seed);

/// `base` followed by every addition whose dedup key is new.
Dataset merge_dedup(const Dataset& base, const Dataset& additions);

using CorrectnessMap = std::unordered_map<std::string, bool>;

DatasetStats compute_stats(const Dataset& dataset);
DatasetStats compute_stats(const Dataset& dataset,
                           const CorrectnessMap& correctness);

}  // namespace cda

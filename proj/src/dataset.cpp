#include "cda/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "cda/dataset_io.hpp"
#include "cda/error.hpp"
#include "cda/text.hpp"

namespace cda {

std::string_view to_string(Label label) {
  return label == Label::metaphor ? "metaphor" : "literal";
}

std::optional<Label> parse_label(std::string_view s) {
  const auto v = text::to_lower(text::trim(s));
  if (v == "metaphor" || v == "1" || v == "yes") return Label::metaphor;
  if (v == "literal" || v == "0" || v == "no") return Label::literal;
  return std::nullopt;
}

namespace {

struct MethodName {
  AugMethod method;
  std::string_view name;
};

constexpr std::array<MethodName, 6> kMethodNames = {{
    {AugMethod::direct_met, "DirectMet"},
    {AugMethod::replace_target_met, "ReplaceTargetMet"},
    {AugMethod::replace_context_met, "ReplaceContextMet"},
    {AugMethod::direct_lit, "DirectLit"},
    {AugMethod::replace_target_lit, "ReplaceTargetLit"},
    {AugMethod::replace_context_lit, "ReplaceContextLit"},
}};

}  // namespace

std::string_view to_string(AugMethod method) {
  for (const auto& m : kMethodNames) {
    if (m.method == method) return m.name;
  }
  return "?";
}

std::optional<AugMethod> parse_aug_method(std::string_view s) {
  for (const auto& m : kMethodNames) {
    if (text::iequals(m.name, s)) return m.method;
  }
  return std::nullopt;
}

Label polarity(AugMethod method) {
  switch (method) {
    case AugMethod::direct_met:
    case AugMethod::replace_target_met:
    case AugMethod::replace_context_met:
      return Label::metaphor;
    default:
      return Label::literal;
  }
}

bool is_replace_target(AugMethod method) {
  return method == AugMethod::replace_target_met ||
         method == AugMethod::replace_target_lit;
}

bool is_direct(AugMethod method) {
  return method == AugMethod::direct_met || method == AugMethod::direct_lit;
}

bool is_augmented(const Provenance& p) {
  return std::holds_alternative<AugmentedSource>(p);
}

std::string compute_instance_id(std::string_view sentence,
                                std::string_view target_word, Label label,
                                const Provenance& provenance) {
  std::string material = text::normalize_for_key(sentence);
  material += '\x1f';
  material += text::to_lower(text::trim(target_word));
  material += '\x1f';
  material += to_string(label);
  material += '\x1f';
  material += is_augmented(provenance) ? "augmented" : "original";
  return text::sha256_hex(material).substr(0, 16);
}

Instance make_instance(std::string sentence, std::string target_word,
                       Label label, Provenance provenance) {
  Instance inst;
  inst.id = compute_instance_id(sentence, target_word, label, provenance);
  inst.sentence = std::move(sentence);
  inst.target_word = std::move(target_word);
  inst.label = label;
  inst.provenance = std::move(provenance);
  return inst;
}

std::optional<std::string> validate_instance(const Instance& instance) {
  if (text::trim(instance.sentence).empty()) return "empty sentence";
  if (text::trim(instance.target_word).empty()) return "empty target word";
  if (!text::find_stem_match(instance.sentence, instance.target_word)) {
    return fmt::format("target word '{}' does not occur in sentence",
                       instance.target_word);
  }
  if (const auto* aug = std::get_if<AugmentedSource>(&instance.provenance)) {
    if (aug->parent_id.empty()) return "augmented instance without parent";
    if (aug->iteration < 1) return "augmented iteration must be >= 1";
  }
  return std::nullopt;
}

std::string dedup_key(std::string_view sentence, std::string_view target_word) {
  return text::normalize_for_key(sentence) + '\x1f' +
         text::to_lower(text::trim(target_word));
}

std::string dedup_key(const Instance& instance) {
  return dedup_key(instance.sentence, instance.target_word);
}

std::unordered_set<std::string> Dataset::ids() const {
  std::unordered_set<std::string> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.insert(inst.id);
  return out;
}

std::unordered_set<std::string> Dataset::keys() const {
  std::unordered_set<std::string> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.insert(dedup_key(inst));
  return out;
}

std::size_t Dataset::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(instances.begin(), instances.end(),
                    [label](const Instance& i) { return i.label == label; }));
}

Percent Percent::ratio(std::uint64_t numerator, std::uint64_t denominator) {
  if (denominator == 0) return Percent{0};
  // round(10000 * n / d) half-up, in exact integer arithmetic
  const auto hundredths =
      (20000 * numerator + denominator) / (2 * denominator);
  return Percent{static_cast<std::int64_t>(hundredths)};
}

std::string Percent::str() const {
  return fmt::format("{}.{:02d}", hundredths / 100, hundredths % 100);
}

std::optional<DatasetFormat> parse_dataset_format(std::string_view s) {
  const auto v = text::to_lower(s);
  if (v == "jsonl" || v == "canonical-jsonl" || v == "canonical_jsonl") {
    return DatasetFormat::canonical_jsonl;
  }
  if (v == "csv" || v == "columnar-csv" || v == "columnar_csv") {
    return DatasetFormat::columnar_csv;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- ingestion

namespace {

// RFC 4180 style: quoted fields may contain delimiters, doubled quotes and
// newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view data,
                                                char delimiter) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      row_has_content = true;
    } else if (c == delimiter) {
      row.push_back(std::move(field));
      field.clear();
      row_has_content = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      row_has_content = false;
    } else {
      field.push_back(c);
      row_has_content = true;
    }
  }
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<Label> map_label(const ColumnMap& mapping, const std::string& v) {
  if (mapping.label_values.empty()) return parse_label(v);
  if (auto it = mapping.label_values.find(v); it != mapping.label_values.end()) {
    return it->second;
  }
  const auto trimmed = std::string(text::trim(v));
  for (const auto& [key, label] : mapping.label_values) {
    if (text::iequals(key, trimmed)) return label;
  }
  return std::nullopt;
}

std::string json_scalar_to_string(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>() ? "1" : "0";
  if (j.is_number_integer() || j.is_number_unsigned()) {
    return std::to_string(j.get<long long>());
  }
  return j.dump();
}

// Accumulates rows into a dataset, applying validation and dedup.
class Collector {
 public:
  Collector(const IngestOptions& options, std::string name)
      : options_(options) {
    result_.dataset.name = std::move(name);
  }

  void add(std::size_t row, const std::string& sentence,
           const std::string& target, const std::string& raw_label,
           std::optional<Provenance> provenance, nlohmann::json extra,
           const std::optional<std::string>& given_id) {
    try {
      auto label = map_label(options_.mapping, raw_label);
      if (!label) throw UnknownLabelValue(row, raw_label);
      Provenance prov = provenance
                            ? *provenance
                            : Provenance{OriginalSource{result_.dataset.name, row}};
      auto inst = make_instance(sentence, target, *label, std::move(prov));
      inst.extra = std::move(extra);
      if (given_id && *given_id != inst.id) {
        throw MalformedRow(row, fmt::format("id '{}' does not match content "
                                            "hash '{}'", *given_id, inst.id));
      }
      if (auto reason = validate_instance(inst)) throw MalformedRow(row, *reason);
      if (!keys_.insert(dedup_key(inst)).second) {
        ++result_.duplicate_count;
        return;
      }
      result_.dataset.instances.push_back(std::move(inst));
    } catch (const MalformedRow& e) {
      if (!options_.skip_invalid) throw;
      result_.rejected.push_back({e.row(), e.reason()});
    } catch (const UnknownLabelValue& e) {
      if (!options_.skip_invalid) throw;
      result_.rejected.push_back(
          {e.row(), fmt::format("unknown label value '{}'", e.value())});
    }
  }

  void reject(std::size_t row, const std::string& reason) {
    if (!options_.skip_invalid) throw MalformedRow(row, reason);
    result_.rejected.push_back({row, reason});
  }

  IngestResult take() { return std::move(result_); }

 private:
  const IngestOptions& options_;
  IngestResult result_;
  std::unordered_set<std::string> keys_;
};

void ingest_jsonl(std::string_view data, Collector& out,
                  const ColumnMap& mapping) {
  std::size_t row = 0;
  for (const auto& line : text::split_lines(data)) {
    if (text::trim(line).empty()) continue;
    const std::size_t r = row++;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      out.reject(r, "not a JSON object");
      continue;
    }
    auto field = [&](const std::string& name) -> std::optional<std::string> {
      auto it = j.find(name);
      if (it == j.end() || it->is_null()) return std::nullopt;
      return json_scalar_to_string(*it);
    };
    auto sentence = field(mapping.sentence);
    auto target = field(mapping.target_word);
    auto label = field(mapping.label);
    if (!sentence || !target || !label) {
      out.reject(r, "missing sentence, target word or label field");
      continue;
    }
    std::optional<Provenance> prov;
    if (auto it = j.find("provenance"); it != j.end()) {
      try {
        prov = provenance_from_json(*it);
      } catch (const std::exception& e) {
        out.reject(r, fmt::format("bad provenance: {}", e.what()));
        continue;
      }
    }
    std::optional<std::string> given_id;
    if (auto it = j.find("id"); it != j.end() && it->is_string()) {
      given_id = it->get<std::string>();
    }
    nlohmann::json extra = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      if (k == "id" || k == "provenance" || k == mapping.sentence ||
          k == mapping.target_word || k == mapping.label) {
        continue;
      }
      extra[k] = it.value();
    }
    out.add(r, *sentence, *target, *label, std::move(prov), std::move(extra),
            given_id);
  }
}

void ingest_csv(std::string_view data, Collector& out,
                const ColumnMap& mapping) {
  auto rows = parse_csv(data, mapping.delimiter);
  if (rows.empty()) throw MalformedRow(0, "missing header row");
  const auto& header = rows.front();
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw MalformedRow(0, fmt::format("header lacks column '{}'", name));
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto s_col = column(mapping.sentence);
  const auto t_col = column(mapping.target_word);
  const auto l_col = column(mapping.label);
  const auto needed = std::max({s_col, t_col, l_col}) + 1;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::size_t r = i - 1;
    const auto& fields = rows[i];
    if (fields.size() < needed) {
      out.reject(r, fmt::format("expected at least {} fields, found {}",
                                needed, fields.size()));
      continue;
    }
    nlohmann::json extra = nlohmann::json::object();
    for (std::size_t c = 0; c < fields.size() && c < header.size(); ++c) {
      if (c == s_col || c == t_col || c == l_col) continue;
      extra[header[c]] = fields[c];
    }
    out.add(r, fields[s_col], fields[t_col], fields[l_col], std::nullopt,
            std::move(extra), std::nullopt);
  }
}

}  // namespace

IngestResult ingest_dataset(const std::filesystem::path& path,
                            const IngestOptions& options) {
  if (!std::filesystem::is_regular_file(path)) throw MissingFile(path.string());
  const auto data = read_file(path);
  Collector out(options, options.dataset_name.empty()
                             ? path.stem().string()
                             : options.dataset_name);
  if (options.format == DatasetFormat::canonical_jsonl) {
    ingest_jsonl(data, out, options.mapping);
  } else {
    ingest_csv(data, out, options.mapping);
  }
  return out.take();
}

// ---------------------------------------------------------------- operations

std::string render_question(std::string_view sentence,
                            std::string_view target_word) {
  return fmt::format(
      "Is the word '{}' in the sentence '{}' used metaphorically? Please "
      "answer with 'Yes' or 'No' only.",
      target_word, sentence);
}

QaRecord render_qa(const Instance& instance) {
  return QaRecord{
      render_question(instance.sentence, instance.target_word),
      "",
      instance.label == Label::metaphor ? "Yes" : "No",
  };
}

Dataset sample_balanced(const Dataset& dataset, std::size_t n_per_class,
                        std::uint64_t seed) {
  std::vector<const Instance*> met;
  std::vector<const Instance*> lit;
  for (const auto& inst : dataset.instances) {
    (inst.label == Label::metaphor ? met : lit).push_back(&inst);
  }
  if (met.size() < n_per_class) {
    throw InsufficientClassCount("Metaphor", met.size(), n_per_class);
  }
  if (lit.size() < n_per_class) {
    throw InsufficientClassCount("Literal", lit.size(), n_per_class);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(met.begin(), met.end(), rng);
  std::shuffle(lit.begin(), lit.end(), rng);
  std::vector<const Instance*> picked(met.begin(), met.begin() + n_per_class);
  picked.insert(picked.end(), lit.begin(), lit.begin() + n_per_class);
  std::shuffle(picked.begin(), picked.end(), rng);

  Dataset out;
  out.name = dataset.name;
  out.instances.reserve(picked.size());
  for (const auto* inst : picked) out.instances.push_back(*inst);
  return out;
}

Dataset merge_dedup(const Dataset& base, const Dataset& additions) {
  Dataset out = base;
  auto seen = base.keys();
  for (const auto& inst : additions.instances) {
    if (seen.insert(dedup_key(inst)).second) out.instances.push_back(inst);
  }
  return out;
}

namespace {

DatasetStats base_stats(const Dataset& dataset) {
  DatasetStats stats;
  stats.n_instances = dataset.size();
  stats.pct_metaphor =
      Percent::ratio(dataset.count(Label::metaphor), dataset.size());
  return stats;
}

}  // namespace

DatasetStats compute_stats(const Dataset& dataset) { return base_stats(dataset); }

DatasetStats compute_stats(const Dataset& dataset,
                           const CorrectnessMap& correctness) {
  if (correctness.size() != dataset.size()) {
    throw CorrectnessCoverageMismatch(
        fmt::format("correctness covers {} ids, dataset has {} instances",
                    correctness.size(), dataset.size()));
  }
  std::size_t correct = 0;
  std::size_t correct_met = 0;
  for (const auto& inst : dataset.instances) {
    auto it = correctness.find(inst.id);
    if (it == correctness.end()) {
      throw CorrectnessCoverageMismatch("no correctness entry for " + inst.id);
    }
    if (it->second) {
      ++correct;
      if (inst.label == Label::metaphor) ++correct_met;
    }
  }
  auto stats = base_stats(dataset);
  stats.pct_correct = Percent::ratio(correct, dataset.size());
  stats.pct_correct_metaphor = Percent::ratio(correct_met, correct);
  return stats;
}

}  // namespace cda

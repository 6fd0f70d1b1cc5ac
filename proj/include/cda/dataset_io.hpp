#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cda/dataset.hpp"

namespace cda {

nlohmann::json to_json(const Provenance& provenance);
Provenance provenance_from_json(const nlohmann::json& j);

/// Canonical record: {id, sentence, target_word, label, provenance} plus
/// whatever extra fields the instance carries.
nlohmann::json to_json(const Instance& instance);
nlohmann::json to_json(const QaRecord& record);
nlohmann::json to_json(const DatasetStats& stats);
DatasetStats stats_from_json(const nlohmann::json& j);

std::string to_jsonl(const Dataset& dataset);

/// Reads a canonical dataset file, keeping provenance as written. The
/// dataset name defaults to the file stem.
Dataset read_dataset(const std::filesystem::path& path,
                     const std::string& name = {});
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Write to a sibling temporary file and rename over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);
std::string read_file(const std::filesystem::path& path);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& records);

}  // namespace cda

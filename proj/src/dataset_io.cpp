#include "cda/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

#include "cda/error.hpp"

namespace cda {

using nlohmann::json;

json to_json(const Provenance& provenance) {
  if (const auto* orig = std::get_if<OriginalSource>(&provenance)) {
    return json{{"kind", "original"},
                {"dataset", orig->dataset_name},
                {"source_index", orig->source_index}};
  }
  const auto& aug = std::get<AugmentedSource>(provenance);
  return json{{"kind", "augmented"},
              {"method", std::string(to_string(aug.method))},
              {"parent_id", aug.parent_id},
              {"iteration", aug.iteration}};
}

Provenance provenance_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "original") {
    return OriginalSource{j.value("dataset", std::string()),
                          j.at("source_index").get<std::size_t>()};
  }
  if (kind == "augmented") {
    const auto name = j.at("method").get<std::string>();
    auto method = parse_aug_method(name);
    if (!method) throw std::invalid_argument("unknown method " + name);
    return AugmentedSource{*method, j.at("parent_id").get<std::string>(),
                           j.at("iteration").get<int>()};
  }
  throw std::invalid_argument("unknown provenance kind " + kind);
}

json to_json(const Instance& instance) {
  json j = json::object();
  j["id"] = instance.id;
  j["sentence"] = instance.sentence;
  j["target_word"] = instance.target_word;
  j["label"] = std::string(to_string(instance.label));
  j["provenance"] = to_json(instance.provenance);
  for (auto it = instance.extra.begin(); it != instance.extra.end(); ++it) {
    if (!j.contains(it.key())) j[it.key()] = it.value();
  }
  return j;
}

json to_json(const QaRecord& record) {
  json j = json::object();
  j["instruction"] = record.instruction;
  j["input"] = record.input;
  j["output"] = record.output;
  return j;
}

json to_json(const DatasetStats& stats) {
  json j = json::object();
  j["n_instances"] = stats.n_instances;
  j["pct_metaphor"] = stats.pct_metaphor.str();
  if (stats.pct_correct) j["pct_correct"] = stats.pct_correct->str();
  if (stats.pct_correct_metaphor) {
    j["pct_correct_metaphor"] = stats.pct_correct_metaphor->str();
  }
  return j;
}

namespace {

Percent percent_from_string(const std::string& s) {
  const auto dot = s.find('.');
  if (dot == std::string::npos || s.size() != dot + 3) {
    throw std::invalid_argument("bad percentage '" + s + "'");
  }
  return Percent{std::stoll(s.substr(0, dot)) * 100 + std::stoll(s.substr(dot + 1))};
}

}  // namespace

DatasetStats stats_from_json(const json& j) {
  DatasetStats stats;
  stats.n_instances = j.at("n_instances").get<std::size_t>();
  stats.pct_metaphor = percent_from_string(j.at("pct_metaphor").get<std::string>());
  if (j.contains("pct_correct")) {
    stats.pct_correct = percent_from_string(j.at("pct_correct").get<std::string>());
  }
  if (j.contains("pct_correct_metaphor")) {
    stats.pct_correct_metaphor =
        percent_from_string(j.at("pct_correct_metaphor").get<std::string>());
  }
  return stats;
}

std::string to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& inst : dataset.instances) {
    out += to_json(inst).dump();
    out += '\n';
  }
  return out;
}

Dataset read_dataset(const std::filesystem::path& path,
                     const std::string& name) {
  IngestOptions options;
  options.dataset_name = name;
  return ingest_dataset(path, options).dataset;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  write_file_atomic(path, to_jsonl(dataset));
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += fmt::format(".tmp{}", ::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw MalformedRow(row, "invalid JSON in " + path.string());
    out.push_back(std::move(j));
    ++row;
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace cda

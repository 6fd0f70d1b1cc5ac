#include "synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <unistd.h>

#include <fmt/format.h>

namespace cda::testing {

namespace fs = std::filesystem;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string synthetic_sentence(std::size_t i, Label label, std::string_view target) {
  return fmt::format("Case {} shows a {} scene where they {} together.", i,
                     label == Label::metaphor ? "vivid" : "plain", target);
}

std::string synthetic_target(int level, std::size_t i) {
  return fmt::format("w{}x{}", level, i);
}

Instance synthetic_instance(std::size_t i, Label label, int level) {
  const auto target = synthetic_target(level, i);
  return make_instance(synthetic_sentence(i, label, target), target, label,
                       OriginalSource{"synthetic", i});
}

Dataset synthetic_dataset(std::size_t n_metaphor, std::size_t n_literal, int max_level,
                          std::size_t first_index) {
  Dataset d;
  d.name = "synthetic";
  std::size_t i = first_index;
  for (std::size_t k = 0; k < n_metaphor; ++k, ++i) {
    d.instances.push_back(synthetic_instance(i, Label::metaphor, 1 + int(k % max_level)));
  }
  for (std::size_t k = 0; k < n_literal; ++k, ++i) {
    d.instances.push_back(synthetic_instance(i, Label::literal, 1 + int(k % max_level)));
  }
  return d;
}

Label label_of_sentence(std::string_view sentence) {
  return sentence.find(" vivid ") != std::string_view::npos ? Label::metaphor : Label::literal;
}

int level_of_target(std::string_view target) {
  int level = 0;
  for (std::size_t i = 1; i < target.size() && std::isdigit(static_cast<unsigned char>(target[i]));
       ++i) {
    level = level * 10 + (target[i] - '0');
  }
  return level;
}

namespace {

std::optional<std::string> between(std::string_view s, std::string_view open,
                                   std::string_view close, std::size_t from = 0) {
  const auto a = s.find(open, from);
  if (a == std::string_view::npos) return std::nullopt;
  const auto start = a + open.size();
  const auto b = s.find(close, start);
  if (b == std::string_view::npos) return std::nullopt;
  return std::string(s.substr(start, b - start));
}

std::string last_line_after(std::string_view s, std::string_view label) {
  const auto a = s.rfind(label);
  if (a == std::string_view::npos) return {};
  auto rest = s.substr(a + label.size());
  return std::string(rest.substr(0, rest.find('\n')));
}

}  // namespace

std::optional<Question> read_question(std::string_view prompt) {
  if (prompt.rfind("Is the word '", 0) != 0) return std::nullopt;
  auto target = between(prompt, "Is the word '", "' in the sentence '");
  auto sentence = between(prompt, "' in the sentence '", "' used metaphorically?");
  if (!target || !sentence) return std::nullopt;
  return Question{*target, *sentence};
}

std::optional<GenerationPrompt> read_generation_prompt(std::string_view prompt) {
  if (prompt.rfind("You are a ", 0) != 0) return std::nullopt;
  GenerationPrompt g;
  const auto first_sentence = prompt.substr(0, prompt.find(". "));
  g.polarity = first_sentence.find("literal") != std::string_view::npos ? Label::literal
                                                                         : Label::metaphor;
  if (prompt.find("replace the target word") != std::string_view::npos) {
    g.kind = GenerationPrompt::Kind::replace_target;
    g.target = last_line_after(prompt, "Target word: ");
    g.sentence = last_line_after(prompt, "Original sentence: ");
  } else {
    g.kind = prompt.find("Given sentence: '") != std::string_view::npos
                 ? GenerationPrompt::Kind::replace_context
                 : GenerationPrompt::Kind::direct;
    auto target = between(prompt, "the word '", "'");
    if (!target) return std::nullopt;
    g.target = *target;
    if (g.kind == GenerationPrompt::Kind::replace_context) {
      auto sentence = between(prompt, "Given sentence: '", "'\n");
      if (!sentence) return std::nullopt;
      g.sentence = *sentence;
    }
  }
  if (g.target.empty()) return std::nullopt;
  return g;
}

std::string generate_for(const GenerationPrompt& g, std::string_view prompt) {
  const auto h = fmt::format("{:012x}", fnv1a(prompt) & 0xffffffffffffULL);
  const char* marker = g.polarity == Label::metaphor ? "vivid" : "plain";
  switch (g.kind) {
    case GenerationPrompt::Kind::direct:
      return fmt::format("Variant {} shows a {} scene where they {} again.", h, marker, g.target);
    case GenerationPrompt::Kind::replace_context:
      return fmt::format("Context {} paints a {} scene where they {} anew.", h, marker, g.target);
    case GenerationPrompt::Kind::replace_target: {
      const auto word = fmt::format("w{}y{}", level_of_target(g.target), h);
      auto sentence = g.sentence;
      const auto at = sentence.find(g.target);
      if (at != std::string::npos) sentence.replace(at, g.target.size(), word);
      return fmt::format("New sentence: {}\nNew word: {}", sentence, word);
    }
  }
  return {};
}

MockStep answer(bool yes) { return MockStep::reply(yes ? "Yes" : "No"); }

MockResponder oracle_teacher(double reject_fraction) {
  return [reject_fraction](const ChatRequest& req) {
    if (auto q = read_question(req.prompt)) {
      return answer(label_of_sentence(q->sentence) == Label::metaphor);
    }
    if (auto g = read_generation_prompt(req.prompt)) {
      const auto u = double(fnv1a(req.prompt + "#reject") % 1000000) / 1e6;
      if (u < reject_fraction) return MockStep::reply("I would rather not write that one.");
      return MockStep::reply(generate_for(*g, req.prompt));
    }
    return MockStep::reply("unrecognized prompt");
  };
}

MockResponder level_student(int known_level) {
  return [known_level](const ChatRequest& req) {
    auto q = read_question(req.prompt);
    if (!q) return MockStep::reply("?");
    const bool gold_yes = label_of_sentence(q->sentence) == Label::metaphor;
    const bool knows = level_of_target(q->target) <= known_level;
    return answer(knows ? gold_yes : !gold_yes);
  };
}

MockResponder id_student(std::unordered_set<std::string> correct_ids) {
  return [ids = std::move(correct_ids)](const ChatRequest& req) {
    auto q = read_question(req.prompt);
    if (!q) return MockStep::reply("?");
    const bool gold_yes = label_of_sentence(q->sentence) == Label::metaphor;
    return answer(ids.count(req.tag) ? gold_yes : !gold_yes);
  };
}

std::vector<std::string> list_files(const fs::path& root,
                                    const std::unordered_set<std::string>& skip) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    if (skip.count(e.path().filename().string())) continue;
    out.push_back(fs::relative(e.path(), root).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path fresh_dir(std::string_view name) {
  const auto dir = fs::temp_directory_path() /
                   fmt::format("cda_test_{}_{}", ::getpid(), name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace cda::testing

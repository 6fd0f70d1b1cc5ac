#pragma once

// A synthetic metaphor world for driving the pipeline with mocks.
//
// Sentences carry their gold label as a marker word ("vivid" for Metaphor,
// "plain" for Literal) and target words carry a difficulty level
// ("w<level>x<i>"). Mock models read both back out of the prompts they
// receive, so they can answer as an all-knowing teacher or as a student that
// only knows levels up to some bound.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cda/dataset.hpp"
#include "cda/mock_model.hpp"

namespace cda::testing {

std::uint64_t fnv1a(std::string_view s);

std::string synthetic_sentence(std::size_t i, Label label, std::string_view target);
std::string synthetic_target(int level, std::size_t i);

Instance synthetic_instance(std::size_t i, Label label, int level);

/// n_metaphor + n_literal instances; levels cycle through 1..max_level within
/// each class.
Dataset synthetic_dataset(std::size_t n_metaphor, std::size_t n_literal, int max_level = 1,
                          std::size_t first_index = 0);

Label label_of_sentence(std::string_view sentence);
int level_of_target(std::string_view target);

struct Question {
  std::string target;
  std::string sentence;
};

/// Reads a yes/no classification prompt; nullopt for anything else.
std::optional<Question> read_question(std::string_view prompt);

struct GenerationPrompt {
  enum class Kind { direct, replace_target, replace_context };
  Kind kind = Kind::direct;
  Label polarity = Label::metaphor;
  std::string target;
  std::string sentence;  // empty for direct prompts
};

/// Reads a teacher generation prompt; nullopt for anything else.
std::optional<GenerationPrompt> read_generation_prompt(std::string_view prompt);

/// Valid teacher output for a generation prompt, unique per prompt.
std::string generate_for(const GenerationPrompt& g, std::string_view prompt);

MockStep answer(bool yes);

/// Answers every question correctly. Generation prompts whose hash falls
/// below `reject_fraction` get an output that never contains the target, on
/// every attempt.
MockResponder oracle_teacher(double reject_fraction = 0.0);

/// Right on targets of level <= known_level, wrong above.
MockResponder level_student(int known_level);

/// Right exactly on the instances whose id is in `correct_ids` (matched on
/// the request tag).
MockResponder id_student(std::unordered_set<std::string> correct_ids);

/// Sorted relative paths of every regular file under `root`, except names in
/// `skip`.
std::vector<std::string> list_files(const std::filesystem::path& root,
                                    const std::unordered_set<std::string>& skip = {});

/// A fresh empty directory under the system temp dir.
std::filesystem::path fresh_dir(std::string_view name);

}  // namespace cda::testing

// Teacher prompt templates, one per augmentation method. Tested byte-for-byte
// against tests/fixtures/prompts.

#include <string_view>

#include "cda/augmenter.hpp"

namespace cda {

namespace {

constexpr std::string_view kDirectMet =
    "You are a creative writing assistant skilled in crafting subtle and "
    "intricate metaphors. Your task is to create a sentence that incorporates "
    "the metaphorical interpretation of the verb '{target_word}' in an "
    "unexpected and unique way. The output must contain the word "
    "'{target_word}' as a verb. Please provide only the sentence.\n"
    "\n"
    "Your sentence:";

constexpr std::string_view kReplaceTargetMet =
    "You are a creative writing assistant skilled in crafting subtle and "
    "intricate metaphors. Your task is to replace the target word in the "
    "following sentence with a new metaphorical expression, ensuring that the "
    "new word also carries a metaphorical meaning.\n"
    "The following are several examples:\n"
    "\n"
    "Original sentence: He grasped the concept quickly.\n"
    "Target word: grasp\n"
    "New sentence: He digested the concept swiftly.\n"
    "New word: digest\n"
    "\n"
    "Original sentence: He soared to new heights in his career.\n"
    "Target word: soar\n"
    "New sentence: He climbed to new summits in his career.\n"
    "New word: climb\n"
    "\n"
    "Original sentence: {sentence}\n"
    "Target word: {target_word}";

constexpr std::string_view kReplaceContextMet =
    "You are a creative writing assistant skilled in transforming contexts "
    "while preserving metaphorical meanings. Your task is to take the given "
    "sentence containing the metaphorical use of the word '{target_word}' and "
    "rework it into a new sentence that maintains the metaphorical essence "
    "while changing the surrounding context. The output must contain the word "
    "'{target_word}'. Please provide only the new sentence.\n"
    "\n"
    "Given sentence: '{sentence}'\n"
    "\n"
    "Your sentence:";

constexpr std::string_view kDirectLit =
    "You are a straightforward writing assistant skilled in creating clear and "
    "literal statements. Your task is to formulate a sentence that uses the "
    "verb '{target_word}' in its direct and obvious meaning. The output must "
    "contain the word '{target_word}' as a verb. Please provide only the "
    "sentence.\n"
    "\n"
    "Your sentence:";

constexpr std::string_view kReplaceTargetLit =
    "You are a straightforward writing assistant skilled in creating clear and "
    "literal statements. Your task is to replace the target word in the "
    "following sentence with a new literal expression, ensuring that the new "
    "word is used in its direct and obvious meaning.\n"
    "The following are several examples:\n"
    "\n"
    "Original sentence: He quickly understood the concept.\n"
    "Target word: understand\n"
    "New sentence: He quickly comprehended the concept.\n"
    "New word: comprehend\n"
    "\n"
    "Original sentence: She ran fast to catch the bus.\n"
    "Target word: run\n"
    "New sentence: She sprinted to catch the bus.\n"
    "New word: sprint\n"
    "\n"
    "Original sentence: {sentence}\n"
    "Target word: {target_word}";

constexpr std::string_view kReplaceContextLit =
    "You are a creative writing assistant skilled in transforming contexts "
    "while preserving the literal meanings of words. Your task is to take the "
    "given sentence containing the literal use of the word '{target_word}' and "
    "rework it into a new sentence that maintains the literal essence while "
    "changing the surrounding context. The output must contain the word "
    "'{target_word}'. Please provide only the new sentence.\n"
    "\n"
    "Given sentence: '{sentence}'\n"
    "\n"
    "Your sentence:";

}  // namespace

std::string_view aug_template(AugMethod method) {
  switch (method) {
    case AugMethod::direct_met:
      return kDirectMet;
    case AugMethod::replace_target_met:
      return kReplaceTargetMet;
    case AugMethod::replace_context_met:
      return kReplaceContextMet;
    case AugMethod::direct_lit:
      return kDirectLit;
    case AugMethod::replace_target_lit:
      return kReplaceTargetLit;
    case AugMethod::replace_context_lit:
      return kReplaceContextLit;
  }
  return {};
}

}  // namespace cda

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Byte-level text helpers shared by ingestion, prompt parsing and dedup.
// Case folding and punctuation classes are ASCII-only; other bytes pass
// through untouched.
namespace cda::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

/// Strips ASCII punctuation and typographic quotes from both ends.
std::string_view strip_punct_edges(std::string_view s);

/// Strips one or more layers of matching ASCII or typographic quotes.
std::string_view strip_quotes(std::string_view s);

/// Whitespace-separated tokens, edge punctuation removed, empties dropped.
std::vector<std::string> tokenize(std::string_view sentence);

/// A token (lowercased, punctuation-stripped) matches `word` iff it equals
/// the word or starts with it and the word has at least three characters.
bool stem_matches(std::string_view token, std::string_view word);

/// First token of `sentence` that stem-matches `word`, as it appears in the
/// sentence (edge punctuation removed, case preserved).
std::optional<std::string> find_stem_match(std::string_view sentence,
                                           std::string_view word);

/// Lowercase, drop ASCII punctuation, collapse whitespace runs.
std::string normalize_for_key(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

std::string sha256_hex(std::string_view data);

}  // namespace cda::text

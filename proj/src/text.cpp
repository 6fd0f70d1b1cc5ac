#include "cda/text.hpp"

#include <openssl/evp.h>

#include <array>
#include <cctype>
#include <stdexcept>

namespace cda::text {

namespace {

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

constexpr std::array<std::string_view, 4> kTypographicQuotes = {
    "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99"};

// Length of a typographic quote at the front/back of s, 0 if none.
std::size_t quote_prefix(std::string_view s) {
  for (auto q : kTypographicQuotes) {
    if (s.substr(0, q.size()) == q) return q.size();
  }
  return 0;
}

std::size_t quote_suffix(std::string_view s) {
  for (auto q : kTypographicQuotes) {
    if (s.size() >= q.size() && s.substr(s.size() - q.size()) == q) {
      return q.size();
    }
  }
  return 0;
}

}  // namespace

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && to_lower(a) == to_lower(b);
}

bool istarts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

std::string_view strip_punct_edges(std::string_view s) {
  for (bool changed = true; changed && !s.empty();) {
    changed = false;
    if (is_ascii_punct(s.front())) {
      s.remove_prefix(1);
      changed = true;
    } else if (auto n = quote_prefix(s)) {
      s.remove_prefix(n);
      changed = true;
    }
    if (s.empty()) break;
    if (is_ascii_punct(s.back())) {
      s.remove_suffix(1);
      changed = true;
    } else if (auto n = quote_suffix(s)) {
      s.remove_suffix(n);
      changed = true;
    }
  }
  return s;
}

std::string_view strip_quotes(std::string_view s) {
  s = trim(s);
  while (s.size() >= 2) {
    if ((s.front() == '"' && s.back() == '"') ||
        (s.front() == '\'' && s.back() == '\'') ||
        (s.front() == '`' && s.back() == '`')) {
      s = trim(s.substr(1, s.size() - 2));
      continue;
    }
    auto head = quote_prefix(s);
    auto tail = quote_suffix(s);
    if (head && tail && head + tail <= s.size()) {
      s = trim(s.substr(head, s.size() - head - tail));
      continue;
    }
    break;
  }
  return s;
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && is_space(sentence[i])) ++i;
    std::size_t start = i;
    while (i < sentence.size() && !is_space(sentence[i])) ++i;
    if (start == i) continue;
    auto tok = strip_punct_edges(sentence.substr(start, i - start));
    if (!tok.empty()) tokens.emplace_back(tok);
  }
  return tokens;
}

bool stem_matches(std::string_view token, std::string_view word) {
  const auto t = to_lower(strip_punct_edges(token));
  const auto w = to_lower(strip_punct_edges(word));
  if (w.empty() || t.empty()) return false;
  if (t == w) return true;
  return w.size() >= 3 && t.size() > w.size() && t.compare(0, w.size(), w) == 0;
}

std::optional<std::string> find_stem_match(std::string_view sentence,
                                           std::string_view word) {
  for (auto& tok : tokenize(sentence)) {
    if (stem_matches(tok, word)) return tok;
  }
  return std::nullopt;
}

std::string normalize_for_key(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (is_ascii_punct(c)) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    auto line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace cda::text

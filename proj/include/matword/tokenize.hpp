#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace matword {

namespace detail {

// Length of the UTF-8 encoded whitespace code point starting at s[i], 0 if none.
inline std::size_t whitespace_length(std::string_view s, std::size_t i) noexcept {
  const auto byte = [&](std::size_t k) {
    return k < s.size() ? static_cast<unsigned char>(s[k]) : 0u;
  };
  const unsigned char c = byte(i);
  if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
  if (c == 0xc2 && (byte(i + 1) == 0x85 || byte(i + 1) == 0xa0)) return 2;
  if (c == 0xe1 && byte(i + 1) == 0x9a && byte(i + 2) == 0x80) return 3;  // U+1680
  if (c == 0xe2 && byte(i + 1) == 0x80) {
    const unsigned char t = byte(i + 2);
    if ((t >= 0x80 && t <= 0x8a) || t == 0xa8 || t == 0xa9 || t == 0xaf) return 3;
  }
  if (c == 0xe2 && byte(i + 1) == 0x81 && byte(i + 2) == 0x9f) return 3;  // U+205F
  if (c == 0xe3 && byte(i + 1) == 0x80 && byte(i + 2) == 0x80) return 3;  // U+3000
  return 0;
}

constexpr bool is_edge_punctuation(char c) noexcept {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '"': case '\'': case '(': case ')': case '[': case ']':
      return true;
    default:
      return false;
  }
}

}  // namespace detail

/// Splits a line into lowercase tokens.
///
/// Tokens are separated by Unicode whitespace. Each token has the characters
/// `.,;:!?"'()[]` stripped from both ends; tokens that become empty are
/// dropped. Lowercasing is ASCII-only, multibyte sequences pass through.
inline std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    std::size_t b = 0;
    std::size_t e = current.size();
    while (b < e && detail::is_edge_punctuation(current[b])) ++b;
    while (e > b && detail::is_edge_punctuation(current[e - 1])) --e;
    if (e > b) tokens.emplace_back(current.substr(b, e - b));
    current.clear();
  };
  for (std::size_t i = 0; i < line.size();) {
    if (const std::size_t ws = detail::whitespace_length(line, i); ws > 0) {
      flush();
      i += ws;
      continue;
    }
    char c = line[i++];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    current.push_back(c);
  }
  flush();
  return tokens;
}

}  // namespace matword

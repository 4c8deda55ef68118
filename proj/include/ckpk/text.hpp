#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ckpk::text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool is_blank(std::string_view s) { return trim(s).empty(); }

/// Splits on runs of ASCII whitespace; never yields empty pieces.
inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) nl = s.size();
    auto line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.emplace_back(line);
    start = nl + 1;
  }
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

namespace detail {

inline std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

// Latin-1 supplement symbols (C2 xx), general punctuation (E2 80/81 xx)
// and CJK punctuation (E3 80 xx) act as separators.
inline bool is_separator_sequence(std::string_view seq) {
  auto b = [&](std::size_t i) { return static_cast<unsigned char>(seq[i]); };
  if (seq.size() == 2 && b(0) == 0xc2) return true;
  if (seq.size() == 2 && b(0) == 0xc3 && (b(1) == 0x97 || b(1) == 0xb7)) return true;
  if (seq.size() == 3 && b(0) == 0xe2 && (b(1) == 0x80 || b(1) == 0x81)) return true;
  if (seq.size() == 3 && b(0) == 0xe3 && b(1) == 0x80) return true;
  return false;
}

}  // namespace detail

/// Case-folded, punctuation-stripped word tokens in order. Folding covers
/// ASCII and the Latin-1 letters used by Spanish and Danish text.
inline std::vector<std::string> normalized_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  std::size_t i = 0;
  while (i < s.size()) {
    auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = detail::utf8_length(lead);
    if (i + len > s.size()) len = s.size() - i;
    if (len == 1) {
      char c = s[i];
      if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z')) {
        cur.push_back(c);
      } else if (c >= 'A' && c <= 'Z') {
        cur.push_back(static_cast<char>(c - 'A' + 'a'));
      } else if (lead >= 0x80) {
        cur.push_back(c);  // stray continuation byte, keep verbatim
      } else {
        flush();
      }
    } else {
      auto seq = s.substr(i, len);
      if (detail::is_separator_sequence(seq)) {
        flush();
      } else if (len == 2 && lead == 0xc3) {
        auto second = static_cast<unsigned char>(seq[1]);
        if (second >= 0x80 && second <= 0x9e) second += 0x20;
        cur.push_back(seq[0]);
        cur.push_back(static_cast<char>(second));
      } else {
        cur.append(seq);
      }
    }
    i += len;
  }
  flush();
  return out;
}

inline std::set<std::string> token_set(std::string_view s) {
  auto toks = normalized_tokens(s);
  return {toks.begin(), toks.end()};
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace ckpk::text

#pragma once

// Decomposition of free text into atomic sentences.

#include <array>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ckpk/core.hpp"
#include "ckpk/llm.hpp"
#include "ckpk/prompts.hpp"
#include "ckpk/text.hpp"

namespace ckpk::atomize {

enum class Method { llm, fallback };

struct AtomizationResult {
  std::vector<std::string> atomic_sentences;
  std::size_t count = 0;
  Method method = Method::fallback;
};

namespace detail {

struct Scanner {
  int paren_depth = 0;
  bool in_ascii_quote = false;
  int curly_depth = 0;

  bool top_level() const { return paren_depth == 0 && !in_ascii_quote && curly_depth == 0; }

  /// Updates quote/paren state for the character sequence starting at `s[i]`
  /// and returns its byte length.
  std::size_t step(std::string_view s, std::size_t i) {
    auto starts = [&](std::string_view tok) { return s.substr(i, tok.size()) == tok; };
    if (starts("“") || starts("«")) {  // “ «
      ++curly_depth;
      return starts("“") ? 3 : 2;
    }
    if (starts("”") || starts("»")) {  // ” »
      if (curly_depth > 0) --curly_depth;
      return starts("”") ? 3 : 2;
    }
    char c = s[i];
    if (c == '"') in_ascii_quote = !in_ascii_quote;
    else if (!in_ascii_quote && curly_depth == 0 && (c == '(' || c == '[')) ++paren_depth;
    else if (!in_ascii_quote && curly_depth == 0 && (c == ')' || c == ']') && paren_depth > 0) --paren_depth;
    return 1;
  }
};

inline bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// Period after a title abbreviation or a single-letter initial does not end a sentence.
inline bool is_abbreviation(std::string_view before) {
  std::size_t start = before.size();
  while (start > 0 && std::isalpha(static_cast<unsigned char>(before[start - 1]))) --start;
  auto word = before.substr(start);
  if (word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0]))) return true;
  static constexpr std::array<std::string_view, 10> kAbbrev{"Mr", "Mrs", "Ms", "Dr", "St",
                                                          "Jr", "Sr", "Prof", "vs", "Mt"};
  for (auto a : kAbbrev) {
    if (word == a) return true;
  }
  return false;
}

/// Sentences with their terminators, split outside quotes and parentheses.
/// A blank line also ends a sentence.
inline std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  Scanner sc;
  std::size_t begin = 0;
  auto emit = [&](std::size_t end) {
    auto piece = text::trim(s.substr(begin, end - begin));
    if (!piece.empty()) out.emplace_back(piece);
    begin = end;
  };
  std::size_t i = 0;
  while (i < s.size()) {
    if (sc.top_level() && s[i] == '\n') {
      std::size_t j = i + 1;
      while (j < s.size() && (s[j] == ' ' || s[j] == '\t' || s[j] == '\r')) ++j;
      if (j < s.size() && s[j] == '\n') {
        emit(i);
        i = j + 1;
        begin = i;
        continue;
      }
    }
    if (sc.top_level() && is_terminator(s[i])) {
      std::size_t j = i;
      while (j < s.size() && is_terminator(s[j])) ++j;
      bool boundary = j == s.size() || text::is_space(s[j]);
      if (boundary && s[i] == '.' && j == i + 1 && is_abbreviation(s.substr(begin, i - begin))) {
        boundary = false;
      }
      if (boundary) {
        emit(j);
        i = j;
        continue;
      }
      i = j;
      continue;
    }
    i += sc.step(s, i);
  }
  emit(s.size());
  return out;
}

inline constexpr std::array<std::string_view, 6> kDelimiters{", and ", ", or ", "; ", ", ", " and ", " or "};

/// Splits one sentence at top-level coordinations and re-terminates each piece.
inline void split_coordinations(std::string_view sentence, std::vector<std::string>& out) {
  std::size_t body_end = sentence.size();
  while (body_end > 0 && is_terminator(sentence[body_end - 1])) --body_end;
  std::string terminator(sentence.substr(body_end));
  if (terminator.empty()) terminator = ".";
  auto body = sentence.substr(0, body_end);

  std::vector<std::string_view> pieces;
  Scanner sc;
  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < body.size()) {
    if (sc.top_level()) {
      bool matched = false;
      for (auto d : kDelimiters) {
        if (body.substr(i, d.size()) == d) {
          pieces.push_back(body.substr(begin, i - begin));
          i += d.size();
          begin = i;
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    i += sc.step(body, i);
  }
  pieces.push_back(body.substr(begin));

  for (auto p : pieces) {
    auto t = text::trim(p);
    while (!t.empty() && (t.back() == ',' || t.back() == ';' || t.back() == ':')) {
      t.remove_suffix(1);
      t = text::trim(t);
    }
    if (text::normalized_tokens(t).empty()) continue;
    std::string frag(t);
    if (!is_terminator(frag.back())) frag += terminator;
    // A lone abbreviation period would not end the sentence on a second pass.
    const bool single = frag.size() < 2 || !is_terminator(frag[frag.size() - 2]);
    if (frag.back() == '.' && single && is_abbreviation(std::string_view(frag).substr(0, frag.size() - 1))) {
      frag += '.';
    }
    out.push_back(std::move(frag));
  }
}

}  // namespace detail

/// Deterministic rule-based decomposition: sentence split, then comma and
/// and/or coordination splits at top level. Quoted and parenthesized spans
/// are opaque. Never returns empty strings.
inline AtomizationResult atomize_fallback(std::string_view text) {
  AtomizationResult r;
  r.method = Method::fallback;
  for (const auto& sentence : detail::split_sentences(text)) {
    detail::split_coordinations(sentence, r.atomic_sentences);
  }
  r.count = r.atomic_sentences.size();
  return r;
}

inline std::vector<std::string> fallback_sentences(std::string_view text) {
  return atomize_fallback(text).atomic_sentences;
}

/// Parses an atomization reply: a JSON object with a string-array
/// `atomic_sentences` and a matching integer `count`.
inline AtomizationResult parse_atomization(std::string_view raw) {
  for (const auto& obj : llm::find_json_objects(raw)) {
    if (!obj.contains("atomic_sentences") || !obj.contains("count")) continue;
    const auto& list = obj["atomic_sentences"];
    const auto& count = obj["count"];
    if (!list.is_array() || !count.is_number_integer()) break;
    AtomizationResult r;
    r.method = Method::llm;
    for (const auto& item : list) {
      if (!item.is_string() || text::is_blank(item.get<std::string>())) {
        fail(Errc::malformed_model_output, "atomic_sentences contains a blank or non-string entry");
      }
      r.atomic_sentences.emplace_back(text::trim(item.get<std::string>()));
    }
    r.count = r.atomic_sentences.size();
    if (count.get<long long>() != static_cast<long long>(r.count)) {
      fail(Errc::malformed_model_output, "count " + count.dump() + " does not match " +
                                             std::to_string(r.count) + " atomic sentences");
    }
    return r;
  }
  fail(Errc::malformed_model_output, "reply is not a JSON object with atomic_sentences and count");
}

/// LLM-backed decomposition. The prompt's sentence limit is a parameter.
inline AtomizationResult atomize_llm(std::string_view text, const Lang& lang, llm::TextGenerator& client,
                                     std::size_t limit = prompts::kDefaultAtomizeLimit) {
  (void)lang;  // the prompt is language-neutral; kept for routing and logging
  if (text::is_blank(text)) fail(Errc::invalid_argument, "cannot atomize empty text");
  auto raw = client.generate(prompts::render_atomization(text, limit), GenerationParams::extended());
  return parse_atomization(raw);
}

/// Contiguous indices from 0 and content-addressed ids scoped by `scope`.
inline std::vector<AtomicSentence> to_atomic_sentences(const AtomizationResult& r, const Lang& lang,
                                                       Origin origin, std::string_view scope = {}) {
  std::vector<AtomicSentence> out;
  out.reserve(r.atomic_sentences.size());
  for (std::size_t i = 0; i < r.atomic_sentences.size(); ++i) {
    out.push_back(make_sentence(scope, r.atomic_sentences[i], lang, origin, i));
  }
  return out;
}

}  // namespace ckpk::atomize

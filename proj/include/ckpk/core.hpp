#pragma once

// Domain values shared by every stage of the grounding pipeline.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ckpk/error.hpp"
#include "ckpk/hash.hpp"
#include "ckpk/json_util.hpp"
#include "ckpk/text.hpp"

namespace ckpk {

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Enumerations

namespace detail {

template <typename E, std::size_t N>
using EnumNames = std::array<std::pair<E, std::string_view>, N>;

template <typename E, std::size_t N>
constexpr std::string_view enum_to_string(const EnumNames<E, N>& names, E v) {
  for (const auto& [e, s] : names) {
    if (e == v) return s;
  }
  return "?";
}

template <typename E, std::size_t N>
E enum_from_string(const EnumNames<E, N>& names, std::string_view s, std::string_view what) {
  for (const auto& [e, name] : names) {
    if (name == s) return e;
  }
  fail(Errc::schema, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace detail

#define CKPK_ENUM_STRINGS(Enum, Table, What)                                          \
  inline std::string_view to_string(Enum v) { return detail::enum_to_string(Table, v); } \
  inline Enum parse_##What(std::string_view s) {                                      \
    return detail::enum_from_string(Table, s, #What);                                 \
  }                                                                                   \
  inline void to_json(json& j, Enum v) { j = std::string(to_string(v)); }             \
  inline void from_json(const json& j, Enum& v) {                                     \
    if (!j.is_string()) fail(Errc::schema, #What " must be a string");                \
    v = parse_##What(j.get<std::string>());                                           \
  }

enum class Origin { context, response };
inline constexpr detail::EnumNames<Origin, 2> kOriginNames{{
    {Origin::context, "context"}, {Origin::response, "response"}}};
CKPK_ENUM_STRINGS(Origin, kOriginNames, origin)

enum class Condition { factual, counterfactual, true_first, false_first, shuffled };
inline constexpr detail::EnumNames<Condition, 5> kConditionNames{{
    {Condition::factual, "factual"},
    {Condition::counterfactual, "counterfactual"},
    {Condition::true_first, "true_first"},
    {Condition::false_first, "false_first"},
    {Condition::shuffled, "shuffled"}}};
CKPK_ENUM_STRINGS(Condition, kConditionNames, condition)

/// Whether a context sentence carries original or entity-swapped content.
enum class Truth { factual, counterfactual };
inline constexpr detail::EnumNames<Truth, 2> kTruthNames{{
    {Truth::factual, "factual"}, {Truth::counterfactual, "counterfactual"}}};
CKPK_ENUM_STRINGS(Truth, kTruthNames, truth)

enum class PromptVariant { original, strict, balanced, ck, cot, cot_ck };
inline constexpr detail::EnumNames<PromptVariant, 6> kPromptVariantNames{{
    {PromptVariant::original, "original"},
    {PromptVariant::strict, "strict"},
    {PromptVariant::balanced, "balanced"},
    {PromptVariant::ck, "ck"},
    {PromptVariant::cot, "cot"},
    {PromptVariant::cot_ck, "cot_ck"}}};
CKPK_ENUM_STRINGS(PromptVariant, kPromptVariantNames, prompt_variant)

inline bool is_cot(PromptVariant v) { return v == PromptVariant::cot || v == PromptVariant::cot_ck; }

enum class Label { CK, PK };
inline constexpr detail::EnumNames<Label, 2> kLabelNames{{{Label::CK, "CK"}, {Label::PK, "PK"}}};
CKPK_ENUM_STRINGS(Label, kLabelNames, label)

#undef CKPK_ENUM_STRINGS

/// Language of a text. Closed to en/es/da with an `other` escape hatch that
/// keeps the raw tag.
class Lang {
 public:
  enum class Code { en, es, da, other };

  Lang() = default;
  static Lang parse(std::string_view tag) {
    if (text::trim(tag).empty()) fail(Errc::invalid_argument, "empty language tag");
    Lang l;
    l.tag_ = std::string(tag);
    if (tag == "en") l.code_ = Code::en;
    else if (tag == "es") l.code_ = Code::es;
    else if (tag == "da") l.code_ = Code::da;
    else l.code_ = Code::other;
    return l;
  }
  static Lang en() { return parse("en"); }
  static Lang es() { return parse("es"); }
  static Lang da() { return parse("da"); }

  Code code() const { return code_; }
  const std::string& tag() const { return tag_; }

  friend bool operator==(const Lang&, const Lang&) = default;
  friend auto operator<=>(const Lang& a, const Lang& b) { return a.tag_ <=> b.tag_; }

 private:
  Code code_ = Code::en;
  std::string tag_ = "en";
};

inline void to_json(json& j, const Lang& l) { j = l.tag(); }
inline void from_json(const json& j, Lang& l) {
  if (!j.is_string()) fail(Errc::schema, "lang must be a string");
  l = Lang::parse(j.get<std::string>());
}

// ---------------------------------------------------------------------------
// AtomicSentence

struct AtomicSentence {
  std::string id;
  std::string text;
  Lang lang;
  Origin origin = Origin::context;
  std::size_t index = 0;

  friend bool operator==(const AtomicSentence&, const AtomicSentence&) = default;
};

/// Content-addressed id over scope (topic or record id), language, origin,
/// index and text.
inline std::string sentence_id(std::string_view scope, const Lang& lang, Origin origin,
                               std::size_t index, std::string_view text) {
  auto idx = std::to_string(index);
  return hash_fields({scope, lang.tag(), to_string(origin), idx, text}).substr(0, 24);
}

inline AtomicSentence make_sentence(std::string_view scope, std::string text, const Lang& lang,
                                    Origin origin, std::size_t index) {
  if (text::is_blank(text)) fail(Errc::invalid_argument, "atomic sentence text is blank");
  AtomicSentence s;
  s.id = sentence_id(scope, lang, origin, index, text);
  s.text = std::move(text);
  s.lang = lang;
  s.origin = origin;
  s.index = index;
  return s;
}

inline void to_json(json& j, const AtomicSentence& s) {
  j = json{{"id", s.id}, {"text", s.text}, {"lang", s.lang},
           {"origin", s.origin}, {"index", s.index}};
}
inline void from_json(const json& j, AtomicSentence& s) {
  constexpr std::string_view T = "AtomicSentence";
  detail::check_object(j, T, {"id", "text", "lang", "origin", "index"});
  s.id = detail::get_field<std::string>(j, T, "id");
  s.text = detail::get_field<std::string>(j, T, "text");
  s.lang = detail::get_field<Lang>(j, T, "lang");
  s.origin = detail::get_field<Origin>(j, T, "origin");
  s.index = detail::get_field<std::size_t>(j, T, "index");
  if (text::is_blank(s.text)) fail(Errc::schema, "AtomicSentence.text is blank");
}

// ---------------------------------------------------------------------------
// ContextWindow

/// Where a context sentence came from: its truth mark and its position in the
/// topic's pool. Shuffled windows keep the pre-shuffle position here.
struct Provenance {
  Truth truth = Truth::factual;
  std::size_t source_index = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

inline void to_json(json& j, const Provenance& p) {
  j = json{{"truth", p.truth}, {"source_index", p.source_index}};
}
inline void from_json(const json& j, Provenance& p) {
  constexpr std::string_view T = "Provenance";
  detail::check_object(j, T, {"truth", "source_index"});
  p.truth = detail::get_field<Truth>(j, T, "truth");
  p.source_index = detail::get_field<std::size_t>(j, T, "source_index");
}

inline constexpr std::array<std::size_t, 6> kDefaultContextSizes{0, 10, 20, 30, 40, 50};

struct ContextWindow {
  std::string topic;
  Lang lang;
  std::size_t size = 0;
  std::vector<AtomicSentence> sentences;
  Condition condition = Condition::factual;
  std::vector<Provenance> provenance;  // parallel to sentences

  friend bool operator==(const ContextWindow&, const ContextWindow&) = default;
};

inline void to_json(json& j, const ContextWindow& w) {
  j = json{{"topic", w.topic},         {"lang", w.lang},
           {"size", w.size},           {"sentences", w.sentences},
           {"condition", w.condition}, {"provenance", w.provenance}};
}
inline void from_json(const json& j, ContextWindow& w) {
  constexpr std::string_view T = "ContextWindow";
  detail::check_object(j, T, {"topic", "lang", "size", "sentences", "condition", "provenance"});
  w.topic = detail::get_field<std::string>(j, T, "topic");
  w.lang = detail::get_field<Lang>(j, T, "lang");
  w.size = detail::get_field<std::size_t>(j, T, "size");
  w.sentences = detail::get_field<std::vector<AtomicSentence>>(j, T, "sentences");
  w.condition = detail::get_field<Condition>(j, T, "condition");
  w.provenance = detail::get_field<std::vector<Provenance>>(j, T, "provenance");
}

/// Number of leading sentences in the first half of a split-condition window.
inline std::size_t first_half(std::size_t size) { return (size + 1) / 2; }

inline std::optional<Truth> expected_truth(Condition c, std::size_t pos, std::size_t size) {
  switch (c) {
    case Condition::factual: return Truth::factual;
    case Condition::counterfactual: return Truth::counterfactual;
    case Condition::true_first:
      return pos < first_half(size) ? Truth::factual : Truth::counterfactual;
    case Condition::false_first:
      return pos < first_half(size) ? Truth::counterfactual : Truth::factual;
    case Condition::shuffled: return std::nullopt;
  }
  return std::nullopt;
}

/// All invariant violations of `w`; empty when the window is well formed.
inline std::vector<std::string> validate_context_window(const ContextWindow& w) {
  std::vector<std::string> out;
  const auto n = w.sentences.size();
  if (n != w.size) out.emplace_back("length mismatch");
  if (w.provenance.size() != n) {
    out.emplace_back("provenance length mismatch");
  }

  std::vector<bool> seen(n, false);
  bool indices_ok = true;
  bool text_ok = true;
  bool origin_ok = true;
  for (const auto& s : w.sentences) {
    if (s.index >= n || seen[s.index]) indices_ok = false;
    else seen[s.index] = true;
    text_ok = text_ok && !text::is_blank(s.text);
    origin_ok = origin_ok && s.origin == Origin::context;
  }
  if (!indices_ok) out.emplace_back("indices not unique and contiguous");
  if (!text_ok) out.emplace_back("blank sentence text");
  if (!origin_ok) out.emplace_back("non-context sentence origin");

  if (w.provenance.size() == n) {
    for (std::size_t i = 0; i < n; ++i) {
      auto want = expected_truth(w.condition, i, n);
      if (want && w.provenance[i].truth != *want) {
        out.emplace_back("condition layout violation");
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generation

inline constexpr int kStandardMaxTokens = 1024;
/// Reasoning models and atomization calls get the doubled budget.
inline constexpr int kExtendedMaxTokens = 2048;

struct GenerationParams {
  double temperature = 1.0;
  double top_p = 1.0;
  double presence_penalty = 0.0;
  double frequency_penalty = 0.0;
  int max_tokens = kStandardMaxTokens;

  static GenerationParams extended() {
    GenerationParams p;
    p.max_tokens = kExtendedMaxTokens;
    return p;
  }

  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

inline void to_json(json& j, const GenerationParams& p) {
  j = json{{"temperature", p.temperature},
           {"top_p", p.top_p},
           {"presence_penalty", p.presence_penalty},
           {"frequency_penalty", p.frequency_penalty},
           {"max_tokens", p.max_tokens}};
}
inline void from_json(const json& j, GenerationParams& p) {
  constexpr std::string_view T = "GenerationParams";
  detail::check_object(j, T,
                       {"temperature", "top_p", "presence_penalty", "frequency_penalty", "max_tokens"});
  p.temperature = detail::get_field<double>(j, T, "temperature");
  p.top_p = detail::get_field<double>(j, T, "top_p");
  p.presence_penalty = detail::get_field<double>(j, T, "presence_penalty");
  p.frequency_penalty = detail::get_field<double>(j, T, "frequency_penalty");
  p.max_tokens = detail::get_field<int>(j, T, "max_tokens");
  if (p.max_tokens <= 0) fail(Errc::schema, "GenerationParams.max_tokens must be positive");
}

/// One model answer for one work unit (topic x size x condition x model x variant).
struct GenerationRecord {
  std::string record_id;
  std::string topic;
  Lang lang;
  std::size_t context_size = 0;
  Condition condition = Condition::factual;
  std::string model_id;
  PromptVariant prompt_variant = PromptVariant::original;
  std::string raw_text;
  std::string answer_text;
  bool parse_failed = false;
  std::vector<AtomicSentence> response_sentences;
  GenerationParams params;

  friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

inline void to_json(json& j, const GenerationRecord& r) {
  j = json{{"record_id", r.record_id},
           {"topic", r.topic},
           {"lang", r.lang},
           {"context_size", r.context_size},
           {"condition", r.condition},
           {"model_id", r.model_id},
           {"prompt_variant", r.prompt_variant},
           {"raw_text", r.raw_text},
           {"answer_text", r.answer_text},
           {"parse_failed", r.parse_failed},
           {"response_sentences", r.response_sentences},
           {"params", r.params}};
}
inline void from_json(const json& j, GenerationRecord& r) {
  constexpr std::string_view T = "GenerationRecord";
  detail::check_object(j, T,
                       {"record_id", "topic", "lang", "context_size", "condition", "model_id",
                        "prompt_variant", "raw_text", "answer_text", "parse_failed",
                        "response_sentences", "params"});
  r.record_id = detail::get_field<std::string>(j, T, "record_id");
  r.topic = detail::get_field<std::string>(j, T, "topic");
  r.lang = detail::get_field<Lang>(j, T, "lang");
  r.context_size = detail::get_field<std::size_t>(j, T, "context_size");
  r.condition = detail::get_field<Condition>(j, T, "condition");
  r.model_id = detail::get_field<std::string>(j, T, "model_id");
  r.prompt_variant = detail::get_field<PromptVariant>(j, T, "prompt_variant");
  r.raw_text = detail::get_field<std::string>(j, T, "raw_text");
  r.answer_text = detail::get_field<std::string>(j, T, "answer_text");
  r.parse_failed = detail::get_field<bool>(j, T, "parse_failed");
  r.response_sentences = detail::get_field<std::vector<AtomicSentence>>(j, T, "response_sentences");
  r.params = detail::get_field<GenerationParams>(j, T, "params");
}

// ---------------------------------------------------------------------------
// Entailment and reports

struct EntailmentJudgment {
  std::string response_sentence_id;
  std::optional<std::string> best_context_sentence_id;  // absent for empty contexts
  std::optional<std::size_t> best_context_index;        // position in the presented window
  double p_forward = 0.0;                               // context -> response
  double p_backward = 0.0;                              // response -> context
  double combined = 0.0;
  Label label = Label::PK;
  bool borderline = false;

  friend bool operator==(const EntailmentJudgment&, const EntailmentJudgment&) = default;
};

inline void to_json(json& j, const EntailmentJudgment& e) {
  j = json{{"response_sentence_id", e.response_sentence_id},
           {"best_context_sentence_id", detail::optional_to_json(e.best_context_sentence_id)},
           {"best_context_index", detail::optional_to_json(e.best_context_index)},
           {"p_forward", e.p_forward},
           {"p_backward", e.p_backward},
           {"combined", e.combined},
           {"label", e.label},
           {"borderline", e.borderline}};
}
inline void from_json(const json& j, EntailmentJudgment& e) {
  constexpr std::string_view T = "EntailmentJudgment";
  detail::check_object(j, T,
                       {"response_sentence_id", "best_context_sentence_id", "best_context_index",
                        "p_forward", "p_backward", "combined", "label", "borderline"});
  e.response_sentence_id = detail::get_field<std::string>(j, T, "response_sentence_id");
  e.best_context_sentence_id = detail::get_optional<std::string>(j, T, "best_context_sentence_id");
  e.best_context_index = detail::get_optional<std::size_t>(j, T, "best_context_index");
  e.p_forward = detail::get_field<double>(j, T, "p_forward");
  e.p_backward = detail::get_field<double>(j, T, "p_backward");
  e.combined = detail::get_field<double>(j, T, "combined");
  e.label = detail::get_field<Label>(j, T, "label");
  e.borderline = detail::get_field<bool>(j, T, "borderline");
}

struct ResponseLength {
  std::size_t tokens = 0;
  std::size_t sentences = 0;

  friend bool operator==(const ResponseLength&, const ResponseLength&) = default;
};

inline void to_json(json& j, const ResponseLength& l) {
  j = json{{"tokens", l.tokens}, {"sentences", l.sentences}};
}
inline void from_json(const json& j, ResponseLength& l) {
  constexpr std::string_view T = "ResponseLength";
  detail::check_object(j, T, {"tokens", "sentences"});
  l.tokens = detail::get_field<std::size_t>(j, T, "tokens");
  l.sentences = detail::get_field<std::size_t>(j, T, "sentences");
}

using Quartiles = std::array<double, 4>;

/// Per-record evaluation. CK is null for responses with no atomic sentences;
/// context recall is empty for size-0 contexts.
struct EvaluationReport {
  std::string record_id;
  std::string topic;
  std::string model_id;
  Lang lang;
  std::size_t context_size = 0;
  Condition condition = Condition::factual;
  PromptVariant prompt_variant = PromptVariant::original;
  std::optional<double> ck_score;
  std::optional<double> pk_score;
  std::vector<double> context_recall;
  std::optional<Quartiles> pk_quartiles;
  ResponseLength response_length;
  std::vector<EntailmentJudgment> judgments;

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

inline void to_json(json& j, const EvaluationReport& r) {
  j = json{{"record_id", r.record_id},
           {"topic", r.topic},
           {"model_id", r.model_id},
           {"lang", r.lang},
           {"context_size", r.context_size},
           {"condition", r.condition},
           {"prompt_variant", r.prompt_variant},
           {"ck_score", detail::optional_to_json(r.ck_score)},
           {"pk_score", detail::optional_to_json(r.pk_score)},
           {"context_recall", r.context_recall},
           {"pk_quartiles", detail::optional_to_json(r.pk_quartiles)},
           {"response_length", r.response_length},
           {"judgments", r.judgments}};
}
inline void from_json(const json& j, EvaluationReport& r) {
  constexpr std::string_view T = "EvaluationReport";
  detail::check_object(j, T,
                       {"record_id", "topic", "model_id", "lang", "context_size", "condition",
                        "prompt_variant", "ck_score", "pk_score", "context_recall", "pk_quartiles",
                        "response_length", "judgments"});
  r.record_id = detail::get_field<std::string>(j, T, "record_id");
  r.topic = detail::get_field<std::string>(j, T, "topic");
  r.model_id = detail::get_field<std::string>(j, T, "model_id");
  r.lang = detail::get_field<Lang>(j, T, "lang");
  r.context_size = detail::get_field<std::size_t>(j, T, "context_size");
  r.condition = detail::get_field<Condition>(j, T, "condition");
  r.prompt_variant = detail::get_field<PromptVariant>(j, T, "prompt_variant");
  r.ck_score = detail::get_optional<double>(j, T, "ck_score");
  r.pk_score = detail::get_optional<double>(j, T, "pk_score");
  r.context_recall = detail::get_field<std::vector<double>>(j, T, "context_recall");
  r.pk_quartiles = detail::get_optional<Quartiles>(j, T, "pk_quartiles");
  r.response_length = detail::get_field<ResponseLength>(j, T, "response_length");
  r.judgments = detail::get_field<std::vector<EntailmentJudgment>>(j, T, "judgments");
  if (r.ck_score.has_value() != r.pk_score.has_value() ||
      (r.ck_score && *r.ck_score + *r.pk_score != 100.0)) {
    fail(Errc::schema, "EvaluationReport: ck_score + pk_score must equal 100");
  }
}

}  // namespace ckpk

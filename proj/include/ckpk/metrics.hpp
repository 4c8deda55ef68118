#pragma once

// CK/PK scores, context recall, PK position quartiles, lengths, ROUGE-L and
// report aggregation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "ckpk/core.hpp"
#include "ckpk/entail.hpp"
#include "ckpk/text.hpp"

namespace ckpk::metrics {

inline constexpr std::size_t kDefaultSegments = 4;

/// Sizes of k contiguous segments over n items; the first n % k segments get
/// one extra item. Segments are empty when k > n.
inline std::vector<std::size_t> segment_sizes(std::size_t n, std::size_t k) {
  if (k == 0) fail(Errc::invalid_argument, "segment count must be positive");
  std::vector<std::size_t> sizes(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
  return sizes;
}

/// Index of the segment holding position `pos`.
inline std::size_t segment_of(std::size_t pos, const std::vector<std::size_t>& sizes) {
  std::size_t end = 0;
  for (std::size_t q = 0; q < sizes.size(); ++q) {
    end += sizes[q];
    if (pos < end) return q;
  }
  fail(Errc::invalid_argument, "position " + std::to_string(pos) + " outside segmented range");
}

inline std::size_t count_label(const std::vector<EntailmentJudgment>& js, Label l) {
  return static_cast<std::size_t>(std::count_if(js.begin(), js.end(), [l](const auto& j) { return j.label == l; }));
}

/// Percentage of CK-labelled sentences; null for an empty response.
inline std::optional<double> compute_ck_score(const std::vector<EntailmentJudgment>& judgments) {
  if (judgments.empty()) return std::nullopt;
  return static_cast<double>(count_label(judgments, Label::CK)) / static_cast<double>(judgments.size()) * 100.0;
}

inline double compute_pk_score(double ck) {
  if (!(ck >= 0.0 && ck <= 100.0)) fail(Errc::invalid_argument, "CK score outside [0, 100]");
  return 100.0 - ck;
}

// ---------------------------------------------------------------------------
// Context recall

struct SegmentationConfig {
  std::size_t k = kDefaultSegments;
};

/// Which position a CK sentence is attributed to: its place in the window as
/// presented to the model, or its place before any shuffling.
enum class RecallBasis { presented, original };

/// CR_q from per-segment attribution counts over a context of `context_size`
/// sentences. Each CK judgment counts once, in the segment of its position.
inline std::vector<double> context_recall_from_positions(const std::vector<std::size_t>& ck_positions,
                                                         std::size_t context_size, std::size_t k) {
  if (context_size == 0) fail(Errc::empty_context, "context recall is undefined for an empty context");
  if (k == 0 || k > context_size) {
    fail(Errc::invalid_argument, "segment count " + std::to_string(k) + " must lie in [1, " +
                                     std::to_string(context_size) + "]");
  }
  auto sizes = segment_sizes(context_size, k);
  std::vector<std::size_t> counts(k, 0);
  for (auto pos : ck_positions) ++counts[segment_of(pos, sizes)];
  std::vector<double> cr(k);
  for (std::size_t q = 0; q < k; ++q) cr[q] = static_cast<double>(counts[q]) / static_cast<double>(sizes[q]);
  return cr;
}

inline std::vector<double> compute_context_recall(const std::vector<EntailmentJudgment>& judgments,
                                                  const ContextWindow& ctx, SegmentationConfig seg = {},
                                                  RecallBasis basis = RecallBasis::presented) {
  if (ctx.sentences.empty()) fail(Errc::empty_context, "context recall is undefined for an empty context");
  std::vector<std::size_t> positions;
  for (const auto& j : judgments) {
    if (j.label != Label::CK) continue;
    if (!j.best_context_index || *j.best_context_index >= ctx.sentences.size()) {
      fail(Errc::invalid_argument, "CK judgment without a valid context attribution");
    }
    auto pos = *j.best_context_index;
    if (basis == RecallBasis::original) pos = ctx.provenance.at(pos).source_index;
    positions.push_back(pos);
  }
  return context_recall_from_positions(positions, ctx.sentences.size(), seg.k);
}

/// Literal any-segment reading: a response sentence counts for every segment
/// that entails it on its own (best pair inside the segment above threshold).
inline std::vector<double> compute_context_recall_any_segment(const std::vector<AtomicSentence>& response,
                                                              const ContextWindow& ctx,
                                                              entail::EntailmentBackend& backend,
                                                              const entail::ClassifierConfig& cfg,
                                                              SegmentationConfig seg = {},
                                                              entail::EntailmentCache* cache = nullptr) {
  const auto n = ctx.sentences.size();
  if (n == 0) fail(Errc::empty_context, "context recall is undefined for an empty context");
  if (seg.k == 0 || seg.k > n) fail(Errc::invalid_argument, "segment count out of range");
  auto sizes = segment_sizes(n, seg.k);
  std::vector<double> cr(seg.k, 0.0);
  std::size_t begin = 0;
  for (std::size_t q = 0; q < seg.k; ++q) {
    std::vector<AtomicSentence> part(ctx.sentences.begin() + static_cast<std::ptrdiff_t>(begin),
                                     ctx.sentences.begin() + static_cast<std::ptrdiff_t>(begin + sizes[q]));
    auto js = entail::classify_response(response, part, backend, cfg, cache);
    cr[q] = static_cast<double>(count_label(js, Label::CK)) / static_cast<double>(sizes[q]);
    begin += sizes[q];
  }
  return cr;
}

// ---------------------------------------------------------------------------
// PK position

/// Share of PK sentences in each of four contiguous response quartiles.
/// Earlier quartiles absorb remainders; an empty quartile reports 0.
inline Quartiles compute_pk_quartiles(const std::vector<EntailmentJudgment>& judgments) {
  if (judgments.empty()) fail(Errc::empty_response, "PK quartiles need at least one response sentence");
  auto sizes = segment_sizes(judgments.size(), 4);
  Quartiles out{};
  std::array<std::size_t, 4> pk{};
  for (std::size_t i = 0; i < judgments.size(); ++i) {
    if (judgments[i].label == Label::PK) ++pk[segment_of(i, sizes)];
  }
  for (std::size_t q = 0; q < 4; ++q) {
    out[q] = sizes[q] == 0 ? 0.0 : static_cast<double>(pk[q]) / static_cast<double>(sizes[q]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Length

/// Tokens are runs of non-whitespace in the answer text.
inline ResponseLength length_stats(const GenerationRecord& record) {
  return {text::split_whitespace(record.answer_text).size(), record.response_sentences.size()};
}

// ---------------------------------------------------------------------------
// ROUGE-L

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (const auto& x : a) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = x == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

inline double rouge_l_tokens(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  auto lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return 0.0;
  double p = lcs / static_cast<double>(cand.size());
  double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

/// LCS F1 over case-folded, punctuation-stripped tokens.
inline double rouge_l(std::string_view candidate, std::string_view reference) {
  return rouge_l_tokens(text::normalized_tokens(candidate), text::normalized_tokens(reference));
}

// ---------------------------------------------------------------------------
// Shuffle shift

/// Mean absolute per-segment difference, in percentage points.
inline double shuffle_shift(const std::vector<double>& baseline, const std::vector<double>& shuffled) {
  if (baseline.size() != shuffled.size()) {
    fail(Errc::dimension_mismatch, "segment counts differ: " + std::to_string(baseline.size()) + " vs " +
                                       std::to_string(shuffled.size()));
  }
  if (baseline.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < baseline.size(); ++i) sum += std::abs(baseline[i] - shuffled[i]);
  return sum / static_cast<double>(baseline.size()) * 100.0;
}

// ---------------------------------------------------------------------------
// Reports

/// Assembles the per-record report. CR is left empty when the context has
/// fewer sentences than segments (including size-0 contexts).
inline EvaluationReport build_report(const GenerationRecord& record, const ContextWindow& window,
                                     std::vector<EntailmentJudgment> judgments, SegmentationConfig seg = {}) {
  EvaluationReport r;
  r.record_id = record.record_id;
  r.topic = record.topic;
  r.model_id = record.model_id;
  r.lang = record.lang;
  r.context_size = window.sentences.size();
  r.condition = record.condition;
  r.prompt_variant = record.prompt_variant;
  r.ck_score = compute_ck_score(judgments);
  if (r.ck_score) r.pk_score = compute_pk_score(*r.ck_score);
  if (!window.sentences.empty() && seg.k <= window.sentences.size()) {
    r.context_recall = compute_context_recall(judgments, window, seg);
  }
  if (!judgments.empty()) r.pk_quartiles = compute_pk_quartiles(judgments);
  r.response_length = length_stats(record);
  r.judgments = std::move(judgments);
  return r;
}

// ---------------------------------------------------------------------------
// Aggregation

enum class GroupKey { model, lang, context_size, condition, prompt_variant };
inline const std::vector<GroupKey> kAllGroupKeys{GroupKey::model, GroupKey::lang, GroupKey::context_size,
                                                 GroupKey::condition, GroupKey::prompt_variant};

/// Group statistics. Key fields not used for grouping are null. Standard
/// deviations use the population formula.
struct AggregateRow {
  std::optional<std::string> model_id;
  std::optional<std::string> lang;
  std::optional<std::size_t> context_size;
  std::optional<std::string> condition;
  std::optional<std::string> prompt_variant;
  std::optional<double> mean_ck;
  std::optional<double> std_ck;
  std::vector<double> mean_cr;
  std::optional<Quartiles> mean_pk_quartiles;
  double mean_length_tokens = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_null_ck = 0;
  bool flagged = false;  // every CK in the group was null

  friend bool operator==(const AggregateRow&, const AggregateRow&) = default;
};

inline void to_json(json& j, const AggregateRow& r) {
  using ckpk::detail::optional_to_json;
  j = json{{"model_id", optional_to_json(r.model_id)},
           {"lang", optional_to_json(r.lang)},
           {"context_size", optional_to_json(r.context_size)},
           {"condition", optional_to_json(r.condition)},
           {"prompt_variant", optional_to_json(r.prompt_variant)},
           {"mean_ck", optional_to_json(r.mean_ck)},
           {"std_ck", optional_to_json(r.std_ck)},
           {"mean_cr", r.mean_cr},
           {"mean_pk_quartiles", optional_to_json(r.mean_pk_quartiles)},
           {"mean_length_tokens", r.mean_length_tokens},
           {"n_samples", r.n_samples},
           {"n_null_ck", r.n_null_ck},
           {"flagged", r.flagged},
           {"std_formula", "population"}};
}

inline void from_json(const json& j, AggregateRow& r) {
  constexpr std::string_view T = "AggregateRow";
  using namespace ckpk::detail;
  check_object(j, T,
               {"model_id", "lang", "context_size", "condition", "prompt_variant", "mean_ck", "std_ck", "mean_cr",
                "mean_pk_quartiles", "mean_length_tokens", "n_samples", "n_null_ck", "flagged"},
               {"std_formula"});
  r.model_id = get_optional<std::string>(j, T, "model_id");
  r.lang = get_optional<std::string>(j, T, "lang");
  r.context_size = get_optional<std::size_t>(j, T, "context_size");
  r.condition = get_optional<std::string>(j, T, "condition");
  r.prompt_variant = get_optional<std::string>(j, T, "prompt_variant");
  r.mean_ck = get_optional<double>(j, T, "mean_ck");
  r.std_ck = get_optional<double>(j, T, "std_ck");
  r.mean_cr = get_field<std::vector<double>>(j, T, "mean_cr");
  r.mean_pk_quartiles = get_optional<Quartiles>(j, T, "mean_pk_quartiles");
  r.mean_length_tokens = get_field<double>(j, T, "mean_length_tokens");
  r.n_samples = get_field<std::size_t>(j, T, "n_samples");
  r.n_null_ck = get_field<std::size_t>(j, T, "n_null_ck");
  r.flagged = get_field<bool>(j, T, "flagged");
}

namespace detail {

// Sorting before summation makes every statistic independent of input order.
inline double stable_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double population_std(std::vector<double> v) {
  double m = stable_mean(v);
  std::vector<double> sq;
  sq.reserve(v.size());
  for (double x : v) sq.push_back((x - m) * (x - m));
  return std::sqrt(stable_mean(std::move(sq)));
}

using Key = std::tuple<std::optional<std::string>, std::optional<std::string>, std::optional<std::size_t>,
                       std::optional<std::string>, std::optional<std::string>>;

inline bool has(const std::vector<GroupKey>& keys, GroupKey k) {
  return std::find(keys.begin(), keys.end(), k) != keys.end();
}

}  // namespace detail

inline double mean(const std::vector<double>& v) { return detail::stable_mean(v); }
inline double population_std(const std::vector<double>& v) { return detail::population_std(v); }

/// Mean/std per group, groups ordered lexicographically by key. Null CK
/// values are excluded from the CK mean and counted in n_null_ck.
inline std::vector<AggregateRow> aggregate(const std::vector<EvaluationReport>& reports,
                                           const std::vector<GroupKey>& keys = kAllGroupKeys) {
  std::map<detail::Key, std::vector<const EvaluationReport*>> groups;
  for (const auto& r : reports) {
    detail::Key key{
        detail::has(keys, GroupKey::model) ? std::optional<std::string>(r.model_id) : std::nullopt,
        detail::has(keys, GroupKey::lang) ? std::optional<std::string>(r.lang.tag()) : std::nullopt,
        detail::has(keys, GroupKey::context_size) ? std::optional<std::size_t>(r.context_size) : std::nullopt,
        detail::has(keys, GroupKey::condition) ? std::optional<std::string>(to_string(r.condition)) : std::nullopt,
        detail::has(keys, GroupKey::prompt_variant) ? std::optional<std::string>(to_string(r.prompt_variant))
                                                    : std::nullopt};
    groups[key].push_back(&r);
  }

  std::vector<AggregateRow> rows;
  for (const auto& [key, members] : groups) {
    AggregateRow row;
    std::tie(row.model_id, row.lang, row.context_size, row.condition, row.prompt_variant) = key;
    row.n_samples = members.size();

    std::vector<double> ck, length;
    std::size_t k = 0;
    for (const auto* r : members) k = std::max(k, r->context_recall.size());
    std::vector<std::vector<double>> cr(k);
    std::array<std::vector<double>, 4> quart;
    for (const auto* r : members) {
      if (r->ck_score) ck.push_back(*r->ck_score);
      else ++row.n_null_ck;
      length.push_back(static_cast<double>(r->response_length.tokens));
      if (r->context_recall.size() == k) {
        for (std::size_t q = 0; q < k; ++q) cr[q].push_back(r->context_recall[q]);
      }
      if (r->pk_quartiles) {
        for (std::size_t q = 0; q < 4; ++q) quart[q].push_back((*r->pk_quartiles)[q]);
      }
    }
    if (!ck.empty()) {
      row.mean_ck = detail::stable_mean(ck);
      row.std_ck = detail::population_std(ck);
    } else {
      row.flagged = true;
    }
    for (std::size_t q = 0; q < k; ++q) {
      if (!cr[q].empty()) row.mean_cr.push_back(detail::stable_mean(cr[q]));
    }
    if (!quart[0].empty()) {
      Quartiles m{};
      for (std::size_t q = 0; q < 4; ++q) m[q] = detail::stable_mean(quart[q]);
      row.mean_pk_quartiles = m;
    }
    row.mean_length_tokens = detail::stable_mean(length);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ckpk::metrics

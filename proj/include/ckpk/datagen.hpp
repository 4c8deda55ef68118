#pragma once

// Experimental inputs: prefix context windows, contradiction conditions,
// shuffled windows and synthetic calibration sets.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ckpk/core.hpp"
#include "ckpk/llm.hpp"
#include "ckpk/prompts.hpp"

namespace ckpk::datagen {

/// A topic's atomic sentences in article order, with an optional
/// index-aligned entity-swapped counterpart. Counterfactuals are consumed
/// only after a reviewer sets `counterfactuals_verified`.
struct TopicSource {
  std::string topic;
  Lang lang;
  std::vector<std::string> atomic_pool;
  std::optional<std::vector<std::string>> counterfactual_pool;
  bool counterfactuals_verified = false;

  friend bool operator==(const TopicSource&, const TopicSource&) = default;
};

inline void to_json(json& j, const TopicSource& s) {
  j = json{{"topic", s.topic},
           {"lang", s.lang},
           {"atomic_pool", s.atomic_pool},
           {"counterfactual_pool", ckpk::detail::optional_to_json(s.counterfactual_pool)},
           {"counterfactuals_verified", s.counterfactuals_verified}};
}

inline void from_json(const json& j, TopicSource& s) {
  constexpr std::string_view T = "TopicSource";
  using namespace ckpk::detail;
  check_object(j, T, {"topic", "lang", "atomic_pool"}, {"counterfactual_pool", "counterfactuals_verified"});
  s.topic = get_field<std::string>(j, T, "topic");
  s.lang = get_field<Lang>(j, T, "lang");
  s.atomic_pool = get_field<std::vector<std::string>>(j, T, "atomic_pool");
  s.counterfactual_pool = get_optional<std::vector<std::string>>(j, T, "counterfactual_pool");
  s.counterfactuals_verified = j.value("counterfactuals_verified", false);
  if (s.counterfactual_pool && s.counterfactual_pool->size() != s.atomic_pool.size()) {
    fail(Errc::schema, "TopicSource '" + s.topic + "': counterfactual_pool must align with atomic_pool");
  }
  for (const auto& t : s.atomic_pool) {
    if (text::is_blank(t)) fail(Errc::schema, "TopicSource '" + s.topic + "': blank pool sentence");
  }
}

namespace detail {

inline AtomicSentence context_sentence(const TopicSource& src, const std::string& text, std::size_t index) {
  return make_sentence(src.topic, text, src.lang, Origin::context, index);
}

inline void require_pool(const TopicSource& src, std::size_t size) {
  if (size > src.atomic_pool.size()) {
    fail(Errc::insufficient_pool, "topic '" + src.topic + "' has " + std::to_string(src.atomic_pool.size()) +
                                      " pool sentences, " + std::to_string(size) + " requested");
  }
}

/// Unbiased integer in [0, n) from raw 64-bit engine output; the engine's
/// sequence is fixed by the standard, so results match across platforms.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::mt19937_64::max() - (std::mt19937_64::max() % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace detail

/// Window of size s holds the first s pool sentences, so windows nest as prefixes.
inline std::vector<ContextWindow> build_context_windows(
    const TopicSource& src, const std::vector<std::size_t>& sizes = {kDefaultContextSizes.begin(),
                                                                    kDefaultContextSizes.end()}) {
  std::vector<ContextWindow> out;
  for (auto size : sizes) {
    detail::require_pool(src, size);
    ContextWindow w;
    w.topic = src.topic;
    w.lang = src.lang;
    w.size = size;
    w.condition = Condition::factual;
    for (std::size_t i = 0; i < size; ++i) {
      w.sentences.push_back(detail::context_sentence(src, src.atomic_pool[i], i));
      w.provenance.push_back({Truth::factual, i});
    }
    out.push_back(std::move(w));
  }
  return out;
}

/// Factual, counterfactual and split windows. Split windows put the first
/// ceil(size/2) positions in the leading condition.
inline ContextWindow build_condition(const TopicSource& src, std::size_t size, Condition condition) {
  if (condition == Condition::shuffled) fail(Errc::invalid_argument, "use shuffle_window for shuffled windows");
  detail::require_pool(src, size);
  if (condition != Condition::factual) {
    if (!src.counterfactual_pool) {
      fail(Errc::missing_counterfactuals, "topic '" + src.topic + "' has no counterfactual pool");
    }
    if (!src.counterfactuals_verified) {
      fail(Errc::missing_counterfactuals, "topic '" + src.topic + "' counterfactuals are not marked verified");
    }
  }
  ContextWindow w;
  w.topic = src.topic;
  w.lang = src.lang;
  w.size = size;
  w.condition = condition;
  for (std::size_t i = 0; i < size; ++i) {
    auto truth = *expected_truth(condition, i, size);
    const auto& text = truth == Truth::factual ? src.atomic_pool[i] : (*src.counterfactual_pool)[i];
    w.sentences.push_back(detail::context_sentence(src, text, i));
    w.provenance.push_back({truth, i});
  }
  return w;
}

/// Seeded permutation of a window. Sentences keep their ids and indices and
/// provenance moves with them, so attribution against original positions
/// stays possible.
inline ContextWindow shuffle_window(const ContextWindow& w, std::uint64_t seed) {
  if (w.sentences.size() < 2) fail(Errc::invalid_argument, "shuffling needs at least two sentences");
  if (w.provenance.size() != w.sentences.size()) fail(Errc::invalid_argument, "window provenance is incomplete");
  std::vector<std::size_t> order(w.sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[detail::uniform_below(rng, i + 1)]);
  }
  ContextWindow out = w;
  out.condition = Condition::shuffled;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.sentences[i] = w.sentences[order[i]];
    out.provenance[i] = w.provenance[order[i]];
  }
  return out;
}

/// Picks `n` distinct windows (size >= 2) uniformly at random; all of them
/// when fewer exist. Returned indices are sorted.
inline std::vector<std::size_t> sample_for_shuffle(const std::vector<ContextWindow>& windows, std::size_t n,
                                                   std::uint64_t seed) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].sentences.size() >= 2 && windows[i].condition != Condition::shuffled) eligible.push_back(i);
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < std::min(n, eligible.size()); ++i) {
    std::swap(eligible[i], eligible[i + detail::uniform_below(rng, eligible.size() - i)]);
  }
  eligible.resize(std::min(n, eligible.size()));
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

// ---------------------------------------------------------------------------
// Calibration

inline constexpr std::size_t kCalibrationCk = 10;
inline constexpr std::size_t kCalibrationPk = 5;
inline constexpr std::size_t kCalibrationWindow = 20;

struct CalibrationOptions {
  std::size_t window_size = 0;            // 0: max(n_ck, min(20, pool size))
  std::vector<std::size_t> pk_positions;  // empty: 2, 5, 8, ... within the response
};

struct CalibrationSet {
  ContextWindow window;
  std::vector<AtomicSentence> response;
  std::vector<Label> expected;
  double expected_ck = 0.0;
};

inline std::vector<std::size_t> default_pk_positions(std::size_t n_ck, std::size_t n_pk) {
  const auto total = n_ck + n_pk;
  std::vector<std::size_t> pos;
  for (std::size_t j = 0; j < n_pk; ++j) pos.push_back(3 * j + 2);
  if (!pos.empty() && pos.back() >= total) {
    pos.clear();
    for (std::size_t j = 0; j < n_pk; ++j) pos.push_back(n_ck + j);  // PK tail
  }
  return pos;
}

/// Synthetic response: `n_ck` sentences copied verbatim from the window
/// (spread across it) and `n_pk` sentences from an unrelated topic.
inline CalibrationSet build_calibration_set(const TopicSource& src, const TopicSource& foreign, std::size_t n_ck = kCalibrationCk,
                                            std::size_t n_pk = kCalibrationPk, const CalibrationOptions& opt = {}) {
  if (src.topic == foreign.topic) fail(Errc::invalid_argument, "calibration needs a foreign topic distinct from the source");
  if (n_ck + n_pk == 0) fail(Errc::invalid_argument, "calibration response would be empty");
  const std::size_t window_size =
      opt.window_size ? opt.window_size : std::max(n_ck, std::min(kCalibrationWindow, src.atomic_pool.size()));
  if (window_size < n_ck) fail(Errc::invalid_argument, "window smaller than the number of copied sentences");
  detail::require_pool(src, window_size);
  if (foreign.atomic_pool.size() < n_pk) {
    fail(Errc::insufficient_pool, "foreign topic '" + foreign.topic + "' has fewer than " + std::to_string(n_pk) + " sentences");
  }

  CalibrationSet cal;
  cal.window = build_context_windows(src, {window_size}).front();

  const auto total = n_ck + n_pk;
  auto pk_pos = opt.pk_positions.empty() ? default_pk_positions(n_ck, n_pk) : opt.pk_positions;
  std::set<std::size_t> pk_set(pk_pos.begin(), pk_pos.end());
  if (pk_set.size() != n_pk || (!pk_set.empty() && *pk_set.rbegin() >= total)) {
    fail(Errc::invalid_argument, "PK positions must be distinct and inside the response");
  }

  const std::string scope = "calibration:" + src.topic + "|" + foreign.topic;
  std::size_t next_ck = 0, next_pk = 0;
  for (std::size_t pos = 0; pos < total; ++pos) {
    std::string text;
    if (pk_set.count(pos)) {
      text = foreign.atomic_pool[next_pk++];
      cal.expected.push_back(Label::PK);
    } else {
      text = src.atomic_pool[next_ck * window_size / n_ck];
      ++next_ck;
      cal.expected.push_back(Label::CK);
    }
    cal.response.push_back(make_sentence(scope, text, src.lang, Origin::response, pos));
  }
  cal.expected_ck = 100.0 * static_cast<double>(n_ck) / static_cast<double>(total);
  return cal;
}

// ---------------------------------------------------------------------------
// Counterfactual proposals

/// Asks the model for an entity-swapped version of the pool. The result is
/// written for human review and stays unverified until a reviewer flips the flag.
inline TopicSource propose_counterfactuals(const TopicSource& src, llm::TextGenerator& gen) {
  auto raw = gen.generate(prompts::render_counterfactual_swap(src.atomic_pool), GenerationParams::extended());
  for (const auto& obj : llm::find_json_objects(raw)) {
    auto it = obj.find(std::string(prompts::kSwapKey));
    if (it == obj.end() || !it->is_array()) continue;
    std::vector<std::string> swapped;
    for (const auto& s : *it) {
      if (!s.is_string() || text::is_blank(s.get<std::string>())) {
        fail(Errc::malformed_model_output, "counterfactual list holds a blank or non-string entry");
      }
      swapped.push_back(s.get<std::string>());
    }
    if (swapped.size() != src.atomic_pool.size()) {
      fail(Errc::malformed_model_output, "counterfactual list length does not match the pool");
    }
    TopicSource out = src;
    out.counterfactual_pool = std::move(swapped);
    out.counterfactuals_verified = false;
    return out;
  }
  fail(Errc::malformed_model_output, "reply lacks a counterfactual_sentences list");
}

}  // namespace ckpk::datagen

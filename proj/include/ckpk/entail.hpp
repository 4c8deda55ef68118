#pragma once

// Bidirectional entailment scoring and CK/PK classification of response
// atomic sentences against a context window.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ckpk/core.hpp"
#include "ckpk/hash.hpp"
#include "ckpk/text.hpp"

namespace ckpk::entail {

enum class Aggregator { mean_then_max, max_then_max, forward_only };
inline constexpr ckpk::detail::EnumNames<Aggregator, 3> kAggregatorNames{{
    {Aggregator::mean_then_max, "mean_then_max"},
    {Aggregator::max_then_max, "max_then_max"},
    {Aggregator::forward_only, "forward_only"}}};
inline std::string_view to_string(Aggregator a) { return ckpk::detail::enum_to_string(kAggregatorNames, a); }
inline Aggregator parse_aggregator(std::string_view s) {
  return ckpk::detail::enum_from_string(kAggregatorNames, s, "aggregator");
}

inline constexpr double kDefaultThreshold = 0.7;
inline constexpr double kBorderlineLo = 0.4;
inline constexpr double kBorderlineHi = 0.8;

struct ClassifierConfig {
  double threshold = kDefaultThreshold;
  Aggregator aggregator = Aggregator::mean_then_max;
  double band_lo = kBorderlineLo;  // closed band [band_lo, band_hi]
  double band_hi = kBorderlineHi;
  std::size_t premise_window = 1;  // consecutive context sentences per premise

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) fail(Errc::invalid_argument, "threshold must lie in (0, 1)");
    if (!(band_lo < band_hi)) fail(Errc::invalid_argument, "borderline band requires lo < hi");
    if (premise_window == 0) fail(Errc::invalid_argument, "premise window must be >= 1");
  }

  bool in_band(double p) const { return p >= band_lo && p <= band_hi; }
};

/// Combines the two directional entailment probabilities of one pair.
inline double pair_score(double p_forward, double p_backward, Aggregator agg) {
  switch (agg) {
    case Aggregator::mean_then_max: return (p_forward + p_backward) / 2.0;
    case Aggregator::max_then_max: return std::max(p_forward, p_backward);
    case Aggregator::forward_only: return p_forward;
  }
  return p_forward;
}

// ---------------------------------------------------------------------------
// Backends

struct TextPair {
  std::string premise;
  std::string hypothesis;
};

struct Capabilities {
  std::size_t max_batch = 64;
  std::size_t max_in_flight = 1;
  std::vector<std::string> supported_langs;  // empty: any language
};

/// Entailment probability provider. `score_batch` returns one probability in
/// [0,1] per pair, in order, and is deterministic for a fixed configuration.
class EntailmentBackend {
 public:
  virtual ~EntailmentBackend() = default;
  virtual std::vector<double> score_batch(std::span<const TextPair> pairs, const Lang& lang) = 0;
  virtual Capabilities capabilities() const { return {}; }
  /// Stable identity of the backend configuration; part of every cache key.
  virtual std::string config_id() const = 0;

  double score(std::string_view premise, std::string_view hypothesis, const Lang& lang) {
    TextPair p{std::string(premise), std::string(hypothesis)};
    return score_batch(std::span<const TextPair>(&p, 1), lang).at(0);
  }
};

/// Token containment of the hypothesis in the premise over case-folded,
/// punctuation-stripped token sets. An empty hypothesis scores 0.
inline double lexical_oracle(std::string_view premise, std::string_view hypothesis) {
  auto hyp = text::token_set(hypothesis);
  if (hyp.empty()) return 0.0;
  auto prem = text::token_set(premise);
  std::size_t shared = 0;
  for (const auto& t : hyp) shared += prem.count(t);
  return static_cast<double>(shared) / static_cast<double>(hyp.size());
}

class LexicalOracleBackend : public EntailmentBackend {
 public:
  std::vector<double> score_batch(std::span<const TextPair> pairs, const Lang&) override {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(lexical_oracle(p.premise, p.hypothesis));
    return out;
  }
  Capabilities capabilities() const override { return {1024, 1, {}}; }
  std::string config_id() const override { return "lexical-oracle/v1"; }
};

// ---------------------------------------------------------------------------
// Cache

/// Directional scores keyed by (backend config, premise id, hypothesis id).
/// Concurrent readers, serialized writers.
class EntailmentCache {
 public:
  static std::string key(std::string_view backend_id, std::string_view premise_id, std::string_view hypothesis_id) {
    return hash_fields({backend_id, premise_id, hypothesis_id});
  }

  std::optional<double> get(const std::string& k) const {
    std::shared_lock lock(mu_);
    auto it = scores_.find(k);
    if (it == scores_.end()) return std::nullopt;
    return it->second;
  }

  void put(const std::string& k, double v) {
    std::unique_lock lock(mu_);
    scores_[k] = v;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return scores_.size();
  }

  void save(const std::string& path) const {
    std::shared_lock lock(mu_);
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Errc::io, "cannot write entailment cache " + path);
    for (const auto& [k, v] : scores_) out << json{{"key", k}, {"score", v}}.dump() << '\n';
  }

  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) return;
    std::unique_lock lock(mu_);
    std::string line;
    while (std::getline(in, line)) {
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("key") || !j.contains("score")) continue;
      scores_[j["key"].get<std::string>()] = j["score"].get<double>();
    }
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, double> scores_;
};

// ---------------------------------------------------------------------------
// Classification

namespace detail {

struct Premise {
  std::string id;
  std::string text;
};

inline std::vector<Premise> premises(const std::vector<AtomicSentence>& ctx, std::size_t window) {
  std::vector<Premise> out;
  out.reserve(ctx.size());
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    if (window == 1) {
      out.push_back({ctx[i].id, ctx[i].text});
      continue;
    }
    std::vector<std::string> ids, texts;
    for (std::size_t j = i; j < std::min(ctx.size(), i + window); ++j) {
      ids.push_back(ctx[j].id);
      texts.push_back(ctx[j].text);
    }
    out.push_back({sha256_hex(text::join(ids, "+")).substr(0, 24), text::join(texts, " ")});
  }
  return out;
}

struct PendingPair {
  std::string key;
  TextPair pair;
  std::string response_id;
};

/// Scores every uncached pair, batched to the backend's limits and dispatched
/// up to its in-flight limit. Results land in `cache`.
inline void score_pending(std::vector<PendingPair>& pending, const Lang& lang, EntailmentBackend& backend,
                          EntailmentCache& cache) {
  if (pending.empty()) return;
  auto caps = backend.capabilities();
  const std::size_t batch = std::max<std::size_t>(1, caps.max_batch);
  const std::size_t in_flight = std::max<std::size_t>(1, caps.max_in_flight);

  auto run_batch = [&](std::size_t begin, std::size_t end) {
    std::vector<TextPair> pairs;
    pairs.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) pairs.push_back(pending[i].pair);
    std::vector<double> scores;
    try {
      scores = backend.score_batch(pairs, lang);
    } catch (const Error& e) {
      fail(e.code(), "while scoring response sentence " + pending[begin].response_id + ": " + e.message());
    } catch (const std::exception& e) {
      fail(Errc::upstream_failure, "while scoring response sentence " + pending[begin].response_id + ": " + e.what());
    }
    if (scores.size() != pairs.size()) {
      fail(Errc::upstream_failure, "backend returned " + std::to_string(scores.size()) + " scores for " +
                                       std::to_string(pairs.size()) + " pairs");
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
        fail(Errc::upstream_failure, "backend score outside [0,1] for response sentence " + pending[begin + i].response_id);
      }
      cache.put(pending[begin + i].key, scores[i]);
    }
  };

  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t b = 0; b < pending.size(); b += batch) ranges.emplace_back(b, std::min(pending.size(), b + batch));

  if (in_flight == 1 || ranges.size() == 1) {
    for (auto [b, e] : ranges) run_batch(b, e);
    return;
  }
  for (std::size_t w = 0; w < ranges.size(); w += in_flight) {
    std::vector<std::future<void>> wave;
    for (std::size_t r = w; r < std::min(ranges.size(), w + in_flight); ++r) {
      wave.push_back(std::async(std::launch::async, run_batch, ranges[r].first, ranges[r].second));
    }
    for (auto& f : wave) f.get();  // first failure propagates in range order
  }
}

}  // namespace detail

/// Classifies every response sentence against `ctx`. One judgment per
/// response sentence, in order; no partial results on failure.
inline std::vector<EntailmentJudgment> classify_response(const std::vector<AtomicSentence>& response,
                                                         const std::vector<AtomicSentence>& ctx,
                                                         EntailmentBackend& backend, const ClassifierConfig& cfg,
                                                         EntailmentCache* shared_cache = nullptr) {
  cfg.validate();
  std::vector<EntailmentJudgment> out;
  if (response.empty()) return out;

  EntailmentCache local;
  EntailmentCache& cache = shared_cache ? *shared_cache : local;
  const auto backend_id = backend.config_id();
  const auto prem = detail::premises(ctx, cfg.premise_window);

  // forward: context premise -> response hypothesis; backward: the reverse
  std::vector<detail::PendingPair> pending;
  std::set<std::string> queued;
  auto want = [&](const std::string& pid, const std::string& ptext, const std::string& hid,
                  const std::string& htext, const std::string& rid) {
    auto k = EntailmentCache::key(backend_id, pid, hid);
    if (queued.count(k) || cache.get(k)) return;
    queued.insert(k);
    pending.push_back({k, {ptext, htext}, rid});
  };
  for (const auto& s : response) {
    for (const auto& p : prem) {
      want(p.id, p.text, s.id, s.text, s.id);
      want(s.id, s.text, p.id, p.text, s.id);
    }
  }
  const Lang lang = response.front().lang;
  detail::score_pending(pending, lang, backend, cache);

  out.reserve(response.size());
  for (const auto& s : response) {
    EntailmentJudgment j;
    j.response_sentence_id = s.id;
    bool have_best = false;
    for (std::size_t i = 0; i < prem.size(); ++i) {
      double f = *cache.get(EntailmentCache::key(backend_id, prem[i].id, s.id));
      double b = *cache.get(EntailmentCache::key(backend_id, s.id, prem[i].id));
      double c = pair_score(f, b, cfg.aggregator);
      if (!have_best || c > j.combined) {  // ties keep the earliest position
        have_best = true;
        j.combined = c;
        j.p_forward = f;
        j.p_backward = b;
        j.best_context_sentence_id = ctx[i].id;
        j.best_context_index = i;
      }
    }
    j.label = j.combined > cfg.threshold ? Label::CK : Label::PK;
    j.borderline = cfg.in_band(j.combined);
    out.push_back(std::move(j));
  }
  return out;
}

inline EntailmentJudgment classify_sentence(const AtomicSentence& s, const std::vector<AtomicSentence>& ctx,
                                            EntailmentBackend& backend, const ClassifierConfig& cfg,
                                            EntailmentCache* cache = nullptr) {
  return classify_response({s}, ctx, backend, cfg, cache).front();
}

/// Drops judgments whose combined score lies in the closed borderline band.
inline std::vector<EntailmentJudgment> filter_borderline(const std::vector<EntailmentJudgment>& judgments,
                                                         double lo = kBorderlineLo, double hi = kBorderlineHi) {
  std::vector<EntailmentJudgment> out;
  for (const auto& j : judgments) {
    if (!(j.combined >= lo && j.combined <= hi)) out.push_back(j);
  }
  return out;
}

}  // namespace ckpk::entail

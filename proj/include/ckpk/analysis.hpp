#pragma once

// Calibration, threshold ablation, the summarization case study and the
// table/plot-data emitters.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ckpk/atomize.hpp"
#include "ckpk/core.hpp"
#include "ckpk/datagen.hpp"
#include "ckpk/dataset.hpp"
#include "ckpk/entail.hpp"
#include "ckpk/jsonl.hpp"
#include "ckpk/llm.hpp"
#include "ckpk/metrics.hpp"
#include "ckpk/prompts.hpp"

namespace ckpk::pipeline {

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationSummary {
  std::string lang;
  std::size_t fixtures = 0;
  double mean_ck = 0.0;
  double std_ck = 0.0;
  double expected_ck = 0.0;
  double label_error_rate = 0.0;
  std::size_t labels = 0;
  std::size_t mislabeled = 0;
};

inline void to_json(json& j, const CalibrationSummary& s) {
  j = json{{"lang", s.lang},           {"fixtures", s.fixtures},
           {"mean_ck", s.mean_ck},     {"std_ck", s.std_ck},
           {"expected_ck", s.expected_ck}, {"label_error_rate", s.label_error_rate},
           {"labels", s.labels},       {"mislabeled", s.mislabeled},
           {"std_formula", "population"}};
}

struct CalibrateOptions {
  std::size_t n_ck = datagen::kCalibrationCk;
  std::size_t n_pk = datagen::kCalibrationPk;
  std::vector<std::string> langs;  // empty: every language in the dataset
  entail::ClassifierConfig classifier;
};

/// One calibration set per topic; the foreign sentences come from the next
/// topic of the same language (cyclically).
inline std::vector<CalibrationSummary> calibrate(const Dataset& dataset, entail::EntailmentBackend& backend,
                                                 const CalibrateOptions& opt = {}) {
  std::map<std::string, std::vector<const datagen::TopicSource*>> by_lang;
  for (const auto& t : dataset.topics) {
    if (opt.langs.empty() || std::find(opt.langs.begin(), opt.langs.end(), t.lang.tag()) != opt.langs.end()) {
      by_lang[t.lang.tag()].push_back(&t);
    }
  }
  if (by_lang.empty()) fail(Errc::insufficient_pool, "no topics available for calibration");

  std::vector<CalibrationSummary> out;
  for (auto& [lang, topics] : by_lang) {
    std::sort(topics.begin(), topics.end(), [](auto* a, auto* b) { return a->topic < b->topic; });
    if (topics.size() < 2) fail(Errc::insufficient_pool, "calibration for '" + lang + "' needs at least two topics");
    CalibrationSummary s;
    s.lang = lang;
    std::vector<double> cks;
    for (std::size_t i = 0; i < topics.size(); ++i) {
      auto set = datagen::build_calibration_set(*topics[i], *topics[(i + 1) % topics.size()], opt.n_ck, opt.n_pk);
      auto js = entail::classify_response(set.response, set.window.sentences, backend, opt.classifier);
      for (std::size_t k = 0; k < js.size(); ++k) s.mislabeled += js[k].label != set.expected[k];
      s.labels += js.size();
      cks.push_back(*metrics::compute_ck_score(js));
      s.expected_ck = set.expected_ck;
    }
    s.fixtures = cks.size();
    s.mean_ck = metrics::mean(cks);
    s.std_ck = metrics::population_std(cks);
    s.label_error_rate = static_cast<double>(s.mislabeled) / static_cast<double>(s.labels);
    out.push_back(s);
  }
  return out;
}

inline std::vector<CalibrationSummary> cmd_calibrate(const fs::path& dataset, entail::EntailmentBackend& backend,
                                                     const CalibrateOptions& opt, const fs::path& out_dir) {
  auto summaries = calibrate(load_dataset(dataset), backend, opt);
  std::vector<std::string> lines;
  for (const auto& s : summaries) lines.push_back(jsonl::encode(jsonl::kind::calibration_summary, s));
  jsonl::write_file(out_dir / "calibration.jsonl", lines);
  return summaries;
}

// ---------------------------------------------------------------------------
// Threshold ablation

/// The report recomputed without its borderline judgments. Remaining labels
/// are unchanged; CR keeps the report's segment count.
inline EvaluationReport ablate_report(const EvaluationReport& r, double lo = entail::kBorderlineLo,
                                      double hi = entail::kBorderlineHi,
                                      metrics::SegmentationConfig seg = {}) {
  EvaluationReport out = r;
  out.judgments = entail::filter_borderline(r.judgments, lo, hi);
  out.ck_score = metrics::compute_ck_score(out.judgments);
  out.pk_score = out.ck_score ? std::optional<double>(metrics::compute_pk_score(*out.ck_score)) : std::nullopt;
  out.pk_quartiles = out.judgments.empty() ? std::nullopt : std::optional<Quartiles>(metrics::compute_pk_quartiles(out.judgments));
  const auto k = r.context_recall.empty() ? seg.k : r.context_recall.size();
  out.context_recall.clear();
  if (r.context_size > 0 && k <= r.context_size) {
    std::vector<std::size_t> positions;
    for (const auto& j : out.judgments) {
      if (j.label == Label::CK && j.best_context_index) positions.push_back(*j.best_context_index);
    }
    out.context_recall = metrics::context_recall_from_positions(positions, r.context_size, k);
  }
  return out;
}

struct AblationRow {
  metrics::AggregateRow before;
  metrics::AggregateRow after;
  std::optional<double> delta_ck;  // after - before; null when either side is null
  std::size_t removed = 0;         // judgments inside the band
};

inline void to_json(json& j, const AblationRow& r) {
  j = json{{"before", r.before},
           {"after", r.after},
           {"delta_ck", ckpk::detail::optional_to_json(r.delta_ck)},
           {"removed", r.removed}};
}

/// Paired before/after aggregates per group.
inline std::vector<AblationRow> ablate(const std::vector<EvaluationReport>& reports, double lo = entail::kBorderlineLo,
                                       double hi = entail::kBorderlineHi, metrics::SegmentationConfig seg = {}) {
  if (lo > hi) fail(Errc::invalid_argument, "borderline band is empty");
  std::vector<EvaluationReport> after;
  after.reserve(reports.size());
  for (const auto& r : reports) after.push_back(ablate_report(r, lo, hi, seg));

  // Group membership does not depend on judgments, so both sides line up.
  auto before_rows = metrics::aggregate(reports);
  auto after_rows = metrics::aggregate(after);
  std::map<std::tuple<std::string, std::string, std::size_t, std::string, std::string>, std::size_t> removed;
  for (const auto& r : reports) {
    auto n = r.judgments.size() - entail::filter_borderline(r.judgments, lo, hi).size();
    removed[{r.model_id, r.lang.tag(), r.context_size, std::string(to_string(r.condition)),
             std::string(to_string(r.prompt_variant))}] += n;
  }
  std::vector<AblationRow> out;
  for (std::size_t i = 0; i < before_rows.size(); ++i) {
    AblationRow row{before_rows[i], after_rows.at(i), std::nullopt, 0};
    if (row.before.mean_ck && row.after.mean_ck) row.delta_ck = *row.after.mean_ck - *row.before.mean_ck;
    row.removed = removed[{*row.before.model_id, *row.before.lang, *row.before.context_size, *row.before.condition,
                           *row.before.prompt_variant}];
    out.push_back(std::move(row));
  }
  return out;
}

inline std::vector<AblationRow> cmd_ablate(const fs::path& reports, double lo, double hi, const fs::path& out_dir,
                                           metrics::SegmentationConfig seg = {}) {
  auto rows = ablate(jsonl::read_all<EvaluationReport>(reports, jsonl::kind::evaluation_report), lo, hi, seg);
  std::vector<std::string> lines;
  for (const auto& r : rows) lines.push_back(jsonl::encode(jsonl::kind::ablation_row, r));
  jsonl::write_file(out_dir / "ablation.jsonl", lines);
  return rows;
}

// ---------------------------------------------------------------------------
// Summarization case study

struct CorpusItem {
  std::string id;
  prompts::SummaryCorpus corpus = prompts::SummaryCorpus::qmsum;
  std::string topic;
  std::optional<std::string> query;
  std::vector<std::string> documents;
  std::string gold_summary;
};

inline CorpusItem parse_corpus_item(const json& j, const std::string& where) {
  auto bad = [&](const std::string& msg) { fail(Errc::corpus_format, where + ": " + msg); };
  if (!j.is_object()) bad("expected a JSON object");
  static const std::set<std::string> known{"id", "corpus", "topic", "query", "documents", "gold_summary"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) bad("unknown field '" + k + "'");
  }
  for (const char* k : {"id", "corpus", "documents", "gold_summary"}) {
    if (!j.contains(k)) bad(std::string("missing field '") + k + "'");
  }
  CorpusItem item;
  if (!j["id"].is_string() || !j["corpus"].is_string() || !j["gold_summary"].is_string()) bad("id, corpus and gold_summary must be strings");
  item.id = j["id"].get<std::string>();
  const auto corpus = j["corpus"].get<std::string>();
  if (corpus == "qmsum") {
    item.corpus = prompts::SummaryCorpus::qmsum;
  } else if (corpus == "divsum") {
    item.corpus = prompts::SummaryCorpus::divsum;
  } else {
    bad("corpus must be 'qmsum' or 'divsum'");
  }
  if (j.contains("topic")) {
    if (!j["topic"].is_string()) bad("topic must be a string");
    item.topic = j["topic"].get<std::string>();
  }
  if (j.contains("query") && !j["query"].is_null()) {
    if (!j["query"].is_string()) bad("query must be a string");
    item.query = j["query"].get<std::string>();
  }
  if (!j["documents"].is_array() || j["documents"].empty()) bad("documents must be a non-empty array");
  for (const auto& d : j["documents"]) {
    if (!d.is_string() || text::is_blank(d.get_ref<const std::string&>())) bad("documents must be non-blank strings");
    item.documents.push_back(d.get<std::string>());
  }
  item.gold_summary = j["gold_summary"].get<std::string>();
  if (text::is_blank(item.gold_summary)) bad("gold_summary is blank");
  if (item.corpus == prompts::SummaryCorpus::divsum && item.topic.empty()) bad("divsum items need a topic");
  return item;
}

/// Plain JSON lines (no envelope): id, corpus, topic, query?, documents, gold_summary.
inline std::vector<CorpusItem> read_corpus(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open corpus " + path.string());
  std::vector<CorpusItem> items;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (text::is_blank(line)) continue;
    const auto where = path.string() + ":" + std::to_string(n);
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(Errc::corpus_format, where + ": invalid JSON");
    items.push_back(parse_corpus_item(j, where));
    if (!ids.insert(items.back().id).second) fail(Errc::corpus_format, where + ": duplicate id '" + items.back().id + "'");
  }
  return items;
}

struct CaseStudyScore {
  std::string id;
  std::string prompt;  // "base" or "ck"
  std::string summary;
  double rouge_l = 0.0;
  std::optional<double> nli_gold;
  std::optional<double> ck_score;
};

inline void to_json(json& j, const CaseStudyScore& s) {
  j = json{{"id", s.id},
           {"prompt", s.prompt},
           {"summary", s.summary},
           {"rouge_l", s.rouge_l},
           {"nli_gold", ckpk::detail::optional_to_json(s.nli_gold)},
           {"ck_score", ckpk::detail::optional_to_json(s.ck_score)}};
}

struct CaseStudyRow {
  std::string metric;
  std::optional<double> base;
  std::optional<double> ck_prompt;
};

struct CaseStudyOptions {
  fs::path corpus;
  fs::path out_dir;
  entail::ClassifierConfig classifier;
  GenerationParams params;
  llm::TextGenerator* atomizer = nullptr;  // fallback splitting when null
  std::size_t atomize_limit = prompts::kDefaultAtomizeLimit;
};

struct CaseStudyResult {
  std::vector<CaseStudyScore> scores;
  std::vector<CaseStudyRow> table;
};

namespace detail {

inline std::vector<AtomicSentence> atomize_for_case_study(const std::string& text, const std::string& scope,
                                                          Origin origin, const CaseStudyOptions& opt) {
  if (text::is_blank(text)) return {};
  auto r = opt.atomizer ? atomize::atomize_llm(text, Lang::en(), *opt.atomizer, opt.atomize_limit)
                        : atomize::atomize_fallback(text);
  return atomize::to_atomic_sentences(r, Lang::en(), origin, scope);
}

inline std::optional<double> mean_of(const std::vector<std::optional<double>>& xs) {
  std::vector<double> v;
  for (const auto& x : xs) {
    if (x) v.push_back(*x);
  }
  if (v.empty()) return std::nullopt;
  return metrics::mean(v);
}

inline std::string csv_number(const std::optional<double>& x) { return x ? json(*x).dump() : std::string{}; }

}  // namespace detail

/// Generates base and CK-prompt summaries per item, then scores ROUGE-L and
/// entailment against the gold summary and CK against the source documents.
inline CaseStudyResult cmd_case_study(const CaseStudyOptions& opt, llm::TextGenerator& gen,
                                      entail::EntailmentBackend& backend) {
  const auto items = read_corpus(opt.corpus);
  CaseStudyResult res;
  std::map<std::string, std::vector<std::optional<double>>> rouge, nli, ck;
  for (const auto& item : items) {
    std::vector<AtomicSentence> source;
    for (std::size_t d = 0; d < item.documents.size(); ++d) {
      for (auto& s : detail::atomize_for_case_study(item.documents[d], item.id + "/doc" + std::to_string(d),
                                                    Origin::context, opt)) {
        s.index = source.size();
        source.push_back(std::move(s));
      }
    }
    const auto gold = detail::atomize_for_case_study(item.gold_summary, item.id + "/gold", Origin::context, opt);
    for (auto kind : {prompts::SummaryPrompt::base, prompts::SummaryPrompt::ck}) {
      const std::string name = kind == prompts::SummaryPrompt::base ? "base" : "ck";
      CaseStudyScore s;
      s.id = item.id;
      s.prompt = name;
      s.summary = gen.generate(prompts::render_summary(item.corpus, kind, item.topic, item.documents, item.query), opt.params);
      const auto atoms = detail::atomize_for_case_study(s.summary, item.id + "/" + name, Origin::response, opt);
      s.rouge_l = metrics::rouge_l(s.summary, item.gold_summary);
      s.nli_gold = metrics::compute_ck_score(entail::classify_response(atoms, gold, backend, opt.classifier));
      s.ck_score = metrics::compute_ck_score(entail::classify_response(atoms, source, backend, opt.classifier));
      rouge[name].push_back(s.rouge_l);
      nli[name].push_back(s.nli_gold);
      ck[name].push_back(s.ck_score);
      res.scores.push_back(std::move(s));
    }
  }
  res.table = {{"ROUGE-L", detail::mean_of(rouge["base"]), detail::mean_of(rouge["ck"])},
               {"NLI-Gold", detail::mean_of(nli["base"]), detail::mean_of(nli["ck"])},
               {"CK Score", detail::mean_of(ck["base"]), detail::mean_of(ck["ck"])}};

  std::vector<std::string> lines;
  for (const auto& s : res.scores) lines.push_back(jsonl::encode(jsonl::kind::case_study_item, s));
  jsonl::write_file(opt.out_dir / "case_study.jsonl", lines);
  std::string csv = "metric,base,ck_prompt\n";
  for (const auto& row : res.table) {
    csv += row.metric + "," + detail::csv_number(row.base) + "," + detail::csv_number(row.ck_prompt) + "\n";
  }
  jsonl::write_text(opt.out_dir / "case_study.csv", csv);
  return res;
}

// ---------------------------------------------------------------------------
// Tables and plot data

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  fail(Errc::invalid_argument, "unknown report format '" + std::string(s) + "' (expected csv or json)");
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  return out + "\n";
}

template <typename T>
std::string cell(const std::optional<T>& x) {
  if (!x) return {};
  if constexpr (std::is_same_v<T, std::string>) {
    return *x;
  } else {
    return json(*x).dump();
  }
}

inline json series_key(const metrics::AggregateRow& r, bool with_size) {
  json k{{"model_id", ckpk::detail::optional_to_json(r.model_id)},
         {"lang", ckpk::detail::optional_to_json(r.lang)},
         {"condition", ckpk::detail::optional_to_json(r.condition)},
         {"prompt_variant", ckpk::detail::optional_to_json(r.prompt_variant)}};
  if (with_size) k["context_size"] = ckpk::detail::optional_to_json(r.context_size);
  return k;
}

}  // namespace detail

/// CSV: every aggregate row, CK by context size, CK by prompt variant.
inline std::vector<fs::path> write_report_csv(const std::vector<metrics::AggregateRow>& rows, const fs::path& out_dir) {
  using detail::cell;
  std::size_t k = 0;
  for (const auto& r : rows) k = std::max(k, r.mean_cr.size());

  std::vector<std::string> header{"model_id", "lang", "context_size", "condition", "prompt_variant",
                                  "n_samples", "n_null_ck", "flagged", "mean_ck", "std_ck", "mean_length_tokens"};
  for (std::size_t q = 1; q <= k; ++q) header.push_back("cr_" + std::to_string(q));
  for (int q = 1; q <= 4; ++q) header.push_back("pk_q" + std::to_string(q));
  std::string all = detail::csv_line(header);
  for (const auto& r : rows) {
    std::vector<std::string> f{cell(r.model_id), cell(r.lang), cell(r.context_size), cell(r.condition),
                               cell(r.prompt_variant), std::to_string(r.n_samples), std::to_string(r.n_null_ck),
                               r.flagged ? "true" : "false", cell(r.mean_ck), cell(r.std_ck),
                               json(r.mean_length_tokens).dump()};
    for (std::size_t q = 0; q < k; ++q) f.push_back(q < r.mean_cr.size() ? json(r.mean_cr[q]).dump() : "");
    for (std::size_t q = 0; q < 4; ++q) f.push_back(r.mean_pk_quartiles ? json((*r.mean_pk_quartiles)[q]).dump() : "");
    all += detail::csv_line(f);
  }

  // Pivot tables: one row per remaining key combination, one column per value.
  auto pivot = [&](auto column_of, auto row_of, std::vector<std::string> row_header) {
    std::set<std::string> columns;
    std::map<std::vector<std::string>, std::map<std::string, std::string>> table;
    for (const auto& r : rows) {
      auto col = column_of(r);
      if (!col) continue;
      columns.insert(*col);
      table[row_of(r)][*col] = cell(r.mean_ck);
    }
    std::vector<std::string> h = row_header;
    // Numeric columns sort numerically.
    std::vector<std::string> cols(columns.begin(), columns.end());
    std::stable_sort(cols.begin(), cols.end(), [](const std::string& a, const std::string& b) {
      return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    h.insert(h.end(), cols.begin(), cols.end());
    std::string out = detail::csv_line(h);
    for (const auto& [key, cells] : table) {
      auto f = key;
      for (const auto& c : cols) f.push_back(cells.count(c) ? cells.at(c) : "");
      out += detail::csv_line(f);
    }
    return out;
  };
  auto by_size = pivot([](const metrics::AggregateRow& r) { return r.context_size ? std::optional(std::to_string(*r.context_size)) : std::nullopt; },
                       [](const metrics::AggregateRow& r) {
                         return std::vector<std::string>{cell(r.model_id), cell(r.lang), cell(r.condition), cell(r.prompt_variant)};
                       },
                       {"model_id", "lang", "condition", "prompt_variant"});
  auto by_variant = pivot([](const metrics::AggregateRow& r) { return r.prompt_variant; },
                          [](const metrics::AggregateRow& r) {
                            return std::vector<std::string>{cell(r.model_id), cell(r.lang), cell(r.context_size), cell(r.condition)};
                          },
                          {"model_id", "lang", "context_size", "condition"});

  std::vector<fs::path> written{out_dir / "aggregates.csv", out_dir / "ck_by_size.csv", out_dir / "ck_by_variant.csv"};
  jsonl::write_text(written[0], all);
  jsonl::write_text(written[1], by_size);
  jsonl::write_text(written[2], by_variant);
  return written;
}

/// Plot data: CK against context size, CR per segment and PK per quartile.
inline json plot_data(const std::vector<metrics::AggregateRow>& rows) {
  std::map<std::string, std::pair<json, std::vector<std::pair<std::size_t, double>>>> ck_series;
  json recall = json::array();
  json quartiles = json::array();
  for (const auto& r : rows) {
    if (r.context_size && r.mean_ck) {
      auto key = detail::series_key(r, false);
      auto& s = ck_series[key.dump()];
      s.first = key;
      s.second.emplace_back(*r.context_size, *r.mean_ck);
    }
    if (!r.mean_cr.empty()) {
      json x = json::array();
      for (std::size_t q = 1; q <= r.mean_cr.size(); ++q) x.push_back(q);
      recall.push_back({{"series", detail::series_key(r, true)}, {"x", x}, {"y", r.mean_cr}});
    }
    if (r.mean_pk_quartiles) {
      quartiles.push_back({{"series", detail::series_key(r, true)}, {"x", {1, 2, 3, 4}}, {"y", *r.mean_pk_quartiles}});
    }
  }
  json ck = json::array();
  for (auto& [_, s] : ck_series) {
    std::sort(s.second.begin(), s.second.end());
    json x = json::array(), y = json::array();
    for (const auto& [size, v] : s.second) {
      x.push_back(size);
      y.push_back(v);
    }
    ck.push_back({{"series", s.first}, {"x", x}, {"y", y}});
  }
  return json{{"schema_version", kSchemaVersion},
              {"ck_vs_size", {{"x_label", "context_size"}, {"y_label", "mean_ck"}, {"series", ck}}},
              {"context_recall", {{"x_label", "segment"}, {"y_label", "mean_cr"}, {"series", recall}}},
              {"pk_quartiles", {{"x_label", "quartile"}, {"y_label", "pk_share"}, {"series", quartiles}}}};
}

inline std::vector<fs::path> cmd_report(const fs::path& aggregates, ReportFormat format, const fs::path& out_dir) {
  const auto rows = jsonl::read_all<metrics::AggregateRow>(aggregates, jsonl::kind::aggregate_row);
  if (format == ReportFormat::csv) return write_report_csv(rows, out_dir);
  auto path = out_dir / "plot_data.json";
  jsonl::write_text(path, plot_data(rows).dump(2) + "\n");
  return {path};
}

}  // namespace ckpk::pipeline

#pragma once

// Resumable, budget-guarded generation and evaluation runs.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ckpk/atomize.hpp"
#include "ckpk/core.hpp"
#include "ckpk/dataset.hpp"
#include "ckpk/entail.hpp"
#include "ckpk/jsonl.hpp"
#include "ckpk/llm.hpp"
#include "ckpk/metrics.hpp"
#include "ckpk/openai_client.hpp"
#include "ckpk/prompts.hpp"

namespace ckpk::pipeline {

/// Grids above this many work units need an explicit full-grid opt-in.
inline constexpr std::size_t kDeskScaleUnits = 500;

// ---------------------------------------------------------------------------
// Manifest

struct RunManifest {
  std::string run_id;
  std::string config_hash;
  std::string dataset_version;
  std::vector<json> providers;  // credential variable names only, never secrets
  std::set<std::string> completed;

  json to_json() const {
    return json{{"schema_version", kSchemaVersion},
                {"run_id", run_id},
                {"config_hash", config_hash},
                {"dataset_version", dataset_version},
                {"providers", providers},
                {"completed", std::vector<std::string>(completed.begin(), completed.end())}};
  }

  static RunManifest from_json(const json& j) {
    ckpk::detail::check_object(j, "RunManifest",
                               {"schema_version", "run_id", "config_hash", "dataset_version", "providers", "completed"});
    if (j["schema_version"].get<int>() != kSchemaVersion) fail(Errc::schema, "RunManifest: unsupported schema_version");
    RunManifest m;
    m.run_id = j["run_id"].get<std::string>();
    m.config_hash = j["config_hash"].get<std::string>();
    m.dataset_version = j["dataset_version"].get<std::string>();
    m.providers = j["providers"].get<std::vector<json>>();
    auto done = j["completed"].get<std::vector<std::string>>();
    m.completed.insert(done.begin(), done.end());
    return m;
  }

  void save(const fs::path& path) const { jsonl::write_text(path, to_json().dump(2) + "\n"); }

  /// Existing manifest for the same configuration, or a fresh one. A
  /// manifest from a different configuration is a usage error.
  static RunManifest open(const fs::path& path, const std::string& config_hash, const std::string& dataset_version,
                          std::vector<json> providers) {
    if (fs::exists(path)) {
      auto m = from_json(json::parse(jsonl::read_text(path)));
      if (m.config_hash != config_hash) {
        fail(Errc::invalid_argument, path.string() + " belongs to a run with a different configuration");
      }
      return m;
    }
    RunManifest m;
    m.config_hash = config_hash;
    m.run_id = config_hash.substr(0, 12);
    m.dataset_version = dataset_version;
    m.providers = std::move(providers);
    return m;
  }
};

/// Reads an append-only log, keeping only lines for completed ids, then
/// rewrites it so a torn tail never sits between valid lines.
template <typename T, typename IdOf>
std::map<std::string, T> recover_log(const fs::path& log, std::string_view kind, const std::set<std::string>& completed,
                                     IdOf id_of) {
  std::map<std::string, T> kept;
  if (!fs::exists(log)) return kept;
  for (const auto& line : jsonl::read_file(log, /*tolerate_torn_tail=*/true)) {
    if (line.kind != kind) continue;
    auto v = line.body.get<T>();
    auto id = id_of(v);
    if (completed.count(id)) kept.insert_or_assign(id, std::move(v));
  }
  std::vector<std::string> lines;
  for (const auto& [_, v] : kept) lines.push_back(jsonl::encode(kind, v));
  jsonl::write_file(log, lines);
  return kept;
}

// ---------------------------------------------------------------------------
// Generation

using TransportFactory = std::function<std::shared_ptr<llm::ChatTransport>(const llm::ProviderConfig&)>;

/// "mock" base URLs get the offline mock (atomization answered by the
/// fallback splitter); anything else speaks the OpenAI-compatible protocol.
inline std::shared_ptr<llm::ChatTransport> default_transport(const llm::ProviderConfig& cfg) {
  if (cfg.base_url.empty() || cfg.base_url == "mock") {
    auto mock = std::make_shared<llm::MockTransport>();
    mock->set_atomizer(atomize::fallback_sentences);
    return mock;
  }
  return std::make_shared<llm::OpenAITransport>(cfg.base_url);
}

struct GenerateOptions {
  fs::path dataset;
  std::vector<llm::ProviderConfig> models;
  std::vector<PromptVariant> variants{PromptVariant::original};
  std::vector<std::size_t> sizes;       // empty: every size in the dataset
  std::vector<std::string> langs;       // empty: every language
  std::vector<Condition> conditions;    // empty: every condition
  fs::path out_dir;
  fs::path cache_dir;                   // empty: <out_dir>/cache
  std::int64_t budget = llm::kDefaultBudget;
  bool full_grid = false;
  std::size_t parallelism = 4;
  std::optional<llm::ProviderConfig> atomizer;  // LLM atomization of answers; fallback when absent
  TransportFactory transport_factory = default_transport;
};

struct GenerateSummary {
  std::size_t units_total = 0;
  std::size_t units_resumed = 0;
  std::size_t units_run = 0;
  std::size_t network_calls = 0;
};

struct WorkUnit {
  std::string id;
  const ContextWindow* window = nullptr;
  std::size_t model = 0;
  PromptVariant variant = PromptVariant::original;
  std::string prompt;
};

inline std::string unit_id(const ContextWindow& w, const std::string& model, PromptVariant v) {
  return hash_fields({w.topic, w.lang.tag(), std::to_string(w.sentences.size()), to_string(w.condition), model,
                      to_string(v)})
      .substr(0, 20);
}

inline fs::path generations_path(const fs::path& out_dir) { return out_dir / "generations.jsonl"; }

namespace detail {

inline bool selected(const std::vector<std::size_t>& sizes, std::size_t s) {
  return sizes.empty() || std::find(sizes.begin(), sizes.end(), s) != sizes.end();
}
inline bool selected(const std::vector<std::string>& langs, const std::string& l) {
  return langs.empty() || std::find(langs.begin(), langs.end(), l) != langs.end();
}
inline bool selected(const std::vector<Condition>& cs, Condition c) {
  return cs.empty() || std::find(cs.begin(), cs.end(), c) != cs.end();
}

inline std::string generate_config_hash(const GenerateOptions& opt, const std::string& dataset_version) {
  json cfg{{"dataset_version", dataset_version}};
  for (const auto& m : opt.models) cfg["models"].push_back(m);
  for (auto v : opt.variants) cfg["variants"].push_back(v);
  cfg["sizes"] = opt.sizes;
  cfg["langs"] = opt.langs;
  for (auto c : opt.conditions) cfg["conditions"].push_back(c);
  cfg["atomizer"] = opt.atomizer ? json(*opt.atomizer) : json("fallback");
  return sha256_hex(cfg.dump());
}

}  // namespace detail

/// One record per (window x model x variant). Resumes from the manifest in
/// `out_dir`; stops cleanly with BudgetExceeded once the request budget
/// cannot cover the next uncached unit. The sorted output file is always
/// rewritten from every completed unit.
inline GenerateSummary cmd_generate(const GenerateOptions& opt) {
  if (opt.models.empty()) fail(Errc::invalid_argument, "no models selected");
  if (opt.variants.empty()) fail(Errc::invalid_argument, "no prompt variants selected");
  if (opt.budget < 0) fail(Errc::invalid_argument, "budget must be non-negative");

  const auto dataset = load_dataset(opt.dataset);
  const auto version = dataset_version(opt.dataset);
  fs::create_directories(opt.out_dir);
  const auto cache_dir = opt.cache_dir.empty() ? opt.out_dir / "cache" : opt.cache_dir;
  auto cache = std::make_shared<llm::ResponseCache>(cache_dir);
  auto budget = std::make_shared<llm::RequestBudget>(opt.budget);

  std::vector<std::unique_ptr<llm::Generator>> gens;
  std::vector<json> providers;
  for (const auto& m : opt.models) {
    gens.push_back(std::make_unique<llm::Generator>(m, opt.transport_factory(m), cache, budget));
    providers.push_back({{"model", m.model}, {"base_url", m.base_url}, {"credential_env", m.credential_env}});
  }
  std::unique_ptr<llm::Generator> atomizer;
  if (opt.atomizer) atomizer = std::make_unique<llm::Generator>(*opt.atomizer, opt.transport_factory(*opt.atomizer), cache, budget);

  // Work units in a fixed order.
  std::vector<const ContextWindow*> windows;
  for (const auto& w : dataset.windows) {
    if (detail::selected(opt.sizes, w.sentences.size()) && detail::selected(opt.langs, w.lang.tag()) &&
        detail::selected(opt.conditions, w.condition)) {
      windows.push_back(&w);
    }
  }
  std::sort(windows.begin(), windows.end(), [](const ContextWindow* a, const ContextWindow* b) {
    return std::make_tuple(a->lang.tag(), a->topic, a->sentences.size(), a->condition) <
           std::make_tuple(b->lang.tag(), b->topic, b->sentences.size(), b->condition);
  });
  std::vector<WorkUnit> units;
  for (const auto* w : windows) {
    for (std::size_t m = 0; m < opt.models.size(); ++m) {
      for (auto v : opt.variants) {
        units.push_back({unit_id(*w, opt.models[m].model, v), w, m, v, prompts::render_prompt(v, w->topic, w->sentences)});
      }
    }
  }
  if (units.size() > kDeskScaleUnits && !opt.full_grid) {
    fail(Errc::invalid_argument, std::to_string(units.size()) + " work units exceed the desk-scale limit of " +
                                     std::to_string(kDeskScaleUnits) + "; pass --full-grid to run them");
  }

  const auto manifest_path = opt.out_dir / "manifest.json";
  const auto log_path = opt.out_dir / "generations.partial.jsonl";
  auto manifest = RunManifest::open(manifest_path, detail::generate_config_hash(opt, version), version, providers);
  auto done = recover_log<GenerationRecord>(log_path, jsonl::kind::generation_record, manifest.completed,
                                            [](const GenerationRecord& r) { return r.record_id; });
  // Units whose log line was lost are redone.
  for (auto it = manifest.completed.begin(); it != manifest.completed.end();) {
    it = done.count(*it) ? std::next(it) : manifest.completed.erase(it);
  }

  GenerateSummary summary;
  summary.units_total = units.size();
  summary.units_resumed = done.size();

  // Plan: reserve the budget in unit order so the set of units that run is
  // independent of thread timing.
  std::vector<const WorkUnit*> plan;
  std::int64_t planned_calls = 0;
  bool budget_exceeded = false;
  for (const auto& u : units) {
    if (manifest.completed.count(u.id)) continue;
    const auto& m = opt.models[u.model];
    std::int64_t cost = cache->get(llm::ResponseCache::key(m.model, m.effective_params(), u.prompt)) ? 0 : 1;
    if (atomizer) cost += 1;
    if (planned_calls + cost > opt.budget) {
      budget_exceeded = true;
      break;
    }
    planned_calls += cost;
    plan.push_back(&u);
  }

  jsonl::AppendLog log(log_path);
  std::mutex write_mu;
  std::vector<std::optional<Error>> errors(plan.size());
  std::atomic<std::size_t> next{0};

  auto run_unit = [&](const WorkUnit& u) {
    const auto& cfg = opt.models[u.model];
    GenerationRecord r;
    r.record_id = u.id;
    r.topic = u.window->topic;
    r.lang = u.window->lang;
    r.context_size = u.window->sentences.size();
    r.condition = u.window->condition;
    r.model_id = cfg.model;
    r.prompt_variant = u.variant;
    r.params = cfg.effective_params();
    r.raw_text = gens[u.model]->generate(u.prompt, r.params);
    if (is_cot(u.variant)) {
      auto cot = llm::parse_cot(r.raw_text);
      r.parse_failed = cot.parse_failed;
      r.answer_text = cot.answer;
    } else {
      r.answer_text = r.raw_text;
    }
    if (!text::is_blank(r.answer_text)) {
      auto atoms = atomizer ? atomize::atomize_llm(r.answer_text, r.lang, *atomizer)
                            : atomize::atomize_fallback(r.answer_text);
      r.response_sentences = atomize::to_atomic_sentences(atoms, r.lang, Origin::response, r.record_id);
    }
    std::lock_guard lock(write_mu);
    log.append(jsonl::encode(jsonl::kind::generation_record, r));
    manifest.completed.insert(r.record_id);
    manifest.save(manifest_path);
    done.insert_or_assign(r.record_id, std::move(r));
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < plan.size(); i = next++) {
      try {
        run_unit(*plan[i]);
      } catch (const Error& e) {
        errors[i] = Error(e.code(), "work unit " + plan[i]->id + ": " + e.message());
      } catch (const std::exception& e) {
        errors[i] = Error(Errc::upstream_failure, "work unit " + plan[i]->id + ": " + e.what());
      }
    }
  };
  const auto n_workers = std::max<std::size_t>(1, std::min(opt.parallelism, plan.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  summary.units_run = 0;
  for (const auto* u : plan) summary.units_run += done.count(u->id);
  for (const auto& g : gens) summary.network_calls += g->network_calls();
  if (atomizer) summary.network_calls += atomizer->network_calls();

  // Deterministic output: completed records in unit order.
  std::vector<std::string> lines;
  for (const auto& u : units) {
    if (auto it = done.find(u.id); it != done.end()) lines.push_back(jsonl::encode(jsonl::kind::generation_record, it->second));
  }
  jsonl::write_file(generations_path(opt.out_dir), lines);
  manifest.save(manifest_path);

  for (auto& e : errors) {
    if (e) throw *e;
  }
  if (budget_exceeded) {
    fail(Errc::budget_exceeded, "request budget of " + std::to_string(opt.budget) + " calls reached after " +
                                    std::to_string(done.size()) + " of " + std::to_string(units.size()) +
                                    " work units; rerun with a larger --budget to resume");
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvaluateOptions {
  fs::path records;
  fs::path dataset;
  fs::path out_dir;
  entail::ClassifierConfig classifier;
  metrics::SegmentationConfig segmentation;
};

struct EvaluateSummary {
  std::size_t records = 0;
  std::size_t resumed = 0;
  std::size_t evaluated = 0;
};

inline fs::path reports_path(const fs::path& out_dir) { return out_dir / "reports.jsonl"; }
inline fs::path aggregates_path(const fs::path& out_dir) { return out_dir / "aggregates.jsonl"; }

inline std::vector<std::string> encode_aggregates(const std::vector<metrics::AggregateRow>& rows) {
  std::vector<std::string> lines;
  for (const auto& r : rows) lines.push_back(jsonl::encode(jsonl::kind::aggregate_row, r));
  return lines;
}

inline EvaluationReport evaluate_record(const GenerationRecord& record, const ContextWindow& window,
                                        entail::EntailmentBackend& backend, const entail::ClassifierConfig& cfg,
                                        metrics::SegmentationConfig seg, entail::EntailmentCache* cache = nullptr) {
  auto judgments = entail::classify_response(record.response_sentences, window.sentences, backend, cfg, cache);
  return metrics::build_report(record, window, std::move(judgments), seg);
}

/// Per-record reports plus aggregate rows grouped by model, language, size,
/// condition and variant. Progress is persisted after every record.
inline EvaluateSummary cmd_evaluate(const EvaluateOptions& opt, entail::EntailmentBackend& backend) {
  opt.classifier.validate();
  const auto records = jsonl::read_all<GenerationRecord>(opt.records, jsonl::kind::generation_record);
  const auto dataset = load_dataset(opt.dataset);
  fs::create_directories(opt.out_dir);

  json cfg{{"records", sha256_hex(jsonl::read_text(opt.records))},
           {"dataset", dataset_version(opt.dataset)},
           {"backend", records.empty() ? std::string{} : backend.config_id()},
           {"threshold", opt.classifier.threshold},
           {"aggregator", entail::to_string(opt.classifier.aggregator)},
           {"band", {opt.classifier.band_lo, opt.classifier.band_hi}},
           {"premise_window", opt.classifier.premise_window},
           {"k", opt.segmentation.k}};
  const auto manifest_path = opt.out_dir / "evaluate.manifest.json";
  const auto log_path = opt.out_dir / "reports.partial.jsonl";
  const auto cache_path = opt.out_dir / "entail_cache.jsonl";
  auto manifest = RunManifest::open(manifest_path, sha256_hex(cfg.dump()), dataset_version(opt.dataset), {});
  auto done = recover_log<EvaluationReport>(log_path, jsonl::kind::evaluation_report, manifest.completed,
                                            [](const EvaluationReport& r) { return r.record_id; });

  entail::EntailmentCache cache;
  cache.load(cache_path.string());

  EvaluateSummary summary;
  summary.records = records.size();
  summary.resumed = done.size();
  jsonl::AppendLog log(log_path);
  for (const auto& rec : records) {
    if (done.count(rec.record_id)) continue;
    const auto* window = dataset.find_window(rec.topic, rec.lang, rec.context_size, rec.condition);
    if (!window) {
      fail(Errc::schema, "record " + rec.record_id + ": no " + std::string(to_string(rec.condition)) + " window of size " +
                             std::to_string(rec.context_size) + " for topic '" + rec.topic + "'");
    }
    EvaluationReport report;
    try {
      report = evaluate_record(rec, *window, backend, opt.classifier, opt.segmentation, &cache);
    } catch (const Error& e) {
      cache.save(cache_path.string());
      fail(e.code(), "record " + rec.record_id + ": " + e.message());
    }
    log.append(jsonl::encode(jsonl::kind::evaluation_report, report));
    manifest.completed.insert(rec.record_id);
    manifest.save(manifest_path);
    done.insert_or_assign(rec.record_id, std::move(report));
    ++summary.evaluated;
  }
  cache.save(cache_path.string());

  std::vector<EvaluationReport> ordered;
  std::vector<std::string> lines;
  for (const auto& rec : records) {
    const auto& r = done.at(rec.record_id);
    lines.push_back(jsonl::encode(jsonl::kind::evaluation_report, r));
    ordered.push_back(r);
  }
  jsonl::write_file(reports_path(opt.out_dir), lines);
  jsonl::write_file(aggregates_path(opt.out_dir), encode_aggregates(metrics::aggregate(ordered)));
  return summary;
}

}  // namespace ckpk::pipeline

// ckpk: command-line front end for dataset building, generation,
// evaluation and reporting.

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ckpk/ckpk.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ckpk;

struct Common {
  std::string providers;
  std::int64_t budget = llm::kDefaultBudget;
  std::string cache;
  std::string backend = "oracle";
  double threshold = entail::kDefaultThreshold;
  std::string aggregator = "mean_then_max";
  std::size_t k_segments = metrics::kDefaultSegments;
  std::string atomizer;
};

std::vector<llm::ProviderConfig> load_providers(const std::string& path) {
  if (path.empty()) return {};
  auto doc = json::parse(jsonl::read_text(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) fail(Errc::schema, path + ": expected a JSON array of provider configs");
  return doc.get<std::vector<llm::ProviderConfig>>();
}

// "mock:<name>" selects the offline mock; other names come from the providers file.
llm::ProviderConfig resolve_model(const std::string& spec, const std::vector<llm::ProviderConfig>& known) {
  if (spec.rfind("mock:", 0) == 0 && spec.size() > 5) {
    llm::ProviderConfig c;
    c.base_url = "mock";
    c.model = spec.substr(5);
    return c;
  }
  for (const auto& k : known) {
    if (k.model == spec) return k;
  }
  fail(Errc::invalid_argument, "unknown model '" + spec + "' (use mock:<name> or list it in --providers)");
}

std::vector<llm::ProviderConfig> resolve_models(const std::vector<std::string>& specs, const std::string& providers) {
  auto known = load_providers(providers);
  std::vector<llm::ProviderConfig> out;
  for (const auto& s : specs) out.push_back(resolve_model(s, known));
  return out;
}

std::unique_ptr<llm::Generator> make_generator(const llm::ProviderConfig& cfg, const Common& c,
                                               std::shared_ptr<llm::RequestBudget> budget) {
  auto cache = std::make_shared<llm::ResponseCache>(c.cache.empty() ? fs::path{} : fs::path(c.cache));
  return std::make_unique<llm::Generator>(cfg, pipeline::default_transport(cfg), cache, std::move(budget));
}

std::unique_ptr<entail::EntailmentBackend> make_backend(const std::string& spec) {
  if (spec == "oracle") return std::make_unique<entail::LexicalOracleBackend>();
  if (spec.rfind("remote:", 0) == 0 && spec.size() > 7) {
    entail::RemoteBackendConfig cfg;
    cfg.base_url = spec.substr(7);
    return std::make_unique<entail::RemoteBackend>(cfg);
  }
  fail(Errc::invalid_argument, "unknown backend '" + spec + "' (expected oracle or remote:<url>)");
}

entail::ClassifierConfig classifier(const Common& c) {
  entail::ClassifierConfig cfg;
  cfg.threshold = c.threshold;
  cfg.aggregator = entail::parse_aggregator(c.aggregator);
  cfg.validate();
  return cfg;
}

std::vector<Condition> parse_conditions(const std::vector<std::string>& names) {
  std::vector<Condition> out;
  for (const auto& n : names) {
    try {
      out.push_back(parse_condition(n));
    } catch (const Error&) {
      fail(Errc::invalid_argument, "unknown condition '" + n + "'");
    }
  }
  return out;
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual vs parametric knowledge measurement"};
  app.set_config("--config", "", "TOML/INI file mirroring the command-line flags");
  app.require_subcommand(1);
  Common c;

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "Atomize article files into topic pools and context windows");
  std::string articles, dataset_out;
  std::vector<std::size_t> sizes;
  std::vector<std::string> conditions;
  std::size_t condition_size = 20, shuffle_samples = 0;
  std::uint64_t seed = 0;
  build->add_option("--articles", articles, "Directory of <Topic>.<lang>.txt|.atoms files")->required();
  build->add_option("--out", dataset_out, "Output dataset JSONL")->required();
  build->add_option("--sizes", sizes, "Context window sizes")->delimiter(',');
  build->add_option("--conditions", conditions, "Extra condition windows")->delimiter(',');
  build->add_option("--condition-size", condition_size, "Size of condition windows");
  build->add_option("--shuffle-samples", shuffle_samples, "Number of shuffled windows to add");
  build->add_option("--seed", seed, "Seed for shuffle sampling");
  build->add_option("--atomizer", c.atomizer, "Model used for atomization (fallback splitter when unset)");
  build->add_option("--providers", c.providers, "JSON array of provider configs");
  build->add_option("--budget", c.budget, "Maximum uncached model calls");
  build->add_option("--cache", c.cache, "Response cache directory");

  // counterfactuals
  auto* cf = app.add_subcommand("counterfactuals", "Propose entity-swapped pools for human review");
  std::string dataset, review_dir, model;
  cf->add_option("--dataset", dataset)->required();
  cf->add_option("--models", model, "Model that proposes the swaps")->required();
  cf->add_option("--out", review_dir, "Review file directory")->required();
  cf->add_option("--providers", c.providers);
  cf->add_option("--budget", c.budget);
  cf->add_option("--cache", c.cache);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate responses for every work unit");
  std::vector<std::string> models, variants{"original"}, langs;
  std::string out_dir;
  bool full_grid = false;
  std::size_t parallel = 4;
  gen->add_option("--dataset", dataset)->required();
  gen->add_option("--models", models, "mock:<name> or provider model names")->delimiter(',')->required();
  gen->add_option("--variants", variants, "Prompt variants")->delimiter(',');
  gen->add_option("--sizes", sizes)->delimiter(',');
  gen->add_option("--lang", langs)->delimiter(',');
  gen->add_option("--conditions", conditions)->delimiter(',');
  gen->add_option("--budget", c.budget);
  gen->add_flag("--full-grid", full_grid, "Allow grids above the desk-scale limit");
  gen->add_option("--parallel", parallel, "Concurrent work units");
  gen->add_option("--atomizer", c.atomizer);
  gen->add_option("--providers", c.providers);
  gen->add_option("--cache", c.cache, "Response cache directory (default <out>/cache)");
  gen->add_option("--out", out_dir)->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Classify responses and compute per-record reports");
  std::string records;
  eval->add_option("--records", records, "generations.jsonl")->required();
  eval->add_option("--dataset", dataset)->required();
  eval->add_option("--backend", c.backend, "oracle or remote:<url>");
  eval->add_option("--threshold", c.threshold);
  eval->add_option("--aggregator", c.aggregator, "mean_then_max, max_then_max or forward_only");
  eval->add_option("--k-segments", c.k_segments);
  eval->add_option("--out", out_dir)->required();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Measure classifier error on synthetic CK/PK mixtures");
  std::size_t n_ck = datagen::kCalibrationCk, n_pk = datagen::kCalibrationPk;
  cal->add_option("--dataset", dataset)->required();
  cal->add_option("--backend", c.backend);
  cal->add_option("--threshold", c.threshold);
  cal->add_option("--aggregator", c.aggregator);
  cal->add_option("--n-ck", n_ck);
  cal->add_option("--n-pk", n_pk);
  cal->add_option("--lang", langs)->delimiter(',');
  cal->add_option("--out", out_dir)->required();

  // ablate
  auto* abl = app.add_subcommand("ablate", "Recompute reports without borderline judgments");
  std::string reports;
  double band_lo = entail::kBorderlineLo, band_hi = entail::kBorderlineHi;
  abl->add_option("--reports", reports)->required();
  abl->add_option("--band-lo", band_lo);
  abl->add_option("--band-hi", band_hi);
  abl->add_option("--k-segments", c.k_segments);
  abl->add_option("--out", out_dir)->required();

  // case-study
  auto* cs = app.add_subcommand("case-study", "Summarization comparison of base and CK prompts");
  std::string corpus;
  cs->add_option("--corpus", corpus)->required();
  cs->add_option("--models", model)->required();
  cs->add_option("--backend", c.backend);
  cs->add_option("--threshold", c.threshold);
  cs->add_option("--aggregator", c.aggregator);
  cs->add_option("--atomizer", c.atomizer);
  cs->add_option("--providers", c.providers);
  cs->add_option("--budget", c.budget);
  cs->add_option("--cache", c.cache);
  cs->add_option("--out", out_dir)->required();

  // report
  auto* rep = app.add_subcommand("report", "Emit CSV tables or plot data from aggregates");
  std::string aggregates, format = "csv";
  rep->add_option("--aggregates", aggregates)->required();
  rep->add_option("--format", format, "csv or json");
  rep->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? exit_code::ok : exit_code::usage;
  }

  try {
    auto budget = std::make_shared<llm::RequestBudget>(c.budget);
    std::unique_ptr<llm::Generator> atomizer;
    if (!c.atomizer.empty()) {
      atomizer = make_generator(resolve_models({c.atomizer}, c.providers).front(), c, budget);
    }

    if (*build) {
      pipeline::BuildDatasetOptions opt;
      opt.article_dir = articles;
      opt.out = dataset_out;
      if (!sizes.empty()) opt.sizes = sizes;
      opt.atomizer = atomizer.get();
      opt.conditions = parse_conditions(conditions);
      opt.condition_size = condition_size;
      opt.shuffle_samples = shuffle_samples;
      opt.seed = seed;
      auto s = pipeline::cmd_build_dataset(opt);
      print({{"topics", s.topics}, {"windows", s.windows}, {"context_sentences_per_lang", s.context_sentences_per_lang}});
    } else if (*cf) {
      auto g = make_generator(resolve_models({model}, c.providers).front(), c, budget);
      json written = json::array();
      for (const auto& p : pipeline::cmd_propose_counterfactuals(dataset, *g, review_dir)) written.push_back(p.string());
      print({{"review_files", written}});
    } else if (*gen) {
      pipeline::GenerateOptions opt;
      opt.dataset = dataset;
      opt.models = resolve_models(models, c.providers);
      opt.variants.clear();
      for (const auto& v : variants) opt.variants.push_back(prompts::variant_from_name(v));
      opt.sizes = sizes;
      opt.langs = langs;
      opt.conditions = parse_conditions(conditions);
      opt.out_dir = out_dir;
      opt.cache_dir = c.cache;
      opt.budget = c.budget;
      opt.full_grid = full_grid;
      opt.parallelism = parallel;
      if (!c.atomizer.empty()) opt.atomizer = resolve_models({c.atomizer}, c.providers).front();
      auto s = pipeline::cmd_generate(opt);
      print({{"units_total", s.units_total},
             {"units_resumed", s.units_resumed},
             {"units_run", s.units_run},
             {"network_calls", s.network_calls}});
    } else if (*eval) {
      auto backend = make_backend(c.backend);
      pipeline::EvaluateOptions opt;
      opt.records = records;
      opt.dataset = dataset;
      opt.out_dir = out_dir;
      opt.classifier = classifier(c);
      opt.segmentation.k = c.k_segments;
      auto s = pipeline::cmd_evaluate(opt, *backend);
      print({{"records", s.records}, {"resumed", s.resumed}, {"evaluated", s.evaluated}});
    } else if (*cal) {
      auto backend = make_backend(c.backend);
      pipeline::CalibrateOptions opt;
      opt.n_ck = n_ck;
      opt.n_pk = n_pk;
      opt.langs = langs;
      opt.classifier = classifier(c);
      print(pipeline::cmd_calibrate(dataset, *backend, opt, out_dir));
    } else if (*abl) {
      auto rows = pipeline::cmd_ablate(reports, band_lo, band_hi, out_dir, {c.k_segments});
      print({{"groups", rows.size()}, {"output", (fs::path(out_dir) / "ablation.jsonl").string()}});
    } else if (*cs) {
      auto g = make_generator(resolve_models({model}, c.providers).front(), c, budget);
      auto backend = make_backend(c.backend);
      pipeline::CaseStudyOptions opt;
      opt.corpus = corpus;
      opt.out_dir = out_dir;
      opt.classifier = classifier(c);
      opt.params = g->config().effective_params();
      opt.atomizer = atomizer.get();
      auto res = pipeline::cmd_case_study(opt, *g, *backend);
      json table = json::array();
      for (const auto& r : res.table) {
        table.push_back({{"metric", r.metric},
                         {"base", ckpk::detail::optional_to_json(r.base)},
                         {"ck_prompt", ckpk::detail::optional_to_json(r.ck_prompt)}});
      }
      print(table);
    } else if (*rep) {
      json written = json::array();
      for (const auto& p : pipeline::cmd_report(aggregates, pipeline::parse_report_format(format), out_dir)) {
        written.push_back(p.string());
      }
      print({{"files", written}});
    }
  } catch (const Error& e) {
    std::cerr << "ckpk: " << e.what() << '\n';
    return e.exit_code();
  } catch (const json::exception& e) {
    std::cerr << "ckpk: schema: " << e.what() << '\n';
    return exit_code::data;
  } catch (const std::exception& e) {
    std::cerr << "ckpk: " << e.what() << '\n';
    return exit_code::data;
  }
  return exit_code::ok;
}

#include <gtest/gtest.h>

#include <cstdlib>

#include "ckpk/analysis.hpp"
#include "ckpk/dataset.hpp"
#include "ckpk/runner.hpp"
#include "support.hpp"

using namespace ckpk;
using namespace ckpk::pipeline;
using test::TempDir;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::invalid_argument;
}

std::size_t line_count(const fs::path& p) {
  auto s = test::slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

llm::ProviderConfig mock_model(const std::string& name) {
  llm::ProviderConfig c;
  c.base_url = "mock";
  c.model = name;
  return c;
}

fs::path build_dataset(const TempDir& dir, std::size_t topics = 2, std::vector<std::size_t> sizes = {0, 5, 10}) {
  test::write_articles(dir / "articles", topics, 30);
  BuildDatasetOptions opt;
  opt.article_dir = dir / "articles";
  opt.out = dir / "dataset.jsonl";
  opt.sizes = std::move(sizes);
  cmd_build_dataset(opt);
  return opt.out;
}

GenerateOptions grid(const fs::path& dataset, const fs::path& out) {
  GenerateOptions g;
  g.dataset = dataset;
  g.models = {mock_model("m")};
  g.variants = {PromptVariant::original, PromptVariant::cot_ck};
  g.out_dir = out;
  return g;
}

/// Counts calls so tests can tell cached runs from live ones.
struct CountingFactory {
  std::shared_ptr<std::atomic<std::size_t>> calls = std::make_shared<std::atomic<std::size_t>>(0);
  TransportFactory make() {
    auto c = calls;
    return [c](const llm::ProviderConfig& cfg) -> std::shared_ptr<llm::ChatTransport> {
      struct Counting : llm::ChatTransport {
        std::shared_ptr<llm::ChatTransport> inner;
        std::shared_ptr<std::atomic<std::size_t>> n;
        std::string complete(const llm::ChatRequest& r) override {
          ++*n;
          return inner->complete(r);
        }
      };
      auto t = std::make_shared<Counting>();
      t->inner = default_transport(cfg);
      t->n = c;
      return t;
    };
  }
};

}  // namespace

TEST(BuildDataset, WindowsPerTopicAndSize) {
  TempDir dir;
  test::write_articles(dir / "articles", 2, 30);
  BuildDatasetOptions opt;
  opt.article_dir = dir / "articles";
  opt.out = dir / "d.jsonl";
  opt.sizes = {0, 10, 20};
  auto s = cmd_build_dataset(opt);
  EXPECT_EQ(s.topics, 2u);
  EXPECT_EQ(s.windows, 6u);
  EXPECT_EQ(s.context_sentences_per_lang.at("en"), 40u);
  auto d = load_dataset(opt.out);
  EXPECT_EQ(d.topics.size(), 2u);
  EXPECT_NE(d.find_window("Topic a", Lang::en(), 20, Condition::factual), nullptr);
  // Deterministic bytes.
  auto first = test::slurp(opt.out);
  cmd_build_dataset(opt);
  EXPECT_EQ(test::slurp(opt.out), first);
}

TEST(BuildDataset, PlainTextGoesThroughFallbackSplitter) {
  TempDir dir;
  test::write(dir / "a" / "Blue_Whale.en.txt", "Blue whales are large. They eat krill. They live in oceans.");
  BuildDatasetOptions opt;
  opt.article_dir = dir / "a";
  opt.out = dir / "d.jsonl";
  opt.sizes = {3};
  cmd_build_dataset(opt);
  auto d = load_dataset(opt.out);
  ASSERT_EQ(d.topics.size(), 1u);
  EXPECT_EQ(d.topics[0].topic, "Blue Whale");
  EXPECT_EQ(d.topics[0].atomic_pool.size(), 3u);
}

TEST(BuildDataset, BadInputs) {
  TempDir dir;
  test::write(dir / "a" / "NoLanguage.txt", "Text.");
  BuildDatasetOptions opt;
  opt.article_dir = dir / "a";
  opt.out = dir / "d.jsonl";
  EXPECT_EQ(code_of([&] { cmd_build_dataset(opt); }), Errc::io);
  opt.article_dir = dir / "missing";
  EXPECT_EQ(code_of([&] { cmd_build_dataset(opt); }), Errc::io);
  test::write(dir / "b" / "Bad.en.txt", std::string("\xff\xfe", 2));
  opt.article_dir = dir / "b";
  EXPECT_EQ(code_of([&] { cmd_build_dataset(opt); }), Errc::io);
  test::write(dir / "c" / "Small.en.atoms", "One.\nTwo.\n");
  opt.article_dir = dir / "c";
  opt.sizes = {10};
  EXPECT_EQ(code_of([&] { cmd_build_dataset(opt); }), Errc::insufficient_pool);
}

TEST(BuildDataset, ReviewedCounterfactualsEnableConditions) {
  TempDir dir;
  test::write_articles(dir / "a", 1, 30);
  BuildDatasetOptions opt;
  opt.article_dir = dir / "a";
  opt.out = dir / "d.jsonl";
  opt.sizes = {10};
  cmd_build_dataset(opt);
  auto t = load_dataset(opt.out).topics.front();
  opt.conditions = {Condition::true_first};
  EXPECT_EQ(code_of([&] { cmd_build_dataset(opt); }), Errc::missing_counterfactuals);

  auto cf = test::synthetic_topic("x", Lang::en(), 30, 5).counterfactual_pool;
  t.counterfactual_pool = cf;
  t.counterfactuals_verified = true;
  test::write(review_path(dir / "a", t), json(t).dump());
  auto s = cmd_build_dataset(opt);
  EXPECT_EQ(s.windows, 2u);
  auto w = load_dataset(opt.out).windows.back();
  EXPECT_EQ(w.condition, Condition::true_first);
  EXPECT_EQ(w.sentences.size(), 20u);

  t.atomic_pool[0] = "Edited after review.";
  test::write(review_path(dir / "a", t), json(t).dump());
  EXPECT_EQ(code_of([&] { cmd_build_dataset(opt); }), Errc::schema);
}

TEST(BuildDataset, ShuffleSamplesAreAdded) {
  TempDir dir;
  test::write_articles(dir / "a", 2, 30);
  BuildDatasetOptions opt;
  opt.article_dir = dir / "a";
  opt.out = dir / "d.jsonl";
  opt.sizes = {0, 10, 20};
  opt.shuffle_samples = 2;
  opt.seed = 3;
  EXPECT_EQ(cmd_build_dataset(opt).windows, 8u);
  auto d = load_dataset(opt.out);
  EXPECT_EQ(std::count_if(d.windows.begin(), d.windows.end(), [](const ContextWindow& w) { return w.condition == Condition::shuffled; }), 2);
}

TEST(Generate, GridAndRerunFromCache) {
  TempDir dir;
  auto ds = build_dataset(dir);
  CountingFactory counter;
  auto opt = grid(ds, dir / "run1");
  opt.transport_factory = counter.make();
  auto s = cmd_generate(opt);
  EXPECT_EQ(s.units_total, 12u);
  EXPECT_EQ(s.units_run, 12u);
  EXPECT_EQ(counter.calls->load(), 12u);
  EXPECT_EQ(line_count(generations_path(opt.out_dir)), 12u);

  auto records = jsonl::read_all<GenerationRecord>(generations_path(opt.out_dir), jsonl::kind::generation_record);
  for (const auto& r : records) {
    EXPECT_FALSE(r.parse_failed);
    if (r.context_size > 0) EXPECT_FALSE(r.response_sentences.empty());
  }

  // Same out dir: everything is already complete.
  auto again = cmd_generate(opt);
  EXPECT_EQ(again.units_resumed, 12u);
  EXPECT_EQ(again.network_calls, 0u);

  // Fresh out dir sharing the cache: no network traffic and identical bytes.
  auto opt2 = grid(ds, dir / "run2");
  opt2.cache_dir = opt.out_dir / "cache";
  opt2.transport_factory = counter.make();
  auto s2 = cmd_generate(opt2);
  EXPECT_EQ(s2.network_calls, 0u);
  EXPECT_EQ(counter.calls->load(), 12u);
  EXPECT_EQ(test::slurp(generations_path(opt2.out_dir)), test::slurp(generations_path(opt.out_dir)));
}

TEST(Generate, BudgetStopsCleanlyAndResumes) {
  TempDir dir;
  auto ds = build_dataset(dir);
  auto full = grid(ds, dir / "full");
  cmd_generate(full);

  auto opt = grid(ds, dir / "limited");
  opt.budget = 3;
  EXPECT_EQ(code_of([&] { cmd_generate(opt); }), Errc::budget_exceeded);
  EXPECT_EQ(line_count(generations_path(opt.out_dir)), 3u);

  opt.budget = 100;
  auto s = cmd_generate(opt);
  EXPECT_EQ(s.units_resumed, 3u);
  EXPECT_EQ(s.units_run, 9u);
  EXPECT_EQ(test::slurp(generations_path(opt.out_dir)), test::slurp(generations_path(full.out_dir)));
}

TEST(Generate, ResumeAfterTornOrLostLog) {
  TempDir dir;
  auto ds = build_dataset(dir);
  auto full = grid(ds, dir / "full");
  cmd_generate(full);
  const auto golden = test::slurp(generations_path(full.out_dir));

  for (int variant = 0; variant < 2; ++variant) {
    auto opt = grid(ds, dir / ("killed" + std::to_string(variant)));
    opt.budget = 5;
    opt.parallelism = 1;
    EXPECT_THROW(cmd_generate(opt), Error);
    auto log = opt.out_dir / "generations.partial.jsonl";
    auto content = test::slurp(log);
    if (variant == 0) {
      content += content.substr(0, 40);  // torn tail from a crash mid-write
    } else {
      content.pop_back();
      content.erase(content.rfind('\n') + 1);  // last completed line lost
    }
    test::write(log, content);
    fs::remove(generations_path(opt.out_dir));
    opt.budget = 100;
    auto s = cmd_generate(opt);
    EXPECT_EQ(s.units_resumed, variant == 0 ? 5u : 4u);
    EXPECT_EQ(test::slurp(generations_path(opt.out_dir)), golden);
  }
}

TEST(Generate, ConfigChangeIsRejected) {
  TempDir dir;
  auto ds = build_dataset(dir);
  auto opt = grid(ds, dir / "run");
  cmd_generate(opt);
  opt.variants = {PromptVariant::strict};
  EXPECT_EQ(code_of([&] { cmd_generate(opt); }), Errc::invalid_argument);
}

TEST(Generate, DeskScaleLimit) {
  TempDir dir;
  auto ds = build_dataset(dir, 2, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26});
  auto opt = grid(ds, dir / "run");
  opt.models = {mock_model("a"), mock_model("b"), mock_model("c"), mock_model("d"), mock_model("e")};
  EXPECT_EQ(code_of([&] { cmd_generate(opt); }), Errc::invalid_argument);
  EXPECT_FALSE(fs::exists(opt.out_dir / "manifest.json"));
}

TEST(Generate, ManifestStoresCredentialNameOnly) {
  TempDir dir;
  auto ds = build_dataset(dir, 1, {5});
  ::setenv("CKPK_TEST_KEY", "sk-secret-value", 1);
  auto opt = grid(ds, dir / "run");
  opt.models[0].credential_env = "CKPK_TEST_KEY";
  cmd_generate(opt);
  auto manifest = test::slurp(opt.out_dir / "manifest.json");
  EXPECT_NE(manifest.find("CKPK_TEST_KEY"), std::string::npos);
  for (const auto& entry : fs::recursive_directory_iterator(opt.out_dir)) {
    if (entry.is_regular_file()) EXPECT_EQ(test::slurp(entry.path()).find("sk-secret-value"), std::string::npos);
  }
  ::unsetenv("CKPK_TEST_KEY");
}

TEST(Evaluate, ReportsAreDeterministicAndResumable) {
  TempDir dir;
  auto ds = build_dataset(dir);
  auto g = grid(ds, dir / "gen");
  cmd_generate(g);
  entail::LexicalOracleBackend oracle;
  EvaluateOptions e{generations_path(g.out_dir), ds, dir / "eval1", {}, {}};
  auto s = cmd_evaluate(e, oracle);
  EXPECT_EQ(s.records, 12u);
  EXPECT_EQ(s.evaluated, 12u);
  auto reports = jsonl::read_all<EvaluationReport>(reports_path(e.out_dir), jsonl::kind::evaluation_report);
  ASSERT_EQ(reports.size(), 12u);
  for (const auto& r : reports) {
    if (r.ck_score) EXPECT_DOUBLE_EQ(*r.ck_score + *r.pk_score, 100.0);
    EXPECT_EQ(r.context_recall.size(), r.context_size >= 4 ? 4u : 0u);
  }
  EXPECT_GT(line_count(aggregates_path(e.out_dir)), 0u);

  auto e2 = e;
  e2.out_dir = dir / "eval2";
  cmd_evaluate(e2, oracle);
  EXPECT_EQ(test::slurp(reports_path(e2.out_dir)), test::slurp(reports_path(e.out_dir)));
  EXPECT_EQ(test::slurp(aggregates_path(e2.out_dir)), test::slurp(aggregates_path(e.out_dir)));

  const auto golden = test::slurp(reports_path(e.out_dir));
  fs::remove(reports_path(e.out_dir));
  auto resumed = cmd_evaluate(e, oracle);
  EXPECT_EQ(resumed.resumed, 12u);
  EXPECT_EQ(resumed.evaluated, 0u);
  EXPECT_EQ(test::slurp(reports_path(e.out_dir)), golden);

  e.classifier.threshold = 0.5;
  EXPECT_EQ(code_of([&] { cmd_evaluate(e, oracle); }), Errc::invalid_argument);
}

TEST(Evaluate, EmptyStream) {
  TempDir dir;
  auto ds = build_dataset(dir);
  test::write(dir / "empty.jsonl", "");
  entail::LexicalOracleBackend oracle;
  auto s = cmd_evaluate({dir / "empty.jsonl", ds, dir / "out", {}, {}}, oracle);
  EXPECT_EQ(s.records, 0u);
  EXPECT_EQ(test::slurp(reports_path(dir / "out")), "");
}

TEST(Evaluate, RecordWithoutWindowIsSchemaError) {
  TempDir dir;
  auto ds = build_dataset(dir);
  auto g = grid(ds, dir / "gen");
  cmd_generate(g);
  auto other = build_dataset(dir, 2, {3});
  (void)other;
  entail::LexicalOracleBackend oracle;
  EXPECT_EQ(code_of([&] { cmd_evaluate({generations_path(g.out_dir), dir / "dataset.jsonl", dir / "out", {}, {}}, oracle); }),
            Errc::schema);
}

TEST(Calibrate, SyntheticFixturesRecoverTwoThirds) {
  Dataset d;
  for (std::size_t i = 0; i < 20; ++i) d.topics.push_back(test::synthetic_topic(test::topic_name(i), Lang::en(), 25, i));
  for (std::size_t i = 0; i < 20; ++i) d.topics.push_back(test::synthetic_topic(test::topic_name(i), Lang::es(), 25, 50 + i));
  entail::LexicalOracleBackend oracle;
  auto out = calibrate(d, oracle, {});
  ASSERT_EQ(out.size(), 2u);
  for (const auto& s : out) {
    EXPECT_EQ(s.fixtures, 20u);
    EXPECT_NEAR(s.mean_ck, 66.67, 0.01);
    EXPECT_DOUBLE_EQ(s.std_ck, 0.0);
    EXPECT_EQ(s.mislabeled, 0u);
    EXPECT_EQ(s.labels, 300u);
  }
  CalibrateOptions only_es;
  only_es.langs = {"es"};
  EXPECT_EQ(calibrate(d, oracle, only_es).size(), 1u);
}

TEST(Calibrate, NeedsTwoTopicsPerLanguage) {
  Dataset d;
  d.topics.push_back(test::synthetic_topic("Lonely", Lang::da(), 25, 1));
  entail::LexicalOracleBackend oracle;
  EXPECT_EQ(code_of([&] { calibrate(d, oracle, {}); }), Errc::insufficient_pool);
}

TEST(Ablate, BorderlineJudgmentsRemoved) {
  EvaluationReport r;
  r.record_id = "r";
  r.model_id = "m";
  r.context_size = 4;
  const double scores[] = {0.1, 0.5, 0.75, 0.85, 0.95};
  for (std::size_t i = 0; i < 5; ++i) {
    EntailmentJudgment j;
    j.response_sentence_id = "s" + std::to_string(i);
    j.combined = scores[i];
    j.label = scores[i] > 0.7 ? Label::CK : Label::PK;
    j.borderline = scores[i] >= 0.4 && scores[i] <= 0.8;
    j.best_context_index = i % 4;
    r.judgments.push_back(j);
  }
  ContextWindow w;
  w.size = 4;
  for (std::size_t i = 0; i < 4; ++i) w.sentences.push_back(make_sentence("c", "Fact " + std::to_string(i) + ".", Lang::en(), Origin::context, i));
  r.ck_score = metrics::compute_ck_score(r.judgments);
  r.pk_score = 100 - *r.ck_score;
  r.context_recall = metrics::compute_context_recall(r.judgments, w);
  r.pk_quartiles = metrics::compute_pk_quartiles(r.judgments);
  EXPECT_DOUBLE_EQ(*r.ck_score, 60.0);

  auto after = ablate_report(r);
  EXPECT_EQ(after.judgments.size(), 3u);
  EXPECT_NEAR(*after.ck_score, 66.67, 0.005);
  EXPECT_EQ(after.context_recall, (std::vector<double>{1.0, 0.0, 0.0, 1.0}));

  auto rows = ablate({r});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].removed, 2u);
  EXPECT_NEAR(*rows[0].delta_ck, 20.0 / 3.0, 1e-9);
  EXPECT_EQ(code_of([&] { ablate({r}, 0.9, 0.1); }), Errc::invalid_argument);

  TempDir dir;
  jsonl::write_file(dir / "reports.jsonl", {jsonl::encode(jsonl::kind::evaluation_report, r)});
  cmd_ablate(dir / "reports.jsonl", 0.4, 0.8, dir / "out", {});
  EXPECT_EQ(line_count(dir / "out" / "ablation.jsonl"), 1u);
}

TEST(CaseStudy, IdenticalSummaryScoresPerfectly) {
  TempDir dir;
  const std::string gold = "The team approved the budget. The launch moves to May.";
  test::write(dir / "corpus.jsonl",
              json{{"id", "q1"}, {"corpus", "qmsum"}, {"query", "What was decided?"},
                   {"documents", {"The team approved the budget.", "The launch moves to May."}}, {"gold_summary", gold}}
                      .dump() + "\n");
  test::ScriptedGenerator gen({gold, gold});
  entail::LexicalOracleBackend oracle;
  CaseStudyOptions opt;
  opt.corpus = dir / "corpus.jsonl";
  opt.out_dir = dir / "out";
  auto res = cmd_case_study(opt, gen, oracle);
  ASSERT_EQ(res.scores.size(), 2u);
  for (const auto& s : res.scores) {
    EXPECT_DOUBLE_EQ(s.rouge_l, 1.0);
    EXPECT_DOUBLE_EQ(*s.nli_gold, 100.0);
    EXPECT_DOUBLE_EQ(*s.ck_score, 100.0);
  }
  ASSERT_EQ(res.table.size(), 3u);
  EXPECT_EQ(res.table[0].metric, "ROUGE-L");
  EXPECT_EQ(res.table[1].metric, "NLI-Gold");
  EXPECT_EQ(res.table[2].metric, "CK Score");
  EXPECT_EQ(gen.prompts.size(), 2u);
  EXPECT_NE(gen.prompts[1], gen.prompts[0]);
  auto csv = test::slurp(dir / "out" / "case_study.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,base,ck_prompt");
  EXPECT_EQ(line_count(dir / "out" / "case_study.csv"), 4u);
}

TEST(CaseStudy, CorpusFormatErrors) {
  const json good{{"id", "d1"}, {"corpus", "divsum"}, {"topic", "Cats"}, {"documents", {"Cats purr."}}, {"gold_summary", "Cats purr."}};
  EXPECT_NO_THROW(parse_corpus_item(good, "x"));
  auto broken = [&](const std::function<void(json&)>& edit) {
    auto j = good;
    edit(j);
    return code_of([&] { parse_corpus_item(j, "x"); });
  };
  EXPECT_EQ(broken([](json& j) { j["extra"] = 1; }), Errc::corpus_format);
  EXPECT_EQ(broken([](json& j) { j.erase("documents"); }), Errc::corpus_format);
  EXPECT_EQ(broken([](json& j) { j["documents"] = json::array(); }), Errc::corpus_format);
  EXPECT_EQ(broken([](json& j) { j["corpus"] = "cnn"; }), Errc::corpus_format);
  EXPECT_EQ(broken([](json& j) { j["gold_summary"] = "  "; }), Errc::corpus_format);
  EXPECT_EQ(broken([](json& j) { j.erase("topic"); }), Errc::corpus_format);

  TempDir dir;
  test::write(dir / "dup.jsonl", good.dump() + "\n" + good.dump() + "\n");
  EXPECT_EQ(code_of([&] { read_corpus(dir / "dup.jsonl"); }), Errc::corpus_format);
  test::write(dir / "bad.jsonl", "{not json\n");
  EXPECT_EQ(code_of([&] { read_corpus(dir / "bad.jsonl"); }), Errc::corpus_format);
}

TEST(Report, CsvAndPlotData) {
  TempDir dir;
  metrics::AggregateRow row;
  row.model_id = "m";
  row.lang = "en";
  row.context_size = 10;
  row.condition = "factual";
  row.prompt_variant = "original";
  row.mean_ck = 55.0;
  row.std_ck = 5.0;
  row.mean_cr = {0.4, 0.3, 0.2, 0.1};
  row.mean_pk_quartiles = Quartiles{0.1, 0.2, 0.3, 0.4};
  row.n_samples = 3;
  jsonl::write_file(dir / "agg.jsonl", encode_aggregates({row}));

  auto files = cmd_report(dir / "agg.jsonl", ReportFormat::csv, dir / "csv");
  EXPECT_EQ(files.size(), 3u);
  EXPECT_EQ(line_count(dir / "csv" / "aggregates.csv"), 2u);
  auto header = test::slurp(dir / "csv" / "aggregates.csv");
  header = header.substr(0, header.find('\n'));
  EXPECT_NE(header.find("cr_4"), std::string::npos);
  EXPECT_NE(header.find("pk_q4"), std::string::npos);

  cmd_report(dir / "agg.jsonl", ReportFormat::json, dir / "json");
  auto plot = json::parse(test::slurp(dir / "json" / "plot_data.json"));
  EXPECT_EQ(plot["context_recall"]["series"][0]["x"], json({1, 2, 3, 4}));
  EXPECT_EQ(plot["ck_vs_size"]["series"][0]["x"], json({10}));
  EXPECT_EQ(plot["pk_quartiles"]["series"][0]["y"], json({0.1, 0.2, 0.3, 0.4}));

  EXPECT_EQ(code_of([] { parse_report_format("xml"); }), Errc::invalid_argument);
}

#ifdef CKPK_CLI
namespace {
int run_cli(const std::string& args) {
  auto cmd = std::string(CKPK_CLI) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
  TempDir dir;
  auto ds = build_dataset(dir);
  const auto d = dir.path().string();
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("generate"), 1);
  EXPECT_EQ(run_cli("report --aggregates " + d + "/none.jsonl --format xml --out " + d + "/r"), 1);
  EXPECT_EQ(run_cli("evaluate --records " + d + "/none.jsonl --dataset " + ds.string() + " --out " + d + "/e"), 2);
  EXPECT_EQ(run_cli("generate --dataset " + ds.string() + " --models mock:m --budget 2 --out " + d + "/g"), 3);
  EXPECT_EQ(run_cli("generate --dataset " + ds.string() + " --models mock:m --out " + d + "/g"), 0);
  EXPECT_EQ(run_cli("evaluate --records " + d + "/g/generations.jsonl --dataset " + ds.string() + " --out " + d + "/e"), 0);
  EXPECT_EQ(run_cli("report --aggregates " + d + "/e/aggregates.jsonl --format csv --out " + d + "/r"), 0);
  EXPECT_EQ(run_cli("generate --dataset " + ds.string() + " --models mock:m --variants nonsense --out " + d + "/x"), 1);
  EXPECT_EQ(run_cli("generate --dataset " + ds.string() + " --models mock:m --conditions sideways --out " + d + "/x"), 1);
}
#endif

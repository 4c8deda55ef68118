#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "httplib.h"

#include "ckpk/metrics.hpp"
#include "ckpk/openai_client.hpp"
#include "ckpk/remote_backend.hpp"
#include "support.hpp"

using namespace ckpk;

namespace {

/// An httplib server on an ephemeral port, stopped on destruction.
class FakeServer {
 public:
  FakeServer() = default;
  ~FakeServer() { stop(); }

  httplib::Server& server() { return server_; }

  std::string start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return "http://127.0.0.1:" + std::to_string(port_);
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

/// Sidecar stand-in that answers with the lexical oracle.
void install_sidecar(httplib::Server& s, std::atomic<int>& posts, std::vector<json>* bodies = nullptr) {
  s.Post("/v1/entail", [&posts, bodies](const httplib::Request& req, httplib::Response& res) {
    ++posts;
    auto in = json::parse(req.body);
    if (bodies) bodies->push_back(in);
    json results = json::array();
    for (const auto& p : in["pairs"]) {
      double e = entail::lexical_oracle(p["premise"].get<std::string>(), p["hypothesis"].get<std::string>());
      results.push_back({{"entailment", e}, {"neutral", (1 - e) / 2}, {"contradiction", (1 - e) / 2}});
    }
    res.set_content(json{{"results", results}}.dump(), "application/json");
  });
  s.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok","model_id":"fake-nli","revision":"abc123"})", "application/json");
  });
}

entail::RemoteBackendConfig fast(const std::string& url) {
  entail::RemoteBackendConfig c;
  c.base_url = url;
  c.backoff_base = std::chrono::milliseconds(1);
  c.timeout = std::chrono::seconds(5);
  return c;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::invalid_argument;
}

}  // namespace

TEST(EntailResponse, SimplexAndCountChecks) {
  EXPECT_EQ(entail::parse_entail_response(R"({"results":[{"entailment":0.7,"neutral":0.2,"contradiction":0.1}]})", 1),
            (std::vector<double>{0.7}));
  EXPECT_THROW(entail::parse_entail_response(R"({"results":[{"entailment":0.7,"neutral":0.2,"contradiction":0.2}]})", 1), Error);
  EXPECT_THROW(entail::parse_entail_response(R"({"results":[{"entailment":0.7,"neutral":0.3}]})", 1), Error);
  EXPECT_THROW(entail::parse_entail_response(R"({"results":[{"entailment":1.2,"neutral":-0.2,"contradiction":0}]})", 1), Error);
  EXPECT_THROW(entail::parse_entail_response(R"({"results":[]})", 1), Error);
  EXPECT_THROW(entail::parse_entail_response("not json", 1), Error);
}

TEST(EntailRequest, Shape) {
  std::vector<entail::TextPair> pairs{{"p1", "h1"}, {"p2", "h2"}};
  auto j = json::parse(entail::build_entail_request(pairs, Lang::da()));
  EXPECT_EQ(j["lang"], "da");
  EXPECT_EQ(j["pairs"][1]["premise"], "p2");
  EXPECT_EQ(j["pairs"][1]["hypothesis"], "h2");
}

TEST(RemoteBackend, MatchesOracleThroughSidecar) {
  FakeServer fake;
  std::atomic<int> posts{0};
  std::vector<json> bodies;
  install_sidecar(fake.server(), posts, &bodies);
  auto url = fake.start();
  auto cfg = fast(url);
  cfg.max_batch = 5;
  entail::RemoteBackend remote(cfg);
  entail::LexicalOracleBackend oracle;

  auto src = test::synthetic_topic("Harbor Town", Lang::en(), 12, 4);
  std::vector<AtomicSentence> ctx, resp;
  for (std::size_t i = 0; i < 8; ++i) ctx.push_back(make_sentence("c", src.atomic_pool[i], Lang::en(), Origin::context, i));
  for (std::size_t i = 0; i < 4; ++i) resp.push_back(make_sentence("r", src.atomic_pool[i * 3], Lang::en(), Origin::response, i));

  auto via_sidecar = entail::classify_response(resp, ctx, remote, {});
  auto local = entail::classify_response(resp, ctx, oracle, {});
  EXPECT_EQ(via_sidecar, local);
  EXPECT_GT(posts.load(), 1);
  for (const auto& b : bodies) {
    EXPECT_LE(b["pairs"].size(), 5u);
    EXPECT_EQ(b["lang"], "en");
  }
  EXPECT_EQ(remote.config_id(), "remote:" + url + "|fake-nli@abc123");
}

TEST(RemoteBackend, PreservesOrder) {
  FakeServer fake;
  std::atomic<int> posts{0};
  install_sidecar(fake.server(), posts);
  entail::RemoteBackend remote(fast(fake.start()));
  std::vector<entail::TextPair> pairs{{"a b", "a b"}, {"a b", "c d"}, {"a b", "a c"}};
  EXPECT_EQ(remote.score_batch(pairs, Lang::en()), (std::vector<double>{1.0, 0.0, 0.5}));
}

TEST(RemoteBackend, StatusCodes) {
  FakeServer fake;
  std::atomic<int> hits{0};
  std::atomic<int> status{400};
  fake.server().Post("/v1/entail", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = status.load();
    res.set_content(R"({"error":"nope"})", "application/json");
  });
  entail::RemoteBackend remote(fast(fake.start()));
  std::vector<entail::TextPair> pairs{{"a", "b"}};

  EXPECT_EQ(code_of([&] { remote.score_batch(pairs, Lang::en()); }), Errc::malformed_model_output);
  EXPECT_EQ(hits.load(), 1);
  status = 413;
  EXPECT_EQ(code_of([&] { remote.score_batch(pairs, Lang::en()); }), Errc::malformed_model_output);
  EXPECT_EQ(hits.load(), 2);
  status = 503;
  EXPECT_EQ(code_of([&] { remote.score_batch(pairs, Lang::en()); }), Errc::upstream_failure);
  EXPECT_EQ(hits.load(), 5);  // retried up to max_attempts
}

TEST(RemoteBackend, RecoversFromTransientUnavailability) {
  FakeServer fake;
  std::atomic<int> posts{0};
  std::atomic<int> failures{1};
  fake.server().Post("/v1/entail", [&](const httplib::Request&, httplib::Response& res) {
    if (failures-- > 0) {
      res.status = 503;
      return;
    }
    ++posts;
    res.set_content(R"({"results":[{"entailment":0.9,"neutral":0.05,"contradiction":0.05}]})", "application/json");
  });
  entail::RemoteBackend remote(fast(fake.start()));
  std::vector<entail::TextPair> pairs{{"a", "b"}};
  EXPECT_EQ(remote.score_batch(pairs, Lang::en()), (std::vector<double>{0.9}));
}

TEST(RemoteBackend, Unreachable) {
  entail::RemoteBackend remote(fast("http://127.0.0.1:1"));
  std::vector<entail::TextPair> pairs{{"a", "b"}};
  EXPECT_EQ(code_of([&] { remote.score_batch(pairs, Lang::en()); }), Errc::upstream_failure);
  EXPECT_EQ(code_of([&] { (void)remote.config_id(); }), Errc::upstream_failure);
}

TEST(OpenAI, SplitBaseUrl) {
  EXPECT_EQ(llm::split_base_url("https://api.example.com/v1/"), (std::pair<std::string, std::string>{"https://api.example.com", "/v1"}));
  EXPECT_EQ(llm::split_base_url("http://localhost:8000"), (std::pair<std::string, std::string>{"http://localhost:8000", ""}));
}

TEST(OpenAI, RequestShapeAndBearer) {
  FakeServer fake;
  json seen;
  std::string auth;
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Hello there."}}]})", "application/json");
  });
  llm::OpenAITransport t(fake.start() + "/v1");
  llm::ChatRequest req{"model-x", "Say hi", GenerationParams{}, "k-123"};
  EXPECT_EQ(t.complete(req), "Hello there.");
  EXPECT_EQ(auth, "Bearer k-123");
  EXPECT_EQ(seen["model"], "model-x");
  EXPECT_EQ(seen["messages"][0]["role"], "user");
  EXPECT_EQ(seen["messages"][0]["content"], "Say hi");
  for (const char* k : {"temperature", "top_p", "presence_penalty", "frequency_penalty", "max_tokens"}) {
    EXPECT_TRUE(seen.contains(k)) << k;
  }
  EXPECT_EQ(seen["max_tokens"], GenerationParams{}.max_tokens);

  req.api_key.clear();
  t.complete(req);
  EXPECT_EQ(auth, "");
}

TEST(OpenAI, StatusMapping) {
  FakeServer fake;
  std::atomic<int> status{401};
  fake.server().Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.status = status.load();
    res.set_content("{}", "application/json");
  });
  llm::OpenAITransport t(fake.start());
  llm::ChatRequest req{"m", "p", GenerationParams{}, ""};
  EXPECT_EQ(code_of([&] { t.complete(req); }), Errc::auth_error);
  status = 429;
  EXPECT_EQ(code_of([&] { t.complete(req); }), Errc::rate_limited);
  status = 502;
  EXPECT_EQ(code_of([&] { t.complete(req); }), Errc::upstream_failure);
  status = 400;
  EXPECT_EQ(code_of([&] { t.complete(req); }), Errc::malformed_model_output);
  status = 200;
  EXPECT_EQ(code_of([&] { t.complete(req); }), Errc::upstream_failure);  // body lacks choices
}

TEST(OpenAI, GeneratorRetriesRateLimitsAndReadsCredentialFromEnv) {
  FakeServer fake;
  std::atomic<int> hits{0};
  std::string auth;
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 429;
      return;
    }
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
  });
  llm::ProviderConfig cfg;
  cfg.base_url = fake.start() + "/v1";
  cfg.model = "m";
  cfg.credential_env = "CKPK_HTTP_TEST_KEY";
  cfg.retry.backoff_base = std::chrono::milliseconds(1);
  ::setenv("CKPK_HTTP_TEST_KEY", "secret-xyz", 1);
  llm::Generator g(cfg, std::make_shared<llm::OpenAITransport>(cfg.base_url), std::make_shared<llm::ResponseCache>(),
                   std::make_shared<llm::RequestBudget>(5));
  EXPECT_EQ(g.generate("prompt", cfg.params), "ok");
  EXPECT_EQ(hits.load(), 2);
  EXPECT_EQ(auth, "Bearer secret-xyz");
  ::unsetenv("CKPK_HTTP_TEST_KEY");
}

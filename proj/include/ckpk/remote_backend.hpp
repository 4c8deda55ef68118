#pragma once

// Client for the NLI sidecar's HTTP protocol:
//   POST /v1/entail  {"pairs":[{"premise","hypothesis"}], "lang"}
//     -> {"results":[{"entailment","neutral","contradiction"}]}
//   GET  /v1/health  -> {"status","model_id","revision"}

#include <chrono>
#include <cmath>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"

#include "ckpk/entail.hpp"
#include "ckpk/json_util.hpp"

namespace ckpk::entail {

inline constexpr double kSimplexTolerance = 1e-6;

struct RemoteBackendConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::size_t max_batch = 64;
  std::size_t max_in_flight = 2;
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{200};
  std::chrono::seconds timeout{60};
};

/// Parses a /v1/entail response body into entailment probabilities,
/// enforcing result count and the per-result simplex invariant.
inline std::vector<double> parse_entail_response(const std::string& body, std::size_t expected) {
  auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("results") || !doc["results"].is_array()) {
    fail(Errc::upstream_failure, "entail response is not an object with a results array");
  }
  const auto& results = doc["results"];
  if (results.size() != expected) {
    fail(Errc::upstream_failure, "entail response has " + std::to_string(results.size()) + " results for " +
                                     std::to_string(expected) + " pairs");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& r : results) {
    double sum = 0.0;
    double entailment = 0.0;
    for (const char* k : {"entailment", "neutral", "contradiction"}) {
      if (!r.contains(k) || !r[k].is_number()) fail(Errc::upstream_failure, std::string("entail result lacks ") + k);
      double v = r[k].get<double>();
      if (!(v >= 0.0 && v <= 1.0)) fail(Errc::upstream_failure, std::string("entail probability out of range: ") + k);
      sum += v;
      if (std::string_view(k) == "entailment") entailment = v;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
      fail(Errc::upstream_failure, "entail probabilities do not sum to 1");
    }
    out.push_back(entailment);
  }
  return out;
}

inline std::string build_entail_request(std::span<const TextPair> pairs, const Lang& lang) {
  json arr = json::array();
  for (const auto& p : pairs) arr.push_back({{"premise", p.premise}, {"hypothesis", p.hypothesis}});
  return json{{"pairs", arr}, {"lang", lang.tag()}}.dump();
}

class RemoteBackend : public EntailmentBackend {
 public:
  explicit RemoteBackend(RemoteBackendConfig cfg) : cfg_(std::move(cfg)) {}

  std::vector<double> score_batch(std::span<const TextPair> pairs, const Lang& lang) override {
    if (pairs.empty()) return {};
    const auto body = build_entail_request(pairs, lang);
    for (int attempt = 1;; ++attempt) {
      try {
        return post(body, pairs.size());
      } catch (const Error& e) {
        if (!e.retryable() || attempt >= cfg_.max_attempts) throw;
        std::this_thread::sleep_for(cfg_.backoff_base * (1 << (attempt - 1)));
      }
    }
  }

  Capabilities capabilities() const override { return {cfg_.max_batch, cfg_.max_in_flight, {}}; }

  /// URL plus the model pin echoed by /v1/health.
  std::string config_id() const override {
    std::lock_guard lock(mu_);
    if (!identity_) {
      auto h = health();
      identity_ = "remote:" + cfg_.base_url + "|" + h.value("model_id", std::string{"?"}) + "@" +
                  h.value("revision", std::string{"?"});
    }
    return *identity_;
  }

  json health() const {
    httplib::Client cli(cfg_.base_url);
    cli.set_read_timeout(cfg_.timeout);
    auto res = cli.Get("/v1/health");
    if (!res) fail(Errc::upstream_failure, "sidecar unreachable at " + cfg_.base_url);
    if (res->status != 200) fail(Errc::upstream_failure, "sidecar health returned HTTP " + std::to_string(res->status));
    auto doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) fail(Errc::upstream_failure, "sidecar health body is not JSON");
    return doc;
  }

 private:
  std::vector<double> post(const std::string& body, std::size_t n) const {
    httplib::Client cli(cfg_.base_url);
    cli.set_read_timeout(cfg_.timeout);
    cli.set_write_timeout(cfg_.timeout);
    auto res = cli.Post("/v1/entail", body, "application/json");
    if (!res) fail(Errc::upstream_failure, "sidecar unreachable at " + cfg_.base_url);
    if (res->status == 200) return parse_entail_response(res->body, n);
    if (res->status == 503) fail(Errc::upstream_failure, "sidecar model not loaded (HTTP 503)");
    // 400 / 413 are request defects; retrying cannot help.
    fail(Errc::malformed_model_output, "sidecar rejected request with HTTP " + std::to_string(res->status));
  }

  RemoteBackendConfig cfg_;
  mutable std::mutex mu_;
  mutable std::optional<std::string> identity_;
};

}  // namespace ckpk::entail

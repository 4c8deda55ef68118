#pragma once

// Provider-agnostic generation client: transports, on-disk response cache,
// request budget, retries and chain-of-thought output parsing.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "ckpk/core.hpp"
#include "ckpk/hash.hpp"
#include "ckpk/json_util.hpp"
#include "ckpk/prompts.hpp"
#include "ckpk/text.hpp"

namespace ckpk::llm {

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds backoff_base{500};
};

struct ProviderConfig {
  std::string base_url;
  std::string model;
  std::string credential_env;  // name of the env var holding the key; empty = no auth
  GenerationParams params;
  bool reasoning = false;
  int max_in_flight = 4;
  RetryPolicy retry;

  /// Effective parameters: reasoning models get the extended token budget.
  GenerationParams effective_params() const {
    auto p = params;
    if (reasoning) p.max_tokens = std::max(p.max_tokens, kExtendedMaxTokens);
    return p;
  }
};

inline void to_json(json& j, const ProviderConfig& c) {
  j = json{{"base_url", c.base_url},
           {"model", c.model},
           {"credential_env", c.credential_env},
           {"params", c.params},
           {"reasoning", c.reasoning},
           {"max_in_flight", c.max_in_flight},
           {"retry_max_attempts", c.retry.max_attempts},
           {"retry_backoff_ms", c.retry.backoff_base.count()}};
}

inline void from_json(const json& j, ProviderConfig& c) {
  constexpr std::string_view T = "ProviderConfig";
  ckpk::detail::check_object(j, T, {"model"},
                             {"base_url", "credential_env", "params", "reasoning", "max_in_flight",
                              "retry_max_attempts", "retry_backoff_ms"});
  c = ProviderConfig{};
  c.model = ckpk::detail::get_field<std::string>(j, T, "model");
  c.base_url = j.value("base_url", std::string{});
  c.credential_env = j.value("credential_env", std::string{});
  if (j.contains("params")) c.params = ckpk::detail::get_field<GenerationParams>(j, T, "params");
  c.reasoning = j.value("reasoning", false);
  c.max_in_flight = j.value("max_in_flight", 4);
  c.retry.max_attempts = j.value("retry_max_attempts", 4);
  c.retry.backoff_base = std::chrono::milliseconds(j.value("retry_backoff_ms", 500));
  if (c.max_in_flight < 1) fail(Errc::schema, "ProviderConfig.max_in_flight must be >= 1");
  if (c.retry.max_attempts < 1) fail(Errc::schema, "ProviderConfig.retry_max_attempts must be >= 1");
}

struct ChatRequest {
  std::string model;
  std::string prompt;
  GenerationParams params;
  std::string api_key;
};

/// Wire-level completion. Implementations throw ckpk::Error with
/// auth_error / rate_limited / upstream_failure.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Anything that turns a prompt into text.
class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string generate(const std::string& prompt, const GenerationParams& params) = 0;
  virtual std::string model_id() const = 0;
};

// ---------------------------------------------------------------------------
// JSON extraction

/// Every balanced top-level {...} span in `s` that parses as a JSON object,
/// in order of appearance. String literals are respected while matching braces.
inline std::vector<json> find_json_objects(std::string_view s) {
  std::vector<json> out;
  std::size_t start = 0;
  while ((start = s.find('{', start)) != std::string_view::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = start; i < s.size(); ++i) {
      char c = s[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        end = i;
        break;
      }
    }
    if (end == std::string_view::npos) {
      ++start;
      continue;
    }
    auto parsed = json::parse(s.substr(start, end - start + 1), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) {
      out.push_back(std::move(parsed));
      start = end + 1;
    } else {
      ++start;
    }
  }
  return out;
}

struct CotOutput {
  std::string reasoning;
  std::string answer;
  bool parse_failed = false;
};

/// Extracts the first JSON object holding string "reasoning" and "answer"
/// fields. Surrounding prose and code fences are tolerated. Never throws.
inline CotOutput parse_cot(std::string_view raw) noexcept {
  try {
    for (const auto& obj : find_json_objects(raw)) {
      auto r = obj.find("reasoning");
      auto a = obj.find("answer");
      if (r != obj.end() && a != obj.end() && r->is_string() && a->is_string()) {
        return {r->get<std::string>(), a->get<std::string>(), false};
      }
    }
  } catch (...) {
  }
  return {{}, {}, true};
}

// ---------------------------------------------------------------------------
// Cache and budget

/// Content-addressed response cache. With an empty directory the cache lives
/// in memory only. Reads are concurrent; writes are serialized.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir = {}) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }

  static std::string key(std::string_view model, const GenerationParams& params, std::string_view prompt) {
    return hash_fields({model, json(params).dump(), sha256_hex(prompt)});
  }

  std::optional<std::string> get(const std::string& key) const {
    {
      std::lock_guard lock(mu_);
      if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    }
    if (dir_.empty()) return std::nullopt;
    std::ifstream in(dir_ / (key + ".json"));
    if (!in) return std::nullopt;
    auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.contains("response") || !doc["response"].is_string()) {
      return std::nullopt;
    }
    auto response = doc["response"].get<std::string>();
    std::lock_guard lock(mu_);
    memory_.emplace(key, response);
    return response;
  }

  void put(const std::string& key, std::string_view model, const GenerationParams& params,
           std::string_view prompt, const std::string& response) {
    std::lock_guard lock(mu_);
    memory_[key] = response;
    if (dir_.empty()) return;
    json doc{{"model", model},
             {"params", params},
             {"prompt_sha256", sha256_hex(prompt)},
             {"prompt", prompt},
             {"response", response}};
    auto tmp = dir_ / (key + ".json.tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(Errc::io, "cannot write cache entry " + tmp.string());
      out << doc.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, dir_ / (key + ".json"));
  }

  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::string> memory_;
};

/// Cap on uncached calls for one run. Shared by every generator in the run.
class RequestBudget {
 public:
  explicit RequestBudget(std::int64_t limit) : remaining_(limit), limit_(limit) {}

  bool try_acquire() {
    auto cur = remaining_.load();
    while (cur > 0) {
      if (remaining_.compare_exchange_weak(cur, cur - 1)) return true;
    }
    return false;
  }

  void acquire() {
    if (!try_acquire()) {
      fail(Errc::budget_exceeded, "request budget of " + std::to_string(limit_) + " calls exhausted");
    }
  }

  std::int64_t remaining() const { return remaining_.load(); }
  std::int64_t limit() const { return limit_; }

 private:
  std::atomic<std::int64_t> remaining_;
  std::int64_t limit_;
};

inline constexpr std::int64_t kDefaultBudget = 200;

// ---------------------------------------------------------------------------
// Generator

/// Cache -> budget -> credential -> transport with retries. Network calls
/// (transport invocations) are counted for tests and run summaries.
class Generator : public TextGenerator {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Generator(ProviderConfig cfg, std::shared_ptr<ChatTransport> transport,
            std::shared_ptr<ResponseCache> cache, std::shared_ptr<RequestBudget> budget)
      : cfg_(std::move(cfg)),
        transport_(std::move(transport)),
        cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
        budget_(budget ? std::move(budget) : std::make_shared<RequestBudget>(kDefaultBudget)),
        sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

  void set_sleeper(Sleeper s) { sleep_ = std::move(s); }

  std::string model_id() const override { return cfg_.model; }
  const ProviderConfig& config() const { return cfg_; }

  /// Generation with the provider's configured parameters.
  std::string generate(const std::string& prompt) { return generate(prompt, cfg_.effective_params()); }

  std::string generate(const std::string& prompt, const GenerationParams& params) override {
    auto key = ResponseCache::key(cfg_.model, params, prompt);
    if (auto hit = cache_->get(key)) return *hit;

    budget_->acquire();
    ChatRequest req{cfg_.model, prompt, params, resolve_credential()};
    auto response = with_retries([&] { return transport_->complete(req); });
    cache_->put(key, cfg_.model, params, prompt, response);
    return response;
  }

  std::size_t network_calls() const { return network_calls_.load(); }

 private:
  std::string resolve_credential() const {
    if (cfg_.credential_env.empty()) return {};
    const char* v = std::getenv(cfg_.credential_env.c_str());
    if (v == nullptr || *v == '\0') {
      fail(Errc::auth_error, "credential environment variable " + cfg_.credential_env + " is not set");
    }
    return v;
  }

  template <typename F>
  std::string with_retries(F&& call) {
    for (int attempt = 1;; ++attempt) {
      try {
        ++network_calls_;
        return call();
      } catch (const Error& e) {
        if (!e.retryable() || attempt >= cfg_.retry.max_attempts) throw;
        sleep_(cfg_.retry.backoff_base * (1 << (attempt - 1)));
      }
    }
  }

  ProviderConfig cfg_;
  std::shared_ptr<ChatTransport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  std::shared_ptr<RequestBudget> budget_;
  Sleeper sleep_;
  std::atomic<std::size_t> network_calls_{0};
};

/// Outcome of one prompt in a batch: the text or the error it raised.
using BatchResult = std::variant<std::string, Error>;

/// Runs prompts with at most `max_in_flight` concurrent calls. Results are
/// returned in prompt order regardless of completion order.
inline std::vector<BatchResult> generate_batch(TextGenerator& gen, const std::vector<std::string>& prompts,
                                               const GenerationParams& params, int max_in_flight) {
  std::vector<std::optional<BatchResult>> slots(prompts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      try {
        slots[i] = BatchResult(gen.generate(prompts[i], params));
      } catch (const Error& e) {
        slots[i] = BatchResult(e);
      } catch (const std::exception& e) {
        slots[i] = BatchResult(Error(Errc::upstream_failure, e.what()));
      }
    }
  };
  const auto n_workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, max_in_flight)), 1,
                                                 std::max<std::size_t>(1, prompts.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  std::vector<BatchResult> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Mock transport

/// Deterministic offline stand-in for a chat model.
///
/// * atomization prompts: the fallback splitter's output as the JSON object
///   the prompt asks for (installed by the caller via `set_atomizer`);
/// * counterfactual prompts: each numbered sentence with its capitalized
///   words rotated;
/// * anything else: an extractive answer built from the prompt's numbered
///   lines (a hash of model+prompt picks roughly three quarters of them)
///   plus one sentence not drawn from the prompt. CoT prompts get the answer
///   wrapped in the requested JSON object.
class MockTransport : public ChatTransport {
 public:
  using Atomizer = std::function<std::vector<std::string>(std::string_view)>;

  void set_atomizer(Atomizer a) { atomizer_ = std::move(a); }

  std::string complete(const ChatRequest& req) override {
    ++calls_;
    const std::string& p = req.prompt;
    if (p.find("Definition of Atomic") != std::string::npos) return atomize(p);
    if (p.find(prompts::kSwapKey) != std::string::npos) return swap(p);

    auto lines = numbered(p);
    auto digest = sha256_hex(req.model + "\x1f" + p);
    std::vector<std::string> picked;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto nibble = digest[i % digest.size()];
      if (nibble % 4 != 0) picked.push_back(terminate(lines[i]));
    }
    picked.emplace_back("This answer also draws on general background knowledge.");
    auto answer = text::join(picked, " ");
    if (p.find("\"reasoning\": \"your reasoning here\"") != std::string::npos) {
      return json{{"reasoning", "Each numbered context line was read in order."}, {"answer", answer}}.dump();
    }
    return answer;
  }

  std::size_t calls() const { return calls_.load(); }

  static std::vector<std::string> numbered(std::string_view prompt) {
    std::vector<std::string> out;
    for (const auto& line : text::split_lines(prompt)) {
      std::size_t i = 0;
      while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
      if (i > 0 && i + 1 < line.size() && line[i] == '.' && line[i + 1] == ' ') {
        out.push_back(line.substr(i + 2));
      }
    }
    return out;
  }

 private:
  static std::string terminate(std::string s) {
    auto t = std::string(text::trim(s));
    if (!t.empty() && t.back() != '.' && t.back() != '!' && t.back() != '?') t.push_back('.');
    return t;
  }

  std::string atomize(const std::string& p) const {
    auto pos = p.rfind(prompts::kAtomizeTextMarker);
    auto body = pos == std::string::npos ? std::string_view{} : std::string_view(p).substr(pos + prompts::kAtomizeTextMarker.size());
    std::vector<std::string> atoms = atomizer_ ? atomizer_(body) : std::vector<std::string>{std::string(text::trim(body))};
    return json{{"atomic_sentences", atoms}, {"count", atoms.size()}}.dump();
  }

  static std::string swap(const std::string& p) {
    std::vector<std::string> out;
    for (const auto& line : numbered(p)) {
      auto words = text::split_whitespace(line);
      std::vector<std::size_t> caps;
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (!words[i].empty() && words[i][0] >= 'A' && words[i][0] <= 'Z') caps.push_back(i);
      }
      if (caps.size() >= 2) {
        // Rotate the alphanumeric cores and keep each slot's trailing punctuation.
        std::vector<std::string> cores, tails;
        for (auto i : caps) {
          auto& w = words[i];
          auto cut = w.size();
          while (cut > 0 && !std::isalnum(static_cast<unsigned char>(w[cut - 1]))) --cut;
          cores.push_back(w.substr(0, cut));
          tails.push_back(w.substr(cut));
        }
        std::rotate(cores.begin(), cores.begin() + 1, cores.end());
        for (std::size_t k = 0; k < caps.size(); ++k) words[caps[k]] = cores[k] + tails[k];
      }
      out.push_back(text::join(words, " "));
    }
    return json{{std::string(prompts::kSwapKey), out}}.dump();
  }

  Atomizer atomizer_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace ckpk::llm

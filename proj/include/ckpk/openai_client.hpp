#pragma once

// OpenAI-compatible chat-completion transport.

#include <chrono>
#include <string>
#include <utility>

#include "httplib.h"

#include "ckpk/llm.hpp"

namespace ckpk::llm {

/// Splits "https://host:port/v1" into the origin and the path prefix.
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, ""};
  auto path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

inline std::string build_chat_request(const ChatRequest& req) {
  return json{{"model", req.model},
              {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
              {"temperature", req.params.temperature},
              {"top_p", req.params.top_p},
              {"presence_penalty", req.params.presence_penalty},
              {"frequency_penalty", req.params.frequency_penalty},
              {"max_tokens", req.params.max_tokens}}
      .dump();
}

/// choices[0].message.content of a chat-completion response.
inline std::string parse_chat_response(const std::string& body) {
  auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) fail(Errc::upstream_failure, "completion body is not a JSON object");
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const json::exception& e) {
    fail(Errc::upstream_failure, std::string("completion body lacks choices[0].message.content: ") + e.what());
  }
}

class OpenAITransport : public ChatTransport {
 public:
  explicit OpenAITransport(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(300))
      : timeout_(timeout) {
    std::tie(origin_, prefix_) = split_base_url(base_url);
  }

  std::string complete(const ChatRequest& req) override {
    httplib::Client cli(origin_);
    cli.set_read_timeout(timeout_);
    cli.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!req.api_key.empty()) headers.emplace("Authorization", "Bearer " + req.api_key);
    auto res = cli.Post(prefix_ + "/chat/completions", headers, build_chat_request(req), "application/json");
    if (!res) fail(Errc::upstream_failure, "transport error: " + httplib::to_string(res.error()));
    switch (res->status) {
      case 200: return parse_chat_response(res->body);
      case 401:
      case 403: fail(Errc::auth_error, "provider rejected credentials (HTTP " + std::to_string(res->status) + ")");
      case 429: fail(Errc::rate_limited, "provider rate limit (HTTP 429)");
      default:
        if (res->status >= 500) fail(Errc::upstream_failure, "provider HTTP " + std::to_string(res->status));
        fail(Errc::malformed_model_output, "provider HTTP " + std::to_string(res->status) + ": " + res->body);
    }
  }

 private:
  std::string origin_;
  std::string prefix_;
  std::chrono::seconds timeout_;
};

}  // namespace ckpk::llm

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ckpk {

enum class Errc {
  invalid_argument,
  malformed_model_output,
  upstream_failure,
  auth_error,
  rate_limited,
  budget_exceeded,
  insufficient_pool,
  missing_counterfactuals,
  empty_context,
  empty_response,
  dimension_mismatch,
  unknown_variant,
  corpus_format,
  schema,
  io,
};

constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::malformed_model_output: return "MalformedModelOutput";
    case Errc::upstream_failure: return "UpstreamFailure";
    case Errc::auth_error: return "AuthError";
    case Errc::rate_limited: return "RateLimited";
    case Errc::budget_exceeded: return "BudgetExceeded";
    case Errc::insufficient_pool: return "InsufficientPool";
    case Errc::missing_counterfactuals: return "MissingCounterfactuals";
    case Errc::empty_context: return "EmptyContext";
    case Errc::empty_response: return "EmptyResponse";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::unknown_variant: return "UnknownVariant";
    case Errc::corpus_format: return "CorpusFormatError";
    case Errc::schema: return "SchemaError";
    case Errc::io: return "IoError";
  }
  return "Error";
}

/// Process exit codes shared by every CLI subcommand.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int data = 2;
inline constexpr int upstream = 3;
}  // namespace exit_code

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), message_(what) {}

  Errc code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

  bool retryable() const noexcept {
    return code_ == Errc::rate_limited || code_ == Errc::upstream_failure;
  }

  int exit_code() const noexcept {
    switch (code_) {
      case Errc::invalid_argument:
      case Errc::unknown_variant:
        return exit_code::usage;
      case Errc::upstream_failure:
      case Errc::auth_error:
      case Errc::rate_limited:
      case Errc::budget_exceeded:
      case Errc::malformed_model_output:
        return exit_code::upstream;
      default:
        return exit_code::data;
    }
  }

 private:
  Errc code_;
  std::string message_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace ckpk

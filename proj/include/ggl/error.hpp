#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ggl {

enum class ErrorCode {
  invalid_argument,
  empty_input,
  shape_mismatch,
  bad_magic,
  bad_version,
  truncated,
  checksum_mismatch,
  model_mismatch,
  label_not_identifiable,
  undefined_cosine,
  degenerate_latent,
  non_finite,
  singular,
  config,
  io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::bad_version: return "bad_version";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::checksum_mismatch: return "checksum_mismatch";
    case ErrorCode::model_mismatch: return "model_mismatch";
    case ErrorCode::label_not_identifiable: return "label_not_identifiable";
    case ErrorCode::undefined_cosine: return "undefined_cosine";
    case ErrorCode::degenerate_latent: return "degenerate_latent";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::singular: return "singular";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

// Every failure in the library is reported as ggl::Error. The code is stable
// and is what callers (and the CLI exit-code mapping) should branch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace ggl

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace catbear {

/// Coarse classification of every failure the toolkit reports. The CLI maps
/// these to exit codes; the review service maps them to HTTP statuses.
enum class ErrorKind {
  input,          // caller violated a precondition
  data,           // a bundled or user-supplied asset is malformed
  parse,          // text could not be parsed at all
  schema,         // parsed, but a required field is missing or mistyped
  validation,     // a domain invariant does not hold
  format,         // unsupported on-disk format / schema version
  generation,     // the model produced unusable output
  label,          // the model produced an emotion outside the vocabulary
  transport,      // retries exhausted talking to a backend
  backend,        // backend answered with a non-retryable application error
  configuration,  // missing credential or bad config value
  metric,         // an optional metric backend failed
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string detail = {});

  ErrorKind kind() const noexcept { return kind_; }
  /// what() without the "<kind> error: " prefix.
  const std::string& message() const noexcept { return message_; }
  /// Field name, line number, or similar locator; may be empty.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string message_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message,
                       std::string detail = {});

}  // namespace catbear

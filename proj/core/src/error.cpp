#include "catbear/error.hpp"

namespace catbear {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::data: return "data";
    case ErrorKind::parse: return "parse";
    case ErrorKind::schema: return "schema";
    case ErrorKind::validation: return "validation";
    case ErrorKind::format: return "format";
    case ErrorKind::generation: return "generation";
    case ErrorKind::label: return "label";
    case ErrorKind::transport: return "transport";
    case ErrorKind::backend: return "backend";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::metric: return "metric";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::string detail)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message),
      kind_(kind),
      message_(message),
      detail_(std::move(detail)) {}

void fail(ErrorKind kind, const std::string& message, std::string detail) {
  throw Error(kind, message, std::move(detail));
}

}  // namespace catbear

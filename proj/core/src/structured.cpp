#include "catbear/structured_output.hpp"

#include "catbear/error.hpp"

namespace catbear {
namespace {

// End of the balanced object starting at `open`, honoring JSON strings.
std::optional<std::size_t> matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i;
  }
  return std::nullopt;
}

}  // namespace

std::optional<nlohmann::json> find_json_object(std::string_view text) {
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos;
       pos = text.find('{', pos + 1)) {
    auto close = matching_brace(text, pos);
    if (!close) continue;
    auto candidate = text.substr(pos, *close - pos + 1);
    auto parsed = nlohmann::json::parse(candidate, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

FieldMap parse_structured(std::string_view text, const std::vector<std::string>& fields) {
  auto obj = find_json_object(text);
  if (!obj) fail(ErrorKind::parse, "no JSON object found in model output");
  FieldMap out;
  for (const auto& f : fields) {
    auto it = obj->find(f);
    if (it == obj->end()) fail(ErrorKind::schema, "missing field '" + f + "'", f);
    out.emplace(f, *it);
  }
  return out;
}

}  // namespace catbear

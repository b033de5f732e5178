#pragma once

#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace catbear {

using FieldMap = std::map<std::string, nlohmann::json>;

/// First balanced `{...}` span in `text` that parses as a JSON object.
/// Surrounding prose and code fences are ignored.
std::optional<nlohmann::json> find_json_object(std::string_view text);

/// Extracts the first JSON object and checks that every expected field is
/// present. Throws a parse error when no object is found and a schema error
/// (detail = field name) for the first missing field. Values are returned
/// verbatim.
FieldMap parse_structured(std::string_view text, const std::vector<std::string>& fields);

}  // namespace catbear

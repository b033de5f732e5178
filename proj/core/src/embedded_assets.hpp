#pragma once

#include <string_view>

namespace catbear::assets {

std::string_view situations_jsonl();
std::string_view adjectives_json();

}  // namespace catbear::assets
